#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kpset/assignment.hpp"
#include "kpset/model.hpp"

namespace kpset {

/// Instance-level degree of null over-estimation.
struct WeightingResult {
  /// Mean of min(p(y0)/p(null), 1) over keyphrase-assigned slots; 1 when there are none.
  double lambda_adp = 1.0;
  /// Slots assigned a keyphrase (C_!null) and their clamped ratios.
  std::vector<std::size_t> members;
  std::vector<double> ratios;
};

struct WeightInput {
  std::size_t slot;
  /// Teacher-forced probability of the first token of the assigned keyphrase.
  double first_token_prob;
  /// Teacher-forced probability of the null token at the first step.
  double null_prob;
};

WeightingResult compute_lambda_adp(std::span<const WeightInput> inputs);

/// Potential (C_p) and unimportant (C_u) slots, in ascending slot order.
struct SlotClasses {
  std::vector<std::size_t> potential;
  std::vector<std::size_t> unimportant;
};

struct ReassignmentPlan {
  /// Per slot, index into its side's padded targets. Meaningless for masked slots.
  std::vector<int> target;
  /// Masked slots contribute nothing to the loss.
  std::vector<bool> masked;
  std::vector<std::size_t> potential;
  std::vector<std::size_t> unimportant;

  /// Decoder target per slot: keyphrase + EOS, lone null, or nullopt if masked.
  std::vector<std::optional<Phrase>> sequences(const PaddedTargets& targets) const;
  /// True when slot i is unmasked and its target is a keyphrase.
  bool has_keyphrase(std::size_t slot, const PaddedTargets& targets) const;
};

/// First min(k, |z|) tokens of a keyphrase target sequence z.
Phrase target_prefix(const Phrase& keyphrase, std::size_t k);

/// Considers only null-assigned slots whose non-null K-token prediction equals
/// the K-prefix of a keyphrase target on the same side. Such a slot is
/// potential if that prediction differs from the vanilla K-token prediction of
/// every slot, unimportant otherwise.
SlotClasses classify_slots(const SlotPredictionRecord& record, const PaddedTargets& targets,
                           const SlotAssignment& m, std::size_t k);

/// Identity plan from the matching result.
ReassignmentPlan identity_plan(const SlotAssignment& m);

/// Gives each potential slot its best-matched keyphrase (prefix equal to its
/// non-null prediction, preferring targets no other slot currently holds,
/// then the lowest index) and masks unimportant slots.
ReassignmentPlan reassign(const SlotAssignment& m, const SlotClasses& classes,
                          const PaddedTargets& targets, const SlotPredictionRecord& record,
                          std::size_t k);

/// Ablation: potential slots receive a uniformly random keyphrase of their
/// side (masked if the side has none); unimportant slots are masked.
ReassignmentPlan rand_reassign(const SlotAssignment& m, const SlotClasses& classes,
                               const PaddedTargets& targets, std::mt19937_64& rng);
ReassignmentPlan rand_reassign(const SlotAssignment& m, const SlotClasses& classes,
                               const PaddedTargets& targets, std::uint64_t seed);

/// Weighting inputs for every unmasked keyphrase-assigned slot of a plan.
std::vector<WeightInput> weight_inputs(const std::vector<SlotTeacherProbs>& probs,
                                       const ReassignmentPlan& plan, const PaddedTargets& targets);

}  // namespace kpset
