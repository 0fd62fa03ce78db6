#pragma once

#include <span>
#include <vector>

#include "kpset/corpus.hpp"
#include "kpset/model.hpp"
#include "kpset/reassign.hpp"

namespace kpset {

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kDefaultLambdaPre = 0.2;
inline constexpr double kDefaultLambdaAbs = 0.1;

/// -weight * sum_t log p_t with probabilities floored at kProbFloor. Each
/// floored probability increments *clamped when given.
double slot_nll(std::span<const double> probs, double weight, std::size_t* clamped = nullptr);

struct LossBreakdown {
  double total = 0.0;
  /// Zero for masked slots.
  std::vector<double> per_slot;
  /// Weight applied to each slot's log-likelihood (0 for masked slots).
  std::vector<double> weights;
  std::size_t null_terms = 0;
  std::size_t keyphrase_terms = 0;
  std::size_t masked = 0;
  std::size_t clamped = 0;
};

/// Sum of slot NLLs over unmasked slots. Null-target slots are weighted by
/// lambda_adp * lambda_pre on the present half and lambda_adp * lambda_abs on
/// the absent half; keyphrase targets have weight 1.
LossBreakdown set_loss(const std::vector<SlotTeacherProbs>& probs, const ReassignmentPlan& plan,
                       const PaddedTargets& targets, double lambda_pre, double lambda_abs,
                       double lambda_adp);

}  // namespace kpset
