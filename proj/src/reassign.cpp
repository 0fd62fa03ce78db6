#include "kpset/reassign.hpp"

#include <algorithm>
#include <stdexcept>

namespace kpset {

WeightingResult compute_lambda_adp(std::span<const WeightInput> inputs) {
  WeightingResult r;
  if (inputs.empty()) return r;
  double sum = 0.0;
  for (const WeightInput& in : inputs) {
    // p(null) == 0 means no over-estimation at all; the clamp covers it.
    const double ratio =
        in.null_prob > 0.0 ? std::min(in.first_token_prob / in.null_prob, 1.0) : 1.0;
    r.members.push_back(in.slot);
    r.ratios.push_back(ratio);
    sum += ratio;
  }
  r.lambda_adp = sum / static_cast<double>(inputs.size());
  return r;
}

Phrase target_prefix(const Phrase& keyphrase, std::size_t k) {
  Phrase seq = keyphrase;
  seq.push_back(special::kEos);
  seq.resize(std::min(k, seq.size()));
  return seq;
}

namespace {

void check_shapes(const SlotPredictionRecord& record, const PaddedTargets& targets,
                  const std::vector<int>& m) {
  const std::size_t n = targets.present.size() + targets.absent.size();
  if (targets.present.size() != targets.absent.size() || m.size() != n ||
      record.vanilla_k.size() != n || record.nonnull_k.size() != n) {
    throw std::invalid_argument("slot records, assignment and targets disagree on slot count");
  }
}

const Target& target_of(const PaddedTargets& targets, std::size_t slot, int index) {
  const std::size_t n = targets.present.size() * 2;
  const auto& side = targets.side(side_of(slot, n));
  return side.at(static_cast<std::size_t>(index));
}

// Keyphrase targets on `slot`'s side whose K-prefix equals `prediction`.
std::vector<int> matching_targets(const PaddedTargets& targets, std::size_t slot,
                                  const Phrase& prediction, std::size_t k) {
  const std::size_t n = targets.present.size() * 2;
  const auto& side = targets.side(side_of(slot, n));
  std::vector<int> out;
  for (std::size_t j = 0; j < side.size(); ++j) {
    if (side[j] && target_prefix(*side[j], k) == prediction) out.push_back(static_cast<int>(j));
  }
  return out;
}

}  // namespace

SlotClasses classify_slots(const SlotPredictionRecord& record, const PaddedTargets& targets,
                           const SlotAssignment& m, std::size_t k) {
  check_shapes(record, targets, m.target);
  SlotClasses out;
  for (std::size_t i = 0; i < m.target.size(); ++i) {
    if (target_of(targets, i, m.target[i])) continue;  // keyphrase-assigned
    const Phrase& guess = record.nonnull_k[i];
    if (guess.empty() || matching_targets(targets, i, guess, k).empty()) continue;
    const bool seen = std::find(record.vanilla_k.begin(), record.vanilla_k.end(), guess) !=
                      record.vanilla_k.end();
    (seen ? out.unimportant : out.potential).push_back(i);
  }
  return out;
}

ReassignmentPlan identity_plan(const SlotAssignment& m) {
  ReassignmentPlan p;
  p.target = m.target;
  p.masked.assign(m.target.size(), false);
  return p;
}

ReassignmentPlan reassign(const SlotAssignment& m, const SlotClasses& classes,
                          const PaddedTargets& targets, const SlotPredictionRecord& record,
                          std::size_t k) {
  check_shapes(record, targets, m.target);
  ReassignmentPlan plan = identity_plan(m);
  plan.potential = classes.potential;
  plan.unimportant = classes.unimportant;
  for (std::size_t slot : classes.unimportant) plan.masked[slot] = true;

  const std::size_t n = m.target.size();
  for (std::size_t slot : classes.potential) {
    const auto candidates = matching_targets(targets, slot, record.nonnull_k[slot], k);
    if (candidates.empty()) {
      throw std::logic_error("reassign: potential slot without a matching target");
    }
    auto held = [&](int j) {
      for (std::size_t other = 0; other < n; ++other) {
        if (other == slot || plan.masked[other]) continue;
        if (side_of(other, n) == side_of(slot, n) && plan.target[other] == j) return true;
      }
      return false;
    };
    int chosen = candidates.front();
    for (int j : candidates) {
      if (!held(j)) {
        chosen = j;
        break;
      }
    }
    plan.target[slot] = chosen;
  }
  return plan;
}

ReassignmentPlan rand_reassign(const SlotAssignment& m, const SlotClasses& classes,
                               const PaddedTargets& targets, std::mt19937_64& rng) {
  ReassignmentPlan plan = identity_plan(m);
  plan.potential = classes.potential;
  plan.unimportant = classes.unimportant;
  for (std::size_t slot : classes.unimportant) plan.masked[slot] = true;
  const std::size_t n = m.target.size();
  for (std::size_t slot : classes.potential) {
    const auto& side = targets.side(side_of(slot, n));
    std::vector<int> eligible;
    for (std::size_t j = 0; j < side.size(); ++j) {
      if (side[j]) eligible.push_back(static_cast<int>(j));
    }
    if (eligible.empty()) {
      plan.masked[slot] = true;
      continue;
    }
    plan.target[slot] = eligible[static_cast<std::size_t>(rng() % eligible.size())];
  }
  return plan;
}

ReassignmentPlan rand_reassign(const SlotAssignment& m, const SlotClasses& classes,
                               const PaddedTargets& targets, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return rand_reassign(m, classes, targets, rng);
}

std::vector<std::optional<Phrase>> ReassignmentPlan::sequences(const PaddedTargets& targets) const {
  std::vector<std::optional<Phrase>> out(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!masked[i]) out[i] = target_sequence(target_of(targets, i, target[i]));
  }
  return out;
}

bool ReassignmentPlan::has_keyphrase(std::size_t slot, const PaddedTargets& targets) const {
  return !masked[slot] && target_of(targets, slot, target[slot]).has_value();
}

std::vector<WeightInput> weight_inputs(const std::vector<SlotTeacherProbs>& probs,
                                       const ReassignmentPlan& plan, const PaddedTargets& targets) {
  std::vector<WeightInput> out;
  for (std::size_t i = 0; i < plan.target.size(); ++i) {
    if (!plan.has_keyphrase(i, targets)) continue;
    const SlotTeacherProbs& p = probs.at(i);
    if (p.masked || p.target_probs.empty()) throw std::invalid_argument("weight_inputs: missing probabilities");
    out.push_back({i, p.target_probs[0], p.null_prob0});
  }
  return out;
}

}  // namespace kpset
