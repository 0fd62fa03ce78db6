#include "kpset/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace kpset {

double slot_nll(std::span<const double> probs, double weight, std::size_t* clamped) {
  double sum = 0.0;
  for (double p : probs) {
    if (p < kProbFloor) {
      p = kProbFloor;
      if (clamped) ++*clamped;
    }
    sum += std::log(p);
  }
  return -weight * sum;
}

LossBreakdown set_loss(const std::vector<SlotTeacherProbs>& probs, const ReassignmentPlan& plan,
                       const PaddedTargets& targets, double lambda_pre, double lambda_abs,
                       double lambda_adp) {
  const std::size_t n = plan.target.size();
  if (probs.size() != n) throw std::invalid_argument("set_loss: plan does not cover all slots");
  LossBreakdown out;
  out.per_slot.assign(n, 0.0);
  out.weights.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (plan.masked[i]) {
      ++out.masked;
      continue;
    }
    if (probs[i].masked) throw std::invalid_argument("set_loss: missing probabilities for slot");
    const bool keyphrase = plan.has_keyphrase(i, targets);
    double w = 1.0;
    if (keyphrase) {
      ++out.keyphrase_terms;
    } else {
      ++out.null_terms;
      w = lambda_adp * (side_of(i, n) == 0 ? lambda_pre : lambda_abs);
    }
    out.weights[i] = w;
    out.per_slot[i] = slot_nll(probs[i].target_probs, w, &out.clamped);
    out.total += out.per_slot[i];
  }
  return out;
}

}  // namespace kpset
