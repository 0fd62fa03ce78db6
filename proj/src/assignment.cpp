#include "kpset/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace kpset {

double match_cost(const Phrase& target_seq, std::span<const ad::RowVector> dists, std::size_t k,
                  MatchCostKind kind) {
  if (k == 0) throw std::invalid_argument("match_cost: k must be >= 1");
  if (target_seq.empty()) throw std::invalid_argument("match_cost: empty target");
  const std::size_t steps = std::min(k, target_seq.size());
  if (dists.size() < steps) throw std::invalid_argument("match_cost: too few distributions");
  double cost = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double p = dists[t][target_seq[t]];
    cost -= kind == MatchCostKind::kProb ? p : std::log(std::max(p, 1e-12));
  }
  return cost;
}

std::vector<int> hungarian(const CostMatrix& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("hungarian: cost matrix must be square");
  if (!cost.allFinite()) throw std::invalid_argument("hungarian: non-finite cost entry");
  if (n == 0) return {};

  // 1-based arrays; column 0 is the virtual source of each augmentation.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Eigen::Index> match_col(static_cast<std::size_t>(n + 1), 0);  // column -> row
  std::vector<Eigen::Index> way(static_cast<std::size_t>(n + 1), 0);

  for (Eigen::Index row = 1; row <= n; ++row) {
    match_col[0] = row;
    Eigen::Index col0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(col0)] = true;
      const Eigen::Index r0 = match_col[static_cast<std::size_t>(col0)];
      double delta = inf;
      Eigen::Index col1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) continue;
        const double cur = cost(r0 - 1, j - 1) - u[static_cast<std::size_t>(r0)] - v[ju];
        if (cur < minv[ju]) {
          minv[ju] = cur;
          way[ju] = col0;
        }
        if (minv[ju] < delta) {
          delta = minv[ju];
          col1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) {
          u[static_cast<std::size_t>(match_col[ju])] += delta;
          v[ju] -= delta;
        } else {
          minv[ju] -= delta;
        }
      }
      col0 = col1;
    } while (match_col[static_cast<std::size_t>(col0)] != 0);
    do {
      const Eigen::Index col1 = way[static_cast<std::size_t>(col0)];
      match_col[static_cast<std::size_t>(col0)] = match_col[static_cast<std::size_t>(col1)];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (Eigen::Index j = 1; j <= n; ++j) {
    assignment[static_cast<std::size_t>(match_col[static_cast<std::size_t>(j)] - 1)] =
        static_cast<int>(j - 1);
  }
  return assignment;
}

double assignment_total(const CostMatrix& cost, std::span<const int> perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += cost(static_cast<Eigen::Index>(i), perm[i]);
  return total;
}

std::vector<int> brute_force_assign(const CostMatrix& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("brute_force_assign: cost matrix must be square");
  if (n > 8) throw std::invalid_argument("brute_force_assign: dimension too large (max 8)");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_total = std::numeric_limits<double>::infinity();
  do {
    const double total = assignment_total(cost, perm);
    if (total < best_total) {
      best_total = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

CostMatrix side_cost_matrix(const SlotDistributions& dists, const PaddedTargets& targets, int side,
                            std::size_t k, MatchCostKind kind) {
  const auto& side_targets = targets.side(side);
  const std::size_t half = side_targets.size();
  if (dists.size() != 2 * half) throw std::invalid_argument("assign_targets: slot/target count mismatch");
  const std::size_t first = side == 0 ? 0 : half;
  CostMatrix cost(static_cast<Eigen::Index>(half), static_cast<Eigen::Index>(half));
  for (std::size_t j = 0; j < half; ++j) {
    const Phrase seq = target_sequence(side_targets[j]);
    for (std::size_t i = 0; i < half; ++i) {
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          match_cost(seq, dists[first + i], k, kind);
    }
  }
  return cost;
}

SlotAssignment assign_targets(const SlotDistributions& dists, const PaddedTargets& targets,
                              std::size_t k, MatchCostKind kind) {
  SlotAssignment m;
  for (int side = 0; side < 2; ++side) {
    const auto perm = hungarian(side_cost_matrix(dists, targets, side, k, kind));
    m.target.insert(m.target.end(), perm.begin(), perm.end());
  }
  return m;
}

}  // namespace kpset
