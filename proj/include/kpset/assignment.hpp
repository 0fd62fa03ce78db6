#pragma once

#include <span>
#include <vector>

#include "kpset/autodiff.hpp"
#include "kpset/corpus.hpp"
#include "kpset/model.hpp"

namespace kpset {

/// Rows are slots, columns are padded targets of one side.
using CostMatrix = ad::Matrix;

enum class MatchCostKind {
  /// -sum of probabilities of the first min(k, |z|) target tokens.
  kProb,
  /// -sum of log-probabilities over the same tokens.
  kLogProb,
};

/// Side of a global slot index: 0 for the first n/2 (present), 1 otherwise.
inline int side_of(std::size_t slot, std::size_t n_slots) { return slot < n_slots / 2 ? 0 : 1; }
inline std::size_t local_index(std::size_t slot, std::size_t n_slots) {
  return slot < n_slots / 2 ? slot : slot - n_slots / 2;
}

/// Slot -> target mapping. target[i] indexes the padded target list of
/// slot i's side.
struct SlotAssignment {
  std::vector<int> target;

  bool operator==(const SlotAssignment&) const = default;
};

/// Cost of pairing a target sequence (keyphrase + EOS, or the lone null token)
/// with one slot's per-step distributions.
double match_cost(const Phrase& target_seq, std::span<const ad::RowVector> dists, std::size_t k,
                  MatchCostKind kind = MatchCostKind::kProb);

/// Minimum-cost perfect matching of a square matrix (shortest augmenting
/// paths with potentials, O(n^3)). Returns column per row. Throws on
/// non-square or non-finite input.
std::vector<int> hungarian(const CostMatrix& cost);

/// Exhaustive minimum over all permutations; the lexicographically first
/// optimum wins. Limited to n <= 8.
std::vector<int> brute_force_assign(const CostMatrix& cost);

/// Sum of cost(i, perm[i]) accumulated in row order.
double assignment_total(const CostMatrix& cost, std::span<const int> perm);

/// Cost matrix between one side's slots and its padded targets.
CostMatrix side_cost_matrix(const SlotDistributions& dists, const PaddedTargets& targets, int side,
                            std::size_t k, MatchCostKind kind = MatchCostKind::kProb);

/// Runs the matching separately on the present and absent halves.
SlotAssignment assign_targets(const SlotDistributions& dists, const PaddedTargets& targets,
                              std::size_t k, MatchCostKind kind = MatchCostKind::kProb);

}  // namespace kpset
