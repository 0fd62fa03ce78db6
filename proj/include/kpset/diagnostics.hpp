#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpset/corpus.hpp"
#include "kpset/model.hpp"

namespace kpset {

inline constexpr int kTraceNull = -1;
inline constexpr int kTraceMasked = -2;

/// Per-slot values: keyphrase index on the slot's side (>= 0), kTraceNull or kTraceMasked.
struct InstanceAssignment {
  std::string id;
  std::vector<int> slots;
};

struct TraceStep {
  std::int64_t step = 0;
  std::vector<InstanceAssignment> instances;
};

class AssignmentTrace {
 public:
  explicit AssignmentTrace(std::size_t n_slots = 0) : n_slots_(n_slots) {}

  /// Throws if the step does not increase or a slot count differs.
  void add(TraceStep step);

  std::size_t n_slots() const { return n_slots_; }
  const std::vector<TraceStep>& steps() const { return steps_; }
  bool empty() const { return steps_.empty(); }

 private:
  std::size_t n_slots_;
  std::vector<TraceStep> steps_;
};

struct SignalProportions {
  double null_fraction = 0.0;
  double keyphrase_fraction = 0.0;
  std::size_t count = 0;
};

/// Index 0 is the present half, 1 the absent half. Masked entries are skipped.
std::array<SignalProportions, 2> signal_proportions(const AssignmentTrace& trace);

struct SlotTypeProportions {
  double null_only = 0.0;
  double keyphrase_only = 0.0;
  double mixed = 0.0;
  std::size_t count = 0;
};

/// Classifies every (instance, slot) pair by its unmasked history.
std::array<SlotTypeProportions, 2> slot_type_proportions(const AssignmentTrace& trace);

struct EntropySummary {
  /// Mean slot entropy (bits) per instance id.
  std::map<std::string, double> per_instance;
  double mean = 0.0;
};

/// Shannon entropy of each slot's target history, averaged over slots.
EntropySummary assignment_entropy(const AssignmentTrace& trace);

struct EntropyComparison {
  double decreased = 0.0;
  double increased = 0.0;
  double unchanged = 0.0;
  std::size_t instances = 0;
};

/// Compares instances present in both summaries; |delta| <= tol is unchanged.
EntropyComparison compare_entropy(const EntropySummary& before, const EntropySummary& after,
                                  double tol = 1e-12);

struct OverestimationCounts {
  std::size_t numerator = 0;
  std::size_t denominator = 0;
  /// numerator / denominator, absent when the denominator is zero.
  std::optional<double> ratio() const;
};

/// One slot's evidence: whether vanilla decoding starts with null and
/// whether its null-free prediction matches a target on its side.
struct SlotOutcome {
  bool vanilla_null = false;
  bool nonnull_correct = false;
};

OverestimationCounts overestimation_counts(std::span<const SlotOutcome> outcomes);

/// Decodes every record with both modes and counts slots that emit null yet
/// have a correct null-free prediction.
OverestimationCounts overestimation_ratio(const Model& model, const Vocabulary& vocab,
                                          const std::vector<Record>& records, std::size_t max_len);

struct ConfidencePrediction {
  double confidence = 0.0;
  bool correct = false;
};

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  double gap = 0.0;
  std::size_t count = 0;
};

struct ReliabilityBins {
  std::vector<ReliabilityBin> bins;
  std::size_t in_range = 0;
  std::size_t total = 0;
};

/// Buckets by confidence into [lo, hi) bins of `width`; the last bin is closed.
/// Throws std::invalid_argument when width does not divide the interval.
ReliabilityBins reliability_bins(std::span<const ConfidencePrediction> preds, double lo, double hi,
                                 double width);

/// Teacher-forced token predictions along each record's assigned targets.
ReliabilityBins reliability(const Model& model, const std::vector<Record>& records, std::size_t k,
                            double lo, double hi, double width);

}  // namespace kpset
