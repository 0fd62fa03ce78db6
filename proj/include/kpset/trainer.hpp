#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"
#include "kpset/config.hpp"
#include "kpset/corpus.hpp"
#include "kpset/diagnostics.hpp"
#include "kpset/losses.hpp"
#include "kpset/metrics.hpp"
#include "kpset/model.hpp"
#include "kpset/reassign.hpp"

namespace kpset {

/// Everything decided in the assignment stage for one instance.
struct InstancePlan {
  PaddedTargets targets;
  SlotPredictionRecord record;
  SlotAssignment m;
  SlotClasses classes;
  ReassignmentPlan plan;
};

/// K-step assignment followed by re-assignment according to the config flags.
InstancePlan plan_instance(const Model& model, const ad::Matrix& memory, const Record& rec,
                           const TrainConfig& cfg, std::mt19937_64& rng);

struct InstanceLoss {
  LossBreakdown loss;
  WeightingResult weighting;
};

/// Weighted set loss for a frozen plan. `lambda_override` replaces the
/// adaptive weight; gradients of loss * grad_scale are accumulated into the
/// model when grad_scale != 0.
InstanceLoss instance_loss(Model& model, const Record& rec, const InstancePlan& plan,
                           const TrainConfig& cfg, std::optional<double> lambda_override,
                           double grad_scale);

/// Assignment and optimization stages for one instance sharing one graph.
InstanceLoss train_instance(Model& model, const Record& rec, const TrainConfig& cfg,
                            std::mt19937_64& rng, double grad_scale, InstancePlan* plan_out = nullptr);

/// Trace row of a plan: keyphrase index, kTraceNull, or kTraceMasked per slot.
std::vector<int> trace_values(const InstancePlan& plan);

/// Adam with bias correction over a model's parameters.
class Adam {
 public:
  Adam(const std::vector<ad::Parameter>& params, double lr, double beta1, double beta2, double eps);
  void step(std::vector<ad::Parameter>& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<ad::Matrix> m_, v_;
};

struct StepInfo {
  std::int64_t step = 0;
  std::size_t epoch = 0;
  /// Batch members (indices into the corpus records).
  std::vector<std::size_t> batch;
  /// Per-instance loss totals in batch order, evaluated before the update.
  std::vector<double> instance_losses;
  double mean_loss = 0.0;
};

struct TrainHooks {
  /// Called after a batch's losses are computed and before the update.
  std::function<void(const Model&, const StepInfo&)> on_step;
  /// Optional sink for progress lines.
  std::ostream* progress = nullptr;
  /// Stop after this many optimizer steps (0 = run all epochs).
  std::int64_t max_steps = 0;
};

struct TrainResult {
  std::int64_t steps = 0;
  std::vector<double> step_losses;
  AssignmentTrace trace;
};

/// Trains in place. When out_dir is set, writes train_log.jsonl and a
/// checkpoint (model.ckpt) at each epoch boundary. Throws std::runtime_error
/// on a non-finite loss or gradient, leaving the last checkpoint intact.
TrainResult train_model(Model& model, const Corpus& corpus, const TrainConfig& cfg,
                        const std::optional<std::filesystem::path>& out_dir,
                        const TrainHooks& hooks = {});

/// Loads the corpus, builds the model from cfg.seed and trains.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& corpus_path,
                  const std::filesystem::path& out_dir, const TrainHooks& hooks = {});

/// Greedy generation for each record, decoded to strings.
std::vector<DocumentPredictions> predict_corpus(const Model& model, const Vocabulary& vocab,
                                                const std::vector<Record>& records,
                                                std::size_t max_len);

ScoreReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& corpus_path);

/// Reads the trace records of a training log.
AssignmentTrace read_trace(const std::filesystem::path& log);

struct DiagnoseOptions {
  double rel_lo = 0.0;
  double rel_hi = 0.2;
  double rel_width = 0.02;
  /// Second log for the entropy comparison (this run's trace is the "after").
  std::optional<std::filesystem::path> compare_log;
};

nlohmann::ordered_json diagnose(const std::filesystem::path& checkpoint,
                                const std::filesystem::path& log,
                                const std::filesystem::path& corpus_path,
                                const DiagnoseOptions& opts = {});

/// Settings persisted in a checkpoint's metadata (defaults when absent).
TrainConfig config_from_meta(const nlohmann::json& meta);

}  // namespace kpset
