#include "kpset/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "kpset/assignment.hpp"
#include "kpset/checkpoint.hpp"

namespace kpset {

namespace {

using nlohmann::ordered_json;

constexpr std::uint64_t kTraceSeedSalt = 0x7472616365ULL;

InstanceLoss loss_on_graph(Model& model, ad::Graph& g, ad::NodeId memory, const InstancePlan& p,
                           const TrainConfig& cfg, std::optional<double> lambda_override,
                           double grad_scale) {
  const auto seqs = p.plan.sequences(p.targets);
  DecodeLayout layout;
  const ad::NodeId logits = model.teacher_forced_logits(g, memory, seqs, layout);
  std::vector<SlotTeacherProbs> probs(seqs.size());
  for (auto& pr : probs) pr.masked = true;
  if (logits >= 0) probs = gather_teacher_probs(ad::softmax_rows(g.value(logits)), layout, seqs);

  InstanceLoss out;
  double lambda = 1.0;
  if (lambda_override) {
    lambda = *lambda_override;
    out.weighting.lambda_adp = lambda;
  } else if (!cfg.no_weighting) {
    out.weighting = compute_lambda_adp(weight_inputs(probs, p.plan, p.targets));
    lambda = out.weighting.lambda_adp;
  }
  out.loss = set_loss(probs, p.plan, p.targets, cfg.lambda_pre, cfg.lambda_abs, lambda);

  if (grad_scale != 0.0 && logits >= 0) {
    std::vector<ad::NllTerm> terms;
    for (std::size_t i = 0; i < layout.slots.size(); ++i) {
      const std::size_t s = layout.slots[i];
      const double w = out.loss.weights[s];
      if (w == 0.0) continue;
      const Phrase& seq = *seqs[s];
      for (std::size_t t = 0; t < seq.size(); ++t) {
        terms.push_back({layout.offset[i] + static_cast<Eigen::Index>(t), seq[t], w});
      }
    }
    if (!terms.empty()) g.backward(g.nll(logits, std::move(terms)), grad_scale);
  }
  return out;
}

void require_finite_grads(const Model& model, std::int64_t step) {
  for (const auto& p : model.parameters()) {
    if (p.grad.size() != 0 && !p.grad.allFinite()) {
      throw std::runtime_error("non-finite gradient in parameter '" + p.name + "' at step " +
                               std::to_string(step));
    }
  }
}

ordered_json config_json(const TrainConfig& cfg) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : cfg.items()) j[k] = v;
  return j;
}

ordered_json trace_json(const TraceStep& st, std::size_t n_slots) {
  ordered_json j;
  j["kind"] = "trace";
  j["step"] = st.step;
  j["n_slots"] = n_slots;
  ordered_json insts = ordered_json::array();
  for (const auto& inst : st.instances) insts.push_back({{"id", inst.id}, {"slots", inst.slots}});
  j["instances"] = std::move(insts);
  return j;
}

TraceStep record_trace(const Model& model, const Corpus& corpus, const TrainConfig& cfg,
                       std::int64_t step) {
  std::mt19937_64 rng(cfg.seed ^ kTraceSeedSalt ^ static_cast<std::uint64_t>(step));
  TraceStep st;
  st.step = step;
  for (const auto& rec : corpus.records) {
    const ad::Matrix memory = model.encode(rec.doc.source_tokens);
    st.instances.push_back({rec.doc.id, trace_values(plan_instance(model, memory, rec, cfg, rng))});
  }
  return st;
}

std::vector<std::string> phrase_strings(const Vocabulary& vocab, const std::vector<std::optional<Phrase>>& preds) {
  std::vector<std::string> out;
  for (const auto& p : preds) {
    if (!p) continue;
    std::string text;
    for (const auto& w : vocab.decode(*p)) text += (text.empty() ? "" : " ") + w;
    if (!text.empty()) out.push_back(std::move(text));
  }
  return out;
}

}  // namespace

InstancePlan plan_instance(const Model& model, const ad::Matrix& memory, const Record& rec,
                           const TrainConfig& cfg, std::mt19937_64& rng) {
  InstancePlan p;
  p.targets = pad_targets(drop_overlong(rec.kps, model.config().max_tgt_len), model.config().n_slots);
  p.record = model.predict_record(memory, cfg.k_steps);
  for (const auto& slot : p.record.dists) {
    for (const auto& row : slot) {
      if (!row.allFinite()) throw std::runtime_error("non-finite slot distribution for " + rec.doc.id);
    }
  }
  p.m = assign_targets(p.record.dists, p.targets, cfg.k_steps, cfg.match_cost);
  if (cfg.no_reassign) {
    p.plan = identity_plan(p.m);
    return p;
  }
  p.classes = classify_slots(p.record, p.targets, p.m, cfg.k_steps);
  p.plan = cfg.rand_assign ? rand_reassign(p.m, p.classes, p.targets, rng)
                           : reassign(p.m, p.classes, p.targets, p.record, cfg.k_steps);
  return p;
}

InstanceLoss instance_loss(Model& model, const Record& rec, const InstancePlan& plan,
                           const TrainConfig& cfg, std::optional<double> lambda_override,
                           double grad_scale) {
  ad::Graph g(grad_scale != 0.0);
  const ad::NodeId memory = model.encode(g, rec.doc.source_tokens);
  return loss_on_graph(model, g, memory, plan, cfg, lambda_override, grad_scale);
}

InstanceLoss train_instance(Model& model, const Record& rec, const TrainConfig& cfg,
                            std::mt19937_64& rng, double grad_scale, InstancePlan* plan_out) {
  ad::Graph g(grad_scale != 0.0);
  const ad::NodeId memory = model.encode(g, rec.doc.source_tokens);
  InstancePlan plan = plan_instance(model, g.value(memory), rec, cfg, rng);
  InstanceLoss out = loss_on_graph(model, g, memory, plan, cfg, std::nullopt, grad_scale);
  if (plan_out) *plan_out = std::move(plan);
  return out;
}

std::vector<int> trace_values(const InstancePlan& p) {
  const std::size_t n = p.plan.target.size();
  std::vector<int> out(n, kTraceNull);
  for (std::size_t s = 0; s < n; ++s) {
    if (p.plan.masked[s]) {
      out[s] = kTraceMasked;
    } else if (p.plan.has_keyphrase(s, p.targets)) {
      out[s] = p.plan.target[s];
    }
  }
  return out;
}

Adam::Adam(const std::vector<ad::Parameter>& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.push_back(ad::Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(ad::Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(std::vector<ad::Parameter>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.grad.size() == 0) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

TrainResult train_model(Model& model, const Corpus& corpus, const TrainConfig& cfg,
                        const std::optional<std::filesystem::path>& out_dir, const TrainHooks& hooks) {
  cfg.validate();
  if (corpus.records.empty()) throw std::invalid_argument("training corpus is empty");
  if (model.config().n_slots != cfg.model.n_slots) throw std::invalid_argument("slot count differs from config");

  std::ofstream log;
  std::filesystem::path ckpt;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    log.open(*out_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write training log in " + out_dir->string());
    ckpt = *out_dir / "model.ckpt";
    ordered_json head;
    head["kind"] = "config";
    head["config"] = config_json(cfg);
    head["instances"] = corpus.records.size();
    head["vocab_size"] = corpus.vocab.size();
    std::size_t overlong = 0, truncated = 0;
    for (const auto& rec : corpus.records) {
      const KeyphraseSet kept = drop_overlong(rec.kps, model.config().max_tgt_len);
      overlong += rec.kps.present.size() + rec.kps.absent.size() - kept.present.size() - kept.absent.size();
      truncated += pad_targets(kept, model.config().n_slots).truncated;
    }
    head["targets_overlong"] = overlong;
    head["targets_truncated"] = truncated;
    log << head.dump() << '\n';
  }

  const std::size_t n = corpus.records.size();
  const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::int64_t total = static_cast<std::int64_t>(per_epoch * cfg.epochs);
  if (hooks.max_steps > 0) total = std::min(total, hooks.max_steps);

  std::mt19937_64 order_rng(cfg.seed);
  std::mt19937_64 assign_rng(cfg.seed + 1);
  Adam adam(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  TrainResult result;
  result.trace = AssignmentTrace(cfg.model.n_slots);
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 1; epoch <= cfg.epochs && result.steps < total; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng() % i]);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t b = 0; b < n && result.steps < total; b += cfg.batch_size) {
      StepInfo info;
      info.step = result.steps + 1;
      info.epoch = epoch;
      info.batch.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                        order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + cfg.batch_size)));
      model.zero_grad();
      const double scale = 1.0 / static_cast<double>(info.batch.size());
      LossBreakdown agg;
      double lambda_sum = 0.0;
      std::size_t potential = 0, unimportant = 0;
      for (std::size_t idx : info.batch) {
        InstancePlan plan;
        const InstanceLoss il = train_instance(model, corpus.records[idx], cfg, assign_rng, scale, &plan);
        info.instance_losses.push_back(il.loss.total);
        agg.null_terms += il.loss.null_terms;
        agg.keyphrase_terms += il.loss.keyphrase_terms;
        agg.masked += il.loss.masked;
        agg.clamped += il.loss.clamped;
        lambda_sum += il.weighting.lambda_adp;
        potential += plan.plan.potential.size();
        unimportant += plan.plan.unimportant.size();
      }
      for (double l : info.instance_losses) info.mean_loss += l;
      info.mean_loss *= scale;
      if (!std::isfinite(info.mean_loss)) {
        throw std::runtime_error("non-finite loss at step " + std::to_string(info.step));
      }
      require_finite_grads(model, info.step);
      if (hooks.on_step) hooks.on_step(model, info);
      adam.step(model.parameters());
      result.steps = info.step;
      result.step_losses.push_back(info.mean_loss);
      epoch_loss += info.mean_loss;
      ++epoch_steps;

      if (log.is_open()) {
        ordered_json j;
        j["kind"] = "step";
        j["step"] = info.step;
        j["epoch"] = epoch;
        j["loss"] = info.mean_loss;
        j["lambda_adp"] = lambda_sum * scale;
        j["null_terms"] = agg.null_terms;
        j["keyphrase_terms"] = agg.keyphrase_terms;
        j["masked"] = agg.masked;
        j["potential"] = potential;
        j["unimportant"] = unimportant;
        j["clamped"] = agg.clamped;
        log << j.dump() << '\n';
      }
      if (cfg.trace_interval > 0 && info.step % static_cast<std::int64_t>(cfg.trace_interval) == 0 &&
          info.step + static_cast<std::int64_t>(cfg.trace_window) > total) {
        TraceStep st = record_trace(model, corpus, cfg, info.step);
        if (log.is_open()) log << trace_json(st, cfg.model.n_slots).dump() << '\n';
        result.trace.add(std::move(st));
      }
      if (hooks.progress && (info.step % 10 == 0 || info.step == total)) {
        *hooks.progress << "step " << info.step << "/" << total << " loss " << info.mean_loss << '\n';
      }
    }
    if (out_dir) {
      ordered_json meta;
      meta["epoch"] = epoch;
      meta["step"] = result.steps;
      meta["config"] = config_json(cfg);
      save_checkpoint(ckpt, model, corpus.vocab, meta);
      ordered_json j;
      j["kind"] = "epoch";
      j["epoch"] = epoch;
      j["step"] = result.steps;
      j["mean_loss"] = epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
      log << j.dump() << '\n';
      log.flush();
    }
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, const std::filesystem::path& corpus_path,
                  const std::filesystem::path& out_dir, const TrainHooks& hooks) {
  cfg.validate();
  const Corpus corpus = load_corpus(corpus_path, std::nullopt, cfg.model.vocab_size);
  ModelConfig mc = cfg.model;
  mc.vocab_size = corpus.vocab.size();
  Model model(mc, cfg.seed);
  return train_model(model, corpus, cfg, out_dir, hooks);
}

std::vector<DocumentPredictions> predict_corpus(const Model& model, const Vocabulary& vocab,
                                                const std::vector<Record>& records,
                                                std::size_t max_len) {
  std::vector<DocumentPredictions> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    DocumentPredictions d;
    d.doc_words = rec.doc.words;
    d.present_targets = rec.present_text;
    d.absent_targets = rec.absent_text;
    const ad::Matrix memory = model.encode(rec.doc.source_tokens);
    d.predictions = phrase_strings(vocab, model.greedy_generate(memory, max_len));
    out.push_back(std::move(d));
  }
  return out;
}

TrainConfig config_from_meta(const nlohmann::json& meta) {
  TrainConfig cfg;
  if (meta.contains("config")) {
    for (const auto& [k, v] : meta["config"].items()) cfg.set(k, v.get<std::string>());
  }
  return cfg;
}

ScoreReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& corpus_path) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const TrainConfig cfg = config_from_meta(ck.meta);
  const Corpus corpus = load_corpus(corpus_path, ck.vocab);
  return score_corpus(predict_corpus(ck.model, ck.vocab, corpus.records, cfg.max_gen_len));
}

AssignmentTrace read_trace(const std::filesystem::path& log) {
  std::ifstream in(log, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open training log " + log.string());
  AssignmentTrace trace;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("malformed log line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.value("kind", "") != "trace") continue;
    if (trace.empty() && trace.n_slots() == 0) trace = AssignmentTrace(j.at("n_slots").get<std::size_t>());
    TraceStep st;
    st.step = j.at("step").get<std::int64_t>();
    for (const auto& inst : j.at("instances")) {
      st.instances.push_back({inst.at("id").get<std::string>(), inst.at("slots").get<std::vector<int>>()});
    }
    trace.add(std::move(st));
  }
  return trace;
}

nlohmann::ordered_json diagnose(const std::filesystem::path& checkpoint, const std::filesystem::path& log,
                                const std::filesystem::path& corpus_path, const DiagnoseOptions& opts) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const TrainConfig cfg = config_from_meta(ck.meta);
  const Corpus corpus = load_corpus(corpus_path, ck.vocab);
  const AssignmentTrace trace = read_trace(log);

  ordered_json r;
  r["documents"] = corpus.records.size();
  r["n_slots"] = ck.model.config().n_slots;
  ordered_json omitted = ordered_json::array();

  const char* sides[] = {"present", "absent"};
  if (trace.empty()) {
    omitted.push_back("trace: log has no trace records; signal proportions, slot types and entropy omitted");
  } else {
    r["trace_steps"] = trace.steps().size();
    const auto sig = signal_proportions(trace);
    const auto types = slot_type_proportions(trace);
    ordered_json js, jt;
    for (int s = 0; s < 2; ++s) {
      js[sides[s]] = {{"null", sig[s].null_fraction}, {"keyphrase", sig[s].keyphrase_fraction},
                      {"count", sig[s].count}};
      jt[sides[s]] = {{"null_only", types[s].null_only}, {"keyphrase_only", types[s].keyphrase_only},
                      {"mixed", types[s].mixed}, {"count", types[s].count}};
    }
    r["signal_proportions"] = js;
    r["slot_types"] = jt;
    const EntropySummary ent = assignment_entropy(trace);
    r["entropy"] = {{"mean", ent.mean}, {"instances", ent.per_instance.size()}};
    if (opts.compare_log) {
      const AssignmentTrace other = read_trace(*opts.compare_log);
      if (other.empty()) {
        omitted.push_back("entropy_comparison: comparison log has no trace records");
      } else {
        const auto c = compare_entropy(assignment_entropy(other), ent);
        r["entropy_comparison"] = {{"decreased", c.decreased}, {"increased", c.increased},
                                   {"unchanged", c.unchanged}, {"instances", c.instances}};
      }
    }
  }

  const OverestimationCounts oc = overestimation_ratio(ck.model, ck.vocab, corpus.records, cfg.max_gen_len);
  ordered_json jo;
  jo["numerator"] = oc.numerator;
  jo["denominator"] = oc.denominator;
  if (const auto ratio = oc.ratio()) {
    jo["ratio"] = *ratio;
  } else {
    jo["ratio"] = nullptr;
    omitted.push_back("overestimation.ratio: no slot produced a correct null-free keyphrase");
  }
  r["overestimation"] = jo;

  const ReliabilityBins rb =
      reliability(ck.model, corpus.records, cfg.k_steps, opts.rel_lo, opts.rel_hi, opts.rel_width);
  ordered_json bins = ordered_json::array();
  for (const auto& b : rb.bins) {
    bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"confidence", b.mean_confidence},
                    {"accuracy", b.accuracy}, {"gap", b.gap}, {"count", b.count}});
  }
  r["reliability"] = {{"interval", {opts.rel_lo, opts.rel_hi}}, {"bin_width", opts.rel_width},
                      {"in_range", rb.in_range}, {"total", rb.total}, {"bins", bins}};
  r["omitted"] = omitted;
  return r;
}

}  // namespace kpset
