#include "kpset/diagnostics.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "kpset/assignment.hpp"
#include "kpset/reassign.hpp"

namespace kpset {

void AssignmentTrace::add(TraceStep step) {
  if (!steps_.empty() && step.step <= steps_.back().step) {
    throw std::invalid_argument("trace steps must be strictly increasing");
  }
  for (const auto& inst : step.instances) {
    if (n_slots_ == 0) n_slots_ = inst.slots.size();
    if (inst.slots.size() != n_slots_) throw std::invalid_argument("trace slot count changed");
  }
  steps_.push_back(std::move(step));
}

std::array<SignalProportions, 2> signal_proportions(const AssignmentTrace& trace) {
  std::array<std::size_t, 2> nulls{}, kps{};
  for (const auto& st : trace.steps()) {
    for (const auto& inst : st.instances) {
      for (std::size_t s = 0; s < inst.slots.size(); ++s) {
        const int v = inst.slots[s];
        if (v == kTraceMasked) continue;
        const int side = side_of(s, trace.n_slots());
        (v == kTraceNull ? nulls : kps)[side] += 1;
      }
    }
  }
  std::array<SignalProportions, 2> out;
  for (int side = 0; side < 2; ++side) {
    const std::size_t n = nulls[side] + kps[side];
    out[side].count = n;
    if (n == 0) continue;
    out[side].null_fraction = static_cast<double>(nulls[side]) / static_cast<double>(n);
    out[side].keyphrase_fraction = static_cast<double>(kps[side]) / static_cast<double>(n);
  }
  return out;
}

namespace {

/// Unmasked history of every (instance, slot), keyed by instance id.
std::map<std::string, std::vector<std::vector<int>>> histories(const AssignmentTrace& trace) {
  std::map<std::string, std::vector<std::vector<int>>> h;
  for (const auto& st : trace.steps()) {
    for (const auto& inst : st.instances) {
      auto& slots = h[inst.id];
      slots.resize(trace.n_slots());
      for (std::size_t s = 0; s < inst.slots.size(); ++s) {
        if (inst.slots[s] != kTraceMasked) slots[s].push_back(inst.slots[s]);
      }
    }
  }
  return h;
}

double entropy_bits(const std::vector<int>& values) {
  std::map<int, std::size_t> counts;
  for (int v : values) ++counts[v];
  double h = 0.0;
  const auto n = static_cast<double>(values.size());
  for (const auto& [v, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;
}

}  // namespace

std::array<SlotTypeProportions, 2> slot_type_proportions(const AssignmentTrace& trace) {
  std::array<std::array<std::size_t, 3>, 2> counts{};
  for (const auto& [id, slots] : histories(trace)) {
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s].empty()) continue;
      bool any_null = false, any_kp = false;
      for (int v : slots[s]) (v == kTraceNull ? any_null : any_kp) = true;
      const int type = any_null && any_kp ? 2 : (any_kp ? 1 : 0);
      counts[side_of(s, trace.n_slots())][type] += 1;
    }
  }
  std::array<SlotTypeProportions, 2> out;
  for (int side = 0; side < 2; ++side) {
    const auto& c = counts[side];
    const std::size_t n = c[0] + c[1] + c[2];
    out[side].count = n;
    if (n == 0) continue;
    const auto d = static_cast<double>(n);
    out[side].null_only = static_cast<double>(c[0]) / d;
    out[side].keyphrase_only = static_cast<double>(c[1]) / d;
    out[side].mixed = static_cast<double>(c[2]) / d;
  }
  return out;
}

EntropySummary assignment_entropy(const AssignmentTrace& trace) {
  EntropySummary out;
  for (const auto& [id, slots] : histories(trace)) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& hist : slots) {
      if (hist.empty()) continue;
      sum += entropy_bits(hist);
      ++n;
    }
    if (n == 0) continue;
    out.per_instance[id] = sum / static_cast<double>(n);
  }
  for (const auto& [id, h] : out.per_instance) out.mean += h;
  if (!out.per_instance.empty()) out.mean /= static_cast<double>(out.per_instance.size());
  return out;
}

EntropyComparison compare_entropy(const EntropySummary& before, const EntropySummary& after,
                                  double tol) {
  EntropyComparison c;
  std::size_t dec = 0, inc = 0, same = 0;
  for (const auto& [id, h0] : before.per_instance) {
    const auto it = after.per_instance.find(id);
    if (it == after.per_instance.end()) continue;
    const double delta = it->second - h0;
    if (delta < -tol) {
      ++dec;
    } else if (delta > tol) {
      ++inc;
    } else {
      ++same;
    }
  }
  c.instances = dec + inc + same;
  if (c.instances == 0) return c;
  const auto n = static_cast<double>(c.instances);
  c.decreased = static_cast<double>(dec) / n;
  c.increased = static_cast<double>(inc) / n;
  c.unchanged = static_cast<double>(same) / n;
  return c;
}

std::optional<double> OverestimationCounts::ratio() const {
  if (denominator == 0) return std::nullopt;
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

OverestimationCounts overestimation_counts(std::span<const SlotOutcome> outcomes) {
  OverestimationCounts c;
  for (const auto& o : outcomes) {
    if (!o.nonnull_correct) continue;
    ++c.denominator;
    if (o.vanilla_null) ++c.numerator;
  }
  return c;
}

OverestimationCounts overestimation_ratio(const Model& model, const Vocabulary& vocab,
                                          const std::vector<Record>& records, std::size_t max_len) {
  const std::size_t n = model.config().n_slots;
  std::vector<SlotOutcome> outcomes;
  for (const auto& rec : records) {
    const ad::Matrix memory = model.encode(rec.doc.source_tokens);
    const auto first = model.predict_k_tokens(memory, 1, DecodeMode::kVanilla);
    const auto nonnull = model.greedy_generate(memory, max_len, DecodeMode::kNonNull);
    std::array<std::set<std::string>, 2> targets;
    for (const auto& t : rec.present_text) targets[0].insert(join_stems(t));
    for (const auto& t : rec.absent_text) targets[1].insert(join_stems(t));
    for (std::size_t s = 0; s < n; ++s) {
      SlotOutcome o;
      o.vanilla_null = !first.tokens[s].empty() && first.tokens[s][0] == special::kNull;
      if (nonnull[s]) {
        std::string text;
        for (const auto& w : vocab.decode(*nonnull[s])) text += (text.empty() ? "" : " ") + w;
        o.nonnull_correct = targets[side_of(s, n)].count(join_stems(text)) > 0;
      }
      outcomes.push_back(o);
    }
  }
  return overestimation_counts(outcomes);
}

ReliabilityBins reliability_bins(std::span<const ConfidencePrediction> preds, double lo, double hi,
                                 double width) {
  if (!(width > 0.0) || !(hi > lo)) throw std::invalid_argument("reliability: bad interval");
  const double ratio = (hi - lo) / width;
  const auto nb = static_cast<std::size_t>(std::llround(ratio));
  if (nb == 0 || std::abs(ratio - static_cast<double>(nb)) > 1e-9) {
    throw std::invalid_argument("reliability: bin width must divide the interval");
  }
  ReliabilityBins out;
  out.total = preds.size();
  std::vector<double> conf(nb, 0.0), hits(nb, 0.0);
  std::vector<std::size_t> counts(nb, 0);
  for (const auto& p : preds) {
    if (p.confidence < lo || p.confidence > hi) continue;
    auto b = static_cast<std::size_t>(std::floor((p.confidence - lo) / width));
    if (b >= nb) b = nb - 1;
    conf[b] += p.confidence;
    hits[b] += p.correct ? 1.0 : 0.0;
    ++counts[b];
    ++out.in_range;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    ReliabilityBin bin;
    bin.lo = lo + width * static_cast<double>(b);
    bin.hi = lo + width * static_cast<double>(b + 1);
    bin.count = counts[b];
    if (bin.count > 0) {
      bin.mean_confidence = conf[b] / static_cast<double>(bin.count);
      bin.accuracy = hits[b] / static_cast<double>(bin.count);
      bin.gap = std::abs(bin.mean_confidence - bin.accuracy);
    }
    out.bins.push_back(bin);
  }
  return out;
}

ReliabilityBins reliability(const Model& model, const std::vector<Record>& records, std::size_t k,
                            double lo, double hi, double width) {
  std::vector<ConfidencePrediction> preds;
  const std::size_t n = model.config().n_slots;
  for (const auto& rec : records) {
    const ad::Matrix memory = model.encode(rec.doc.source_tokens);
    const PaddedTargets targets = pad_targets(drop_overlong(rec.kps, model.config().max_tgt_len), n);
    const auto record = model.predict_record(memory, k);
    const auto plan = identity_plan(assign_targets(record.dists, targets, k));
    const auto seqs = plan.sequences(targets);
    DecodeLayout layout;
    const ad::Matrix probs = model.teacher_forced_softmax(memory, seqs, layout);
    for (std::size_t i = 0; i < layout.slots.size(); ++i) {
      const Phrase& seq = *seqs[layout.slots[i]];
      for (Eigen::Index t = 0; t < layout.length[i]; ++t) {
        Eigen::Index arg = 0;
        const double c = probs.row(layout.offset[i] + t).maxCoeff(&arg);
        preds.push_back({c, arg == seq[static_cast<std::size_t>(t)]});
      }
    }
  }
  return reliability_bins(preds, lo, hi, width);
}

}  // namespace kpset
