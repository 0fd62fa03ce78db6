#include "kpset/model.hpp"

#include <cmath>
#include <numbers>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

namespace kpset {

namespace {

// Box-Muller on top of mt19937_64 so initialization does not depend on the
// standard library's distribution implementations.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::string layer_name(const char* stack, std::size_t l, const char* leaf) {
  return std::string(stack) + "." + std::to_string(l) + "." + leaf;
}

ad::Matrix constant_fill(Eigen::Index r, Eigen::Index c, double v) {
  return ad::Matrix::Constant(r, c, v);
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size <= special::kCount) throw std::invalid_argument("vocab_size too small");
  if (n_slots == 0 || n_slots % 2 != 0) throw std::invalid_argument("n_slots must be even");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw std::invalid_argument("d_model must be a positive multiple of n_heads");
  }
  if (d_ff == 0 || max_src_len == 0 || max_tgt_len < 2) {
    throw std::invalid_argument("model dimensions must be positive (max_tgt_len >= 2)");
  }
}

ad::Matrix sinusoid_positions(std::size_t length, std::size_t dim) {
  ad::Matrix pe(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(dim));
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(p) * freq;
      pe(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) =
          i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  init(seed);
  positions_ = sinusoid_positions(std::max(config_.max_src_len, config_.max_tgt_len), config_.d_model);
}

Model::Model(ModelConfig config, std::vector<ad::Parameter> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  Model reference(config_, 0);
  if (reference.params_.size() != params_.size()) {
    throw std::runtime_error("parameter count does not match model configuration");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& want = reference.params_[i];
    const auto& got = params_[i];
    if (want.name != got.name || want.value.rows() != got.value.rows() ||
        want.value.cols() != got.value.cols()) {
      throw std::runtime_error("parameter '" + got.name + "' does not match model configuration");
    }
  }
  positions_ = std::move(reference.positions_);
}

void Model::init(std::uint64_t seed) {
  NormalSource normal(seed);
  const auto d = static_cast<Eigen::Index>(config_.d_model);
  const auto ff = static_cast<Eigen::Index>(config_.d_ff);
  const auto v = static_cast<Eigen::Index>(config_.vocab_size);
  const auto n = static_cast<Eigen::Index>(config_.n_slots);

  auto gaussian = [&](std::string name, Eigen::Index r, Eigen::Index c, double stddev) {
    ad::Parameter p{std::move(name), ad::Matrix(r, c), {}};
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) p.value(i, j) = stddev * normal.next();
    }
    params_.push_back(std::move(p));
  };
  auto fill = [&](std::string name, Eigen::Index r, Eigen::Index c, double value) {
    params_.push_back(ad::Parameter{std::move(name), constant_fill(r, c, value), {}});
  };
  auto linear = [&](const std::string& prefix, Eigen::Index in, Eigen::Index out) {
    gaussian(prefix + ".w", in, out, 1.0 / std::sqrt(static_cast<double>(in)));
    fill(prefix + ".b", 1, out, 0.0);
  };
  auto norm = [&](const std::string& prefix) {
    fill(prefix + ".g", 1, d, 1.0);
    fill(prefix + ".b", 1, d, 0.0);
  };
  auto attention = [&](const std::string& prefix) {
    linear(prefix + ".q", d, d);
    linear(prefix + ".k", d, d);
    linear(prefix + ".v", d, d);
    linear(prefix + ".o", d, d);
  };

  const double emb_std = 1.0 / std::sqrt(static_cast<double>(config_.d_model));
  gaussian("tok_emb", v, d, emb_std);
  gaussian("ctrl_codes", n, d, emb_std);
  for (std::size_t l = 0; l < config_.enc_layers; ++l) {
    norm(layer_name("enc", l, "ln1"));
    attention(layer_name("enc", l, "self"));
    norm(layer_name("enc", l, "ln2"));
    linear(layer_name("enc", l, "ff1"), d, ff);
    linear(layer_name("enc", l, "ff2"), ff, d);
  }
  norm("enc.ln");
  for (std::size_t l = 0; l < config_.dec_layers; ++l) {
    norm(layer_name("dec", l, "ln1"));
    attention(layer_name("dec", l, "self"));
    norm(layer_name("dec", l, "ln2"));
    attention(layer_name("dec", l, "cross"));
    norm(layer_name("dec", l, "ln3"));
    linear(layer_name("dec", l, "ff1"), d, ff);
    linear(layer_name("dec", l, "ff2"), ff, d);
  }
  norm("dec.ln");
  linear("out", d, v);
}

std::size_t Model::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw std::out_of_range("unknown parameter: " + name);
}

ad::Parameter& Model::parameter(const std::string& name) { return params_[index_of(name)]; }
const ad::Parameter& Model::parameter(const std::string& name) const {
  return params_[index_of(name)];
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p.value.size());
  return total;
}

void Model::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

namespace {

// Parameter nodes are resolved positionally in the same order init() created
// them; the cursor walks that order during a forward pass.
template <typename ParamFn>
struct Cursor {
  ad::Graph& g;
  ParamFn& fn;
  std::size_t at;

  ad::NodeId next() { return fn(at++); }
};

template <typename C>
ad::NodeId layer_norm(ad::Graph& g, ad::NodeId x, C& c) {
  const ad::NodeId gain = c.next();
  const ad::NodeId bias = c.next();
  return g.layer_norm(x, gain, bias);
}

template <typename C>
ad::NodeId linear(ad::Graph& g, ad::NodeId x, C& c) {
  const ad::NodeId w = c.next();
  const ad::NodeId b = c.next();
  return g.linear(x, w, b);
}

template <typename C>
ad::NodeId attention_block(ad::Graph& g, ad::NodeId queries, ad::NodeId keys, int heads,
                           const ad::AttentionMask& mask, C& c) {
  const ad::NodeId q = linear(g, queries, c);
  const ad::NodeId k = linear(g, keys, c);
  const ad::NodeId v = linear(g, keys, c);
  const ad::NodeId a = g.attention(q, k, v, heads, mask);
  return linear(g, a, c);
}

template <typename C>
ad::NodeId feed_forward(ad::Graph& g, ad::NodeId x, C& c) {
  const ad::NodeId h = g.relu(linear(g, x, c));
  return linear(g, h, c);
}

}  // namespace

template <typename GraphParam>
ad::NodeId Model::encode_impl(ad::Graph& g, std::span<const TokenId> src, GraphParam&& param) const {
  if (src.empty()) throw std::invalid_argument("encode: empty source document");
  const std::size_t len = std::min(src.size(), config_.max_src_len);
  std::vector<Eigen::Index> ids(len);
  for (std::size_t i = 0; i < len; ++i) {
    if (src[i] < 0 || static_cast<std::size_t>(src[i]) >= config_.vocab_size) {
      throw std::invalid_argument("encode: token id " + std::to_string(src[i]) +
                                  " outside vocabulary of size " +
                                  std::to_string(config_.vocab_size));
    }
    ids[i] = src[i];
  }
  const int heads = static_cast<int>(config_.n_heads);
  const double emb_scale = std::sqrt(static_cast<double>(config_.d_model));

  Cursor<std::remove_reference_t<GraphParam>> c{g, param, 0};
  const ad::NodeId tok_emb = c.next();
  c.next();  // ctrl_codes
  ad::NodeId x = g.scale(g.gather_rows(tok_emb, std::move(ids)), emb_scale);
  x = g.add(x, g.constant(positions_.topRows(static_cast<Eigen::Index>(len))));

  const ad::AttentionMask open;
  for (std::size_t l = 0; l < config_.enc_layers; ++l) {
    ad::NodeId h = layer_norm(g, x, c);
    x = g.add(x, attention_block(g, h, h, heads, open, c));
    h = layer_norm(g, x, c);
    x = g.add(x, feed_forward(g, h, c));
  }
  return layer_norm(g, x, c);
}

template <typename GraphParam>
ad::NodeId Model::decode_impl(ad::Graph& g, ad::NodeId memory, const std::vector<SlotInput>& inputs,
                              DecodeLayout& layout, GraphParam&& param) const {
  if (inputs.empty()) throw std::invalid_argument("decode: no slot inputs");
  const auto vocab = static_cast<Eigen::Index>(config_.vocab_size);
  layout = DecodeLayout{};
  std::vector<Eigen::Index> rows;
  ad::AttentionMask self_mask;
  self_mask.causal = true;
  std::vector<Eigen::Index> pos_rows;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const SlotInput& in = inputs[s];
    if (in.slot >= config_.n_slots) throw std::out_of_range("decode: slot index");
    const std::size_t len = in.prefix.size() + 1;
    if (len > config_.max_tgt_len) {
      throw std::invalid_argument("decode: target length " + std::to_string(len) +
                                  " exceeds decoder max length " +
                                  std::to_string(config_.max_tgt_len));
    }
    layout.slots.push_back(in.slot);
    layout.offset.push_back(static_cast<Eigen::Index>(rows.size()));
    layout.length.push_back(static_cast<Eigen::Index>(len));
    rows.push_back(vocab + static_cast<Eigen::Index>(in.slot));
    for (TokenId t : in.prefix) {
      if (t < 0 || t >= vocab) throw std::invalid_argument("decode: token id outside vocabulary");
      rows.push_back(t);
    }
    for (std::size_t p = 0; p < len; ++p) {
      self_mask.query_segment.push_back(static_cast<int>(s));
      pos_rows.push_back(static_cast<Eigen::Index>(p));
    }
  }
  self_mask.key_segment = self_mask.query_segment;

  ad::Matrix pos(static_cast<Eigen::Index>(pos_rows.size()), positions_.cols());
  for (std::size_t i = 0; i < pos_rows.size(); ++i) {
    pos.row(static_cast<Eigen::Index>(i)) = positions_.row(pos_rows[i]);
  }

  const int heads = static_cast<int>(config_.n_heads);
  const double emb_scale = std::sqrt(static_cast<double>(config_.d_model));

  Cursor<std::remove_reference_t<GraphParam>> c{g, param, 0};
  const ad::NodeId tok_emb = c.next();
  const ad::NodeId ctrl = c.next();
  // Skip the encoder parameters: per layer 2 + 8 + 2 + 4, then the final norm.
  c.at += config_.enc_layers * 16 + 2;

  const ad::NodeId table = g.concat_rows(std::vector<ad::NodeId>{tok_emb, ctrl});
  ad::NodeId x = g.scale(g.gather_rows(table, std::move(rows)), emb_scale);
  x = g.add(x, g.constant(std::move(pos)));

  const ad::AttentionMask open;
  for (std::size_t l = 0; l < config_.dec_layers; ++l) {
    ad::NodeId h = layer_norm(g, x, c);
    x = g.add(x, attention_block(g, h, h, heads, self_mask, c));
    h = layer_norm(g, x, c);
    x = g.add(x, attention_block(g, h, memory, heads, open, c));
    h = layer_norm(g, x, c);
    x = g.add(x, feed_forward(g, h, c));
  }
  x = layer_norm(g, x, c);
  return linear(g, x, c);
}

ad::NodeId Model::encode(ad::Graph& g, std::span<const TokenId> src) {
  auto fn = [&](std::size_t i) { return g.parameter(params_[i]); };
  return encode_impl(g, src, fn);
}

ad::Matrix Model::encode(std::span<const TokenId> src) const {
  ad::Graph g(false);
  auto fn = [&](std::size_t i) { return g.parameter(std::as_const(params_[i])); };
  return g.value(encode_impl(g, src, fn));
}

ad::NodeId Model::decode(ad::Graph& g, ad::NodeId memory, const std::vector<SlotInput>& inputs,
                         DecodeLayout& layout) {
  auto fn = [&](std::size_t i) { return g.parameter(params_[i]); };
  return decode_impl(g, memory, inputs, layout, fn);
}

ad::NodeId Model::decode(ad::Graph& g, ad::NodeId memory, const std::vector<SlotInput>& inputs,
                         DecodeLayout& layout) const {
  auto fn = [&](std::size_t i) { return g.parameter(std::as_const(params_[i])); };
  return decode_impl(g, memory, inputs, layout, fn);
}

namespace {

ad::RowVector row_softmax(const ad::Matrix& logits, Eigen::Index row, bool drop_null) {
  ad::RowVector l = logits.row(row);
  if (drop_null) l[special::kNull] = -std::numeric_limits<double>::infinity();
  const double mx = l.maxCoeff();
  ad::RowVector p = (l.array() - mx).exp();
  // vectorized exp clamps -inf to a denormal rather than zero
  if (drop_null) p[special::kNull] = 0.0;
  p /= p.sum();
  return p;
}

TokenId argmax(const ad::RowVector& p) {
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return static_cast<TokenId>(best);
}

}  // namespace

KStepDecode Model::predict_k_tokens(const ad::Matrix& memory, std::size_t k, DecodeMode mode) const {
  if (k == 0) throw std::invalid_argument("predict_k_tokens: k must be >= 1");
  if (k > config_.max_tgt_len) throw std::invalid_argument("predict_k_tokens: k exceeds decoder length");
  const bool drop_null = mode == DecodeMode::kNonNull;
  KStepDecode out;
  out.tokens.assign(config_.n_slots, {});
  out.dists.assign(config_.n_slots, {});
  for (std::size_t step = 0; step < k; ++step) {
    ad::Graph g(false);
    const ad::NodeId mem = g.constant(memory);
    std::vector<SlotInput> inputs;
    for (std::size_t s = 0; s < config_.n_slots; ++s) inputs.push_back({s, out.tokens[s]});
    DecodeLayout layout;
    const ad::Matrix& logits = g.value(decode(g, mem, inputs, layout));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Eigen::Index row = layout.offset[i] + layout.length[i] - 1;
      ad::RowVector p = row_softmax(logits, row, drop_null);
      out.tokens[i].push_back(argmax(p));
      out.dists[i].push_back(std::move(p));
    }
  }
  return out;
}

Phrase trim_prediction(const Phrase& tokens) {
  if (tokens.empty()) return {};
  if (tokens[0] == special::kNull) return {special::kNull};
  Phrase out;
  for (TokenId t : tokens) {
    if (t == special::kNull) break;
    out.push_back(t);
    if (t == special::kEos) break;
  }
  return out;
}

SlotPredictionRecord Model::predict_record(const ad::Matrix& memory, std::size_t k) const {
  KStepDecode vanilla = predict_k_tokens(memory, k, DecodeMode::kVanilla);
  const KStepDecode nonnull = predict_k_tokens(memory, k, DecodeMode::kNonNull);
  SlotPredictionRecord rec;
  for (std::size_t s = 0; s < config_.n_slots; ++s) {
    rec.vanilla_k.push_back(trim_prediction(vanilla.tokens[s]));
    rec.nonnull_k.push_back(trim_prediction(nonnull.tokens[s]));
  }
  rec.dists = std::move(vanilla.dists);
  return rec;
}

std::vector<std::optional<Phrase>> Model::greedy_generate(const ad::Matrix& memory,
                                                          std::size_t max_len,
                                                          DecodeMode mode) const {
  if (max_len == 0) throw std::invalid_argument("greedy_generate: max_len must be >= 1");
  max_len = std::min(max_len, config_.max_tgt_len);
  const bool drop_null = mode == DecodeMode::kNonNull;
  std::vector<Phrase> tokens(config_.n_slots);
  std::vector<bool> done(config_.n_slots, false);
  std::vector<bool> emitted_null(config_.n_slots, false);
  for (std::size_t step = 0; step < max_len; ++step) {
    std::vector<SlotInput> inputs;
    for (std::size_t s = 0; s < config_.n_slots; ++s) {
      if (!done[s]) inputs.push_back({s, tokens[s]});
    }
    if (inputs.empty()) break;
    ad::Graph g(false);
    const ad::NodeId mem = g.constant(memory);
    DecodeLayout layout;
    const ad::Matrix& logits = g.value(decode(g, mem, inputs, layout));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const std::size_t s = inputs[i].slot;
      const TokenId t = argmax(row_softmax(logits, layout.offset[i] + layout.length[i] - 1, drop_null));
      if (t == special::kNull) {
        emitted_null[s] = step == 0;
        done[s] = true;
      } else if (t == special::kEos) {
        done[s] = true;
      } else {
        tokens[s].push_back(t);
      }
    }
  }
  std::vector<std::optional<Phrase>> out(config_.n_slots);
  for (std::size_t s = 0; s < config_.n_slots; ++s) {
    if (!emitted_null[s] && !tokens[s].empty()) out[s] = std::move(tokens[s]);
  }
  return out;
}

namespace {

std::vector<SlotInput> teacher_inputs(const std::vector<std::optional<Phrase>>& sequences,
                                      std::size_t max_len) {
  std::vector<SlotInput> inputs;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    if (!sequences[s]) continue;
    const Phrase& seq = *sequences[s];
    if (seq.empty()) throw std::invalid_argument("teacher forcing: empty target sequence");
    if (seq.size() > max_len) {
      throw std::invalid_argument("teacher forcing: target length " + std::to_string(seq.size()) +
                                  " exceeds decoder max length " + std::to_string(max_len));
    }
    inputs.push_back({s, Phrase(seq.begin(), seq.end() - 1)});
  }
  return inputs;
}

}  // namespace

std::vector<SlotTeacherProbs> gather_teacher_probs(const ad::Matrix& probs, const DecodeLayout& layout,
                                                   const std::vector<std::optional<Phrase>>& sequences) {
  std::vector<SlotTeacherProbs> out(sequences.size());
  for (auto& o : out) o.masked = true;
  for (std::size_t i = 0; i < layout.slots.size(); ++i) {
    const std::size_t s = layout.slots[i];
    const Phrase& seq = *sequences[s];
    SlotTeacherProbs& o = out[s];
    o.masked = false;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      o.target_probs.push_back(probs(layout.offset[i] + static_cast<Eigen::Index>(t), seq[t]));
    }
    o.null_prob0 = probs(layout.offset[i], special::kNull);
  }
  return out;
}

ad::Matrix Model::teacher_forced_softmax(const ad::Matrix& memory,
                                         const std::vector<std::optional<Phrase>>& sequences,
                                         DecodeLayout& layout) const {
  if (sequences.size() != config_.n_slots) throw std::invalid_argument("teacher forcing: slot count");
  layout = DecodeLayout{};
  const auto inputs = teacher_inputs(sequences, config_.max_tgt_len);
  if (inputs.empty()) return ad::Matrix(0, static_cast<Eigen::Index>(config_.vocab_size));
  ad::Graph g(false);
  const ad::NodeId mem = g.constant(memory);
  return ad::softmax_rows(g.value(decode(g, mem, inputs, layout)));
}

std::vector<SlotTeacherProbs> Model::teacher_forced_probs(
    const ad::Matrix& memory, const std::vector<std::optional<Phrase>>& sequences) const {
  DecodeLayout layout;
  const ad::Matrix probs = teacher_forced_softmax(memory, sequences, layout);
  return gather_teacher_probs(probs, layout, sequences);
}

ad::NodeId Model::teacher_forced_logits(ad::Graph& g, ad::NodeId memory,
                                        const std::vector<std::optional<Phrase>>& sequences,
                                        DecodeLayout& layout) {
  if (sequences.size() != config_.n_slots) throw std::invalid_argument("teacher forcing: slot count");
  const auto inputs = teacher_inputs(sequences, config_.max_tgt_len);
  if (inputs.empty()) {
    layout = DecodeLayout{};
    return -1;
  }
  return decode(g, memory, inputs, layout);
}

}  // namespace kpset
