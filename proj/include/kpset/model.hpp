#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpset/autodiff.hpp"
#include "kpset/corpus.hpp"

namespace kpset {

struct ModelConfig {
  std::size_t vocab_size = kDefaultVocabSize;
  std::size_t n_slots = 20;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t max_src_len = 256;
  /// Decoder positions per slot: control code plus up to max_tgt_len - 1 tokens.
  std::size_t max_tgt_len = 8;

  bool operator==(const ModelConfig&) const = default;
  void validate() const;
};

enum class DecodeMode { kVanilla, kNonNull };

/// Per-slot probability vectors over the vocabulary, one per decoding step.
using SlotDistributions = std::vector<std::vector<ad::RowVector>>;

/// Raw greedy K-step decode of every slot.
struct KStepDecode {
  std::vector<Phrase> tokens;
  SlotDistributions dists;
};

/// What the K-step assignment records for each slot: the vanilla prediction
/// (a lone null token when the slot predicts null), the prediction with null
/// removed from the vocabulary, and the vanilla step distributions.
struct SlotPredictionRecord {
  std::vector<Phrase> vanilla_k;
  std::vector<Phrase> nonnull_k;
  SlotDistributions dists;
};

/// Teacher-forced probabilities of one slot along its target sequence.
struct SlotTeacherProbs {
  /// p_t(z_t) for every position of the target sequence (keyphrase + EOS, or null).
  std::vector<double> target_probs;
  /// Probability of the null token at the first step.
  double null_prob0 = 0.0;
  bool masked = false;
};

/// Row layout of a batched decoder pass: slot i occupies rows
/// [offset[i], offset[i] + length[i]).
struct DecodeLayout {
  std::vector<std::size_t> slots;
  std::vector<Eigen::Index> offset;
  std::vector<Eigen::Index> length;
};

struct SlotInput {
  std::size_t slot;
  /// Tokens fed after the control code.
  Phrase prefix;
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  /// Wraps already-initialized parameters (used by checkpoint loading).
  Model(ModelConfig config, std::vector<ad::Parameter> params);

  const ModelConfig& config() const { return config_; }
  std::vector<ad::Parameter>& parameters() { return params_; }
  const std::vector<ad::Parameter>& parameters() const { return params_; }
  ad::Parameter& parameter(const std::string& name);
  const ad::Parameter& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  void zero_grad();

  /// One row per (possibly truncated) source token.
  ad::NodeId encode(ad::Graph& g, std::span<const TokenId> src);
  ad::Matrix encode(std::span<const TokenId> src) const;

  /// Logits for every row of the requested slot inputs. Slots never attend to
  /// each other; each row sees its own slot's control code and earlier tokens.
  ad::NodeId decode(ad::Graph& g, ad::NodeId memory, const std::vector<SlotInput>& inputs,
                    DecodeLayout& layout);
  ad::NodeId decode(ad::Graph& g, ad::NodeId memory, const std::vector<SlotInput>& inputs,
                    DecodeLayout& layout) const;

  /// Greedy decode of k steps for all slots. Non-null mode removes the null
  /// token from every step's support before the argmax.
  KStepDecode predict_k_tokens(const ad::Matrix& memory, std::size_t k, DecodeMode mode) const;

  /// Runs both decode modes and assembles the per-slot record.
  SlotPredictionRecord predict_record(const ad::Matrix& memory, std::size_t k) const;

  /// Greedy generation until EOS, a leading null, or max_len tokens. A slot
  /// that emits null first, or nothing before EOS, yields std::nullopt.
  std::vector<std::optional<Phrase>> greedy_generate(const ad::Matrix& memory, std::size_t max_len,
                                                     DecodeMode mode = DecodeMode::kVanilla) const;

  /// Teacher-forced probabilities for target sequences. Slots with
  /// std::nullopt are skipped (masked). Throws if a sequence exceeds max_tgt_len.
  std::vector<SlotTeacherProbs> teacher_forced_probs(
      const ad::Matrix& memory, const std::vector<std::optional<Phrase>>& sequences) const;

  /// Full softmax rows of the teacher-forced pass.
  ad::Matrix teacher_forced_softmax(const ad::Matrix& memory,
                                    const std::vector<std::optional<Phrase>>& sequences,
                                    DecodeLayout& layout) const;

  /// Graph version used for training: returns the logits node and fills the
  /// layout so callers can attach loss terms.
  ad::NodeId teacher_forced_logits(ad::Graph& g, ad::NodeId memory,
                                   const std::vector<std::optional<Phrase>>& sequences,
                                   DecodeLayout& layout);

 private:
  struct LayerRefs;
  void init(std::uint64_t seed);
  template <typename GraphParam>
  ad::NodeId encode_impl(ad::Graph& g, std::span<const TokenId> src, GraphParam&& param) const;
  template <typename GraphParam>
  ad::NodeId decode_impl(ad::Graph& g, ad::NodeId memory, const std::vector<SlotInput>& inputs,
                         DecodeLayout& layout, GraphParam&& param) const;
  std::size_t index_of(const std::string& name) const;

  ModelConfig config_;
  std::vector<ad::Parameter> params_;
  ad::Matrix positions_;
};

/// Turns a decoded prefix into a K-token prediction record entry: a lone null
/// if the first token is null, otherwise the tokens up to and including EOS.
Phrase trim_prediction(const Phrase& tokens);

/// Picks per-slot target probabilities out of softmax rows laid out by `layout`.
std::vector<SlotTeacherProbs> gather_teacher_probs(const ad::Matrix& probs, const DecodeLayout& layout,
                                                   const std::vector<std::optional<Phrase>>& sequences);

/// Sinusoidal position table.
ad::Matrix sinusoid_positions(std::size_t length, std::size_t dim);

}  // namespace kpset
