#pragma once

#include <string>
#include <vector>

#include "kpset/assignment.hpp"
#include "kpset/corpus.hpp"
#include "kpset/model.hpp"
#include "kpset/reassign.hpp"

namespace kpset::testing {

/// Eight present slots mirroring the worked re-assignment example, plus an
/// all-null absent half so the instance has the usual two sides.
struct FigureInstance {
  Vocabulary vocab;
  PaddedTargets targets;
  SlotAssignment m;
  SlotPredictionRecord record;
  std::size_t k = 2;

  Phrase phrase(const std::string& text) const { return vocab.encode(tokenize(text)); }
};

inline FigureInstance figure_instance() {
  FigureInstance f;
  f.vocab = Vocabulary::build({{"topic", "model", "denoising", "patch", "clustering", "semantic",
                               "learning", "image", "latent"}},
                              kDefaultVocabSize);
  auto p = [&](const std::string& s) { return f.phrase(s); };
  auto eos = [&](const std::string& s) {
    Phrase x = p(s);
    x.push_back(special::kEos);
    return x;
  };
  const Phrase null{special::kNull};

  f.targets.present = {p("topic model"), p("denoising"), p("patch clustering"), p("semantic learning"),
                       std::nullopt, std::nullopt, std::nullopt, std::nullopt};
  f.targets.absent.assign(8, std::nullopt);

  // slots 1..8 of the figure are indices 0..7
  f.m.target = {0, 1, 4, 5, 6, 7, 3, 2, 0, 1, 2, 3, 4, 5, 6, 7};
  f.record.vanilla_k = {p("topic model"), p("image denoising"), null, null, null, null,
                        p("topic model"), p("latent patch")};
  f.record.nonnull_k = {p("topic model"), p("image denoising"), p("topic model"), p("image model"),
                        p("patch clustering"), eos("denoising"), p("topic model"), p("latent patch")};
  for (int i = 0; i < 8; ++i) {
    f.record.vanilla_k.push_back(null);
    f.record.nonnull_k.push_back(p("latent patch"));
  }
  return f;
}

/// Small model configuration for fast tests.
inline ModelConfig tiny_config(std::size_t vocab_size, std::size_t n_slots = 4) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.n_slots = n_slots;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.max_src_len = 32;
  c.max_tgt_len = 6;
  return c;
}

}  // namespace kpset::testing
