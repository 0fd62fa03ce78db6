#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace kpset {

/// Word pools for one topic. Present keyphrases are built as
/// "modifier noun" or "noun noun"; absent keyphrases are drawn from
/// `absent_phrases` and never placed in the document text.
struct TopicPool {
  std::string name;
  std::vector<std::string> nouns;
  std::vector<std::string> modifiers;
  std::vector<std::string> absent_phrases;
};

struct Grammar {
  std::vector<TopicPool> topics;
  std::vector<std::string> fillers;
  /// Sentence templates; "{kp}" receives a present keyphrase and "{w}" a filler word.
  std::vector<std::string> templates;
  int min_present = 2;
  int max_present = 4;
  int min_absent = 1;
  int max_absent = 2;
  int min_filler_sentences = 1;
  int max_filler_sentences = 2;

  /// Every distinct token the grammar can emit.
  std::set<std::string> word_pool() const;
};

Grammar default_grammar();

/// Reads a grammar from a JSON file with the same field names as Grammar.
Grammar load_grammar(const std::filesystem::path& path);

struct SyntheticRecord {
  std::string document;
  std::vector<std::string> keyphrases;
  std::size_t n_present = 0;
};

/// Deterministic for a fixed seed. Throws std::invalid_argument on empty pools.
std::vector<SyntheticRecord> gen_synthetic(std::uint64_t seed, std::size_t size,
                                           const Grammar& grammar = default_grammar());

/// One `{"document": ..., "keyphrases": [...]}` object per line.
std::string synthetic_to_jsonl(const std::vector<SyntheticRecord>& records);

}  // namespace kpset
