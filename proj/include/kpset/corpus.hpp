#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kpset/textnorm.hpp"

namespace kpset {

using TokenId = std::int32_t;
using Phrase = std::vector<TokenId>;

/// Reserved ids. The null token marks "no keyphrase" and is never part of a
/// keyphrase; kEos terminates every keyphrase target.
namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kNull = 2;
inline constexpr TokenId kEos = 3;
inline constexpr TokenId kDigit = 4;
inline constexpr std::size_t kCount = 5;
}  // namespace special

inline constexpr std::string_view kDigitToken = "<digit>";
inline constexpr std::size_t kDefaultVocabSize = 5000;

class Vocabulary {
 public:
  /// Reserved tokens only.
  Vocabulary();

  /// Frequency-ranked vocabulary (ties broken lexicographically) capped at
  /// max_size entries including the reserved ones.
  static Vocabulary build(const std::vector<std::vector<std::string>>& token_lists,
                          std::size_t max_size = kDefaultVocabSize);

  /// Restores a vocabulary from its id-ordered token list. The reserved tokens
  /// must occupy their fixed ids.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  Phrase encode(const std::vector<std::string>& words) const;
  std::vector<std::string> decode(const Phrase& ids) const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct Document {
  std::string id;
  std::vector<TokenId> source_tokens;
  std::string raw_text;
  /// Normalized words (lowercased, digits replaced); source_tokens encodes them.
  std::vector<std::string> words;

  bool operator==(const Document&) const = default;
};

struct KeyphraseSet {
  std::vector<Phrase> present;
  std::vector<Phrase> absent;

  bool operator==(const KeyphraseSet&) const = default;
};

/// One corpus instance. The *_text vectors hold the normalized keyphrase
/// strings aligned with kps.present / kps.absent.
struct Record {
  Document doc;
  KeyphraseSet kps;
  std::vector<std::string> keyphrases;
  std::vector<std::string> present_text;
  std::vector<std::string> absent_text;

  bool operator==(const Record&) const = default;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<Record> records;
  std::size_t duplicates_removed = 0;
};

/// Empty optional is the null target.
using Target = std::optional<Phrase>;

struct PaddedTargets {
  std::vector<Target> present;
  std::vector<Target> absent;
  /// Keyphrases dropped because a side had more than n/2 of them.
  std::size_t truncated = 0;

  const std::vector<Target>& side(int s) const { return s == 0 ? present : absent; }
};

/// Lowercases, splits into alphanumeric runs and single punctuation marks, and
/// replaces pure digit runs with the digit placeholder.
std::vector<std::string> tokenize(std::string_view text);

/// True iff the stemmed phrase occurs as a contiguous run of the stemmed document.
bool contains_contiguous(const std::vector<std::string>& doc_stems,
                         const std::vector<std::string>& phrase_stems);

std::vector<std::string> stem_all(const std::vector<std::string>& words);

/// Stemmed, space-joined form of a raw phrase string.
std::string join_stems(std::string_view phrase);

/// Builds a record from raw text, splitting keyphrases into present/absent.
/// Keyphrases that normalize to nothing or repeat an earlier stemmed form are
/// dropped.
Record make_record(std::string id, std::string_view document,
                   const std::vector<std::string>& keyphrases, const Vocabulary& vocab);

/// Reads line-delimited JSON records with `document` and `keyphrases`. When
/// `vocab` is empty a vocabulary of `vocab_size` entries is built from the
/// file. Throws std::runtime_error naming the line on malformed input.
Corpus load_corpus(const std::filesystem::path& path,
                   const std::optional<Vocabulary>& vocab = std::nullopt,
                   std::size_t vocab_size = kDefaultVocabSize);
Corpus parse_corpus(std::string_view text, const std::optional<Vocabulary>& vocab = std::nullopt,
                    std::size_t vocab_size = kDefaultVocabSize);

/// One JSON object per line with fields document, keyphrases, present, absent.
std::string serialize_corpus(const std::vector<Record>& records);
void write_corpus(const std::filesystem::path& path, const std::vector<Record>& records);

/// Pads each side to n/2 with null targets, truncating in corpus order.
/// Throws std::invalid_argument if n is odd or zero.
PaddedTargets pad_targets(const KeyphraseSet& kps, std::size_t n);

/// Removes keyphrases whose target sequence (tokens + EOS) exceeds max_seq_len.
KeyphraseSet drop_overlong(const KeyphraseSet& kps, std::size_t max_seq_len);

/// Keyphrase tokens followed by kEos, or the single null token.
Phrase target_sequence(const Target& t);

}  // namespace kpset
