#include "kpset/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kpset {

namespace {

constexpr std::string_view kReserved[special::kCount] = {"<pad>", "<unk>", "<null>", "<eos>",
                                                         kDigitToken};

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

}  // namespace

Vocabulary::Vocabulary() {
  for (std::string_view t : kReserved) add(std::string(t));
}

void Vocabulary::add(std::string token) {
  const auto id = static_cast<TokenId>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& token_lists,
                             std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& list : token_lists) {
    for (const auto& tok : list) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  Vocabulary v;
  for (auto& [tok, n] : counts) {
    if (!v.contains(tok)) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (auto& [tok, n] : ranked) {
    if (v.size() >= max_size) break;
    v.add(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < special::kCount) throw std::runtime_error("vocabulary too small");
  for (std::size_t i = 0; i < special::kCount; ++i) {
    if (tokens[i] != kReserved[i]) {
      throw std::runtime_error("vocabulary reserved token mismatch at id " + std::to_string(i));
    }
  }
  Vocabulary v;
  for (std::size_t i = special::kCount; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw std::runtime_error("duplicate vocabulary token: " + tokens[i]);
    v.add(std::move(tokens[i]));
  }
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? special::kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

Phrase Vocabulary::encode(const std::vector<std::string>& words) const {
  Phrase out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<std::string> Vocabulary::decode(const Phrase& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId t : ids) out.push_back(token(t));
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (is_word_char(c)) {
      std::size_t j = i;
      while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
      std::string tok = to_lower_ascii(text.substr(i, j - i));
      if (std::all_of(tok.begin(), tok.end(), [](unsigned char d) { return std::isdigit(d); })) {
        tok = std::string(kDigitToken);
      }
      out.push_back(std::move(tok));
      i = j;
    } else if (c >= 0x80) {
      // Keep a UTF-8 multibyte sequence together as one token.
      std::size_t j = i + 1;
      while (j < text.size() && (static_cast<unsigned char>(text[j]) & 0xC0) == 0x80) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  return out;
}

std::vector<std::string> stem_all(const std::vector<std::string>& words) {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(porter_stem(w));
  return out;
}

bool contains_contiguous(const std::vector<std::string>& doc_stems,
                         const std::vector<std::string>& phrase_stems) {
  if (phrase_stems.empty()) return false;
  return std::search(doc_stems.begin(), doc_stems.end(), phrase_stems.begin(),
                     phrase_stems.end()) != doc_stems.end();
}

Record make_record(std::string id, std::string_view document,
                   const std::vector<std::string>& keyphrases, const Vocabulary& vocab) {
  Record r;
  r.doc.id = std::move(id);
  r.doc.raw_text = std::string(document);
  r.doc.words = tokenize(document);
  r.doc.source_tokens = vocab.encode(r.doc.words);
  const auto doc_stems = stem_all(r.doc.words);

  std::set<std::vector<std::string>> seen;
  for (const auto& kp : keyphrases) {
    const auto words = tokenize(kp);
    if (words.empty()) continue;
    auto stems = stem_all(words);
    if (!seen.insert(stems).second) continue;
    r.keyphrases.push_back(kp);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    if (contains_contiguous(doc_stems, stems)) {
      r.kps.present.push_back(vocab.encode(words));
      r.present_text.push_back(std::move(text));
    } else {
      r.kps.absent.push_back(vocab.encode(words));
      r.absent_text.push_back(std::move(text));
    }
  }
  return r;
}

namespace {

struct RawRecord {
  std::string document;
  std::vector<std::string> keyphrases;
};

std::vector<RawRecord> parse_raw(std::string_view text) {
  std::vector<RawRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("malformed record at " + where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("document") || !j["document"].is_string()) {
      throw std::runtime_error("malformed record at " + where + ": missing string field 'document'");
    }
    RawRecord r;
    r.document = j["document"].get<std::string>();
    if (j.contains("keyphrases")) {
      const auto& kps = j["keyphrases"];
      if (!kps.is_array()) {
        throw std::runtime_error("malformed record at " + where + ": 'keyphrases' is not a list");
      }
      for (const auto& k : kps) {
        if (!k.is_string()) {
          throw std::runtime_error("malformed record at " + where + ": non-string keyphrase");
        }
        r.keyphrases.push_back(k.get<std::string>());
      }
    } else {
      throw std::runtime_error("malformed record at " + where + ": missing field 'keyphrases'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string dedup_key(const RawRecord& r) {
  std::vector<std::string> stemmed;
  for (const auto& kp : r.keyphrases) stemmed.push_back(join_stems(kp));
  std::sort(stemmed.begin(), stemmed.end());
  std::string key = to_lower_ascii(r.document);
  for (const auto& s : stemmed) {
    key += '\x1f';
    key += s;
  }
  return key;
}

}  // namespace

std::string join_stems(std::string_view phrase) {
  return StemmedPhrase{stem_all(tokenize(phrase))}.joined();
}

Corpus parse_corpus(std::string_view text, const std::optional<Vocabulary>& vocab,
                    std::size_t vocab_size) {
  auto raw = parse_raw(text);

  Corpus corpus;
  std::set<std::string> seen;
  std::vector<RawRecord> unique;
  for (auto& r : raw) {
    if (seen.insert(dedup_key(r)).second) {
      unique.push_back(std::move(r));
    } else {
      ++corpus.duplicates_removed;
    }
  }

  if (vocab) {
    corpus.vocab = *vocab;
  } else {
    std::vector<std::vector<std::string>> lists;
    for (const auto& r : unique) {
      lists.push_back(tokenize(r.document));
      for (const auto& kp : r.keyphrases) lists.push_back(tokenize(kp));
    }
    corpus.vocab = Vocabulary::build(lists, vocab_size);
  }

  corpus.records.reserve(unique.size());
  for (std::size_t i = 0; i < unique.size(); ++i) {
    corpus.records.push_back(
        make_record("doc-" + std::to_string(i), unique[i].document, unique[i].keyphrases,
                    corpus.vocab));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const std::optional<Vocabulary>& vocab,
                   std::size_t vocab_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str(), vocab, vocab_size);
}

std::string serialize_corpus(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["document"] = r.doc.raw_text;
    j["keyphrases"] = r.keyphrases;
    j["present"] = r.present_text;
    j["absent"] = r.absent_text;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<Record>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path.string());
  out << serialize_corpus(records);
}

PaddedTargets pad_targets(const KeyphraseSet& kps, std::size_t n) {
  if (n == 0 || n % 2 != 0) throw std::invalid_argument("slot count must be even and positive");
  const std::size_t half = n / 2;
  PaddedTargets out;
  auto fill = [&](const std::vector<Phrase>& src, std::vector<Target>& dst) {
    for (std::size_t i = 0; i < std::min(src.size(), half); ++i) dst.emplace_back(src[i]);
    if (src.size() > half) out.truncated += src.size() - half;
    dst.resize(half, std::nullopt);
  };
  fill(kps.present, out.present);
  fill(kps.absent, out.absent);
  return out;
}

KeyphraseSet drop_overlong(const KeyphraseSet& kps, std::size_t max_seq_len) {
  KeyphraseSet out;
  for (const auto& p : kps.present) {
    if (p.size() + 1 <= max_seq_len) out.present.push_back(p);
  }
  for (const auto& p : kps.absent) {
    if (p.size() + 1 <= max_seq_len) out.absent.push_back(p);
  }
  return out;
}

Phrase target_sequence(const Target& t) {
  if (!t) return {special::kNull};
  Phrase seq = *t;
  seq.push_back(special::kEos);
  return seq;
}

}  // namespace kpset
