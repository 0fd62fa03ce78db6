#include "kpset/textnorm.hpp"

#include <algorithm>
#include <cctype>
#include <initializer_list>
#include <sstream>

namespace kpset {

namespace {

// Working buffer for one word. All predicates follow the definitions of
// consonant, measure, *v*, *d and *o from the original algorithm.
class PorterWord {
 public:
  explicit PorterWord(std::string w) : w_(std::move(w)) {}

  std::string take() && { return std::move(w_); }

  void step1a() {
    if (ends("sses")) {
      replace(4, "ss");
    } else if (ends("ies")) {
      replace(3, "i");
    } else if (ends("ss")) {
      // unchanged
    } else if (ends("s")) {
      replace(1, "");
    }
  }

  void step1b() {
    if (ends("eed")) {
      if (measure(w_.size() - 3) > 0) replace(1, "");
      return;
    }
    std::size_t cut = 0;
    if (ends("ed") && has_vowel(w_.size() - 2)) {
      cut = 2;
    } else if (ends("ing") && has_vowel(w_.size() - 3)) {
      cut = 3;
    } else {
      return;
    }
    w_.resize(w_.size() - cut);

    if (ends("at") || ends("bl") || ends("iz")) {
      w_ += 'e';
    } else if (ends_double_consonant(w_.size())) {
      const char last = w_.back();
      if (last != 'l' && last != 's' && last != 'z') w_.pop_back();
    } else if (measure(w_.size()) == 1 && ends_cvc(w_.size())) {
      w_ += 'e';
    }
  }

  void step1c() {
    if (ends("y") && has_vowel(w_.size() - 1)) w_.back() = 'i';
  }

  void step2() {
    apply_positive_measure({{"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},
                            {"anci", "ance"},   {"izer", "ize"},    {"abli", "able"},
                            {"alli", "al"},     {"entli", "ent"},   {"eli", "e"},
                            {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
                            {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"},
                            {"fulness", "ful"}, {"ousness", "ous"}, {"aliti", "al"},
                            {"iviti", "ive"},   {"biliti", "ble"}});
  }

  void step3() {
    apply_positive_measure({{"icate", "ic"},
                            {"ative", ""},
                            {"alize", "al"},
                            {"iciti", "ic"},
                            {"ical", "ic"},
                            {"ful", ""},
                            {"ness", ""}});
  }

  void step4() {
    static constexpr std::string_view kSuffixes[] = {
        "al",   "ance", "ence", "er", "ic",  "able", "ible", "ant", "ement", "ment",
        "ent",  "ion",  "ou",   "ism", "ate", "iti", "ous",  "ive", "ize"};
    for (std::string_view suffix : kSuffixes) {
      if (!ends(suffix)) continue;
      const std::size_t stem_len = w_.size() - suffix.size();
      bool ok = measure(stem_len) > 1;
      if (suffix == "ion") {
        ok = ok && stem_len > 0 && (w_[stem_len - 1] == 's' || w_[stem_len - 1] == 't');
      }
      if (ok) w_.resize(stem_len);
      return;
    }
  }

  void step5a() {
    if (!ends("e")) return;
    const std::size_t stem_len = w_.size() - 1;
    const int m = measure(stem_len);
    if (m > 1 || (m == 1 && !ends_cvc(stem_len))) w_.resize(stem_len);
  }

  void step5b() {
    if (ends("ll") && measure(w_.size()) > 1) w_.pop_back();
  }

 private:
  bool consonant(std::size_t i) const {
    switch (w_[i]) {
      case 'a':
      case 'e':
      case 'i':
      case 'o':
      case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !consonant(i - 1);
      default:
        return true;
    }
  }

  // Number of VC sequences in w_[0, len).
  int measure(std::size_t len) const {
    int m = 0;
    bool prev_vowel = false;
    for (std::size_t i = 0; i < len; ++i) {
      const bool c = consonant(i);
      if (c && prev_vowel) ++m;
      prev_vowel = !c;
    }
    return m;
  }

  bool has_vowel(std::size_t len) const {
    for (std::size_t i = 0; i < len; ++i) {
      if (!consonant(i)) return true;
    }
    return false;
  }

  bool ends_double_consonant(std::size_t len) const {
    return len >= 2 && w_[len - 1] == w_[len - 2] && consonant(len - 1);
  }

  bool ends_cvc(std::size_t len) const {
    if (len < 3) return false;
    const char last = w_[len - 1];
    return consonant(len - 3) && !consonant(len - 2) && consonant(len - 1) && last != 'w' &&
           last != 'x' && last != 'y';
  }

  bool ends(std::string_view suffix) const {
    return w_.size() >= suffix.size() &&
           std::string_view(w_).substr(w_.size() - suffix.size()) == suffix;
  }

  void replace(std::size_t n_drop, std::string_view with) {
    w_.resize(w_.size() - n_drop);
    w_ += with;
  }

  struct Rule {
    std::string_view suffix;
    std::string_view replacement;
  };

  // First rule whose suffix matches decides; its condition is (m > 0).
  void apply_positive_measure(std::initializer_list<Rule> rules) {
    for (const Rule& r : rules) {
      if (!ends(r.suffix)) continue;
      if (measure(w_.size() - r.suffix.size()) > 0) replace(r.suffix.size(), r.replacement);
      return;
    }
  }

  std::string w_;
};

}  // namespace

std::string StemmedPhrase::joined() const {
  std::string out;
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (i) out += ' ';
    out += stems[i];
  }
  return out;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string porter_stem(std::string_view word) {
  if (word.empty() ||
      !std::all_of(word.begin(), word.end(), [](char c) { return c >= 'a' && c <= 'z'; })) {
    return std::string(word);
  }
  PorterWord w{std::string(word)};
  w.step1a();
  w.step1b();
  w.step1c();
  w.step2();
  w.step3();
  w.step4();
  w.step5a();
  w.step5b();
  return std::move(w).take();
}

StemmedPhrase normalize_phrase(const std::vector<std::string>& tokens) {
  StemmedPhrase out;
  for (const std::string& tok : tokens) {
    std::istringstream parts(to_lower_ascii(tok));
    std::string part;
    while (parts >> part) out.stems.push_back(porter_stem(part));
  }
  return out;
}

}  // namespace kpset
