#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kpset {

/// Stemmed, lowercased token sequence of a phrase. Equality is stem-level
/// phrase equality, which is what evaluation and the present/absent split use.
struct StemmedPhrase {
  std::vector<std::string> stems;

  bool operator==(const StemmedPhrase&) const = default;
  auto operator<=>(const StemmedPhrase&) const = default;

  /// Space-joined form, handy as a hash key.
  std::string joined() const;
};

/// Original (1980) Porter suffix-stripping algorithm. Input is expected to be
/// lowercase ASCII letters; anything containing another character is
/// returned unchanged.
std::string porter_stem(std::string_view word);

/// Lowercases, splits embedded whitespace and stems every token.
StemmedPhrase normalize_phrase(const std::vector<std::string>& tokens);

std::string to_lower_ascii(std::string_view s);

}  // namespace kpset
