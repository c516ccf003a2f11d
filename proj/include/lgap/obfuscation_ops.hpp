#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lgap/resources.hpp"

namespace lgap {

/// Output of one text operator. `positions` are code-point indices into the
/// operator's *input*, strictly increasing. For insertion operators a position
/// b means "inserted right after input character b"; nothing is ever inserted
/// before character 0.
struct OpResult {
  std::string text;
  std::vector<std::uint32_t> positions;
};

// All operators below take and return UTF-8 and are pure functions of their
// arguments. RNG draw order (see Rng for the draw mappings):
//
//   homoglyph_substitute  for each code point with a table entry, left to right:
//                         unit() < rate, then below(#confusables) if substituted
//   insert_zero_width     for each boundary b = 0..L-1: unit() < rate, then
//                         below(#zero_width) if inserting
//   add_noise             k = lo + below(hi - lo + 1), capped at L; partial
//                         Fisher-Yates over boundaries (k draws of below(L - i));
//                         then one below(#pool) per chosen boundary, ascending

OpResult homoglyph_substitute(std::string_view text, double rate, const HomoglyphTable& table, std::uint64_t seed);

OpResult insert_zero_width(std::string_view text, double rate, const NoiseCharset& charset, std::uint64_t seed);

OpResult add_noise(std::string_view text, std::pair<std::uint32_t, std::uint32_t> count_range,
                   const NoiseCharset& charset, std::uint64_t seed);

/// Removes every code point of the charset's zero-width set. Idempotent.
std::string strip_invisible(std::string_view text, const NoiseCharset& charset = NoiseCharset::builtin());

/// Maps every confusable back to its source character.
std::string unmap_homoglyphs(std::string_view text, const HomoglyphTable& table);

/// Inverse of an insertion operator: drops the characters inserted after the
/// given input positions.
std::string remove_insertions(std::string_view text, const std::vector<std::uint32_t>& positions);

}  // namespace lgap
