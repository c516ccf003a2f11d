#include "lgap/obfuscation_ops.hpp"

#include <algorithm>
#include <numeric>

#include "lgap/error.hpp"
#include "lgap/rng.hpp"
#include "lgap/utf8.hpp"

namespace lgap {

namespace {

void check_rate(double rate, const char* op) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError(std::string(op) + ": rate must be in [0,1]");
}

}  // namespace

OpResult homoglyph_substitute(std::string_view text, double rate, const HomoglyphTable& table, std::uint64_t seed) {
  check_rate(rate, "homoglyph_substitute");
  auto cps = utf8::decode(text);
  Rng rng(seed);
  OpResult out;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    auto it = table.map.find(cps[i]);
    if (it == table.map.end()) continue;
    if (!rng.bernoulli(rate)) continue;
    cps[i] = it->second[rng.below(it->second.size())];
    out.positions.push_back(static_cast<std::uint32_t>(i));
  }
  out.text = utf8::encode(cps);
  return out;
}

OpResult insert_zero_width(std::string_view text, double rate, const NoiseCharset& charset, std::uint64_t seed) {
  check_rate(rate, "insert_zero_width");
  const auto cps = utf8::decode(text);
  Rng rng(seed);
  std::u32string buf;
  buf.reserve(cps.size() * 2);
  OpResult out;
  for (std::size_t b = 0; b < cps.size(); ++b) {
    buf.push_back(cps[b]);
    if (rng.bernoulli(rate)) {
      buf.push_back(charset.zero_width[rng.below(charset.zero_width.size())]);
      out.positions.push_back(static_cast<std::uint32_t>(b));
    }
  }
  out.text = utf8::encode(buf);
  return out;
}

OpResult add_noise(std::string_view text, std::pair<std::uint32_t, std::uint32_t> count_range,
                   const NoiseCharset& charset, std::uint64_t seed) {
  const auto [lo, hi] = count_range;
  if (lo > hi) throw ConfigError("add_noise: count range min exceeds max");
  const auto cps = utf8::decode(text);
  const auto pool = charset.noise_pool();
  Rng rng(seed);

  const std::uint64_t boundaries = cps.size();
  std::uint64_t k = lo + rng.below(static_cast<std::uint64_t>(hi) - lo + 1);
  k = std::min(k, boundaries);

  std::vector<std::uint32_t> order(boundaries);
  std::iota(order.begin(), order.end(), 0u);
  for (std::uint64_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.below(boundaries - i)]);
  std::vector<std::uint32_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(chosen.begin(), chosen.end());

  std::u32string buf;
  buf.reserve(cps.size() + k);
  std::size_t next = 0;
  for (std::size_t b = 0; b < cps.size(); ++b) {
    buf.push_back(cps[b]);
    if (next < chosen.size() && chosen[next] == b) {
      buf.push_back(pool[rng.below(pool.size())]);
      ++next;
    }
  }
  return {utf8::encode(buf), std::move(chosen)};
}

std::string strip_invisible(std::string_view text, const NoiseCharset& charset) {
  auto cps = utf8::decode(text);
  std::erase_if(cps, [&](char32_t c) { return charset.is_zero_width(c); });
  return utf8::encode(cps);
}

std::string unmap_homoglyphs(std::string_view text, const HomoglyphTable& table) {
  const auto inv = table.inverse();
  auto cps = utf8::decode(text);
  for (auto& c : cps) {
    auto it = inv.find(c);
    if (it != inv.end()) c = it->second;
  }
  return utf8::encode(cps);
}

std::string remove_insertions(std::string_view text, const std::vector<std::uint32_t>& positions) {
  const auto cps = utf8::decode(text);
  std::u32string out;
  out.reserve(cps.size());
  // The j-th insertion sits at output index positions[j] + 1 + j.
  std::size_t j = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (j < positions.size() && i == positions[j] + 1 + j) {
      ++j;
      continue;
    }
    out.push_back(cps[i]);
  }
  if (j != positions.size()) throw DataError("remove_insertions: positions exceed text length");
  return utf8::encode(out);
}

}  // namespace lgap
