#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "lgap/embedding_store.hpp"

namespace lgap::test {

/// Reference draw mappings over a raw mt19937_64, written from the documented
/// contract without touching lgap::Rng.
class RefRng {
 public:
  explicit RefRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double unit() { return std::ldexp(static_cast<double>(engine_() >> 11), -53); }

  std::uint64_t below(std::uint64_t n) {
    const auto limit = static_cast<std::uint64_t>((static_cast<unsigned __int128>(1) << 64) % n);
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= limit) return x % n;
    }
  }

  bool bernoulli(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Minimal UTF-8 encoder used to build expected strings.
inline std::string to_utf8(const std::u32string& cps) {
  std::string out;
  for (char32_t c : cps) {
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else if (c < 0x800) {
      out += static_cast<char>(0xC0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
      out += static_cast<char>(0xE0 | (c >> 12));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (c >> 18));
      out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    }
  }
  return out;
}

inline std::filesystem::path golden_dir() { return LGAP_GOLDEN_DIR; }

/// Compares `actual` with tests/golden/<name>.json. With LGAP_UPDATE_GOLDEN=1
/// the file is rewritten instead.
inline void check_golden(const std::string& name, const nlohmann::ordered_json& actual) {
  const auto path = golden_dir() / (name + ".json");
  const char* update = std::getenv("LGAP_UPDATE_GOLDEN");
  if (update && std::string(update) == "1") {
    std::ofstream(path, std::ios::binary) << actual.dump(2, ' ', true) << '\n';
    return;
  }
  std::ifstream in(path, std::ios::binary);
  ASSERT_TRUE(in) << "missing golden " << path;
  std::stringstream ss;
  ss << in.rdbuf();
  const auto expected = nlohmann::ordered_json::parse(ss.str());
  EXPECT_EQ(expected, actual) << "golden " << name << " differs";
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("lgap-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
}

/// n x d matrix with N(0, scale^2) entries from std::normal_distribution.
inline EmbeddingMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, scale);
  EmbeddingMatrix m;
  m.n = n;
  m.d = d;
  m.data.resize(n * d);
  for (auto& v : m.data) v = static_cast<float>(dist(gen));
  m.encoder_id = "test";
  return m;
}

inline EmbeddingMatrix matrix_from_rows(const std::vector<std::vector<float>>& rows) {
  EmbeddingMatrix m;
  m.n = rows.size();
  m.d = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) m.data.insert(m.data.end(), r.begin(), r.end());
  m.encoder_id = "test";
  return m;
}

}  // namespace lgap::test
