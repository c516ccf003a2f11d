#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgap/corpus.hpp"
#include "lgap/digest.hpp"

namespace lgap {

/// n x d row-major f32 embeddings aligned line-by-line to a prompt file.
struct EmbeddingMatrix {
  std::uint64_t n = 0;
  std::uint64_t d = 0;
  std::vector<float> data;
  std::string encoder_id;
  Digest prompt_file_digest{};

  std::span<const float> row(std::size_t i) const { return {data.data() + i * d, d}; }

  /// Throws DataError naming the first row holding NaN/Inf.
  void check_finite() const;

  bool operator==(const EmbeddingMatrix&) const = default;
};

/// Character n-gram feature hashing. Each text is wrapped in the markers
/// U+0002 / U+0003 so n-grams see the text boundaries; every n-gram is hashed
/// (FNV-1a over little-endian 32-bit code points, offset basis xor
/// mix64(seed), then mix64) to bucket (h mod 2^32) mod d with sign from bit 63.
struct HashEncoderParams {
  std::uint32_t dim = 256;
  std::uint32_t ngram_min = 2;
  std::uint32_t ngram_max = 4;
  std::uint64_t seed = 0;

  std::string encoder_id() const;
  void validate() const;
};

struct EncodeResult {
  EmbeddingMatrix matrix;
  /// Rows whose accumulated vector was zero (left as the zero vector).
  std::vector<std::size_t> zero_rows;
};

std::uint64_t hash_ngram(std::u32string_view gram, std::uint64_t seed) noexcept;

EncodeResult encode_hash(const std::vector<Prompt>& prompts, const HashEncoderParams& params,
                         const Digest& prompt_file_digest);

inline constexpr char kPgemMagic[4] = {'P', 'G', 'E', 'M'};
inline constexpr std::uint32_t kPgemVersion = 1;
inline constexpr std::uint8_t kPgemDtypeF32 = 1;

/// PGEM layout, little-endian: magic "PGEM", u32 version, u64 n, u64 d,
/// u8 dtype, u16 length + UTF-8 encoder_id, 32-byte digest, n*d f32.
std::string encode_pgem(const EmbeddingMatrix& m);
EmbeddingMatrix decode_pgem(std::string_view bytes);

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

/// DataError unless the matrix was produced from a prompt file with this
/// digest and row count.
void check_alignment(const EmbeddingMatrix& m, const Digest& prompt_file_digest, std::size_t prompt_count);

}  // namespace lgap
