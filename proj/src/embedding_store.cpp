#include "lgap/embedding_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "lgap/error.hpp"
#include "lgap/parallel.hpp"
#include "lgap/resources.hpp"
#include "lgap/rng.hpp"
#include "lgap/utf8.hpp"

namespace lgap {

static_assert(std::endian::native == std::endian::little, "PGEM I/O assumes a little-endian host");

void EmbeddingMatrix::check_finite() const {
  if (data.size() != n * d) throw DataError("embedding matrix holds " + std::to_string(data.size()) + " values, expected n*d");
  for (std::size_t i = 0; i < n; ++i)
    for (float v : row(i))
      if (!std::isfinite(v)) throw DataError("non-finite value in row " + std::to_string(i));
}

// ------------------------------------------------------------------ encoder

std::string HashEncoderParams::encoder_id() const {
  return "hash-v1 d=" + std::to_string(dim) + " ngram=" + std::to_string(ngram_min) + "-" + std::to_string(ngram_max) +
         " seed=" + std::to_string(seed);
}

void HashEncoderParams::validate() const {
  if (dim < 2) throw ConfigError("hash encoder: d must be >= 2");
  if (ngram_min < 1 || ngram_min > ngram_max || ngram_max > 8)
    throw ConfigError("hash encoder: n-gram range must satisfy 1 <= min <= max <= 8");
}

std::uint64_t hash_ngram(std::u32string_view gram, std::uint64_t seed) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL ^ mix64(seed);
  for (char32_t cp : gram) {
    for (int b = 0; b < 4; ++b) {
      h ^= (static_cast<std::uint32_t>(cp) >> (8 * b)) & 0xFFu;
      h *= 0x100000001B3ULL;
    }
  }
  return mix64(h);
}

EncodeResult encode_hash(const std::vector<Prompt>& prompts, const HashEncoderParams& params,
                         const Digest& prompt_file_digest) {
  params.validate();
  EncodeResult res;
  auto& m = res.matrix;
  m.n = prompts.size();
  m.d = params.dim;
  m.data.assign(m.n * m.d, 0.0f);
  m.encoder_id = params.encoder_id();
  m.prompt_file_digest = prompt_file_digest;

  std::vector<char> zero(m.n, 0);
  parallel_for(prompts.size(), [&](std::size_t i) {
    std::u32string cps = U"\u0002";
    cps += utf8::decode(prompts[i].text);
    cps += U'\u0003';
    std::vector<double> acc(m.d, 0.0);
    for (std::size_t len = params.ngram_min; len <= params.ngram_max; ++len) {
      for (std::size_t s = 0; s + len <= cps.size(); ++s) {
        const auto h = hash_ngram(std::u32string_view(cps).substr(s, len), params.seed);
        acc[(h & 0xFFFFFFFFULL) % m.d] += (h >> 63) ? -1.0 : 1.0;
      }
    }
    double norm2 = 0.0;
    for (double v : acc) norm2 += v * v;
    if (norm2 == 0.0) {
      zero[i] = 1;
      return;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    float* out = m.data.data() + i * m.d;
    for (std::size_t k = 0; k < m.d; ++k) out[k] = static_cast<float>(acc[k] * inv);
  });
  for (std::size_t i = 0; i < zero.size(); ++i)
    if (zero[i]) res.zero_rows.push_back(i);
  return res;
}

// --------------------------------------------------------------------- PGEM

namespace {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* field) {
    T v;
    std::memcpy(&v, take(sizeof(T), field).data(), sizeof(T));
    return v;
  }

  std::string_view take(std::size_t count, const char* field) {
    if (bytes_.size() - pos_ < count) throw FormatError(field, "file truncated");
    auto s = bytes_.substr(pos_, count);
    pos_ += count;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_pgem(const EmbeddingMatrix& m) {
  if (m.data.size() != m.n * m.d) throw PreconditionError("embedding matrix size does not match n*d");
  if (m.encoder_id.size() > std::numeric_limits<std::uint16_t>::max())
    throw PreconditionError("encoder_id longer than 65535 bytes");
  m.check_finite();
  std::string out;
  out.reserve(4 + 4 + 8 + 8 + 1 + 2 + m.encoder_id.size() + 32 + m.data.size() * 4);
  out.append(kPgemMagic, 4);
  put<std::uint32_t>(out, kPgemVersion);
  put<std::uint64_t>(out, m.n);
  put<std::uint64_t>(out, m.d);
  put<std::uint8_t>(out, kPgemDtypeF32);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(m.encoder_id.size()));
  out += m.encoder_id;
  out.append(reinterpret_cast<const char*>(m.prompt_file_digest.data()), m.prompt_file_digest.size());
  out.append(reinterpret_cast<const char*>(m.data.data()), m.data.size() * sizeof(float));
  return out;
}

EmbeddingMatrix decode_pgem(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != std::string_view(kPgemMagic, 4)) throw FormatError("magic", "expected \"PGEM\"");
  if (const auto v = r.get<std::uint32_t>("version"); v != kPgemVersion)
    throw FormatError("version", "unsupported version " + std::to_string(v));
  EmbeddingMatrix m;
  m.n = r.get<std::uint64_t>("n");
  m.d = r.get<std::uint64_t>("d");
  if (const auto dt = r.get<std::uint8_t>("dtype"); dt != kPgemDtypeF32)
    throw FormatError("dtype", "unsupported dtype " + std::to_string(dt));
  const auto id_len = r.get<std::uint16_t>("encoder_id");
  m.encoder_id = std::string(r.take(id_len, "encoder_id"));
  const auto digest = r.take(32, "digest");
  std::memcpy(m.prompt_file_digest.data(), digest.data(), 32);

  const std::uint64_t max_values = std::numeric_limits<std::uint64_t>::max() / 4;
  if (m.d != 0 && m.n > max_values / m.d) throw FormatError("payload length", "n*d overflows");
  const std::uint64_t values = m.n * m.d;
  if (r.remaining() != values * 4)
    throw FormatError("payload length", "expected " + std::to_string(values * 4) + " bytes, found " +
                                            std::to_string(r.remaining()));
  m.data.resize(values);
  std::memcpy(m.data.data(), r.take(values * 4, "payload length").data(), values * 4);
  m.check_finite();
  return m;
}

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pgem(m));
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) { return decode_pgem(read_text_file(path.string())); }

void check_alignment(const EmbeddingMatrix& m, const Digest& prompt_file_digest, std::size_t prompt_count) {
  if (m.prompt_file_digest != prompt_file_digest)
    throw DataError("embeddings were computed from a different prompt file (digest " +
                    to_hex(m.prompt_file_digest) + " vs " + to_hex(prompt_file_digest) + ")");
  if (m.n != prompt_count)
    throw DataError("embedding rows (" + std::to_string(m.n) + ") do not match prompt count (" +
                    std::to_string(prompt_count) + ")");
}

}  // namespace lgap
