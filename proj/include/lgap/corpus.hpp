#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lgap/resources.hpp"

namespace lgap {

enum class Label : std::uint8_t { Clean = 0, Prefix = 1, Suffix = 2, Obfuscated = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<Label, kNumClasses> kLabels{Label::Clean, Label::Prefix, Label::Suffix, Label::Obfuscated};

std::string_view label_name(Label label) noexcept;
inline std::size_t label_index(Label label) noexcept { return static_cast<std::size_t>(label); }

/// Obfuscation operator kinds, listed in the order O(x) applies them.
enum class OperatorKind { FragmentEmbed, Homoglyph, ZeroWidth, Noise };

std::string_view operator_name(OperatorKind kind) noexcept;
OperatorKind operator_from_name(std::string_view name);

enum class InjectionMode { Prefix, Suffix };
enum class Fragmentation { Full, Fragmented };

/// One applied operator. `params` holds everything replay needs besides the
/// seed (rate, bank/table/charset id, fragment choice, ...).
struct OperatorRecord {
  OperatorKind kind{};
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> positions;

  bool operator==(const OperatorRecord&) const = default;
};

struct Prompt {
  std::uint64_t id = 0;
  std::string text;
  Label label = Label::Clean;
  std::optional<std::uint64_t> base_id;
  std::vector<OperatorRecord> trace;

  bool operator==(const Prompt&) const = default;
};

struct OperatorProbabilities {
  double fragment_embed = 0.7;
  double homoglyph = 0.7;
  double zero_width = 0.7;
  double noise = 0.7;

  double of(OperatorKind kind) const noexcept;
};

struct CorpusConfig {
  std::uint64_t per_class = 10000;
  std::string templates = "default";
  std::string fragments = "default";
  std::string homoglyphs = "default";
  std::string charset = "default";
  OperatorProbabilities p_op;
  double homoglyph_rate = 0.2;
  double zero_width_rate = 0.12;
  std::pair<std::uint32_t, std::uint32_t> noise_count{1, 3};
  /// Probability that an injected fragment is a strict token sub-span.
  double fragmented_rate = 0.5;
  std::uint64_t seed = 0;
  std::array<double, 3> split{0.8, 0.1, 0.1};

  /// Every violated constraint, in field order. Empty when valid.
  std::vector<std::string> errors() const;
  void validate() const;
};

/// Train/val/test, each sorted by prompt id.
struct Dataset {
  std::array<std::vector<Prompt>, 3> splits;

  std::vector<Prompt> all() const;
};

inline constexpr std::array<std::string_view, 3> kSplitNames{"train", "val", "test"};

/// Low-level fragment embedding: returns the new text and the FragmentEmbed
/// record. Draws: below(#fragments); if Fragmented, span length
/// 1 + below(T - 1) then start below(T - len + 1) over the T tokens.
std::pair<std::string, OperatorRecord> embed_fragment(std::string_view text, InjectionMode mode,
                                                      Fragmentation fragmentation, const FragmentBank& bank,
                                                      std::uint64_t seed);

class CorpusGenerator {
 public:
  /// Loads every bank named by the config.
  explicit CorpusGenerator(CorpusConfig config);
  CorpusGenerator(CorpusConfig config, Resources resources);

  const CorpusConfig& config() const noexcept { return config_; }
  const Resources& resources() const noexcept { return resources_; }

  /// n Clean prompts with ids first_id, first_id+1, ... Draws per prompt:
  /// below(#templates), then below(#words) for each slot left to right.
  std::vector<Prompt> generate_clean(std::size_t n, std::uint64_t seed, std::uint64_t first_id = 0) const;

  Prompt apply_injection(const Prompt& base, InjectionMode mode, Fragmentation fragmentation, std::uint64_t seed,
                         std::uint64_t id) const;

  /// The stochastic obfuscation O(x). Master draws, per kind in application
  /// order: bernoulli(p_kind) then next() as that operator's seed; afterwards
  /// below(2) for prefix/suffix and bernoulli(fragmented_rate). If the text
  /// still equals the base when Noise is reached (in particular when no
  /// Bernoulli succeeds), Noise is forced with a minimum count of one.
  Prompt obfuscate(const Prompt& base, std::uint64_t seed, std::uint64_t id) const;

  /// Re-applies `trace` to `base_text`. Throws DataError if a recomputed
  /// operator disagrees with its recorded positions.
  std::string replay(std::string_view base_text, const std::vector<OperatorRecord>& trace) const;

  /// Full corpus: config.per_class prompts per label, stratified splits.
  Dataset build_dataset() const;

 private:
  CorpusConfig config_;
  Resources resources_;
};

nlohmann::ordered_json to_json(const Prompt& p);
Prompt prompt_from_json(const nlohmann::ordered_json& j);

/// One compact JSON object per line, LF-terminated.
std::string to_jsonl(const std::vector<Prompt>& prompts);
std::vector<Prompt> parse_jsonl(std::string_view text);

std::vector<Prompt> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::vector<Prompt>& prompts, const std::filesystem::path& path);

/// Writes train.jsonl, val.jsonl and test.jsonl under `dir`; returns their paths.
std::array<std::filesystem::path, 3> write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Writes `bytes` to `path` via a ".partial" sibling renamed on success.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace lgap
