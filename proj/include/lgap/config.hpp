#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lgap/corpus.hpp"
#include "lgap/embedding_store.hpp"
#include "lgap/evaluation.hpp"
#include "lgap/geometry.hpp"
#include "lgap/projection.hpp"

namespace lgap {

inline constexpr std::string_view kConfigVersion = "1";

/// Stage names used for seed derivation: stage_seed(master, name).
inline constexpr std::array<std::string_view, 5> kStages{"corpus", "encoder", "geometry", "projection", "probe"};

struct StageSeeds {
  std::uint64_t corpus = 0;
  std::uint64_t encoder = 0;
  std::uint64_t geometry = 0;
  std::uint64_t projection = 0;
  std::uint64_t probe = 0;

  static StageSeeds derive(std::uint64_t master);
};

/// Fully resolved pipeline configuration.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "lgap-out";
  unsigned threads = 1;
  CorpusConfig corpus;
  std::optional<HashEncoderParams> builtin_encoder;
  /// PGEM paths for train/val/test when embeddings come from outside.
  std::optional<std::array<std::string, 3>> external_embeddings;
  std::string geometry_split = "train";
  EstimatorConfig estimator;
  std::string projection_split = "train";
  std::vector<std::string> projection_methods{"pca", "tsne"};
  TsneParams tsne;
  ProbeConfig probe;
  GapThresholds gap;
  StageSeeds seeds;

  nlohmann::ordered_json to_json() const;
};

/// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> per_class;

  static ConfigOverrides from_json(std::string_view text);
};

struct ConfigValidation {
  std::optional<RunConfig> config;
  /// Every problem found, not just the first.
  std::vector<std::string> errors;
};

/// Parses and validates a UTF-8 JSON run config. Empty input is treated as {}.
ConfigValidation validate_config(std::string_view text, const ConfigOverrides& overrides = {});

std::size_t split_index(std::string_view name);

}  // namespace lgap
