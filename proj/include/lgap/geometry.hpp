#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lgap/corpus.hpp"
#include "lgap/embedding_store.hpp"

namespace lgap {

/// Row indices into an EmbeddingMatrix, one list per class (the manifolds M_c).
struct ClassPartition {
  std::array<std::vector<std::size_t>, kNumClasses> rows;

  static ClassPartition from_labels(std::span<const Label> labels);
  static ClassPartition from_prompts(const std::vector<Prompt>& prompts);

  const std::vector<std::size_t>& operator[](Label c) const { return rows[label_index(c)]; }

  /// Lists are disjoint, in range and together cover all n rows.
  void validate(std::size_t n) const;
};

/// Euclidean distance statistics over a set of point pairs. `std` is the
/// population standard deviation. A within-set request on a single point has
/// count 0 and all other fields zero.
struct PairStats {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  std::pair<std::uint64_t, std::uint64_t> argmin{0, 0};
  std::uint64_t count = 0;
};

/// Rows per block of the blocked pair evaluation.
inline constexpr std::size_t kGeometryBlockRows = 1024;

/// Exact statistics over a x b, or over the distinct unordered pairs of a when
/// `distinct_only` (then a and b must be the same list). argmin holds row
/// indices. Per-block partial sums are merged in ascending block order, so the
/// result does not depend on the worker count.
PairStats pairwise_stats(const EmbeddingMatrix& m, std::span<const std::size_t> a, std::span<const std::size_t> b,
                         bool distinct_only, std::size_t block_rows = kGeometryBlockRows);

/// (1/|M|^2) * sum over all ordered pairs (i=j included) of squared distances,
/// evaluated as 2 * mean squared deviation from the centroid.
double intra_class_variance(const EmbeddingMatrix& m, std::span<const std::size_t> rows);

struct Margin {
  double value = 0.0;
  /// (clean row, obfuscated row), or prompt ids inside a GeometryReport.
  std::pair<std::uint64_t, std::uint64_t> pair{0, 0};
};

/// Exact minimum clean-obfuscated distance and the pair realizing it.
Margin clean_obfuscated_margin(const EmbeddingMatrix& m, std::span<const std::size_t> clean,
                               std::span<const std::size_t> obf);

struct EstimatorConfig {
  enum class Mode { Auto, Exact, Sampled };
  Mode mode = Mode::Auto;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
};

/// Above this many pairs in total, Auto refuses and an explicit mode is needed.
inline constexpr std::uint64_t kAutoExactPairLimit = 20'000'000;

std::uint64_t total_report_pairs(const ClassPartition& part);

struct GeometryReport {
  /// Class order follows the Label enum. Diagonal: distinct unordered pairs
  /// within a class. Off-diagonal: the full cross product. argmin pairs are
  /// prompt ids, ordered (row class, column class).
  std::array<std::array<PairStats, kNumClasses>, kNumClasses> matrix{};
  std::array<double, kNumClasses> intra_var{};
  Margin delta;
  bool sampled = false;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  /// Standard error of each cell's sampled mean; zero for exact cells.
  std::array<std::array<double, kNumClasses>, kNumClasses> standard_error{};
  std::string encoder_id;
  Digest prompt_file_digest{};

  const PairStats& cell(Label a, Label b) const { return matrix[label_index(a)][label_index(b)]; }

  nlohmann::ordered_json to_json() const;
  static GeometryReport from_json(const nlohmann::json& j);
};

/// Fills all ten unique cells, the four intra-class variances and delta.
/// `ids` maps rows to prompt ids (empty: ids are row indices). Minima and delta
/// are always exact; Sampled only affects mean/std.
GeometryReport geometry_report(const EmbeddingMatrix& m, const ClassPartition& part, const EstimatorConfig& estimator,
                               std::span<const std::uint64_t> ids = {});

}  // namespace lgap
