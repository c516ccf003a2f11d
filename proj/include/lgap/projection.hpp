#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lgap/corpus.hpp"
#include "lgap/embedding_store.hpp"

namespace lgap {

/// Row-major f64 matrix used by the projection code.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }

  static DenseMatrix from_embeddings(const EmbeddingMatrix& m);
};

struct PcaDiagnostics {
  /// Fraction of total variance per retained component, non-increasing.
  std::vector<double> explained_variance_ratio;
  /// k x d, one orthonormal principal direction per row.
  DenseMatrix directions;
};

struct TsneDiagnostics {
  double initial_kl = 0.0;
  /// KL at the end of the early-exaggeration phase.
  double exaggeration_kl = 0.0;
  double final_kl = 0.0;
  std::uint32_t iterations = 0;
  double perplexity = 0.0;
  std::uint64_t seed = 0;
  /// Step size actually used, after the n / exaggeration cap.
  double learning_rate = 0.0;
};

enum class ProjectionMethod { Pca, Tsne };

struct ProjectionResult {
  ProjectionMethod method = ProjectionMethod::Pca;
  /// n x dims coordinates (dims = k for PCA, 2 for t-SNE).
  DenseMatrix coords;
  std::variant<PcaDiagnostics, TsneDiagnostics> diagnostics;

  nlohmann::ordered_json diagnostics_json() const;
};

/// Centered top-k principal components. Each direction is oriented so that its
/// largest-magnitude entry is positive. Zero-variance data yields all-zero
/// coordinates and zero ratios.
ProjectionResult pca_project(const DenseMatrix& x, std::size_t k);
ProjectionResult pca_project(const EmbeddingMatrix& m, std::size_t k);

struct TsneParams {
  double perplexity = 30.0;
  std::uint32_t iterations = 1000;
  std::uint64_t seed = 0;
  /// Upper bound; the step used is min(learning_rate, n / exaggeration).
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  std::uint32_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  /// Inputs wider than this are PCA-reduced first.
  std::size_t pre_reduce_dims = 50;
};

/// Smallest n accepted for a perplexity: ceil(3 * perplexity) + 1.
std::size_t tsne_min_points(double perplexity);

/// Symmetric joint affinities (sum 1) from per-point Gaussian kernels whose
/// bandwidth is bisected to the target perplexity (entropy tolerance 1e-5,
/// at most 50 steps).
DenseMatrix tsne_affinities(const DenseMatrix& x, double perplexity);

/// KL(P||Q) for the Student-t map `y` (n x 2), plus its gradient with respect
/// to y computed against `exaggeration * P`.
double tsne_kl_gradient(const DenseMatrix& p, const DenseMatrix& y, DenseMatrix* grad, double exaggeration = 1.0);

/// Exact t-SNE to 2-D. Deterministic in (input, params).
ProjectionResult tsne_project(const DenseMatrix& x, const TsneParams& params);
ProjectionResult tsne_project(const EmbeddingMatrix& m, const TsneParams& params);

enum class ScatterFormat { Csv, Svg };

/// Shortest round-trip decimal with a trailing ".0" for integral values.
std::string format_coordinate(double v);

/// CSV "id,x,y,label" or a self-contained SVG scatter. Byte-deterministic.
std::string render_scatter(const ProjectionResult& p, std::span<const Label> labels, std::span<const std::uint64_t> ids,
                           ScatterFormat format);
void emit_scatter(const ProjectionResult& p, std::span<const Label> labels, std::span<const std::uint64_t> ids,
                  const std::filesystem::path& path, ScatterFormat format);

}  // namespace lgap
