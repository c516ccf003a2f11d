#include <algorithm>
#include <cmath>
#include <limits>

#include "lgap/error.hpp"
#include "lgap/parallel.hpp"
#include "lgap/projection.hpp"
#include "lgap/rng.hpp"

namespace lgap {

namespace {

constexpr double kEntropyTolerance = 1e-5;
constexpr int kMaxBisectionSteps = 50;
constexpr double kMinGain = 0.01;
constexpr double kInitStd = 1e-4;
constexpr double kJitterStd = 1e-6;

DenseMatrix squared_distances(const DenseMatrix& x) {
  const std::size_t n = x.rows;
  DenseMatrix d2(n, n);
  parallel_for(n, [&](std::size_t i) {
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto xj = x.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) {
        const double diff = xi[k] - xj[k];
        s += diff * diff;
      }
      d2(i, j) = s;
    }
  });
  return d2;
}

/// Conditional distribution p_{j|i} for one row, bisecting the Gaussian
/// precision until the row entropy matches log(perplexity).
void calibrate_row(const DenseMatrix& d2, std::size_t i, double perplexity, DenseMatrix& p) {
  const std::size_t n = d2.rows;
  const double target = std::log(perplexity);
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) dmin = std::min(dmin, d2(i, j));

  double beta = 1.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int step = 0; step < kMaxBisectionSteps; ++step) {
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        p(i, j) = 0.0;
        continue;
      }
      const double shifted = d2(i, j) - dmin;
      const double w = std::exp(-beta * shifted);
      p(i, j) = w;
      sum += w;
      weighted += shifted * w;
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    for (std::size_t j = 0; j < n; ++j) p(i, j) /= sum;
    const double diff = entropy - target;
    if (std::abs(diff) < kEntropyTolerance) break;
    if (diff > 0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
    } else {
      hi = beta;
      beta = std::isinf(lo) ? beta / 2.0 : (beta + lo) / 2.0;
    }
  }
}

}  // namespace

std::size_t tsne_min_points(double perplexity) {
  return static_cast<std::size_t>(std::ceil(3.0 * perplexity)) + 1;
}

DenseMatrix tsne_affinities(const DenseMatrix& x, double perplexity) {
  const std::size_t n = x.rows;
  const auto d2 = squared_distances(x);
  DenseMatrix cond(n, n);
  parallel_for(n, [&](std::size_t i) { calibrate_row(d2, i, perplexity, cond); });
  DenseMatrix p(n, n);
  const double norm = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p(i, j) = (cond(i, j) + cond(j, i)) / norm;
  return p;
}

double tsne_kl_gradient(const DenseMatrix& p, const DenseMatrix& y, DenseMatrix* grad, double exaggeration) {
  const std::size_t n = y.rows;
  const std::size_t dims = y.cols;
  DenseMatrix w(n, n);
  std::vector<double> row_sum(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double dist = 0.0;
      for (std::size_t k = 0; k < dims; ++k) {
        const double diff = y(i, k) - y(j, k);
        dist += diff * diff;
      }
      w(i, j) = 1.0 / (1.0 + dist);
      s += w(i, j);
    }
    row_sum[i] = s;
  });
  double z = 0.0;
  for (double s : row_sum) z += s;

  std::vector<double> row_kl(n, 0.0);
  if (grad) *grad = DenseMatrix(n, dims);
  parallel_for(n, [&](std::size_t i) {
    double kl = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double q = std::max(w(i, j) / z, std::numeric_limits<double>::min());
      const double pij = p(i, j);
      if (pij > 0.0) kl += pij * std::log(pij / q);
      if (grad) {
        const double mult = 4.0 * (exaggeration * pij - w(i, j) / z) * w(i, j);
        for (std::size_t k = 0; k < dims; ++k) (*grad)(i, k) += mult * (y(i, k) - y(j, k));
      }
    }
    row_kl[i] = kl;
  });
  double kl = 0.0;
  for (double v : row_kl) kl += v;
  return kl;
}

ProjectionResult tsne_project(const DenseMatrix& input, const TsneParams& params) {
  const std::size_t n = input.rows;
  if (params.perplexity < 2.0) throw ConfigError("t-SNE perplexity must be >= 2");
  if (n < tsne_min_points(params.perplexity))
    throw ConfigError("t-SNE with perplexity " + std::to_string(params.perplexity) + " needs at least " +
                      std::to_string(tsne_min_points(params.perplexity)) + " points, got " + std::to_string(n));

  DenseMatrix x = input;
  if (x.cols > params.pre_reduce_dims) x = pca_project(x, std::min(params.pre_reduce_dims, n - 1)).coords;

  const auto p = tsne_affinities(x, params.perplexity);

  // Initial map: top-2 principal coordinates rescaled to std 1e-4, plus jitter.
  DenseMatrix y(n, 2);
  if (x.cols >= 2) {
    y = pca_project(x, 2).coords;
  } else {
    for (std::size_t i = 0; i < n; ++i) y(i, 0) = x(i, 0);
  }
  for (std::size_t k = 0; k < 2; ++k) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y(i, k);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sq += (y(i, k) - mean) * (y(i, k) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) y(i, k) = sd > 0.0 ? (y(i, k) - mean) * kInitStd / sd : 0.0;
  }
  Rng rng(params.seed);
  for (auto& v : y.values) v += kJitterStd * rng.normal();

  TsneDiagnostics diag;
  diag.perplexity = params.perplexity;
  diag.seed = params.seed;
  diag.iterations = params.iterations;
  diag.learning_rate = std::min(params.learning_rate, static_cast<double>(n) / std::max(params.exaggeration, 1.0));
  diag.initial_kl = tsne_kl_gradient(p, y, nullptr);

  const std::uint32_t exaggerated = std::min(params.exaggeration_iterations, params.iterations);
  DenseMatrix update(n, 2);
  DenseMatrix gains(n, 2, 1.0);
  DenseMatrix grad;
  if (exaggerated == 0) diag.exaggeration_kl = diag.initial_kl;
  for (std::uint32_t it = 0; it < params.iterations; ++it) {
    const bool early = it < params.exaggeration_iterations;
    tsne_kl_gradient(p, y, &grad, early ? params.exaggeration : 1.0);
    const double momentum = early ? params.initial_momentum : params.final_momentum;
    for (std::size_t idx = 0; idx < y.values.size(); ++idx) {
      const double g = grad.values[idx];
      double& gain = gains.values[idx];
      gain = (g > 0.0) != (update.values[idx] > 0.0) ? gain + 0.2 : gain * 0.8;
      gain = std::max(gain, kMinGain);
      update.values[idx] = momentum * update.values[idx] - diag.learning_rate * gain * g;
      y.values[idx] += update.values[idx];
    }
    for (std::size_t k = 0; k < 2; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, k);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, k) -= mean;
    }
    if (it + 1 == exaggerated) diag.exaggeration_kl = tsne_kl_gradient(p, y, nullptr);
  }
  diag.final_kl = tsne_kl_gradient(p, y, nullptr);

  for (double v : y.values)
    if (!std::isfinite(v)) throw DataError("t-SNE diverged to non-finite coordinates");
  ProjectionResult res;
  res.method = ProjectionMethod::Tsne;
  res.coords = std::move(y);
  res.diagnostics = diag;
  return res;
}

ProjectionResult tsne_project(const EmbeddingMatrix& m, const TsneParams& params) {
  return tsne_project(DenseMatrix::from_embeddings(m), params);
}

}  // namespace lgap
