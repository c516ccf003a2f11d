#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "lgap/error.hpp"
#include "lgap/projection.hpp"

namespace lgap {

DenseMatrix DenseMatrix::from_embeddings(const EmbeddingMatrix& m) {
  DenseMatrix x(m.n, m.d);
  std::copy(m.data.begin(), m.data.end(), x.values.begin());
  return x;
}

ProjectionResult pca_project(const DenseMatrix& x, std::size_t k) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  if (n < 2) throw ConfigError("PCA needs at least two rows");
  if (k < 1 || k > std::min(n - 1, d))
    throw ConfigError("PCA component count must be in [1, min(n-1, d)] = [1, " + std::to_string(std::min(n - 1, d)) + "]");

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::MatrixXd centered = Eigen::Map<const RowMajor>(x.values.data(), static_cast<Eigen::Index>(n),
                                                        static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mean = centered.colwise().mean();
  centered.rowwise() -= mean;

  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const double total = cov.trace();

  PcaDiagnostics diag;
  diag.directions = DenseMatrix(k, d);
  diag.explained_variance_ratio.assign(k, 0.0);
  ProjectionResult res;
  res.method = ProjectionMethod::Pca;
  res.coords = DenseMatrix(n, k);

  if (total <= 0.0) {
    for (std::size_t c = 0; c < k; ++c) diag.directions(c, c) = 1.0;
    res.diagnostics = std::move(diag);
    return res;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DataError("PCA eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  for (std::size_t c = 0; c < k; ++c) {
    const auto col = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd v = vectors.col(col).normalized();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (std::size_t j = 0; j < d; ++j) diag.directions(c, j) = v(static_cast<Eigen::Index>(j));
    diag.explained_variance_ratio[c] = std::clamp(values(col) / total, 0.0, 1.0);
    const Eigen::VectorXd proj = centered * v;
    for (std::size_t i = 0; i < n; ++i) res.coords(i, c) = proj(static_cast<Eigen::Index>(i));
  }
  res.diagnostics = std::move(diag);
  return res;
}

ProjectionResult pca_project(const EmbeddingMatrix& m, std::size_t k) {
  return pca_project(DenseMatrix::from_embeddings(m), k);
}

}  // namespace lgap
