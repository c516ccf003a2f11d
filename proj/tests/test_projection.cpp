#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "lgap/error.hpp"
#include "lgap/projection.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace lgap;

namespace {

DenseMatrix random_dense(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  DenseMatrix x(n, d);
  // Distinct column scales keep the eigenvalues well separated.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = dist(gen) * (1.0 + static_cast<double>(d - j));
  return x;
}

DenseMatrix two_blobs(std::size_t per_blob, double gap, std::uint64_t seed, std::size_t d = 5) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  DenseMatrix x(2 * per_blob, d);
  for (std::size_t i = 0; i < 2 * per_blob; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = dist(gen) + (i >= per_blob && j == 0 ? gap : 0.0);
  return x;
}

/// KL(P||Q) evaluated directly from the definitions, for finite differences.
double ref_kl(const DenseMatrix& p, const DenseMatrix& y) {
  const std::size_t n = y.rows;
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
        z += 1.0 / (1.0 + dx * dx + dy * dy);
      }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
      const double q = 1.0 / (1.0 + dx * dx + dy * dy) / z;
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  return kl;
}

}  // namespace

TEST(Pca, LineYEqualsX) {
  DenseMatrix x(5, 2);
  for (std::size_t i = 0; i < 5; ++i) x(i, 0) = x(i, 1) = static_cast<double>(i) - 1.0;
  const auto r = pca_project(x, 1);
  const auto& diag = std::get<PcaDiagnostics>(r.diagnostics);
  EXPECT_NEAR(diag.explained_variance_ratio[0], 1.0, 1e-9);
  const double mean = 1.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const double expected = (x(i, 0) - mean) * 2.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(r.coords(i, 0)), std::abs(expected), 1e-12);
  }
  EXPECT_NEAR(diag.directions(0, 0), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Pca, RatiosSumToOneAtFullRank) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_dense(30, 7, seed);
    const auto r = pca_project(x, 7);
    const auto& ratios = std::get<PcaDiagnostics>(r.diagnostics).explained_variance_ratio;
    EXPECT_NEAR(std::accumulate(ratios.begin(), ratios.end(), 0.0), 1.0, 1e-9);
    for (std::size_t c = 0; c < ratios.size(); ++c) {
      EXPECT_GE(ratios[c], 0.0);
      EXPECT_LE(ratios[c], 1.0);
      if (c > 0) {
        EXPECT_LE(ratios[c], ratios[c - 1]);
      }
    }
  }
}

TEST(Pca, MatchesJacobiOracleUpToSign) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = random_dense(100, 10, 50 + seed);
    const auto r = pca_project(x, 2);
    const auto ref = test::reference_pca(x.values, 100, 10, 2);
    for (std::size_t c = 0; c < 2; ++c) {
      double same = 0.0, flipped = 0.0;
      for (std::size_t i = 0; i < 100; ++i) {
        same = std::max(same, std::abs(r.coords(i, c) - ref.scores[c][i]));
        flipped = std::max(flipped, std::abs(r.coords(i, c) + ref.scores[c][i]));
      }
      EXPECT_LT(std::min(same, flipped), 1e-6) << "seed " << seed << " component " << c;
      EXPECT_NEAR(std::get<PcaDiagnostics>(r.diagnostics).explained_variance_ratio[c], ref.ratios[c], 1e-9);
    }
  }
}

TEST(Pca, CoordinatesAreCentered) {
  const auto x = random_dense(60, 6, 4);
  const auto r = pca_project(x, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < 60; ++i) s += r.coords(i, c);
    EXPECT_LE(std::abs(s / 60), 1e-9 * 7.0);
  }
}

TEST(Pca, RotationLeavesRatiosUnchanged) {
  const auto x = random_dense(50, 3, 12);
  const double a = 0.7, b = -1.1;
  // Rz(a) * Rx(b)
  const double rot[3][3] = {{std::cos(a), -std::sin(a) * std::cos(b), std::sin(a) * std::sin(b)},
                            {std::sin(a), std::cos(a) * std::cos(b), -std::cos(a) * std::sin(b)},
                            {0.0, std::sin(b), std::cos(b)}};
  DenseMatrix y(50, 3);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) y(i, j) += x(i, k) * rot[j][k];
  const auto rx = std::get<PcaDiagnostics>(pca_project(x, 3).diagnostics).explained_variance_ratio;
  const auto ry = std::get<PcaDiagnostics>(pca_project(y, 3).diagnostics).explained_variance_ratio;
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(rx[c], ry[c], 1e-8);
}

TEST(Pca, ZeroVarianceAndErrors) {
  DenseMatrix x(4, 3, 2.5);
  const auto r = pca_project(x, 2);
  for (double v : r.coords.values) EXPECT_EQ(v, 0.0);
  for (double v : std::get<PcaDiagnostics>(r.diagnostics).explained_variance_ratio) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(pca_project(x, 0), ConfigError);
  EXPECT_THROW(pca_project(x, 4), ConfigError);
  EXPECT_THROW(pca_project(DenseMatrix(1, 3), 1), ConfigError);
}

TEST(Tsne, GradientMatchesFiniteDifferences) {
  const auto x = random_dense(10, 4, 8);
  const auto p = tsne_affinities(x, 3.0);
  std::mt19937_64 gen(2);
  std::normal_distribution<double> dist;
  DenseMatrix y(10, 2);
  for (auto& v : y.values) v = dist(gen);
  DenseMatrix grad;
  const double kl = tsne_kl_gradient(p, y, &grad, 1.0);
  EXPECT_NEAR(kl, ref_kl(p, y), 1e-12);
  const double h = 1e-5;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      DenseMatrix plus = y, minus = y;
      plus(i, c) += h;
      minus(i, c) -= h;
      const double fd = (ref_kl(p, plus) - ref_kl(p, minus)) / (2 * h);
      EXPECT_LE(std::abs(fd - grad(i, c)), 1e-4 * std::max(std::abs(fd), 1e-3)) << i << "," << c;
    }
}

TEST(Tsne, AffinitiesAreSymmetricDistributions) {
  const auto x = random_dense(40, 5, 3);
  const auto p = tsne_affinities(x, 10.0);
  double total = 0.0;
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(p(i, i), 0.0);
    for (std::size_t j = 0; j < 40; ++j) {
      EXPECT_NEAR(p(i, j), p(j, i), 1e-15);
      total += p(i, j);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Tsne, KlDescendsAfterExaggerationAndIsDeterministic) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto x = two_blobs(40, 6.0, seed);
    TsneParams params;
    params.perplexity = 10;
    params.iterations = 400;
    params.seed = seed;
    const auto a = tsne_project(x, params);
    const auto& diag = std::get<TsneDiagnostics>(a.diagnostics);
    EXPECT_GE(diag.final_kl, 0.0);
    EXPECT_LE(diag.final_kl, diag.exaggeration_kl);
    EXPECT_EQ(diag.iterations, 400u);
    EXPECT_EQ(diag.learning_rate, 80.0 / 12.0);
    const auto b = tsne_project(x, params);
    EXPECT_EQ(a.coords.values, b.coords.values);
    for (double v : a.coords.values) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Tsne, TwoBlobsSeparate) {
  const auto x = two_blobs(50, 12.0, 99, 8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TsneParams params;
    params.perplexity = 10;
    params.seed = seed;
    const auto r = tsne_project(x, params);
    double c[2][2] = {};
    for (std::size_t i = 0; i < 100; ++i)
      for (std::size_t k = 0; k < 2; ++k) c[i / 50][k] += r.coords(i, k) / 50.0;
    double radius = 0.0;
    for (std::size_t i = 0; i < 100; ++i)
      radius = std::max(radius, std::hypot(r.coords(i, 0) - c[i / 50][0], r.coords(i, 1) - c[i / 50][1]));
    EXPECT_GT(std::hypot(c[0][0] - c[1][0], c[0][1] - c[1][1]), radius) << "seed " << seed;
  }
}

TEST(Tsne, RejectsTooFewPoints) {
  EXPECT_EQ(tsne_min_points(30), 91u);
  TsneParams params;
  EXPECT_THROW(tsne_project(random_dense(1, 3, 0), params), ConfigError);
  try {
    tsne_project(random_dense(20, 3, 0), params);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("91"), std::string::npos);
  }
}

TEST(Scatter, CsvFormattingContract) {
  ProjectionResult p;
  p.coords = DenseMatrix(1, 2);
  const std::vector<Label> labels{Label::Clean};
  const std::vector<std::uint64_t> ids{0};
  EXPECT_EQ(render_scatter(p, labels, ids, ScatterFormat::Csv), "id,x,y,label\n0,0.0,0.0,0\n");
  ProjectionResult empty;
  empty.coords = DenseMatrix(0, 2);
  EXPECT_EQ(render_scatter(empty, {}, {}, ScatterFormat::Csv), "id,x,y,label\n");
}

TEST(Scatter, CoordinateFormatting) {
  EXPECT_EQ(format_coordinate(2.0), "2.0");
  EXPECT_EQ(format_coordinate(-0.5), "-0.5");
  EXPECT_EQ(format_coordinate(0.1), "0.1");
  EXPECT_EQ(std::stod(format_coordinate(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Scatter, SvgIsDeterministicAndWritten) {
  test::TempDir dir("scatter");
  const auto r = pca_project(random_dense(12, 3, 1), 2);
  std::vector<Label> labels;
  std::vector<std::uint64_t> ids;
  for (std::size_t i = 0; i < 12; ++i) {
    labels.push_back(kLabels[i % 4]);
    ids.push_back(i);
  }
  const auto svg = render_scatter(r, labels, ids, ScatterFormat::Svg);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  emit_scatter(r, labels, ids, dir / "p.svg", ScatterFormat::Svg);
  EXPECT_EQ(test::slurp(dir / "p.svg"), svg);
  emit_scatter(r, labels, ids, dir / "p.csv", ScatterFormat::Csv);
  EXPECT_EQ(test::slurp(dir / "p.csv"), render_scatter(r, labels, ids, ScatterFormat::Csv));
}
