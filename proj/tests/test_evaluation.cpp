#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "lgap/error.hpp"
#include "lgap/evaluation.hpp"
#include "test_support.hpp"

using namespace lgap;

namespace {

struct Labeled {
  EmbeddingMatrix x;
  std::vector<Label> y;
};

/// Class c is a Gaussian blob centered at `spread` * e_c.
Labeled blobs(std::size_t per_class, std::size_t classes, double spread, std::uint64_t seed, std::size_t d = 6) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Labeled out;
  out.x.n = per_class * classes;
  out.x.d = d;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t k = 0; k < d; ++k) out.x.data.push_back(static_cast<float>(dist(gen) + (k == c ? spread : 0.0)));
      out.y.push_back(kLabels[c]);
    }
  return out;
}

ConfusionMatrix example_confusion() { return {{{1, 1, 0, 0}, {0, 2, 0, 0}, {0, 0, 2, 0}, {0, 0, 0, 2}}}; }

ProbeConfig quick(std::uint32_t epochs) {
  ProbeConfig c;
  c.epochs = epochs;
  c.learning_rate = 0.5;
  c.eval_interval = 10;
  c.patience = 1000;
  return c;
}

}  // namespace

TEST(Classification, HandComputedConfusion) {
  const auto r = ClassificationReport::from_confusion(example_confusion());
  EXPECT_EQ(r.total, 8u);
  EXPECT_NEAR(r.accuracy, 7.0 / 8.0, 1e-12);
  EXPECT_NEAR(r.recall[0], 0.5, 1e-12);
  EXPECT_NEAR(r.precision[0], 1.0, 1e-12);
  EXPECT_NEAR(r.precision[1], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.f1[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.f1[1], 0.8, 1e-12);
  EXPECT_NEAR(r.macro_precision, 11.0 / 12.0, 1e-12);
  EXPECT_NEAR(r.macro_recall, 7.0 / 8.0, 1e-12);
  EXPECT_NEAR(r.macro_f1, 13.0 / 15.0, 1e-12);
}

TEST(Classification, PerfectAndEmptyClasses) {
  ConfusionMatrix perfect{};
  for (std::size_t c = 0; c < 4; ++c) perfect[c][c] = 5;
  const auto r = ClassificationReport::from_confusion(perfect);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  ConfusionMatrix sparse{};
  sparse[0][0] = 3;
  const auto s = ClassificationReport::from_confusion(sparse);
  EXPECT_EQ(s.f1[2], 0.0);
  EXPECT_EQ(s.precision[3], 0.0);
}

TEST(Classification, MacroF1InvariantUnderAllRelabelings) {
  std::mt19937_64 gen(6);
  ConfusionMatrix cm = example_confusion();
  for (auto& row : cm)
    for (auto& v : row) v += gen() % 5;
  const double base = ClassificationReport::from_confusion(cm).macro_f1;
  std::array<std::size_t, 4> perm{0, 1, 2, 3};
  int count = 0;
  do {
    ConfusionMatrix p{};
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) p[perm[a]][perm[b]] = cm[a][b];
    EXPECT_NEAR(ClassificationReport::from_confusion(p).macro_f1, base, 1e-15);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(count, 24);
}

TEST(Classification, JsonRoundTrip) {
  const auto r = ClassificationReport::from_confusion(example_confusion());
  const auto back = ClassificationReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(back.macro_f1, r.macro_f1);
}

TEST(Probe, SeparableBlobsReachPerfectTrainingAccuracy) {
  const auto train = blobs(50, 2, 6.0, 1);
  const auto val = blobs(20, 2, 6.0, 2);
  const auto model = train_probe(train.x, train.y, val.x, val.y, quick(200));
  EXPECT_LE(model.epochs_run, 200u);
  const auto rep = evaluate(model, train.x, train.y);
  EXPECT_EQ(rep.accuracy, 1.0);
  EXPECT_EQ(rep.confusion[0][0] + rep.confusion[1][1], 100u);
}

TEST(Probe, ShuffledLabelsStayNearChance) {
  auto train = blobs(100, 4, 0.0, 3);
  auto val = blobs(100, 4, 0.0, 4);
  std::mt19937_64 gen(5);
  std::shuffle(train.y.begin(), train.y.end(), gen);
  std::shuffle(val.y.begin(), val.y.end(), gen);
  const auto model = train_probe(train.x, train.y, val.x, val.y, quick(300));
  const auto rep = evaluate(model, val.x, val.y);
  EXPECT_GE(rep.accuracy, 0.15);
  EXPECT_LE(rep.accuracy, 0.35);
}

TEST(Probe, ZeroEpochsKeepsInitialization) {
  const auto train = blobs(10, 4, 3.0, 6);
  const auto model = train_probe(train.x, train.y, train.x, train.y, quick(0));
  EXPECT_EQ(model.epochs_run, 0u);
  for (double w : model.weights) EXPECT_EQ(w, 0.0);
  for (double b : model.bias) EXPECT_EQ(b, 0.0);
  ASSERT_FALSE(model.loss_history.empty());
  EXPECT_NEAR(model.loss_history.front(), std::log(4.0), 1e-12);
  const auto logits = model.logits(train.x.row(0));
  for (double l : logits) EXPECT_EQ(l, logits[0]);
}

TEST(Probe, LossNonIncreasingAtSmallLearningRate) {
  const auto train = blobs(15, 4, 2.0, 7);
  ProbeConfig cfg = quick(300);
  cfg.learning_rate = 1e-3;
  cfg.patience = 0;
  const auto model = train_probe(train.x, train.y, train.x, train.y, cfg);
  ASSERT_GE(model.loss_history.size(), 300u);
  for (std::size_t i = 1; i < model.loss_history.size(); ++i)
    EXPECT_LE(model.loss_history[i], model.loss_history[i - 1] + 1e-15) << i;
  EXPECT_NEAR(probe_objective(model, train.x, train.y), model.loss_history.back(), 1e-12);
}

TEST(Probe, DeterministicAndEarlyStopping) {
  const auto train = blobs(40, 4, 2.0, 8);
  const auto val = blobs(20, 4, 2.0, 9);
  ProbeConfig cfg;
  cfg.epochs = 3000;
  cfg.eval_interval = 5;
  cfg.patience = 2;
  const auto a = train_probe(train.x, train.y, val.x, val.y, cfg);
  const auto b = train_probe(train.x, train.y, val.x, val.y, cfg);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_LT(a.epochs_run, 3000u);
}

TEST(Probe, PredictionDependsOnlyOnLogitArgmax) {
  const auto train = blobs(20, 4, 2.0, 10);
  auto model = train_probe(train.x, train.y, train.x, train.y, quick(50));
  const auto before = evaluate(model, train.x, train.y);
  for (auto& b : model.bias) b += 17.25;
  const auto after = evaluate(model, train.x, train.y);
  EXPECT_EQ(before.confusion, after.confusion);
  for (std::size_t i = 0; i < train.x.n; ++i) {
    auto logits = model.logits(train.x.row(i));
    const auto pred = label_index(model.predict(train.x.row(i)));
    EXPECT_EQ(pred, argmax_lowest(logits));
    for (auto& l : logits) l -= 3.5;
    EXPECT_EQ(pred, argmax_lowest(logits));
  }
  const std::array<double, 4> tie{1.0, 2.0, 2.0, 0.0};
  EXPECT_EQ(argmax_lowest(tie), 1u);
}

TEST(Probe, ConfusionRowsMatchClassCounts) {
  const auto train = blobs(30, 4, 1.0, 11);
  const auto test = blobs(13, 4, 1.0, 12);
  const auto model = train_probe(train.x, train.y, train.x, train.y, quick(40));
  const auto rep = evaluate(model, test.x, test.y);
  for (const auto& row : rep.confusion) EXPECT_EQ(std::accumulate(row.begin(), row.end(), 0ULL), 13u);
  EXPECT_EQ(rep.total, 52u);
}

TEST(Probe, Errors) {
  const auto one = blobs(10, 1, 0.0, 13);
  EXPECT_THROW(train_probe(one.x, one.y, one.x, one.y, quick(5)), ConfigError);
  const auto train = blobs(10, 4, 1.0, 14);
  const auto model = train_probe(train.x, train.y, train.x, train.y, quick(5));
  const auto wide = blobs(5, 4, 1.0, 15, 9);
  EXPECT_THROW(evaluate(model, wide.x, wide.y), ConfigError);
  ProbeConfig bad = quick(5);
  bad.learning_rate = 0.0;
  EXPECT_THROW(train_probe(train.x, train.y, train.x, train.y, bad), ConfigError);
}

TEST(Probe, PgprRoundTrip) {
  test::TempDir dir("pgpr");
  const auto train = blobs(10, 4, 1.0, 16);
  const auto model = train_probe(train.x, train.y, train.x, train.y, quick(20));
  write_probe(model, dir / "m.pgpr");
  const auto back = read_probe(dir / "m.pgpr");
  EXPECT_EQ(back.weights, model.weights);
  EXPECT_EQ(back.bias, model.bias);
  EXPECT_EQ(back.d, model.d);
  EXPECT_EQ(evaluate(back, train.x, train.y).confusion, evaluate(model, train.x, train.y).confusion);
  auto bytes = encode_probe(model);
  bytes[0] = 'X';
  EXPECT_THROW(decode_probe(bytes), FormatError);
}

TEST(Gap, PublishedDetectorNumbers) {
  ClassificationReport cls;
  cls.macro_f1 = 0.993;
  GeometryReport geo;
  geo.matrix[0][3].mean = geo.matrix[3][0].mean = 24.34;
  geo.matrix[0][3].count = geo.matrix[3][0].count = 1;
  geo.matrix[0][3].min = geo.matrix[3][0].min = 1.02;
  geo.delta.value = 1.02;
  const auto gap = gap_report(cls, geo);
  EXPECT_NEAR(gap.margin_ratio, 1.02 / 24.34, 1e-15);
  EXPECT_NEAR(gap.margin_ratio, 0.0419, 5e-5);
  EXPECT_TRUE(gap.collapse_flag);
  EXPECT_EQ(gap.thresholds.f1, 0.95);
  EXPECT_EQ(gap.thresholds.margin_ratio, 0.1);
  const auto j = gap.to_json();
  EXPECT_TRUE(j.contains("collapse_flag"));
  EXPECT_TRUE(j.contains("margin_ratio"));
}

TEST(Gap, ExtremesAndThresholds) {
  ClassificationReport cls;
  cls.macro_f1 = 1.0;
  GeometryReport geo;
  geo.matrix[0][3].mean = geo.matrix[3][0].mean = 3.0;
  geo.matrix[0][3].count = geo.matrix[3][0].count = 4;
  const auto full = gap_report(cls, geo);
  EXPECT_EQ(full.margin_ratio, 0.0);
  EXPECT_TRUE(full.collapse_flag);
  cls.macro_f1 = 0.5;
  EXPECT_FALSE(gap_report(cls, geo).collapse_flag);
  cls.macro_f1 = 0.9;
  geo.delta.value = 0.75;
  EXPECT_FALSE(gap_report(cls, geo, {0.9, 0.2}).collapse_flag);
  EXPECT_TRUE(gap_report(cls, geo, {0.9, 0.25}).collapse_flag);
  GeometryReport missing;
  EXPECT_THROW(gap_report(cls, missing), PreconditionError);
}
