#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lgap/corpus.hpp"
#include "lgap/embedding_store.hpp"
#include "lgap/geometry.hpp"

namespace lgap {

struct ProbeConfig {
  double learning_rate = 8.0;
  std::uint32_t epochs = 3000;
  double l2 = 1e-5;
  std::uint64_t seed = 0;
  /// Validation macro-F1 is checked every `eval_interval` epochs; training
  /// stops after `patience` checks without improvement and keeps the best.
  std::uint32_t eval_interval = 100;
  std::uint32_t patience = 4;
};

/// Multinomial logistic regression over frozen embeddings. One epoch is one
/// full-batch gradient step.
struct ProbeModel {
  std::size_t d = 0;
  /// d x 4, row-major.
  std::vector<double> weights;
  std::array<double, kNumClasses> bias{};
  ProbeConfig config;
  std::string encoder_id;
  std::uint32_t epochs_run = 0;
  /// Training objective before each step, then once after the last one.
  std::vector<double> loss_history;

  std::array<double, kNumClasses> logits(std::span<const float> x) const;
  Label predict(std::span<const float> x) const;
};

/// Index of the largest logit; ties go to the lowest class index.
std::size_t argmax_lowest(std::span<const double, kNumClasses> logits) noexcept;

/// Mean cross-entropy plus (l2 / 2) * ||W||^2.
double probe_objective(const ProbeModel& model, const EmbeddingMatrix& x, std::span<const Label> labels);

ProbeModel train_probe(const EmbeddingMatrix& train, std::span<const Label> train_labels, const EmbeddingMatrix& val,
                       std::span<const Label> val_labels, const ProbeConfig& config);

using ConfusionMatrix = std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses>;

/// Rows are true classes, columns predicted. Zero denominators give 0.
struct ClassificationReport {
  ConfusionMatrix confusion{};
  std::uint64_t total = 0;
  double accuracy = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;

  static ClassificationReport from_confusion(const ConfusionMatrix& confusion);
  nlohmann::ordered_json to_json() const;
  static ClassificationReport from_json(const nlohmann::json& j);
};

ClassificationReport evaluate(const ProbeModel& model, const EmbeddingMatrix& test, std::span<const Label> labels);

struct GapThresholds {
  double f1 = 0.95;
  double margin_ratio = 0.1;
};

struct GapReport {
  ClassificationReport classification;
  GeometryReport geometry;
  double margin_ratio = 0.0;
  bool collapse_flag = false;
  GapThresholds thresholds;

  nlohmann::ordered_json to_json() const;
};

/// margin_ratio = delta / mean(clean, obfuscated); collapse_flag is
/// macro-F1 >= thresholds.f1 and margin_ratio <= thresholds.margin_ratio.
GapReport gap_report(const ClassificationReport& cls, const GeometryReport& geo, const GapThresholds& thresholds = {});

/// PGPR layout, little-endian: magic "PGPR", u32 version, u64 d, u64 4,
/// d*4 f64 weights (row-major), 4 f64 biases.
std::string encode_probe(const ProbeModel& model);
ProbeModel decode_probe(std::string_view bytes);
void write_probe(const ProbeModel& model, const std::filesystem::path& path);
ProbeModel read_probe(const std::filesystem::path& path);

}  // namespace lgap
