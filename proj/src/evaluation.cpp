#include "lgap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Dense>

#include "lgap/error.hpp"
#include "lgap/resources.hpp"

namespace lgap {

using nlohmann::json;
using nlohmann::ordered_json;

std::size_t argmax_lowest(std::span<const double, kNumClasses> logits) noexcept {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c)
    if (logits[c] > logits[best]) best = c;
  return best;
}

std::array<double, kNumClasses> ProbeModel::logits(std::span<const float> x) const {
  std::array<double, kNumClasses> z = bias;
  for (std::size_t k = 0; k < d; ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    for (std::size_t c = 0; c < kNumClasses; ++c) z[c] += xk * weights[k * kNumClasses + c];
  }
  return z;
}

Label ProbeModel::predict(std::span<const float> x) const {
  const auto z = logits(x);
  return kLabels[argmax_lowest(z)];
}

namespace {

void check_shapes(const EmbeddingMatrix& x, std::span<const Label> labels, std::size_t d, const char* what) {
  if (labels.size() != x.n) throw PreconditionError(std::string(what) + ": label count differs from row count");
  if (x.n > 0 && x.d != d) throw ConfigError(std::string(what) + ": embedding dimension " + std::to_string(x.d) +
                                              " does not match probe dimension " + std::to_string(d));
}

std::array<double, kNumClasses> softmax(const std::array<double, kNumClasses>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::array<double, kNumClasses> p{};
  double s = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) s += (p[c] = std::exp(z[c] - mx));
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

double probe_objective(const ProbeModel& model, const EmbeddingMatrix& x, std::span<const Label> labels) {
  check_shapes(x, labels, model.d, "probe_objective");
  double loss = 0.0;
  for (std::size_t i = 0; i < x.n; ++i) {
    const auto z = model.logits(x.row(i));
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    loss += mx + std::log(s) - z[label_index(labels[i])];
  }
  loss /= static_cast<double>(std::max<std::size_t>(x.n, 1));
  double reg = 0.0;
  for (double w : model.weights) reg += w * w;
  return loss + 0.5 * model.config.l2 * reg;
}

ProbeModel train_probe(const EmbeddingMatrix& train, std::span<const Label> train_labels, const EmbeddingMatrix& val,
                       std::span<const Label> val_labels, const ProbeConfig& config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("probe learning rate must be > 0");
  if (config.l2 < 0.0) throw ConfigError("probe L2 weight must be >= 0");
  if (config.eval_interval == 0) throw ConfigError("probe eval_interval must be > 0");
  std::array<std::size_t, kNumClasses> present{};
  for (auto l : train_labels) ++present[label_index(l)];
  if (std::count_if(present.begin(), present.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw ConfigError("probe training needs at least two classes in the training set");

  ProbeModel model;
  model.d = train.d;
  model.weights.assign(train.d * kNumClasses, 0.0);
  model.config = config;
  model.encoder_id = train.encoder_id;
  check_shapes(train, train_labels, model.d, "train_probe");
  check_shapes(val, val_labels, model.d, "train_probe (validation)");

  const bool early_stopping = val.n > 0 && config.patience > 0;
  ProbeModel best = model;
  double best_f1 = -1.0;
  std::uint32_t bad_checks = 0;
  const double inv_n = 1.0 / static_cast<double>(train.n);
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMatrix x = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                          train.data.data(), static_cast<Eigen::Index>(train.n), static_cast<Eigen::Index>(train.d))
                          .cast<double>();
  Eigen::Map<RowMatrix> w(model.weights.data(), static_cast<Eigen::Index>(model.d), kNumClasses);
  RowMatrix z(x.rows(), kNumClasses);
  RowMatrix grad_w(w.rows(), kNumClasses);

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    z.noalias() = x * w;
    std::array<double, kNumClasses> grad_b{};
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      std::array<double, kNumClasses> zi;
      for (std::size_t c = 0; c < kNumClasses; ++c) zi[c] = z(i, static_cast<Eigen::Index>(c)) + model.bias[c];
      auto p = softmax(zi);
      const auto y = label_index(train_labels[static_cast<std::size_t>(i)]);
      loss -= std::log(std::max(p[y], 1e-300));
      p[y] -= 1.0;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        z(i, static_cast<Eigen::Index>(c)) = p[c];
        grad_b[c] += p[c];
      }
    }
    grad_w.noalias() = x.transpose() * z;
    const double reg = w.squaredNorm();
    model.loss_history.push_back(loss * inv_n + 0.5 * config.l2 * reg);

    w -= config.learning_rate * (grad_w * inv_n + config.l2 * w);
    for (std::size_t c = 0; c < kNumClasses; ++c) model.bias[c] -= config.learning_rate * grad_b[c] * inv_n;
    model.epochs_run = epoch + 1;

    if (early_stopping && model.epochs_run % config.eval_interval == 0) {
      const double f1 = evaluate(model, val, val_labels).macro_f1;
      if (f1 > best_f1) {
        best_f1 = f1;
        best = model;
        bad_checks = 0;
      } else if (++bad_checks >= config.patience) {
        break;
      }
    }
  }
  if (early_stopping && best_f1 >= 0.0) {
    const auto history = std::move(model.loss_history);
    const auto ran = model.epochs_run;
    model = std::move(best);
    model.loss_history = history;
    model.epochs_run = ran;
  }
  model.loss_history.push_back(probe_objective(model, train, train_labels));
  return model;
}

// ------------------------------------------------------------------- metrics

ClassificationReport ClassificationReport::from_confusion(const ConfusionMatrix& confusion) {
  ClassificationReport r;
  r.confusion = confusion;
  std::uint64_t correct = 0;
  std::array<std::uint64_t, kNumClasses> row{}, col{};
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      r.total += confusion[t][p];
      row[t] += confusion[t][p];
      col[p] += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  r.accuracy = r.total ? static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    r.precision[c] = col[c] ? tp / static_cast<double>(col[c]) : 0.0;
    r.recall[c] = row[c] ? tp / static_cast<double>(row[c]) : 0.0;
    const double pr = r.precision[c] + r.recall[c];
    r.f1[c] = pr > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / pr : 0.0;
    r.macro_precision += r.precision[c];
    r.macro_recall += r.recall[c];
    r.macro_f1 += r.f1[c];
  }
  r.macro_precision /= kNumClasses;
  r.macro_recall /= kNumClasses;
  r.macro_f1 /= kNumClasses;
  return r;
}

ClassificationReport evaluate(const ProbeModel& model, const EmbeddingMatrix& test, std::span<const Label> labels) {
  check_shapes(test, labels, model.d, "evaluate");
  ConfusionMatrix confusion{};
  for (std::size_t i = 0; i < test.n; ++i)
    ++confusion[label_index(labels[i])][label_index(model.predict(test.row(i)))];
  return ClassificationReport::from_confusion(confusion);
}

ordered_json ClassificationReport::to_json() const {
  ordered_json j;
  j["confusion"] = confusion;
  j["total"] = total;
  j["accuracy"] = accuracy;
  ordered_json per;
  for (auto c : kLabels) {
    const auto i = label_index(c);
    per[std::string(label_name(c))] = {{"precision", precision[i]}, {"recall", recall[i]}, {"f1", f1[i]}};
  }
  j["per_class"] = std::move(per);
  j["macro_precision"] = macro_precision;
  j["macro_recall"] = macro_recall;
  j["macro_f1"] = macro_f1;
  return j;
}

ClassificationReport ClassificationReport::from_json(const json& j) {
  try {
    return from_confusion(j.at("confusion").get<ConfusionMatrix>());
  } catch (const json::exception& e) {
    throw FormatError("classification report", e.what());
  }
}

// ----------------------------------------------------------------------- gap

GapReport gap_report(const ClassificationReport& cls, const GeometryReport& geo, const GapThresholds& thresholds) {
  const auto& co = geo.cell(Label::Clean, Label::Obfuscated);
  if (co.count == 0) throw PreconditionError("geometry report lacks clean/obfuscated pairs");
  GapReport g;
  g.classification = cls;
  g.geometry = geo;
  g.thresholds = thresholds;
  g.margin_ratio = co.mean > 0.0 ? geo.delta.value / co.mean : 0.0;
  g.collapse_flag = cls.macro_f1 >= thresholds.f1 && g.margin_ratio <= thresholds.margin_ratio;
  return g;
}

ordered_json GapReport::to_json() const {
  ordered_json j;
  j["classification"] = {{"accuracy", classification.accuracy},
                         {"macro_precision", classification.macro_precision},
                         {"macro_recall", classification.macro_recall},
                         {"macro_f1", classification.macro_f1}};
  ordered_json iv;
  for (auto c : kLabels) iv[std::string(label_name(c))] = geometry.intra_var[label_index(c)];
  const auto& co = geometry.cell(Label::Clean, Label::Obfuscated);
  j["geometry"] = {{"delta", geometry.delta.value},
                   {"delta_pair", {geometry.delta.pair.first, geometry.delta.pair.second}},
                   {"clean_obfuscated_mean", co.mean},
                   {"clean_obfuscated_std", co.std},
                   {"intra_var", iv},
                   {"encoder_id", geometry.encoder_id}};
  j["margin_ratio"] = margin_ratio;
  j["collapse_flag"] = collapse_flag;
  j["thresholds"] = {{"f1", thresholds.f1}, {"margin_ratio", thresholds.margin_ratio}};
  return j;
}

// ---------------------------------------------------------------------- PGPR

namespace {

constexpr char kPgprMagic[4] = {'P', 'G', 'P', 'R'};
constexpr std::uint32_t kPgprVersion = 1;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(std::string_view bytes, std::size_t& pos, const char* field) {
  if (bytes.size() - pos < sizeof(T)) throw FormatError(field, "file truncated");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string encode_probe(const ProbeModel& model) {
  std::string out(kPgprMagic, 4);
  put<std::uint32_t>(out, kPgprVersion);
  put<std::uint64_t>(out, model.d);
  put<std::uint64_t>(out, kNumClasses);
  for (double w : model.weights) put<double>(out, w);
  for (double b : model.bias) put<double>(out, b);
  return out;
}

ProbeModel decode_probe(std::string_view bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kPgprMagic, 4))
    throw FormatError("magic", "expected \"PGPR\"");
  pos = 4;
  if (const auto v = get<std::uint32_t>(bytes, pos, "version"); v != kPgprVersion)
    throw FormatError("version", "unsupported version " + std::to_string(v));
  ProbeModel m;
  m.d = get<std::uint64_t>(bytes, pos, "d");
  if (get<std::uint64_t>(bytes, pos, "classes") != kNumClasses) throw FormatError("classes", "expected 4");
  if ((bytes.size() - pos) / 8 != m.d * kNumClasses + kNumClasses || (bytes.size() - pos) % 8 != 0)
    throw FormatError("payload length", "does not match d");
  m.weights.resize(m.d * kNumClasses);
  for (auto& w : m.weights) w = get<double>(bytes, pos, "weights");
  for (auto& b : m.bias) b = get<double>(bytes, pos, "bias");
  for (double w : m.weights)
    if (!std::isfinite(w)) throw DataError("probe weights contain a non-finite value");
  for (double b : m.bias)
    if (!std::isfinite(b)) throw DataError("probe bias contains a non-finite value");
  return m;
}

void write_probe(const ProbeModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_probe(model));
}

ProbeModel read_probe(const std::filesystem::path& path) { return decode_probe(read_text_file(path.string())); }

}  // namespace lgap
