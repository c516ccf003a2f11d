#include "lgap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lgap/error.hpp"
#include "lgap/parallel.hpp"
#include "lgap/rng.hpp"

namespace lgap {

using nlohmann::json;
using nlohmann::ordered_json;

ClassPartition ClassPartition::from_labels(std::span<const Label> labels) {
  ClassPartition p;
  for (std::size_t i = 0; i < labels.size(); ++i) p.rows[label_index(labels[i])].push_back(i);
  return p;
}

ClassPartition ClassPartition::from_prompts(const std::vector<Prompt>& prompts) {
  ClassPartition p;
  for (std::size_t i = 0; i < prompts.size(); ++i) p.rows[label_index(prompts[i].label)].push_back(i);
  return p;
}

void ClassPartition::validate(std::size_t n) const {
  std::vector<char> seen(n, 0);
  std::size_t total = 0;
  for (const auto& list : rows) {
    for (auto r : list) {
      if (r >= n) throw PreconditionError("partition row " + std::to_string(r) + " out of range");
      if (seen[r]++) throw PreconditionError("partition row " + std::to_string(r) + " appears twice");
    }
    total += list.size();
  }
  if (total != n) throw PreconditionError("partition does not cover every row");
}

namespace {

double squared_distance(std::span<const float> x, std::span<const float> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = static_cast<double>(x[k]) - static_cast<double>(y[k]);
    s += diff * diff;
  }
  return s;
}

/// Squared distance, abandoned (returns > bound) once the partial sum exceeds bound.
double squared_distance_bounded(std::span<const float> x, std::span<const float> y, double bound) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = static_cast<double>(x[k]) - static_cast<double>(y[k]);
    s += diff * diff;
    if (s > bound) return s;
  }
  return s;
}

/// Moments of a block of distances, accumulated around a shift for stability.
struct Moments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void merge(const Moments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double delta = o.mean - mean;
    mean += delta * static_cast<double>(o.count) / n;
    m2 += o.m2 + delta * delta * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }
};

struct ShiftedSums {
  double shift = 0.0;
  double sum = 0.0;
  double sumsq = 0.0;
  std::uint64_t count = 0;

  void add(double x) {
    if (count == 0) shift = x;
    const double y = x - shift;
    sum += y;
    sumsq += y * y;
    ++count;
  }

  Moments moments() const {
    if (count == 0) return {};
    const double n = static_cast<double>(count);
    const double mean_shifted = sum / n;
    return {count, shift + mean_shifted, std::max(0.0, sumsq - sum * mean_shifted)};
  }
};

struct MinPair {
  double sq = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  std::size_t j = 0;
};

struct BlockResult {
  ShiftedSums sums;
  MinPair min;
};

void require_nonempty(std::span<const std::size_t> a, std::span<const std::size_t> b, bool distinct_only) {
  if (a.empty() || b.empty()) throw PreconditionError("pairwise statistics need non-empty point sets");
  if (distinct_only && !std::equal(a.begin(), a.end(), b.begin(), b.end()))
    throw PreconditionError("distinct-only statistics need identical point sets");
}

std::uint64_t pair_count(std::size_t na, std::size_t nb, bool distinct_only) {
  return distinct_only ? static_cast<std::uint64_t>(na) * (na - 1) / 2 : static_cast<std::uint64_t>(na) * nb;
}

/// Exact blocked pass. With `moments` false only the minimum is tracked.
std::pair<Moments, MinPair> blocked_pass(const EmbeddingMatrix& m, std::span<const std::size_t> a,
                                         std::span<const std::size_t> b, bool distinct_only, bool moments,
                                         std::size_t block_rows) {
  if (block_rows == 0) throw ConfigError("block size must be > 0");
  const std::size_t blocks = (a.size() + block_rows - 1) / block_rows;
  std::vector<BlockResult> results(blocks);
  parallel_for(blocks, [&](std::size_t blk) {
    auto& res = results[blk];
    const std::size_t lo = blk * block_rows;
    const std::size_t hi = std::min(a.size(), lo + block_rows);
    for (std::size_t p = lo; p < hi; ++p) {
      const auto x = m.row(a[p]);
      for (std::size_t q = distinct_only ? p + 1 : 0; q < b.size(); ++q) {
        const auto y = m.row(b[q]);
        if (moments) {
          const double sq = squared_distance(x, y);
          res.sums.add(std::sqrt(sq));
          if (sq < res.min.sq) res.min = {sq, p, q};
        } else {
          const double sq = squared_distance_bounded(x, y, res.min.sq);
          if (sq < res.min.sq) res.min = {sq, p, q};
        }
      }
    }
  });
  Moments total;
  MinPair best;
  for (const auto& r : results) {
    total.merge(r.sums.moments());
    if (r.min.sq < best.sq) best = r.min;
  }
  return {total, best};
}

PairStats finish(const Moments& mom, const MinPair& mp, std::span<const std::size_t> a,
                 std::span<const std::size_t> b) {
  PairStats s;
  s.count = mom.count;
  if (s.count == 0) return s;
  s.mean = mom.mean;
  s.std = std::sqrt(mom.m2 / static_cast<double>(mom.count));
  s.min = std::sqrt(mp.sq);
  s.argmin = {a[mp.i], b[mp.j]};
  return s;
}

}  // namespace

PairStats pairwise_stats(const EmbeddingMatrix& m, std::span<const std::size_t> a, std::span<const std::size_t> b,
                         bool distinct_only, std::size_t block_rows) {
  require_nonempty(a, b, distinct_only);
  if (pair_count(a.size(), b.size(), distinct_only) == 0) return {};
  const auto [mom, mp] = blocked_pass(m, a, b, distinct_only, true, block_rows);
  return finish(mom, mp, a, b);
}

double intra_class_variance(const EmbeddingMatrix& m, std::span<const std::size_t> rows) {
  if (rows.empty()) throw PreconditionError("intra-class variance of an empty set");
  std::vector<double> centroid(m.d, 0.0);
  for (auto r : rows) {
    const auto x = m.row(r);
    for (std::size_t k = 0; k < m.d; ++k) centroid[k] += x[k];
  }
  const double n = static_cast<double>(rows.size());
  for (auto& c : centroid) c /= n;
  double acc = 0.0;
  for (auto r : rows) {
    const auto x = m.row(r);
    for (std::size_t k = 0; k < m.d; ++k) {
      const double diff = static_cast<double>(x[k]) - centroid[k];
      acc += diff * diff;
    }
  }
  return 2.0 * acc / n;
}

Margin clean_obfuscated_margin(const EmbeddingMatrix& m, std::span<const std::size_t> clean,
                               std::span<const std::size_t> obf) {
  require_nonempty(clean, obf, false);
  const auto [mom, mp] = blocked_pass(m, clean, obf, false, false, kGeometryBlockRows);
  return {std::sqrt(mp.sq), {clean[mp.i], obf[mp.j]}};
}

std::uint64_t total_report_pairs(const ClassPartition& part) {
  std::uint64_t total = 0;
  for (std::size_t a = 0; a < kNumClasses; ++a)
    for (std::size_t b = a; b < kNumClasses; ++b)
      total += pair_count(part.rows[a].size(), part.rows[b].size(), a == b);
  return total;
}

GeometryReport geometry_report(const EmbeddingMatrix& m, const ClassPartition& part, const EstimatorConfig& estimator,
                               std::span<const std::uint64_t> ids) {
  part.validate(m.n);
  if (!ids.empty() && ids.size() != m.n) throw PreconditionError("id list length differs from row count");
  for (auto c : kLabels)
    if (part[c].empty()) throw PreconditionError("class " + std::string(label_name(c)) + " has no rows");

  bool sampled = false;
  switch (estimator.mode) {
    case EstimatorConfig::Mode::Auto:
      if (total_report_pairs(part) > kAutoExactPairLimit)
        throw ConfigError("geometry over " + std::to_string(total_report_pairs(part)) +
                          " pairs needs an explicit exact or sampled estimator");
      break;
    case EstimatorConfig::Mode::Exact: break;
    case EstimatorConfig::Mode::Sampled:
      if (estimator.samples == 0) throw ConfigError("sampled estimator needs a sample count > 0");
      sampled = true;
      break;
  }

  auto id_of = [&](std::uint64_t row) { return ids.empty() ? row : ids[row]; };

  GeometryReport rep;
  rep.sampled = sampled;
  rep.samples = sampled ? estimator.samples : 0;
  rep.seed = sampled ? estimator.seed : 0;
  rep.encoder_id = m.encoder_id;
  rep.prompt_file_digest = m.prompt_file_digest;

  std::size_t cell_index = 0;
  for (std::size_t ca = 0; ca < kNumClasses; ++ca) {
    for (std::size_t cb = ca; cb < kNumClasses; ++cb, ++cell_index) {
      const auto& a = part.rows[ca];
      const auto& b = part.rows[cb];
      const bool distinct = ca == cb;
      const auto count = pair_count(a.size(), b.size(), distinct);
      PairStats s;
      double se = 0.0;
      if (count == 0) {
        // single-point class: no distinct pairs
      } else if (!sampled || estimator.samples >= count) {
        s = pairwise_stats(m, a, b, distinct);
      } else {
        const auto [unused, mp] = blocked_pass(m, a, b, distinct, false, kGeometryBlockRows);
        Rng rng(derive_seed(estimator.seed, cell_index));
        ShiftedSums sums;
        for (std::uint64_t k = 0; k < estimator.samples; ++k) {
          const std::size_t i = rng.below(a.size());
          std::size_t j = 0;
          if (distinct) {
            j = rng.below(a.size() - 1);
            if (j >= i) ++j;
          } else {
            j = rng.below(b.size());
          }
          sums.add(std::sqrt(squared_distance(m.row(a[i]), m.row(b[j]))));
        }
        const auto mom = sums.moments();
        s.count = count;
        s.mean = mom.mean;
        s.std = std::sqrt(mom.m2 / static_cast<double>(mom.count));
        s.min = std::sqrt(mp.sq);
        s.argmin = {a[mp.i], b[mp.j]};
        se = s.std / std::sqrt(static_cast<double>(estimator.samples));
      }
      s.argmin = {id_of(s.argmin.first), id_of(s.argmin.second)};
      rep.matrix[ca][cb] = s;
      auto mirrored = s;
      std::swap(mirrored.argmin.first, mirrored.argmin.second);
      rep.matrix[cb][ca] = mirrored;
      rep.standard_error[ca][cb] = rep.standard_error[cb][ca] = se;
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) rep.intra_var[c] = intra_class_variance(m, part.rows[c]);

  const auto& co = rep.cell(Label::Clean, Label::Obfuscated);
  rep.delta = {co.min, co.argmin};
  return rep;
}

// --------------------------------------------------------------------- JSON

ordered_json GeometryReport::to_json() const {
  ordered_json j;
  auto classes = ordered_json::array();
  for (auto c : kLabels) classes.push_back(label_name(c));
  j["classes"] = classes;
  auto mat = ordered_json::array();
  for (std::size_t a = 0; a < kNumClasses; ++a) {
    auto row = ordered_json::array();
    for (std::size_t b = 0; b < kNumClasses; ++b) {
      const auto& s = matrix[a][b];
      ordered_json cell;
      cell["mean"] = s.mean;
      cell["std"] = s.std;
      cell["min"] = s.min;
      cell["argmin"] = s.count ? ordered_json::array({s.argmin.first, s.argmin.second}) : ordered_json(nullptr);
      cell["count"] = s.count;
      row.push_back(std::move(cell));
    }
    mat.push_back(std::move(row));
  }
  j["matrix"] = std::move(mat);
  ordered_json iv;
  for (auto c : kLabels) iv[std::string(label_name(c))] = intra_var[label_index(c)];
  j["intra_var"] = std::move(iv);
  j["delta"] = {{"value", delta.value}, {"pair", {delta.pair.first, delta.pair.second}}};
  ordered_json est;
  if (sampled) {
    est["kind"] = "sampled";
    est["samples"] = samples;
    est["seed"] = seed;
    est["stderr"] = standard_error;
  } else {
    est["kind"] = "exact";
  }
  j["estimator"] = std::move(est);
  j["encoder_id"] = encoder_id;
  j["prompt_file_digest"] = to_hex(prompt_file_digest);
  return j;
}

GeometryReport GeometryReport::from_json(const json& j) {
  try {
    GeometryReport r;
    const auto& mat = j.at("matrix");
    if (mat.size() != kNumClasses) throw FormatError("matrix", "expected 4 rows");
    for (std::size_t a = 0; a < kNumClasses; ++a) {
      if (mat[a].size() != kNumClasses) throw FormatError("matrix", "expected 4 columns");
      for (std::size_t b = 0; b < kNumClasses; ++b) {
        const auto& c = mat[a][b];
        auto& s = r.matrix[a][b];
        s.mean = c.at("mean").get<double>();
        s.std = c.at("std").get<double>();
        s.min = c.at("min").get<double>();
        s.count = c.at("count").get<std::uint64_t>();
        if (!c.at("argmin").is_null()) s.argmin = {c["argmin"][0].get<std::uint64_t>(), c["argmin"][1].get<std::uint64_t>()};
      }
    }
    for (auto c : kLabels) r.intra_var[label_index(c)] = j.at("intra_var").at(std::string(label_name(c))).get<double>();
    r.delta.value = j.at("delta").at("value").get<double>();
    r.delta.pair = {j["delta"]["pair"][0].get<std::uint64_t>(), j["delta"]["pair"][1].get<std::uint64_t>()};
    const auto& est = j.at("estimator");
    r.sampled = est.at("kind").get<std::string>() == "sampled";
    if (r.sampled) {
      r.samples = est.at("samples").get<std::uint64_t>();
      r.seed = est.at("seed").get<std::uint64_t>();
      r.standard_error = est.at("stderr").get<decltype(r.standard_error)>();
    }
    r.encoder_id = j.value("encoder_id", "");
    if (j.contains("prompt_file_digest")) r.prompt_file_digest = from_hex(j["prompt_file_digest"].get<std::string>());
    return r;
  } catch (const json::exception& e) {
    throw FormatError("geometry report", e.what());
  }
}

}  // namespace lgap
