#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <limits>

#include "lgap/error.hpp"
#include "lgap/projection.hpp"

namespace lgap {

namespace {

constexpr std::array<const char*, kNumClasses> kPalette{"#1f77b4", "#2ca02c", "#ff7f0e", "#d62728"};

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 60, kRight = 150, kTop = 20, kBottom = 40;

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double coord(const ProjectionResult& p, std::size_t i, std::size_t axis) {
  return axis < p.coords.cols ? p.coords(i, axis) : 0.0;
}

struct Range {
  double lo, hi;
};

Range padded_range(const ProjectionResult& p, std::size_t axis) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < p.coords.rows; ++i) {
    lo = std::min(lo, coord(p, i, axis));
    hi = std::max(hi, coord(p, i, axis));
  }
  if (p.coords.rows == 0) return {-1.0, 1.0};
  const double span = hi - lo;
  const double pad = span > 0 ? 0.05 * span : 1.0;
  return {lo - pad, hi + pad};
}

std::string render_csv(const ProjectionResult& p, std::span<const Label> labels, std::span<const std::uint64_t> ids) {
  std::string out = "id,x,y,label\n";
  for (std::size_t i = 0; i < p.coords.rows; ++i) {
    out += std::to_string(ids.empty() ? i : ids[i]);
    out += ',' + format_coordinate(coord(p, i, 0));
    out += ',' + format_coordinate(coord(p, i, 1));
    out += ',' + std::to_string(label_index(labels[i])) + '\n';
  }
  return out;
}

std::string render_svg(const ProjectionResult& p, std::span<const Label> labels) {
  const Range rx = padded_range(p, 0);
  const Range ry = padded_range(p, 1);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto sy = [&](double v) { return kTop + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph; };
  const char* title = p.method == ProjectionMethod::Pca ? "PCA projection" : "t-SNE projection";

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
  out += "<title>" + std::string(title) + "</title>\n";
  out += "<rect width=\"640\" height=\"480\" fill=\"#ffffff\"/>\n";
  out += "<rect x=\"" + fixed(kLeft) + "\" y=\"" + fixed(kTop) + "\" width=\"" + fixed(pw) + "\" height=\"" + fixed(ph) +
         "\" fill=\"none\" stroke=\"#333333\"/>\n";
  // axis extents
  const double base = kTop + ph;
  out += "<g font-family=\"sans-serif\" font-size=\"10\" fill=\"#333333\">\n";
  out += "<text x=\"" + fixed(kLeft) + "\" y=\"" + fixed(base + 14) + "\">" + fixed(rx.lo) + "</text>\n";
  out += "<text x=\"" + fixed(kLeft + pw) + "\" y=\"" + fixed(base + 14) + "\" text-anchor=\"end\">" + fixed(rx.hi) +
         "</text>\n";
  out += "<text x=\"" + fixed(kLeft - 4) + "\" y=\"" + fixed(base) + "\" text-anchor=\"end\">" + fixed(ry.lo) + "</text>\n";
  out += "<text x=\"" + fixed(kLeft - 4) + "\" y=\"" + fixed(kTop + 8) + "\" text-anchor=\"end\">" + fixed(ry.hi) +
         "</text>\n";
  out += "<text x=\"" + fixed(kLeft + pw / 2) + "\" y=\"" + fixed(base + 30) + "\" text-anchor=\"middle\">" + title +
         "</text>\n";
  out += "</g>\n<g fill-opacity=\"0.7\">\n";
  for (std::size_t i = 0; i < p.coords.rows; ++i) {
    out += "<circle cx=\"" + fixed(sx(coord(p, i, 0))) + "\" cy=\"" + fixed(sy(coord(p, i, 1))) + "\" r=\"2.5\" fill=\"" +
           kPalette[label_index(labels[i])] + "\"/>\n";
  }
  out += "</g>\n<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double y = kTop + 16 + 20 * static_cast<double>(c);
    out += "<circle cx=\"" + fixed(kWidth - kRight + 20) + "\" cy=\"" + fixed(y - 4) + "\" r=\"5\" fill=\"" + kPalette[c] +
           "\"/>\n";
    out += "<text x=\"" + fixed(kWidth - kRight + 32) + "\" y=\"" + fixed(y) + "\">" +
           std::string(label_name(kLabels[c])) + "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace

std::string format_coordinate(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string render_scatter(const ProjectionResult& p, std::span<const Label> labels, std::span<const std::uint64_t> ids,
                           ScatterFormat format) {
  if (labels.size() != p.coords.rows) throw PreconditionError("scatter: label count differs from point count");
  if (!ids.empty() && ids.size() != p.coords.rows) throw PreconditionError("scatter: id count differs from point count");
  return format == ScatterFormat::Csv ? render_csv(p, labels, ids) : render_svg(p, labels);
}

void emit_scatter(const ProjectionResult& p, std::span<const Label> labels, std::span<const std::uint64_t> ids,
                  const std::filesystem::path& path, ScatterFormat format) {
  write_file_atomic(path, render_scatter(p, labels, ids, format));
}

nlohmann::ordered_json ProjectionResult::diagnostics_json() const {
  nlohmann::ordered_json j;
  if (const auto* pca = std::get_if<PcaDiagnostics>(&diagnostics)) {
    j["method"] = "pca";
    j["explained_variance_ratio"] = pca->explained_variance_ratio;
  } else {
    const auto& t = std::get<TsneDiagnostics>(diagnostics);
    j["method"] = "tsne";
    j["initial_kl"] = t.initial_kl;
    j["exaggeration_kl"] = t.exaggeration_kl;
    j["final_kl"] = t.final_kl;
    j["iterations"] = t.iterations;
    j["perplexity"] = t.perplexity;
    j["seed"] = t.seed;
    j["learning_rate"] = t.learning_rate;
  }
  j["points"] = coords.rows;
  return j;
}

}  // namespace lgap
