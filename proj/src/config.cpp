#include "lgap/config.hpp"

#include <algorithm>
#include <set>

#include "lgap/error.hpp"
#include "lgap/rng.hpp"

namespace lgap {

using nlohmann::json;
using nlohmann::ordered_json;

StageSeeds StageSeeds::derive(std::uint64_t master) {
  return {stage_seed(master, "corpus"), stage_seed(master, "encoder"), stage_seed(master, "geometry"),
          stage_seed(master, "projection"), stage_seed(master, "probe")};
}

std::size_t split_index(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i)
    if (kSplitNames[i] == name) return i;
  throw ConfigError("unknown split \"" + std::string(name) + "\" (expected train, val or test)");
}

namespace {

/// Walks a JSON object, collecting errors instead of throwing.
class Reader {
 public:
  Reader(const json* obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {}

  Reader child(const char* key) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return Reader(nullptr, name(key), errors_);
    const auto& v = obj_->at(key);
    if (!v.is_object()) {
      errors_.push_back(name(key) + " must be an object");
      return Reader(nullptr, name(key), errors_);
    }
    return Reader(&v, name(key), errors_);
  }

  bool has(const char* key) const { return obj_ && obj_->contains(key); }
  bool present() const { return obj_ != nullptr; }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const auto& v = obj_->at(key);
    if (!type_ok<T>(v)) {
      errors_.push_back(name(key) + " has the wrong type");
      return;
    }
    out = v.get<T>();
  }

  template <class T>
  void require(const char* key, T& out) {
    if (!has(key)) {
      errors_.push_back("missing required field " + name(key));
      seen_.insert(key);
      return;
    }
    read(key, out);
  }

  void reject_unknown() {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items())
      if (!seen_.contains(k)) errors_.push_back("unknown field " + name(k.c_str()));
  }

 private:
  template <class T>
  static bool type_ok(const json& v) {
    if constexpr (std::is_same_v<T, bool>) return v.is_boolean();
    else if constexpr (std::is_same_v<T, std::string>) return v.is_string();
    else if constexpr (std::is_floating_point_v<T>) return v.is_number();
    else if constexpr (std::is_integral_v<T>) return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    else {
      try {
        (void)v.get<T>();
        return true;
      } catch (const json::exception&) {
        return false;
      }
    }
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

}  // namespace

ConfigOverrides ConfigOverrides::from_json(std::string_view text) {
  ConfigOverrides o;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return o;
  try {
    const auto j = json::parse(text);
    if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) o.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("threads")) o.threads = j["threads"].get<unsigned>();
    if (j.contains("per_class")) o.per_class = j["per_class"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("overrides: ") + e.what());
  }
  return o;
}

ConfigValidation validate_config(std::string_view text, const ConfigOverrides& overrides) {
  ConfigValidation result;
  auto& errors = result.errors;
  json root = json::object();
  if (text.find_first_not_of(" \t\r\n") != std::string_view::npos) {
    try {
      root = json::parse(text);
    } catch (const json::exception& e) {
      errors.push_back(std::string("config is not valid JSON: ") + e.what());
      return result;
    }
  }
  if (!root.is_object()) {
    errors.emplace_back("config must be a JSON object");
    return result;
  }

  RunConfig cfg;
  Reader top(&root, "", errors);

  std::string version;
  top.require("version", version);
  if (top.has("version") && !version.empty() && version != kConfigVersion)
    errors.push_back("unsupported config version \"" + version + "\" (expected \"" + std::string(kConfigVersion) + "\")");
  if (overrides.seed) {
    cfg.seed = *overrides.seed;
    top.read("seed", cfg.seed);
    cfg.seed = *overrides.seed;
  } else {
    top.require("seed", cfg.seed);
  }
  std::string out_dir = cfg.output_dir.string();
  top.read("output_dir", out_dir);
  if (overrides.output_dir) out_dir = *overrides.output_dir;
  cfg.output_dir = out_dir;
  top.read("threads", cfg.threads);
  if (overrides.threads) cfg.threads = *overrides.threads;
  if (cfg.threads == 0) errors.emplace_back("threads must be >= 1");

  // corpus
  {
    auto c = top.child("corpus");
    auto& cc = cfg.corpus;
    c.read("per_class", cc.per_class);
    if (overrides.per_class) cc.per_class = *overrides.per_class;
    c.read("templates", cc.templates);
    c.read("fragments", cc.fragments);
    c.read("homoglyphs", cc.homoglyphs);
    c.read("charset", cc.charset);
    auto p = c.child("p_op");
    p.read("fragment_embed", cc.p_op.fragment_embed);
    p.read("homoglyph", cc.p_op.homoglyph);
    p.read("zero_width", cc.p_op.zero_width);
    p.read("noise", cc.p_op.noise);
    p.reject_unknown();
    c.read("homoglyph_rate", cc.homoglyph_rate);
    c.read("zero_width_rate", cc.zero_width_rate);
    std::array<std::uint32_t, 2> noise{cc.noise_count.first, cc.noise_count.second};
    c.read("noise_count", noise);
    cc.noise_count = {noise[0], noise[1]};
    c.read("fragmented_rate", cc.fragmented_rate);
    c.read("split", cc.split);
    c.reject_unknown();
    for (auto& e : cc.errors()) errors.push_back(std::move(e));
  }

  // encoder: exactly one source
  {
    if (!top.has("encoder")) {
      errors.emplace_back("missing required field encoder");
    }
    auto e = top.child("encoder");
    if (e.present()) {
      const bool builtin = e.has("builtin");
      const bool external = e.has("external");
      if (builtin == external) errors.emplace_back("exactly one encoder (builtin or external) must be configured");
      if (builtin) {
        auto b = e.child("builtin");
        HashEncoderParams hp;
        b.read("dim", hp.dim);
        std::array<std::uint32_t, 2> ng{hp.ngram_min, hp.ngram_max};
        b.read("ngram", ng);
        hp.ngram_min = ng[0];
        hp.ngram_max = ng[1];
        b.reject_unknown();
        try {
          hp.validate();
        } catch (const Error& ex) {
          errors.emplace_back(ex.what());
        }
        cfg.builtin_encoder = hp;
      }
      if (external) {
        auto x = e.child("external");
        std::array<std::string, 3> paths;
        for (std::size_t s = 0; s < 3; ++s) x.require(std::string(kSplitNames[s]).c_str(), paths[s]);
        x.reject_unknown();
        cfg.external_embeddings = paths;
      }
      e.reject_unknown();
    }
  }

  auto check_split = [&](const std::string& s, const char* field) {
    if (std::find(kSplitNames.begin(), kSplitNames.end(), s) == kSplitNames.end())
      errors.push_back(std::string(field) + " must be train, val or test");
  };

  {
    auto g = top.child("geometry");
    g.read("split", cfg.geometry_split);
    check_split(cfg.geometry_split, "geometry.split");
    std::string mode = "auto";
    g.read("estimator", mode);
    g.read("samples", cfg.estimator.samples);
    if (mode == "auto") cfg.estimator.mode = EstimatorConfig::Mode::Auto;
    else if (mode == "exact") cfg.estimator.mode = EstimatorConfig::Mode::Exact;
    else if (mode == "sampled") cfg.estimator.mode = EstimatorConfig::Mode::Sampled;
    else errors.emplace_back("geometry.estimator must be auto, exact or sampled");
    if (cfg.estimator.mode == EstimatorConfig::Mode::Sampled && cfg.estimator.samples == 0)
      errors.emplace_back("geometry.samples must be > 0 for the sampled estimator");
    g.reject_unknown();
  }
  {
    auto p = top.child("projection");
    p.read("split", cfg.projection_split);
    check_split(cfg.projection_split, "projection.split");
    p.read("methods", cfg.projection_methods);
    for (const auto& m : cfg.projection_methods)
      if (m != "pca" && m != "tsne") errors.push_back("projection.methods: unknown method \"" + m + "\"");
    p.read("perplexity", cfg.tsne.perplexity);
    p.read("iterations", cfg.tsne.iterations);
    if (cfg.tsne.perplexity < 2.0) errors.emplace_back("projection.perplexity must be >= 2");
    p.reject_unknown();
  }
  {
    auto p = top.child("probe");
    p.read("learning_rate", cfg.probe.learning_rate);
    p.read("epochs", cfg.probe.epochs);
    p.read("l2", cfg.probe.l2);
    p.read("eval_interval", cfg.probe.eval_interval);
    p.read("patience", cfg.probe.patience);
    if (!(cfg.probe.learning_rate > 0.0)) errors.emplace_back("probe.learning_rate must be > 0");
    if (cfg.probe.l2 < 0.0) errors.emplace_back("probe.l2 must be >= 0");
    if (cfg.probe.eval_interval == 0) errors.emplace_back("probe.eval_interval must be > 0");
    p.reject_unknown();
  }
  {
    auto g = top.child("gap");
    g.read("f_thresh", cfg.gap.f1);
    g.read("r_thresh", cfg.gap.margin_ratio);
    g.reject_unknown();
  }

  cfg.seeds = StageSeeds::derive(cfg.seed);
  {
    auto s = top.child("seeds");
    s.read("corpus", cfg.seeds.corpus);
    s.read("encoder", cfg.seeds.encoder);
    s.read("geometry", cfg.seeds.geometry);
    s.read("projection", cfg.seeds.projection);
    s.read("probe", cfg.seeds.probe);
    s.reject_unknown();
  }
  cfg.corpus.seed = cfg.seeds.corpus;
  if (cfg.builtin_encoder) cfg.builtin_encoder->seed = cfg.seeds.encoder;
  cfg.estimator.seed = cfg.seeds.geometry;
  cfg.tsne.seed = cfg.seeds.projection;
  cfg.probe.seed = cfg.seeds.probe;

  top.reject_unknown();
  if (errors.empty()) result.config = std::move(cfg);
  return result;
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["version"] = kConfigVersion;
  j["seed"] = seed;
  j["output_dir"] = output_dir.string();
  j["threads"] = threads;
  const auto& c = corpus;
  j["corpus"] = {{"per_class", c.per_class},
                 {"templates", c.templates},
                 {"fragments", c.fragments},
                 {"homoglyphs", c.homoglyphs},
                 {"charset", c.charset},
                 {"p_op",
                  {{"fragment_embed", c.p_op.fragment_embed},
                   {"homoglyph", c.p_op.homoglyph},
                   {"zero_width", c.p_op.zero_width},
                   {"noise", c.p_op.noise}}},
                 {"homoglyph_rate", c.homoglyph_rate},
                 {"zero_width_rate", c.zero_width_rate},
                 {"noise_count", {c.noise_count.first, c.noise_count.second}},
                 {"fragmented_rate", c.fragmented_rate},
                 {"split", c.split}};
  if (builtin_encoder) {
    j["encoder"] = {{"builtin", {{"dim", builtin_encoder->dim}, {"ngram", {builtin_encoder->ngram_min, builtin_encoder->ngram_max}}}}};
  } else if (external_embeddings) {
    const auto& e = *external_embeddings;
    j["encoder"] = {{"external", {{"train", e[0]}, {"val", e[1]}, {"test", e[2]}}}};
  }
  const char* mode = estimator.mode == EstimatorConfig::Mode::Auto    ? "auto"
                     : estimator.mode == EstimatorConfig::Mode::Exact ? "exact"
                                                                      : "sampled";
  j["geometry"] = {{"split", geometry_split}, {"estimator", mode}, {"samples", estimator.samples}};
  j["projection"] = {{"split", projection_split},
                     {"methods", projection_methods},
                     {"perplexity", tsne.perplexity},
                     {"iterations", tsne.iterations}};
  j["probe"] = {{"learning_rate", probe.learning_rate},
                {"epochs", probe.epochs},
                {"l2", probe.l2},
                {"eval_interval", probe.eval_interval},
                {"patience", probe.patience}};
  j["gap"] = {{"f_thresh", gap.f1}, {"r_thresh", gap.margin_ratio}};
  j["seeds"] = {{"corpus", seeds.corpus},
                {"encoder", seeds.encoder},
                {"geometry", seeds.geometry},
                {"projection", seeds.projection},
                {"probe", seeds.probe}};
  return j;
}

}  // namespace lgap
