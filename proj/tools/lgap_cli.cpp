#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lgap/lgap.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDefaultConfig = R"({"version": "1", "seed": 0, "encoder": {"builtin": {}}})";

struct Failure {
  int code;
  std::string message;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::optional<std::uint64_t> per_class;

  fs::path out_dir() const { return out ? fs::path(*out) : fs::path("."); }
};

std::string slurp(const std::string& path, int code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{code, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Failure{4, "cannot write " + path.string()};
}

void check(lgap_status st) {
  if (st != LGAP_OK) throw Failure{lgap_exit_code(st), lgap_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  lgap_string_free(s);
  return out;
}

std::string config_text(const Globals& g) { return g.config_path.empty() ? kDefaultConfig : slurp(g.config_path, 2); }

std::string overrides(const Globals& g) {
  json o = json::object();
  if (g.seed) o["seed"] = *g.seed;
  if (g.threads) o["threads"] = *g.threads;
  if (g.out) o["output_dir"] = *g.out;
  if (g.per_class) o["per_class"] = *g.per_class;
  return o.dump();
}

/// --out is a file path when it carries one of the subcommand's extensions.
std::optional<std::string> out_file(const Globals& g, std::initializer_list<const char*> extensions) {
  if (!g.out) return std::nullopt;
  const auto ext = fs::path(*g.out).extension().string();
  for (const char* e : extensions)
    if (ext == e) return g.out;
  return std::nullopt;
}

/// The fully resolved config as JSON; exits with code 2 on any error.
json resolved(const Globals& g) {
  char* normalized = nullptr;
  char* errors = nullptr;
  const auto st = lgap_config_validate(config_text(g).c_str(), overrides(g).c_str(), &normalized, &errors);
  const auto norm = take(normalized);
  const auto errs = take(errors);
  if (st != LGAP_OK) {
    std::string msg = lgap_last_error();
    if (!errs.empty())
      for (const auto& e : json::parse(errs)) msg += "\n  " + e.get<std::string>();
    throw Failure{lgap_exit_code(st), msg};
  }
  const auto j = json::parse(norm);
  check(lgap_set_threads(j.at("threads").get<unsigned>()));
  return j;
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
};
using Corpus = Handle<lgap_corpus, lgap_corpus_free>;
using Embeddings = Handle<lgap_embeddings, lgap_embeddings_free>;
using Probe = Handle<lgap_probe, lgap_probe_free>;

void load(const std::string& corpus_path, const std::string& emb_path, Corpus& c, Embeddings& e) {
  check(lgap_corpus_load(corpus_path.c_str(), &c.ptr));
  check(lgap_embeddings_read(emb_path.c_str(), &e.ptr));
  check(lgap_check_alignment(e.ptr, c.ptr));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lgap: obfuscated prompt corpus, embedding geometry and probe evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "run config (JSON)");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory (a file path for encode/project when it has their extension)");

  auto* validate = app.add_subcommand("validate", "check a config and print it fully resolved");

  auto* gen = app.add_subcommand("gen", "generate the corpus splits");
  gen->add_option("--per-class", g.per_class, "prompts per class");

  std::string corpus_path, emb_path;
  auto* encode = app.add_subcommand("encode", "hash-encode a corpus file into PGEM");
  std::string encode_output;
  encode->add_option("--corpus", corpus_path)->required();
  encode->add_option("--output", encode_output, "PGEM path (default <out>/<corpus stem>.pgem)");

  auto* geometry = app.add_subcommand("geometry", "class distance matrix, variances and margin");
  geometry->add_option("--corpus", corpus_path)->required();
  geometry->add_option("--embeddings", emb_path)->required();
  std::optional<std::string> estimator;
  std::optional<std::uint64_t> samples;
  geometry->add_option("--estimator", estimator)->check(CLI::IsMember({"auto", "exact", "sampled"}));
  geometry->add_option("--samples,--sample", samples, "sampled pairs per cell (implies --estimator sampled)");
  bool exact = false;
  geometry->add_flag("--exact", exact, "exact estimator regardless of pair count");

  auto* project = app.add_subcommand("project", "PCA / t-SNE scatter artifacts");
  project->add_option("--corpus", corpus_path)->required();
  project->add_option("--embeddings", emb_path)->required();
  std::vector<std::string> methods;
  project->add_option("--method", methods)->check(CLI::IsMember({"pca", "tsne"}));
  std::optional<double> perplexity;
  std::optional<std::uint32_t> iters;
  std::string format;
  project->add_option("--perplexity", perplexity);
  project->add_option("--iters", iters);
  project->add_option("--format", format, "csv or svg (default: both)")->check(CLI::IsMember({"csv", "svg"}));

  auto* probe = app.add_subcommand("probe", "train and evaluate the linear probe");
  std::string train_c, train_e, val_c, val_e, test_c, test_e, model_path;
  probe->add_option("--train-corpus", train_c);
  probe->add_option("--train-embeddings", train_e);
  probe->add_option("--val-corpus", val_c);
  probe->add_option("--val-embeddings", val_e);
  probe->add_option("--test-corpus", test_c)->required();
  probe->add_option("--test-embeddings", test_e)->required();
  probe->add_option("--model", model_path, "evaluate an existing PGPR model instead of training");

  auto* gap = app.add_subcommand("gap", "join classification and geometry reports");
  std::string cls_path, geo_path;
  std::optional<double> f_thresh, r_thresh;
  gap->add_option("--classification", cls_path)->required();
  gap->add_option("--geometry", geo_path)->required();
  gap->add_option("--f-thresh", f_thresh);
  gap->add_option("--r-thresh", r_thresh);

  auto* run = app.add_subcommand("run", "the whole pipeline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (validate->parsed()) {
      if (g.config_path.empty()) throw Failure{2, "validate needs --config"};
      std::cout << resolved(g).dump(2) << "\n";
      return 0;
    }

    if (gen->parsed()) {
      resolved(g);
      char* summary = nullptr;
      check(lgap_corpus_generate(config_text(g).c_str(), overrides(g).c_str(), g.out_dir().string().c_str(), &summary));
      std::cout << take(summary) << "\n";
      return 0;
    }

    if (run->parsed()) {
      if (g.config_path.empty()) throw Failure{2, "run needs --config"};
      resolved(g);
      char* manifest = nullptr;
      check(lgap_run_pipeline(config_text(g).c_str(), overrides(g).c_str(), &manifest));
      take(manifest);
      std::cout << "manifest: " << (fs::path(resolved(g).at("output_dir").get<std::string>()) / "manifest.json").string()
                << "\n";
      return 0;
    }

    const auto cfg = resolved(g);
    const auto& seeds = cfg.at("seeds");

    if (encode->parsed()) {
      if (!cfg.at("encoder").contains("builtin")) throw Failure{2, "encode needs a builtin encoder in the config"};
      const auto& b = cfg["encoder"]["builtin"];
      Corpus c;
      check(lgap_corpus_load(corpus_path.c_str(), &c.ptr));
      Embeddings e;
      std::size_t zero = 0;
      check(lgap_encode_hash(c.ptr, b.at("dim").get<std::uint32_t>(), b.at("ngram")[0].get<std::uint32_t>(),
                             b.at("ngram")[1].get<std::uint32_t>(), seeds.at("encoder").get<std::uint64_t>(), &e.ptr,
                             &zero));
      const auto file = out_file(g, {".pgem"});
      const fs::path out = !encode_output.empty() ? fs::path(encode_output)
                           : file            ? fs::path(*file)
                                             : g.out_dir() / (fs::path(corpus_path).stem().string() + ".pgem");
      check(lgap_embeddings_write(e.ptr, out.string().c_str()));
      if (zero) std::cerr << "warning: " << zero << " prompt(s) encoded to the zero vector\n";
      std::cout << out.string() << "\n";
      return 0;
    }

    if (geometry->parsed()) {
      Corpus c;
      Embeddings e;
      load(corpus_path, emb_path, c, e);
      if (exact) estimator = "exact";
      else if (samples && !estimator) estimator = "sampled";
      json est = {{"estimator", estimator.value_or(cfg["geometry"]["estimator"].get<std::string>())},
                  {"samples", samples.value_or(cfg["geometry"]["samples"].get<std::uint64_t>())},
                  {"seed", seeds.at("geometry")}};
      char* report = nullptr;
      check(lgap_geometry(e.ptr, c.ptr, est.dump().c_str(), &report));
      const auto out = g.out_dir() / "geometry.json";
      spill(out, take(report) + "\n");
      std::cout << out.string() << "\n";
      return 0;
    }

    if (project->parsed()) {
      Corpus c;
      Embeddings e;
      load(corpus_path, emb_path, c, e);
      if (methods.empty()) methods = cfg["projection"]["methods"].get<std::vector<std::string>>();
      const auto file = out_file(g, {".csv", ".svg"});
      if (file && methods.size() != 1) throw Failure{2, "--out names a file, so exactly one --method is required"};
      std::vector<std::string> formats;
      if (!format.empty()) formats = {format};
      else if (file) formats = {fs::path(*file).extension().string().substr(1)};
      else formats = {"csv", "svg"};
      for (const auto& m : methods) {
        json params = {{"method", m},
                       {"components", 2},
                       {"perplexity", perplexity.value_or(cfg["projection"]["perplexity"].get<double>())},
                       {"iterations", iters.value_or(cfg["projection"]["iterations"].get<std::uint32_t>())},
                       {"seed", seeds.at("projection")}};
        std::string diagnostics;
        for (const auto& fmt : formats) {
          params["format"] = fmt;
          const auto out = file ? fs::path(*file) : g.out_dir() / ("projection_" + m + "." + fmt);
          char* diag = nullptr;
          check(lgap_project(e.ptr, c.ptr, params.dump().c_str(), out.string().c_str(), &diag));
          diagnostics = take(diag);
          std::cout << out.string() << "\n";
        }
        const auto diag_path = file ? fs::path(*file).replace_extension(".json") : g.out_dir() / ("projection_" + m + ".json");
        spill(diag_path, diagnostics + "\n");
      }
      return 0;
    }

    if (probe->parsed()) {
      Probe model;
      if (!model_path.empty()) {
        check(lgap_probe_read(model_path.c_str(), &model.ptr));
      } else {
        if (train_c.empty() || train_e.empty() || val_c.empty() || val_e.empty())
          throw Failure{2, "probe needs --train-* and --val-* inputs, or --model"};
        Corpus tc, vc;
        Embeddings te, ve;
        load(train_c, train_e, tc, te);
        load(val_c, val_e, vc, ve);
        auto params = cfg.at("probe");
        params["seed"] = seeds.at("probe");
        check(lgap_probe_train(te.ptr, tc.ptr, ve.ptr, vc.ptr, params.dump().c_str(), &model.ptr));
        const auto pgpr = g.out_dir() / "probe.pgpr";
        fs::create_directories(g.out_dir());
        check(lgap_probe_write(model.ptr, pgpr.string().c_str()));
        std::cout << pgpr.string() << "\n";
      }
      Corpus xc;
      Embeddings xe;
      load(test_c, test_e, xc, xe);
      char* report = nullptr;
      check(lgap_probe_evaluate(model.ptr, xe.ptr, xc.ptr, &report));
      const auto out = g.out_dir() / "classification.json";
      spill(out, take(report) + "\n");
      std::cout << out.string() << "\n";
      return 0;
    }

    if (gap->parsed()) {
      const auto cls = slurp(cls_path, 3);
      const auto geo = slurp(geo_path, 3);
      char* report = nullptr;
      check(lgap_gap_report(cls.c_str(), geo.c_str(), f_thresh.value_or(cfg["gap"]["f_thresh"].get<double>()),
                            r_thresh.value_or(cfg["gap"]["r_thresh"].get<double>()), &report));
      const auto out = g.out_dir() / "gap.json";
      spill(out, take(report) + "\n");
      std::cout << out.string() << "\n";
      return 0;
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
