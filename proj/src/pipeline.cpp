#include "lgap/pipeline.hpp"

#include <functional>

#include "lgap/corpus.hpp"
#include "lgap/digest.hpp"
#include "lgap/embedding_store.hpp"
#include "lgap/evaluation.hpp"
#include "lgap/geometry.hpp"
#include "lgap/parallel.hpp"
#include "lgap/projection.hpp"

namespace lgap {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.kind(), "stage " + stage + " failed: " + cause.what()), stage_(std::move(stage)) {}

ordered_json Manifest::to_json() const {
  ordered_json list = ordered_json::array();
  for (const auto& a : artifacts) list.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  return {{"artifacts", std::move(list)}};
}

namespace {

class Run {
 public:
  explicit Run(const RunConfig& cfg) : cfg_(cfg), out_(cfg.output_dir) {}

  void stage(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      fail(name, e);
    } catch (const std::exception& e) {
      fail(name, IoError(e.what()));
    }
  }

  void record(const fs::path& rel) {
    const auto full = out_ / rel;
    artifacts_.artifacts.push_back({rel.generic_string(), to_hex(sha256_file(full)), fs::file_size(full)});
  }

  void write_json(const fs::path& rel, const ordered_json& j) {
    write_file_atomic(out_ / rel, j.dump(2) + "\n");
    record(rel);
  }

  const fs::path& out() const { return out_; }
  Manifest& manifest() { return artifacts_; }

 private:
  [[noreturn]] void fail(const std::string& name, const Error& e) {
    auto j = artifacts_.to_json();
    j["failed_stage"] = name;
    j["error"] = e.what();
    try {
      write_file_atomic(out_ / "manifest.json.partial", j.dump(2) + "\n");
    } catch (const Error&) {
    }
    throw StageError(name, e);
  }

  const RunConfig& cfg_;
  fs::path out_;
  Manifest artifacts_;
};

std::vector<Label> labels_of(const std::vector<Prompt>& prompts) {
  std::vector<Label> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) out.push_back(p.label);
  return out;
}

std::vector<std::uint64_t> ids_of(const std::vector<Prompt>& prompts) {
  std::vector<std::uint64_t> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) out.push_back(p.id);
  return out;
}

}  // namespace

Manifest run_pipeline(const RunConfig& cfg) {
  set_thread_count(cfg.threads);
  Run run(cfg);
  std::error_code ec;
  fs::create_directories(run.out(), ec);
  if (ec) throw StageError("setup", IoError("cannot create " + run.out().string() + ": " + ec.message()));
  fs::remove(run.out() / "manifest.json", ec);
  fs::remove(run.out() / "manifest.json.partial", ec);

  Dataset data;
  std::array<Digest, 3> split_digest{};
  run.stage("gen", [&] {
    data = CorpusGenerator(cfg.corpus).build_dataset();
    for (std::size_t s = 0; s < 3; ++s) {
      const fs::path rel = fs::path("corpus") / (std::string(kSplitNames[s]) + ".jsonl");
      write_jsonl(data.splits[s], run.out() / rel);
      split_digest[s] = sha256_file(run.out() / rel);
      run.record(rel);
    }
  });

  std::array<EmbeddingMatrix, 3> emb;
  run.stage("encode", [&] {
    for (std::size_t s = 0; s < 3; ++s) {
      const fs::path rel = fs::path("embeddings") / (std::string(kSplitNames[s]) + ".pgem");
      if (cfg.builtin_encoder) {
        emb[s] = encode_hash(data.splits[s], *cfg.builtin_encoder, split_digest[s]).matrix;
      } else {
        emb[s] = read_embeddings((*cfg.external_embeddings)[s]);
        check_alignment(emb[s], split_digest[s], data.splits[s].size());
        emb[s].check_finite();
      }
      write_embeddings(emb[s], run.out() / rel);
      run.record(rel);
    }
  });

  GeometryReport geo;
  run.stage("geometry", [&] {
    const auto s = split_index(cfg.geometry_split);
    const auto& prompts = data.splits[s];
    const auto ids = ids_of(prompts);
    geo = geometry_report(emb[s], ClassPartition::from_prompts(prompts), cfg.estimator, ids);
    run.write_json("geometry.json", geo.to_json());
  });

  run.stage("project", [&] {
    const auto s = split_index(cfg.projection_split);
    const auto& prompts = data.splits[s];
    const auto labels = labels_of(prompts);
    const auto ids = ids_of(prompts);
    for (const auto& method : cfg.projection_methods) {
      const ProjectionResult p = method == "pca" ? pca_project(emb[s], 2) : tsne_project(emb[s], cfg.tsne);
      const std::string stem = "projection_" + method;
      emit_scatter(p, labels, ids, run.out() / (stem + ".csv"), ScatterFormat::Csv);
      run.record(stem + ".csv");
      emit_scatter(p, labels, ids, run.out() / (stem + ".svg"), ScatterFormat::Svg);
      run.record(stem + ".svg");
      run.write_json(stem + ".json", p.diagnostics_json());
    }
  });

  ClassificationReport cls;
  run.stage("probe", [&] {
    const auto train_labels = labels_of(data.splits[0]);
    const auto val_labels = labels_of(data.splits[1]);
    const auto model = train_probe(emb[0], train_labels, emb[1], val_labels, cfg.probe);
    write_probe(model, run.out() / "probe.pgpr");
    run.record("probe.pgpr");
    const auto test_labels = labels_of(data.splits[2]);
    cls = evaluate(model, emb[2], test_labels);
    run.write_json("classification.json", cls.to_json());
  });

  run.stage("gap", [&] { run.write_json("gap.json", gap_report(cls, geo, cfg.gap).to_json()); });

  run.stage("manifest", [&] {
    auto resolved = cfg.to_json();
    resolved.erase("output_dir");
    resolved.erase("threads");
    run.write_json("config.json", resolved);
    write_file_atomic(run.out() / "manifest.json", run.manifest().to_json().dump(2) + "\n");
  });
  return run.manifest();
}

}  // namespace lgap
