#include "lgap/lgap.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <stdexcept>

#include "lgap/config.hpp"
#include "lgap/corpus.hpp"
#include "lgap/digest.hpp"
#include "lgap/embedding_store.hpp"
#include "lgap/evaluation.hpp"
#include "lgap/geometry.hpp"
#include "lgap/parallel.hpp"
#include "lgap/pipeline.hpp"
#include "lgap/projection.hpp"
#include "lgap/resources.hpp"

struct lgap_corpus {
  std::vector<lgap::Prompt> prompts;
  lgap::Digest digest{};
};

struct lgap_embeddings {
  lgap::EmbeddingMatrix matrix;
};

struct lgap_probe {
  lgap::ProbeModel model;
};

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

/// Null or out-of-range arguments at the C boundary.
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

thread_local std::string g_error;
thread_local std::string g_field;

lgap_status set_error(lgap_status s, const std::string& msg, const std::string& field = {}) {
  g_error = msg;
  g_field = field;
  return s;
}

lgap_status status_of(lgap::ErrorKind k) {
  switch (k) {
    case lgap::ErrorKind::Config: return LGAP_ERR_CONFIG;
    case lgap::ErrorKind::Precondition: return LGAP_ERR_PRECONDITION;
    case lgap::ErrorKind::Format: return LGAP_ERR_FORMAT;
    case lgap::ErrorKind::Data: return LGAP_ERR_DATA;
    case lgap::ErrorKind::Io: return LGAP_ERR_IO;
  }
  return LGAP_ERR_INTERNAL;
}

template <class F>
lgap_status guard(F&& f) {
  g_error.clear();
  g_field.clear();
  try {
    f();
    return LGAP_OK;
  } catch (const ArgumentError& e) {
    return set_error(LGAP_ERR_ARGUMENT, e.what());
  } catch (const lgap::StageError& e) {
    return set_error(LGAP_ERR_STAGE, e.what());
  } catch (const lgap::FormatError& e) {
    return set_error(LGAP_ERR_FORMAT, e.what(), e.field());
  } catch (const lgap::Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const json::exception& e) {
    return set_error(LGAP_ERR_CONFIG, std::string("invalid JSON argument: ") + e.what());
  } catch (const std::bad_alloc&) {
    return set_error(LGAP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(LGAP_ERR_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void require(bool ok, const char* what) {
  if (!ok) throw ArgumentError(std::string("null argument: ") + what);
}

json parse_params(const char* text) {
  if (!text || !*text) return json::object();
  auto j = json::parse(text);
  if (!j.is_object()) throw lgap::ConfigError("parameters must be a JSON object");
  return j;
}

json parse_document(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw lgap::FormatError(what, e.what());
  }
}

lgap::RunConfig resolve(const char* config_json, const char* overrides_json) {
  const auto overrides = lgap::ConfigOverrides::from_json(overrides_json ? overrides_json : "");
  auto v = lgap::validate_config(config_json ? config_json : "", overrides);
  if (!v.config) {
    std::string msg = "invalid config:";
    for (const auto& e : v.errors) msg += "\n  " + e;
    throw lgap::ConfigError(msg);
  }
  return std::move(*v.config);
}

std::vector<lgap::Label> labels_of(const lgap_corpus* c) {
  std::vector<lgap::Label> out;
  for (const auto& p : c->prompts) out.push_back(p.label);
  return out;
}

std::vector<std::uint64_t> ids_of(const lgap_corpus* c) {
  std::vector<std::uint64_t> out;
  for (const auto& p : c->prompts) out.push_back(p.id);
  return out;
}

void aligned(const lgap_embeddings* e, const lgap_corpus* c) {
  require(e && c, "embeddings/corpus");
  lgap::check_alignment(e->matrix, c->digest, c->prompts.size());
}

}  // namespace

extern "C" {

const char* lgap_version(void) { return "1.0.0"; }
const char* lgap_last_error(void) { return g_error.c_str(); }
const char* lgap_last_error_field(void) { return g_field.c_str(); }
void lgap_string_free(char* s) { std::free(s); }

int lgap_exit_code(lgap_status status) {
  switch (status) {
    case LGAP_OK: return 0;
    case LGAP_ERR_CONFIG:
    case LGAP_ERR_ARGUMENT: return 2;
    case LGAP_ERR_DATA:
    case LGAP_ERR_FORMAT:
    case LGAP_ERR_PRECONDITION: return 3;
    default: return 4;
  }
}

lgap_status lgap_set_threads(unsigned threads) {
  if (threads == 0) return set_error(LGAP_ERR_ARGUMENT, "threads must be >= 1");
  return guard([&] { lgap::set_thread_count(threads); });
}

lgap_status lgap_config_validate(const char* config_json, const char* overrides_json, char** normalized_json,
                                 char** errors_json) {
  if (normalized_json) *normalized_json = nullptr;
  if (errors_json) *errors_json = nullptr;
  bool invalid = false;
  auto st = guard([&] {
    const auto overrides = lgap::ConfigOverrides::from_json(overrides_json ? overrides_json : "");
    const auto v = lgap::validate_config(config_json ? config_json : "", overrides);
    if (errors_json) *errors_json = dup(json(v.errors).dump(2));
    if (v.config && normalized_json) *normalized_json = dup(v.config->to_json().dump(2));
    if (!v.config) {
      invalid = true;
      g_error = std::to_string(v.errors.size()) + " configuration error(s)";
    }
  });
  if (st == LGAP_OK && invalid) return LGAP_ERR_CONFIG;
  return st;
}

lgap_status lgap_corpus_generate(const char* config_json, const char* overrides_json, const char* out_dir,
                                 char** summary_json) {
  return guard([&] {
    require(out_dir, "out_dir");
    const auto cfg = resolve(config_json, overrides_json);
    lgap::set_thread_count(cfg.threads);
    const auto data = lgap::CorpusGenerator(cfg.corpus).build_dataset();
    const auto paths = lgap::write_dataset(data, out_dir);
    ordered_json j;
    for (std::size_t s = 0; s < 3; ++s)
      j[std::string(lgap::kSplitNames[s])] = {{"path", paths[s].string()},
                                              {"count", data.splits[s].size()},
                                              {"sha256", lgap::to_hex(lgap::sha256_file(paths[s]))}};
    if (summary_json) *summary_json = dup(j.dump(2));
  });
}

lgap_status lgap_run_pipeline(const char* config_json, const char* overrides_json, char** manifest_json) {
  return guard([&] {
    const auto cfg = resolve(config_json, overrides_json);
    const auto manifest = lgap::run_pipeline(cfg);
    if (manifest_json) *manifest_json = dup(manifest.to_json().dump(2));
  });
}

lgap_status lgap_corpus_load(const char* path, lgap_corpus** out) {
  return guard([&] {
    require(path && out, "path/out");
    auto c = std::make_unique<lgap_corpus>();
    const auto bytes = lgap::read_text_file(path);
    c->prompts = lgap::parse_jsonl(bytes);
    c->digest = lgap::sha256(bytes);
    *out = c.release();
  });
}

void lgap_corpus_free(lgap_corpus* corpus) { delete corpus; }
size_t lgap_corpus_size(const lgap_corpus* corpus) { return corpus ? corpus->prompts.size() : 0; }

lgap_status lgap_corpus_get(const lgap_corpus* corpus, size_t index, uint64_t* id, int* label, const char** text) {
  return guard([&] {
    require(corpus, "corpus");
    if (index >= corpus->prompts.size()) throw ArgumentError("prompt index out of range");
    const auto& p = corpus->prompts[index];
    if (id) *id = p.id;
    if (label) *label = static_cast<int>(lgap::label_index(p.label));
    if (text) *text = p.text.c_str();
  });
}

void lgap_corpus_digest(const lgap_corpus* corpus, uint8_t digest[32]) {
  if (corpus && digest) std::memcpy(digest, corpus->digest.data(), 32);
}

lgap_status lgap_embeddings_create(uint64_t rows, uint64_t cols, const float* data, const char* encoder_id,
                                   const uint8_t digest[32], lgap_embeddings** out) {
  return guard([&] {
    require(out && (data || rows * cols == 0), "data/out");
    auto e = std::make_unique<lgap_embeddings>();
    auto& m = e->matrix;
    m.n = rows;
    m.d = cols;
    m.data.assign(data, data + rows * cols);
    m.encoder_id = encoder_id ? encoder_id : "";
    if (digest) std::memcpy(m.prompt_file_digest.data(), digest, 32);
    m.check_finite();
    *out = e.release();
  });
}

lgap_status lgap_embeddings_read(const char* path, lgap_embeddings** out) {
  return guard([&] {
    require(path && out, "path/out");
    auto e = std::make_unique<lgap_embeddings>();
    e->matrix = lgap::read_embeddings(path);
    *out = e.release();
  });
}

lgap_status lgap_embeddings_write(const lgap_embeddings* embeddings, const char* path) {
  return guard([&] {
    require(embeddings && path, "embeddings/path");
    lgap::write_embeddings(embeddings->matrix, path);
  });
}

void lgap_embeddings_free(lgap_embeddings* embeddings) { delete embeddings; }
uint64_t lgap_embeddings_rows(const lgap_embeddings* e) { return e ? e->matrix.n : 0; }
uint64_t lgap_embeddings_cols(const lgap_embeddings* e) { return e ? e->matrix.d : 0; }
const float* lgap_embeddings_data(const lgap_embeddings* e) { return e ? e->matrix.data.data() : nullptr; }
const char* lgap_embeddings_encoder_id(const lgap_embeddings* e) { return e ? e->matrix.encoder_id.c_str() : ""; }

void lgap_embeddings_digest(const lgap_embeddings* e, uint8_t digest[32]) {
  if (e && digest) std::memcpy(digest, e->matrix.prompt_file_digest.data(), 32);
}

lgap_status lgap_encode_hash(const lgap_corpus* corpus, uint32_t dim, uint32_t ngram_min, uint32_t ngram_max,
                             uint64_t seed, lgap_embeddings** out, size_t* zero_rows) {
  return guard([&] {
    require(corpus && out, "corpus/out");
    lgap::HashEncoderParams p;
    p.dim = dim;
    p.ngram_min = ngram_min;
    p.ngram_max = ngram_max;
    p.seed = seed;
    auto r = lgap::encode_hash(corpus->prompts, p, corpus->digest);
    if (zero_rows) *zero_rows = r.zero_rows.size();
    auto e = std::make_unique<lgap_embeddings>();
    e->matrix = std::move(r.matrix);
    *out = e.release();
  });
}

lgap_status lgap_check_alignment(const lgap_embeddings* embeddings, const lgap_corpus* corpus) {
  return guard([&] { aligned(embeddings, corpus); });
}

lgap_status lgap_geometry(const lgap_embeddings* embeddings, const lgap_corpus* corpus, const char* estimator_json,
                          char** report_json) {
  return guard([&] {
    require(report_json, "report_json");
    aligned(embeddings, corpus);
    embeddings->matrix.check_finite();
    const auto p = parse_params(estimator_json);
    lgap::EstimatorConfig est;
    const auto mode = p.value("estimator", std::string("auto"));
    if (mode == "auto") est.mode = lgap::EstimatorConfig::Mode::Auto;
    else if (mode == "exact") est.mode = lgap::EstimatorConfig::Mode::Exact;
    else if (mode == "sampled") est.mode = lgap::EstimatorConfig::Mode::Sampled;
    else throw lgap::ConfigError("estimator must be auto, exact or sampled");
    est.samples = p.value("samples", std::uint64_t{0});
    est.seed = p.value("seed", std::uint64_t{0});
    const auto ids = ids_of(corpus);
    const auto part = lgap::ClassPartition::from_prompts(corpus->prompts);
    *report_json = dup(lgap::geometry_report(embeddings->matrix, part, est, ids).to_json().dump(2));
  });
}

lgap_status lgap_project(const lgap_embeddings* embeddings, const lgap_corpus* corpus, const char* params_json,
                         const char* out_path, char** diagnostics_json) {
  return guard([&] {
    require(out_path, "out_path");
    aligned(embeddings, corpus);
    embeddings->matrix.check_finite();
    const auto p = parse_params(params_json);
    const auto method = p.value("method", std::string("pca"));
    const auto format = p.value("format", std::string("csv"));
    if (format != "csv" && format != "svg") throw lgap::ConfigError("format must be csv or svg");
    lgap::ProjectionResult r;
    if (method == "pca") {
      r = lgap::pca_project(embeddings->matrix, p.value("components", std::size_t{2}));
    } else if (method == "tsne") {
      lgap::TsneParams t;
      t.perplexity = p.value("perplexity", t.perplexity);
      t.iterations = p.value("iterations", t.iterations);
      t.seed = p.value("seed", t.seed);
      r = lgap::tsne_project(embeddings->matrix, t);
    } else {
      throw lgap::ConfigError("method must be pca or tsne");
    }
    const auto labels = labels_of(corpus);
    const auto ids = ids_of(corpus);
    lgap::emit_scatter(r, labels, ids, out_path, format == "svg" ? lgap::ScatterFormat::Svg : lgap::ScatterFormat::Csv);
    if (diagnostics_json) *diagnostics_json = dup(r.diagnostics_json().dump(2));
  });
}

lgap_status lgap_probe_train(const lgap_embeddings* train, const lgap_corpus* train_corpus, const lgap_embeddings* val,
                             const lgap_corpus* val_corpus, const char* params_json, lgap_probe** out) {
  return guard([&] {
    require(out, "out");
    aligned(train, train_corpus);
    aligned(val, val_corpus);
    const auto p = parse_params(params_json);
    lgap::ProbeConfig cfg;
    cfg.learning_rate = p.value("learning_rate", cfg.learning_rate);
    cfg.epochs = p.value("epochs", cfg.epochs);
    cfg.l2 = p.value("l2", cfg.l2);
    cfg.eval_interval = p.value("eval_interval", cfg.eval_interval);
    cfg.patience = p.value("patience", cfg.patience);
    cfg.seed = p.value("seed", cfg.seed);
    auto h = std::make_unique<lgap_probe>();
    h->model = lgap::train_probe(train->matrix, labels_of(train_corpus), val->matrix, labels_of(val_corpus), cfg);
    *out = h.release();
  });
}

lgap_status lgap_probe_evaluate(const lgap_probe* probe, const lgap_embeddings* embeddings, const lgap_corpus* corpus,
                                char** report_json) {
  return guard([&] {
    require(probe && report_json, "probe/report_json");
    aligned(embeddings, corpus);
    *report_json = dup(lgap::evaluate(probe->model, embeddings->matrix, labels_of(corpus)).to_json().dump(2));
  });
}

lgap_status lgap_probe_read(const char* path, lgap_probe** out) {
  return guard([&] {
    require(path && out, "path/out");
    auto h = std::make_unique<lgap_probe>();
    h->model = lgap::read_probe(path);
    *out = h.release();
  });
}

lgap_status lgap_probe_write(const lgap_probe* probe, const char* path) {
  return guard([&] {
    require(probe && path, "probe/path");
    lgap::write_probe(probe->model, path);
  });
}

void lgap_probe_free(lgap_probe* probe) { delete probe; }

lgap_status lgap_gap_report(const char* classification_json, const char* geometry_json, double f_thresh,
                            double r_thresh, char** gap_json) {
  return guard([&] {
    require(classification_json && geometry_json && gap_json, "classification/geometry/gap_json");
    const auto cls = lgap::ClassificationReport::from_json(parse_document(classification_json, "classification report"));
    const auto geo = lgap::GeometryReport::from_json(parse_document(geometry_json, "geometry report"));
    *gap_json = dup(lgap::gap_report(cls, geo, {f_thresh, r_thresh}).to_json().dump(2));
  });
}

}  // extern "C"
