#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "lgap/lgap.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  lgap_string_free(s);
  return out;
}

class CApi : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("lgap-capi-" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void generate(std::uint64_t per_class) {
    const std::string overrides = "{\"per_class\":" + std::to_string(per_class) + "}";
    char* summary = nullptr;
    ASSERT_EQ(lgap_corpus_generate(kConfig, overrides.c_str(), dir_.c_str(), &summary), LGAP_OK) << lgap_last_error();
    take(summary);
  }

  static constexpr const char* kConfig = R"({"version":"1","seed":3,"encoder":{"builtin":{}}})";
  fs::path dir_;
};

}  // namespace

TEST_F(CApi, VersionAndExitCodes) {
  EXPECT_STRNE(lgap_version(), "");
  EXPECT_EQ(lgap_exit_code(LGAP_OK), 0);
  EXPECT_EQ(lgap_exit_code(LGAP_ERR_CONFIG), 2);
  EXPECT_EQ(lgap_exit_code(LGAP_ERR_ARGUMENT), 2);
  EXPECT_EQ(lgap_exit_code(LGAP_ERR_DATA), 3);
  EXPECT_EQ(lgap_exit_code(LGAP_ERR_FORMAT), 3);
  EXPECT_EQ(lgap_exit_code(LGAP_ERR_STAGE), 4);
  EXPECT_EQ(lgap_set_threads(2), LGAP_OK);
  EXPECT_EQ(lgap_set_threads(1), LGAP_OK);
}

TEST_F(CApi, ConfigValidationReturnsAllErrors) {
  char* normalized = nullptr;
  char* errors = nullptr;
  EXPECT_EQ(lgap_config_validate("", nullptr, &normalized, &errors), LGAP_ERR_CONFIG);
  EXPECT_EQ(normalized, nullptr);
  const auto list = json::parse(take(errors));
  EXPECT_EQ(list.size(), 3u);

  ASSERT_EQ(lgap_config_validate(kConfig, nullptr, &normalized, &errors), LGAP_OK);
  const auto cfg = json::parse(take(normalized));
  take(errors);
  EXPECT_EQ(cfg["seed"], 3);
  EXPECT_TRUE(cfg.contains("seeds"));
}

TEST_F(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(lgap_corpus_load(nullptr, nullptr), LGAP_ERR_ARGUMENT);
  EXPECT_STRNE(lgap_last_error(), "");
  lgap_embeddings* e = nullptr;
  EXPECT_EQ(lgap_embeddings_read(nullptr, &e), LGAP_ERR_ARGUMENT);
}

TEST_F(CApi, CorpusEncodeGeometryProbeGap) {
  generate(20);
  lgap_corpus* train = nullptr;
  lgap_corpus* val = nullptr;
  lgap_corpus* test = nullptr;
  ASSERT_EQ(lgap_corpus_load(path("train.jsonl").c_str(), &train), LGAP_OK) << lgap_last_error();
  ASSERT_EQ(lgap_corpus_load(path("val.jsonl").c_str(), &val), LGAP_OK);
  ASSERT_EQ(lgap_corpus_load(path("test.jsonl").c_str(), &test), LGAP_OK);
  EXPECT_EQ(lgap_corpus_size(train), 64u);
  std::uint64_t id = 0;
  int label = -1;
  const char* text = nullptr;
  ASSERT_EQ(lgap_corpus_get(train, 0, &id, &label, &text), LGAP_OK);
  EXPECT_GE(label, 0);
  EXPECT_LE(label, 3);
  EXPECT_GT(std::strlen(text), 0u);
  EXPECT_EQ(lgap_corpus_get(train, 64, &id, &label, &text), LGAP_ERR_ARGUMENT);

  lgap_embeddings* etrain = nullptr;
  lgap_embeddings* eval = nullptr;
  lgap_embeddings* etest = nullptr;
  size_t zero = 99;
  ASSERT_EQ(lgap_encode_hash(train, 64, 1, 3, 7, &etrain, &zero), LGAP_OK) << lgap_last_error();
  EXPECT_EQ(zero, 0u);
  ASSERT_EQ(lgap_encode_hash(val, 64, 1, 3, 7, &eval, nullptr), LGAP_OK);
  ASSERT_EQ(lgap_encode_hash(test, 64, 1, 3, 7, &etest, nullptr), LGAP_OK);
  EXPECT_EQ(lgap_embeddings_rows(etrain), 64u);
  EXPECT_EQ(lgap_embeddings_cols(etrain), 64u);
  EXPECT_EQ(lgap_check_alignment(etrain, train), LGAP_OK);
  EXPECT_EQ(lgap_check_alignment(etrain, val), LGAP_ERR_DATA);

  std::uint8_t a[32], b[32];
  lgap_corpus_digest(train, a);
  lgap_embeddings_digest(etrain, b);
  EXPECT_EQ(std::memcmp(a, b, 32), 0);

  char* geo = nullptr;
  ASSERT_EQ(lgap_geometry(etrain, train, nullptr, &geo), LGAP_OK) << lgap_last_error();
  const std::string geo_json = take(geo);
  EXPECT_TRUE(json::parse(geo_json).contains("delta"));

  char* diag = nullptr;
  ASSERT_EQ(lgap_project(etrain, train, R"({"method":"pca","format":"csv"})", path("pca.csv").c_str(), &diag),
            LGAP_OK)
      << lgap_last_error();
  take(diag);
  EXPECT_TRUE(fs::exists(path("pca.csv")));

  lgap_probe* probe = nullptr;
  ASSERT_EQ(lgap_probe_train(etrain, train, eval, val, R"({"epochs":50})", &probe), LGAP_OK) << lgap_last_error();
  ASSERT_EQ(lgap_probe_write(probe, path("probe.pgpr").c_str()), LGAP_OK);
  lgap_probe* reloaded = nullptr;
  ASSERT_EQ(lgap_probe_read(path("probe.pgpr").c_str(), &reloaded), LGAP_OK);
  char* r1 = nullptr;
  char* r2 = nullptr;
  ASSERT_EQ(lgap_probe_evaluate(probe, etest, test, &r1), LGAP_OK);
  ASSERT_EQ(lgap_probe_evaluate(reloaded, etest, test, &r2), LGAP_OK);
  const std::string cls = take(r1);
  EXPECT_EQ(cls, take(r2));

  char* gap = nullptr;
  ASSERT_EQ(lgap_gap_report(cls.c_str(), geo_json.c_str(), 0.9, 0.25, &gap), LGAP_OK) << lgap_last_error();
  const auto g = json::parse(take(gap));
  EXPECT_TRUE(g["collapse_flag"].is_boolean());
  EXPECT_EQ(lgap_gap_report("{nope", geo_json.c_str(), 0.9, 0.25, &gap), LGAP_ERR_FORMAT);

  lgap_probe_free(probe);
  lgap_probe_free(reloaded);
  lgap_embeddings_free(etrain);
  lgap_embeddings_free(eval);
  lgap_embeddings_free(etest);
  lgap_corpus_free(train);
  lgap_corpus_free(val);
  lgap_corpus_free(test);
}

TEST_F(CApi, EmbeddingsRoundTripAndCorruption) {
  const float data[6] = {1.0f, -0.0f, 0.5f, 1e-42f, -3.0f, 2.0f};
  std::uint8_t digest[32];
  std::memset(digest, 0xAB, 32);
  lgap_embeddings* e = nullptr;
  ASSERT_EQ(lgap_embeddings_create(2, 3, data, "custom", digest, &e), LGAP_OK);
  ASSERT_EQ(lgap_embeddings_write(e, path("m.pgem").c_str()), LGAP_OK);
  lgap_embeddings* back = nullptr;
  ASSERT_EQ(lgap_embeddings_read(path("m.pgem").c_str(), &back), LGAP_OK);
  EXPECT_EQ(std::memcmp(lgap_embeddings_data(back), data, sizeof data), 0);
  EXPECT_STREQ(lgap_embeddings_encoder_id(back), "custom");
  lgap_embeddings_free(back);

  std::string bytes;
  {
    std::ifstream in(path("m.pgem"), std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  bytes.replace(0, 4, "XXXX");
  std::ofstream(path("bad.pgem"), std::ios::binary) << bytes;
  EXPECT_EQ(lgap_embeddings_read(path("bad.pgem").c_str(), &back), LGAP_ERR_FORMAT);
  EXPECT_STREQ(lgap_last_error_field(), "magic");
  EXPECT_EQ(lgap_embeddings_read(path("missing.pgem").c_str(), &back), LGAP_ERR_IO);

  const float nan_data[1] = {std::nanf("")};
  EXPECT_EQ(lgap_embeddings_create(1, 1, nan_data, "x", digest, &back), LGAP_ERR_DATA);
  lgap_embeddings_free(e);
}

TEST_F(CApi, RunPipelineReturnsManifest) {
  const std::string overrides = "{\"per_class\":40,\"output_dir\":\"" + dir_.string() + "/run\"}";
  char* manifest = nullptr;
  ASSERT_EQ(lgap_run_pipeline(kConfig, overrides.c_str(), &manifest), LGAP_OK) << lgap_last_error();
  const auto m = json::parse(take(manifest));
  EXPECT_GE(m["artifacts"].size(), 8u);
  EXPECT_TRUE(fs::exists(dir_ / "run" / "manifest.json"));

  const std::string tiny = "{\"per_class\":5,\"output_dir\":\"" + dir_.string() + "/tiny\"}";
  EXPECT_EQ(lgap_run_pipeline(kConfig, tiny.c_str(), &manifest), LGAP_ERR_STAGE);
  EXPECT_NE(std::string(lgap_last_error()).find("project"), std::string::npos);
  EXPECT_EQ(lgap_run_pipeline("{}", nullptr, &manifest), LGAP_ERR_CONFIG);
}
