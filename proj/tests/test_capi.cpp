// SPDX-License-Identifier: Apache-2.0
// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "json.hpp"

#include "graphflow/graphflow.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

struct DatasetFree {
  void operator()(gf_dataset *d) const { gf_dataset_free(d); }
};
struct ModelFree {
  void operator()(gf_model *m) const { gf_model_free(m); }
};
struct StringFree {
  void operator()(char *s) const { gf_string_free(s); }
};
using Dataset = std::unique_ptr<gf_dataset, DatasetFree>;
using Model = std::unique_ptr<gf_model, ModelFree>;
using String = std::unique_ptr<char, StringFree>;

const char *kSpec =
    R"({"dialogs": 4, "turns": 3, "min_context": 8, "max_context": 12,
        "entity_vocab": 30, "seed": 5})";

const char *kConfig =
    R"({"hidden": 8, "word_dim": 4, "pos_dim": 2, "ner_dim": 2,
        "k": 3, "hops": 1, "epochs": 1, "seed": 3, "learning_rate": 0.01})";

Dataset synthetic(const char *spec = kSpec) {
  gf_dataset *raw = nullptr;
  REQUIRE(gf_dataset_synthetic(spec, &raw) == GF_OK);
  return Dataset(raw);
}

Model trained(const gf_dataset *ds) {
  gf_model *raw = nullptr;
  const gf_dataset *sets[] = {ds};
  REQUIRE(gf_model_create(kConfig, sets, 1, &raw) == GF_OK);
  Model m(raw);
  REQUIRE(gf_train(m.get(), ds, nullptr, nullptr, nullptr, nullptr) == GF_OK);
  return m;
}

std::vector<json> lines(const char *text) {
  std::vector<json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty())
      out.push_back(json::parse(line));
  return out;
}

std::filesystem::path scratch(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / "graphflow_capi_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

} // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(gf_version()).size() > 0);
  CHECK(std::string(gf_status_name(GF_OK)) == "ok");
  CHECK(std::string(gf_status_name(GF_ERR_CONFIG)) == "config");
  CHECK(std::string(gf_status_name(GF_ERR_CHECKPOINT)) == "checkpoint");
  gf_string_free(nullptr);
  gf_dataset_free(nullptr);
  gf_model_free(nullptr);
  CHECK(gf_dataset_size(nullptr) == 0);
}

TEST_CASE("null arguments are rejected with a message") {
  CHECK(gf_dataset_synthetic(nullptr, nullptr) == GF_ERR_INVALID_ARGUMENT);
  CHECK(std::string(gf_last_error()).find("out") != std::string::npos);
  CHECK(gf_dataset_load(nullptr, nullptr) == GF_ERR_INVALID_ARGUMENT);
  CHECK(gf_model_save(nullptr, "x") == GF_ERR_INVALID_ARGUMENT);
  CHECK(gf_predict(nullptr, nullptr, 0, nullptr) == GF_ERR_INVALID_ARGUMENT);

  // A success clears the message.
  Dataset ds = synthetic();
  CHECK(std::string(gf_last_error()).empty());
}

TEST_CASE("errors map to their categories") {
  gf_dataset *ds = nullptr;
  CHECK(gf_dataset_synthetic("{not json", &ds) == GF_ERR_PARSE);
  CHECK(gf_dataset_synthetic(R"({"colour": 1})", &ds) == GF_ERR_DATASET);
  CHECK(gf_dataset_synthetic(R"({"history_rate": 2})", &ds) ==
        GF_ERR_DATASET);
  CHECK(ds == nullptr);
  CHECK(gf_dataset_load("/nonexistent/graphflow.json", &ds) ==
        GF_ERR_DATASET);

  gf_model *m = nullptr;
  CHECK(gf_model_create(R"({"hidden": 7})", nullptr, 0, &m) == GF_ERR_CONFIG);
  CHECK(gf_model_create(R"({"bogus": 1})", nullptr, 0, &m) == GF_ERR_CONFIG);
  CHECK(gf_model_load("/nonexistent/checkpoint.json", &m) ==
        GF_ERR_CHECKPOINT);
  CHECK(m == nullptr);

  const auto bad = scratch("broken_checkpoint.json");
  std::ofstream(bad) << R"({"format_version": 1})";
  CHECK(gf_model_load(bad.c_str(), &m) == GF_ERR_CHECKPOINT);
  CHECK(std::string(gf_last_error()).size() > 0);
}

TEST_CASE("dataset round trip through a file") {
  Dataset ds = synthetic();
  CHECK(gf_dataset_size(ds.get()) == 4);
  const auto path = scratch("synthetic.json");
  REQUIRE(gf_dataset_save(ds.get(), path.c_str()) == GF_OK);
  gf_dataset *raw = nullptr;
  REQUIRE(gf_dataset_load(path.c_str(), &raw) == GF_OK);
  Dataset back(raw);

  char *a = nullptr, *b = nullptr;
  REQUIRE(gf_dataset_to_json(ds.get(), &a) == GF_OK);
  REQUIRE(gf_dataset_to_json(back.get(), &b) == GF_OK);
  String sa(a), sb(b);
  CHECK(json::parse(sa.get()) == json::parse(sb.get()));
  CHECK(json::parse(sa.get()).at("data").size() == 4);
}

TEST_CASE("train, save, load, predict and trace") {
  Dataset ds = synthetic();
  gf_model *raw = nullptr;
  const gf_dataset *sets[] = {ds.get()};
  REQUIRE(gf_model_create(kConfig, sets, 1, &raw) == GF_OK);
  Model m(raw);

  std::vector<json> seen;
  auto cb = [](const char *epoch, void *user) {
    static_cast<std::vector<json> *>(user)->push_back(json::parse(epoch));
  };
  char *result = nullptr;
  REQUIRE(gf_train(m.get(), ds.get(), nullptr, cb, &seen, &result) == GF_OK);
  String res(result);
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].contains("train_loss"));
  CHECK(json::parse(res.get()).at("best_epoch") == 1);

  char *cfg = nullptr;
  REQUIRE(gf_model_config(m.get(), &cfg) == GF_OK);
  CHECK(json::parse(String(cfg).get()).at("hidden") == 8);

  const auto ck = scratch("model.json");
  REQUIRE(gf_model_save(m.get(), ck.c_str()) == GF_OK);
  REQUIRE(gf_model_load(ck.c_str(), &raw) == GF_OK);
  Model loaded(raw);

  char *p1 = nullptr, *p2 = nullptr;
  REQUIRE(gf_predict(m.get(), ds.get(), 0, &p1) == GF_OK);
  REQUIRE(gf_predict(loaded.get(), ds.get(), 0, &p2) == GF_OK);
  String s1(p1), s2(p2);
  CHECK(std::string(s1.get()) == std::string(s2.get()));
  const auto preds = lines(s1.get());
  CHECK(preds.size() == 12);
  for (const auto &p : preds) {
    CHECK(p.contains("answer"));
    CHECK(p.contains("type"));
  }

  char *report = nullptr;
  REQUIRE(gf_evaluate(loaded.get(), ds.get(), 1, 1, &report) == GF_OK);
  const json r = json::parse(String(report).get());
  CHECK(r.contains("f1"));
  CHECK(r.at("predictions").size() == 12);

  char *trace = nullptr, *text = nullptr;
  REQUIRE(gf_flow_trace(loaded.get(), ds.get(), 0.5, &trace, &text) == GF_OK);
  String st(trace), sx(text);
  CHECK(json::parse(st.get()).at("conversations").size() == 4);
  CHECK(std::string(sx.get()).size() > 0);
  CHECK(gf_flow_trace(loaded.get(), ds.get(), 1.5, nullptr, nullptr) ==
        GF_ERR_INVALID_ARGUMENT);

  char *dump = nullptr;
  REQUIRE(gf_graph_dump(loaded.get(), ds.get(), &dump) == GF_OK);
  const auto rows = lines(String(dump).get());
  REQUIRE(!rows.empty());
  for (const auto &row : rows) {
    CHECK(row.contains("conversation_id"));
    CHECK(row.at("kept").size() == row.at("weights").size());
    CHECK(row.at("kept").size() <= 3);
  }

  const auto vocab = scratch("vocab.txt");
  REQUIRE(gf_model_save_vocab(m.get(), vocab.c_str()) == GF_OK);
  CHECK(std::filesystem::file_size(vocab) > 0);
}

TEST_CASE("embeddings and ablation") {
  Dataset ds = synthetic();
  Model m = trained(ds.get());

  const auto emb = scratch("emb.txt");
  std::ofstream(emb) << "the 1 2 3 4\nnotaword 0 0 0 0\n";
  size_t found = 0;
  CHECK(gf_model_load_embeddings(m.get(), emb.c_str(), &found) == GF_OK);
  CHECK(found <= 1);
  std::ofstream(emb) << "the 1 2\n";
  CHECK(gf_model_load_embeddings(m.get(), emb.c_str(), nullptr) ==
        GF_ERR_PARSE);

  char *out = nullptr;
  CHECK(gf_ablate(kConfig, "no_such_row", ds.get(), nullptr, ds.get(), &out) ==
        GF_ERR_CONFIG);
  REQUIRE(gf_ablate(kConfig, "full,-kNN", ds.get(), nullptr, ds.get(),
                    &out) == GF_OK);
  const json j = json::parse(String(out).get());
  CHECK(j.at("rows").size() == 2);
}

TEST_CASE("grad check reports every module") {
  char *out = nullptr;
  REQUIRE(gf_grad_check(1, &out) == GF_OK);
  const json j = json::parse(String(out).get());
  CHECK(j.at("pass") == true);
  CHECK(j.at("checks").back().at("name") == "end_to_end");
}
