// SPDX-License-Identifier: Apache-2.0
#include "graphflow/graphflow.h"

#include "harness/ablation.hpp"
#include "harness/dataset.hpp"
#include "harness/flow_trace.hpp"
#include "harness/gradcheck.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

using nlohmann::json;
using namespace graphflow;

struct gf_dataset {
  std::vector<Conversation> convs;
};

struct gf_model {
  explicit gf_model(GraphFlowModel m) : model(std::move(m)) {}
  GraphFlowModel model;
};

namespace {

thread_local std::string last_error;

gf_status fail(gf_status status, const std::string &msg) {
  last_error = msg;
  return status;
}

// Maps the active exception to its category. Order matters: the domain
// errors derive from runtime_error.
gf_status translate_current() {
  try {
    throw;
  } catch (const ConfigError &e) {
    return fail(GF_ERR_CONFIG, e.what());
  } catch (const DatasetError &e) {
    return fail(GF_ERR_DATASET, e.what());
  } catch (const CheckpointError &e) {
    return fail(GF_ERR_CHECKPOINT, e.what());
  } catch (const ShapeError &e) {
    return fail(GF_ERR_SHAPE, e.what());
  } catch (const BindingError &e) {
    return fail(GF_ERR_SHAPE, e.what());
  } catch (const NumericError &e) {
    return fail(GF_ERR_NUMERIC, e.what());
  } catch (const TrainingError &e) {
    return fail(GF_ERR_TRAINING, e.what());
  } catch (const IoError &e) {
    return fail(GF_ERR_IO, e.what());
  } catch (const FormatError &e) {
    return fail(GF_ERR_PARSE, e.what());
  } catch (const json::exception &e) {
    return fail(GF_ERR_PARSE, e.what());
  } catch (const std::invalid_argument &e) {
    return fail(GF_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range &e) {
    return fail(GF_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc &) {
    return fail(GF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception &e) {
    return fail(GF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GF_ERR_INTERNAL, "unknown error");
  }
}

template <typename F> gf_status guard(F &&f) {
  try {
    last_error.clear();
    f();
    return GF_OK;
  } catch (...) {
    return translate_current();
  }
}

char *copy_out(const std::string &s) {
  char *p = static_cast<char *>(std::malloc(s.size() + 1));
  if (!p)
    throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void put(char **out, const std::string &s) {
  if (out)
    *out = copy_out(s);
}

json parse_optional(const char *text) {
  if (!text || !*text)
    return json();
  return json::parse(text);
}

Config parse_config(const char *text) {
  json j = parse_optional(text);
  return config_from_json(j.is_null() ? json::object() : j);
}

void require(const void *p, const char *what) {
  if (!p)
    throw std::invalid_argument(std::string(what) + " must not be null");
}

// Token ids of a dataset under a model's vocabulary; unknown words map to 0.
std::vector<Conversation> mapped(const GraphFlowModel &m, const gf_dataset *ds) {
  std::vector<Conversation> convs = ds->convs;
  Vocabulary vocab = m.vocabulary();
  vocab.assign(convs, false);
  return convs;
}

std::string jsonl(const std::vector<json> &rows) {
  std::string out;
  for (const auto &r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

json epoch_json(const EpochLog &l) {
  return {{"epoch", l.epoch},
          {"train_loss", l.train_loss},
          {"selection_f1", l.selection_f1}};
}

std::vector<std::string> split_rows(const char *rows) {
  if (!rows || !*rows)
    return default_ablation_rows();
  std::vector<std::string> out;
  std::stringstream ss(rows);
  for (std::string r; std::getline(ss, r, ',');)
    if (!r.empty())
      out.push_back(r);
  if (out.empty())
    throw std::invalid_argument("no ablation rows given");
  return out;
}

} // namespace

extern "C" {

const char *gf_version(void) { return "0.1.0"; }

const char *gf_status_name(gf_status status) {
  switch (status) {
  case GF_OK: return "ok";
  case GF_ERR_INVALID_ARGUMENT: return "invalid_argument";
  case GF_ERR_IO: return "io";
  case GF_ERR_PARSE: return "parse";
  case GF_ERR_CONFIG: return "config";
  case GF_ERR_DATASET: return "dataset";
  case GF_ERR_CHECKPOINT: return "checkpoint";
  case GF_ERR_SHAPE: return "shape";
  case GF_ERR_NUMERIC: return "numeric";
  case GF_ERR_TRAINING: return "training";
  case GF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char *gf_last_error(void) { return last_error.c_str(); }

void gf_string_free(char *s) { std::free(s); }

gf_status gf_dataset_load(const char *path, gf_dataset **out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    LoadReport rep = load_coqa(resolve_data_path(path));
    *out = new gf_dataset{std::move(rep.conversations)};
  });
}

gf_status gf_dataset_synthetic(const char *spec_json, gf_dataset **out) {
  return guard([&] {
    require(out, "out");
    SyntheticSpec spec = synthetic_spec_from_json(parse_optional(spec_json));
    *out = new gf_dataset{generate_synthetic(spec)};
  });
}

size_t gf_dataset_size(const gf_dataset *ds) {
  return ds ? ds->convs.size() : 0;
}

gf_status gf_dataset_to_json(const gf_dataset *ds, char **json_out) {
  return guard([&] {
    require(ds, "dataset");
    require(json_out, "json_out");
    *json_out = copy_out(to_coqa_json(ds->convs).dump());
  });
}

gf_status gf_dataset_save(const gf_dataset *ds, const char *path) {
  return guard([&] {
    require(ds, "dataset");
    require(path, "path");
    save_coqa(ds->convs, path);
  });
}

void gf_dataset_free(gf_dataset *ds) { delete ds; }

gf_status gf_model_create(const char *config_json,
                          const gf_dataset *const *datasets, size_t n_datasets,
                          gf_model **out) {
  return guard([&] {
    require(out, "out");
    if (n_datasets)
      require(datasets, "datasets");
    Config cfg = parse_config(config_json);
    Vocabulary vocab;
    for (size_t i = 0; i < n_datasets; ++i) {
      require(datasets[i], "dataset");
      std::vector<Conversation> convs = datasets[i]->convs;
      vocab.assign(convs, true);
    }
    *out = new gf_model(GraphFlowModel(std::move(cfg), std::move(vocab)));
  });
}

gf_status gf_model_load(const char *checkpoint_path, gf_model **out) {
  return guard([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    *out = new gf_model(GraphFlowModel::load(checkpoint_path));
  });
}

gf_status gf_model_save(const gf_model *model, const char *checkpoint_path) {
  return guard([&] {
    require(model, "model");
    require(checkpoint_path, "checkpoint_path");
    model->model.save(checkpoint_path);
  });
}

gf_status gf_model_load_embeddings(gf_model *model, const char *path,
                                   size_t *found) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    const std::size_t n = model->model.load_embeddings(resolve_data_path(path));
    if (found)
      *found = n;
  });
}

gf_status gf_model_save_vocab(const gf_model *model, const char *path) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    model->model.vocabulary().save(path);
  });
}

gf_status gf_model_config(const gf_model *model, char **json_out) {
  return guard([&] {
    require(model, "model");
    require(json_out, "json_out");
    *json_out = copy_out(config_to_json(model->model.config()).dump());
  });
}

void gf_model_free(gf_model *model) { delete model; }

gf_status gf_train(gf_model *model, const gf_dataset *train_set,
                   const gf_dataset *dev, gf_epoch_callback on_epoch,
                   void *user, char **result_json) {
  return guard([&] {
    require(model, "model");
    require(train_set, "train dataset");
    GraphFlowModel &m = model->model;
    std::vector<Conversation> tr = mapped(m, train_set);
    std::vector<Conversation> dv;
    if (dev)
      dv = mapped(m, dev);
    EpochCallback cb;
    if (on_epoch)
      cb = [&](const EpochLog &l) {
        on_epoch(epoch_json(l).dump().c_str(), user);
      };
    TrainResult r = train(m, tr, dv, cb);
    json epochs = json::array();
    for (const auto &l : r.epochs)
      epochs.push_back(epoch_json(l));
    put(result_json, json{{"epochs", std::move(epochs)},
                          {"best_epoch", r.best_epoch},
                          {"best_f1", r.best_f1},
                          {"stopped_early", r.stopped_early}}
                         .dump());
  });
}

gf_status gf_evaluate(const gf_model *model, const gf_dataset *ds,
                      int predicted_history, int with_predictions,
                      char **report_out) {
  return guard([&] {
    require(model, "model");
    require(ds, "dataset");
    require(report_out, "report_out");
    EvalReport r =
        evaluate(model->model, mapped(model->model, ds), predicted_history != 0);
    *report_out = copy_out(report_json(r, with_predictions != 0).dump());
  });
}

gf_status gf_predict(const gf_model *model, const gf_dataset *ds,
                     int predicted_history, char **jsonl_out) {
  return guard([&] {
    require(model, "model");
    require(ds, "dataset");
    require(jsonl_out, "jsonl_out");
    EvalReport r =
        evaluate(model->model, mapped(model->model, ds), predicted_history != 0);
    *jsonl_out = copy_out(jsonl(r.predictions));
  });
}

gf_status gf_flow_trace(const gf_model *model, const gf_dataset *ds,
                        double threshold, char **json_out, char **text_out) {
  return guard([&] {
    require(model, "model");
    require(ds, "dataset");
    if (!(threshold >= -1.0 && threshold <= 1.0))
      throw std::invalid_argument("flow trace threshold must be in [-1, 1]");
    json traces = json::array();
    std::string text;
    for (const auto &conv : mapped(model->model, ds)) {
      if (conv.turns.size() < 2)
        continue;
      FlowTrace trace = flow_trace(model->model, conv, threshold);
      traces.push_back(flow_trace_json(conv, trace));
      text += flow_trace_text(conv, trace);
    }
    put(json_out, json{{"conversations", std::move(traces)}}.dump());
    put(text_out, text);
  });
}

gf_status gf_graph_dump(const gf_model *model, const gf_dataset *ds,
                        char **jsonl_out) {
  return guard([&] {
    require(model, "model");
    require(ds, "dataset");
    require(jsonl_out, "jsonl_out");
    ForwardOptions opts;
    opts.dump_graphs = true;
    std::vector<json> rows;
    for (const auto &conv : mapped(model->model, ds)) {
      ConversationResult res = model->model.run(conv, opts);
      for (auto &turn : res.turns)
        for (auto &row : turn.graph) {
          row["conversation_id"] = conv.id;
          rows.push_back(std::move(row));
        }
    }
    *jsonl_out = copy_out(jsonl(rows));
  });
}

gf_status gf_ablate(const char *config_json, const char *rows,
                    const gf_dataset *train_set, const gf_dataset *dev,
                    const gf_dataset *eval_set, char **json_out) {
  return guard([&] {
    require(train_set, "train dataset");
    require(eval_set, "eval dataset");
    require(json_out, "json_out");
    Config cfg = parse_config(config_json);
    std::vector<std::string> names = split_rows(rows);
    for (const auto &n : names)
      ablated_config(cfg, n); // reject unknown rows before any training
    std::vector<Conversation> tr = train_set->convs, ev = eval_set->convs, dv;
    if (dev)
      dv = dev->convs;
    Vocabulary vocab;
    vocab.assign(tr, true);
    vocab.assign(dv, true);
    vocab.assign(ev, true);
    *json_out = copy_out(
        ablation_json(run_ablation(cfg, names, tr, dv, ev, vocab)).dump());
  });
}

gf_status gf_grad_check(uint64_t seed, char **json_out) {
  return guard([&] {
    require(json_out, "json_out");
    GradCheckSuite suite = check_modules(seed, kModuleTolerance);
    suite.checks.push_back({"end_to_end", check_model(seed, kModelTolerance)});
    *json_out = copy_out(gradcheck_json(suite).dump());
  });
}

} // extern "C"
