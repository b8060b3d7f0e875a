// SPDX-License-Identifier: Apache-2.0
// graphflow: command-line front end over the C API.

#include "graphflow/graphflow.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// A failed C API call, carrying its category for the exit code.
struct ApiFailure {
  gf_status status;
  std::string message;
};

void check(gf_status s) {
  if (s != GF_OK)
    throw ApiFailure{s, gf_last_error()};
}

struct DatasetDeleter {
  void operator()(gf_dataset *d) const { gf_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(gf_model *m) const { gf_model_free(m); }
};
using DatasetPtr = std::unique_ptr<gf_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<gf_model, ModelDeleter>;

// Takes ownership of a string returned by the library.
std::string take(char *s) {
  std::string out = s ? s : "";
  gf_string_free(s);
  return out;
}

DatasetPtr load_dataset(const std::string &path) {
  gf_dataset *d = nullptr;
  check(gf_dataset_load(path.c_str(), &d));
  return DatasetPtr(d);
}

ModelPtr load_model(const std::string &path) {
  gf_model *m = nullptr;
  check(gf_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

json model_config(const gf_model *m) {
  char *s = nullptr;
  check(gf_model_config(m, &s));
  return json::parse(take(s));
}

void write_file(const std::string &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw ApiFailure{GF_ERR_IO, "cannot write " + path};
  os << text;
  if (!os)
    throw ApiFailure{GF_ERR_IO, "error writing " + path};
}

// Writes to `path`, or to stdout when it is empty or "-".
void emit(const std::string &path, const std::string &text) {
  if (path.empty() || path == "-")
    std::cout << text << std::flush;
  else
    write_file(path, text);
}

std::string join_path(const std::string &dir, const std::string &file) {
  if (dir.empty() || dir == ".")
    return file;
  return dir.back() == '/' ? dir + file : dir + "/" + file;
}

// Every Config field as an optional command-line flag. Only flags that were
// given override the config file.
struct ConfigFlags {
  std::string config_file;
  std::optional<std::size_t> hidden, word_dim, pos_dim, ner_dim,
      exact_match_dim, turn_marker_dim, pos_vocab, ner_vocab, k, hops, history,
      max_span_len, epochs;
  std::optional<std::string> profile, device, train_path, dev_path,
      embeddings_path, output_dir;
  std::optional<double> dropout_embedding, dropout_pretrained, dropout_rnn,
      learning_rate, grad_clip, target_f1;
  std::optional<std::uint64_t> seed;
  bool no_recurrent_conn = false, no_rgnn = false, no_knn = false,
       no_pre_ques = false, no_pre_ans = false, no_pre_ans_loc = false,
       predicted_history = false;

  void add_to(CLI::App &app) {
    app.add_option("-c,--config", config_file, "JSON config file");
    app.add_option("--hidden", hidden, "Hidden size d");
    app.add_option("--word-dim", word_dim, "Word embedding size");
    app.add_option("--pos-dim", pos_dim, "POS embedding size");
    app.add_option("--ner-dim", ner_dim, "NER embedding size");
    app.add_option("--exact-match-dim", exact_match_dim,
                   "Exact-match feature size");
    app.add_option("--turn-marker-dim", turn_marker_dim,
                   "Answer-location marker size");
    app.add_option("--pos-vocab", pos_vocab, "Number of POS tags");
    app.add_option("--ner-vocab", ner_vocab, "Number of NER tags");
    app.add_option("--k", k, "Neighbors kept per graph row");
    app.add_option("--hops", hops, "Message-passing hops");
    app.add_option("--history", history, "Previous turns used as history");
    app.add_option("--max-span-len", max_span_len, "Longest decoded span");
    app.add_option("--profile", profile, "coqa, doqa or quac")
        ->check(CLI::IsMember({"coqa", "doqa", "quac"}));
    app.add_option("--device", device, "Compute device (cpu)");
    app.add_option("--dropout-embedding", dropout_embedding);
    app.add_option("--dropout-pretrained", dropout_pretrained);
    app.add_option("--dropout-rnn", dropout_rnn);
    app.add_option("--learning-rate", learning_rate);
    app.add_option("--grad-clip", grad_clip, "Global norm, 0 disables");
    app.add_option("--epochs", epochs);
    app.add_option("--target-f1", target_f1, "Stop once reached, 0 disables");
    app.add_option("--seed", seed);
    app.add_option("--train", train_path, "Training dataset");
    app.add_option("--dev", dev_path, "Development dataset");
    app.add_option("--embeddings", embeddings_path, "Word vector file");
    app.add_option("--output-dir", output_dir);
    app.add_flag("--no-recurrent-conn", no_recurrent_conn);
    app.add_flag("--no-rgnn", no_rgnn);
    app.add_flag("--no-knn", no_knn);
    app.add_flag("--no-pre-ques", no_pre_ques);
    app.add_flag("--no-pre-ans", no_pre_ans);
    app.add_flag("--no-pre-ans-loc", no_pre_ans_loc);
    app.add_flag("--predicted-history", predicted_history,
                 "Condition on the model's own earlier answers");
  }

  json resolve() const {
    json j = json::object();
    if (!config_file.empty()) {
      std::ifstream is(config_file);
      if (!is)
        throw ApiFailure{GF_ERR_CONFIG, "cannot open config " + config_file};
      try {
        j = json::parse(is);
      } catch (const json::exception &e) {
        throw ApiFailure{GF_ERR_PARSE, config_file + ": " + e.what()};
      }
      if (!j.is_object())
        throw ApiFailure{GF_ERR_CONFIG, "config must be a JSON object"};
    }
    auto set = [&](const char *key, const auto &v) {
      if (v)
        j[key] = *v;
    };
    set("hidden", hidden);
    set("word_dim", word_dim);
    set("pos_dim", pos_dim);
    set("ner_dim", ner_dim);
    set("exact_match_dim", exact_match_dim);
    set("turn_marker_dim", turn_marker_dim);
    set("pos_vocab", pos_vocab);
    set("ner_vocab", ner_vocab);
    set("k", k);
    set("hops", hops);
    set("history", history);
    set("max_span_len", max_span_len);
    set("profile", profile);
    set("device", device);
    set("dropout_embedding", dropout_embedding);
    set("dropout_pretrained", dropout_pretrained);
    set("dropout_rnn", dropout_rnn);
    set("learning_rate", learning_rate);
    set("grad_clip", grad_clip);
    set("epochs", epochs);
    set("target_f1", target_f1);
    set("seed", seed);
    set("train_path", train_path);
    set("dev_path", dev_path);
    set("embeddings_path", embeddings_path);
    set("output_dir", output_dir);
    auto flag = [&](const char *key, bool on) {
      if (on)
        j["ablation"][key] = true;
    };
    flag("no_recurrent_conn", no_recurrent_conn);
    flag("no_rgnn", no_rgnn);
    flag("no_knn", no_knn);
    flag("no_pre_ques", no_pre_ques);
    flag("no_pre_ans", no_pre_ans);
    flag("no_pre_ans_loc", no_pre_ans_loc);
    if (predicted_history)
      j["predicted_history"] = true;
    return j;
  }
};

std::string required_path(const json &cfg, const char *key, const char *flag) {
  const std::string p = cfg.value(key, std::string());
  if (p.empty())
    throw ApiFailure{GF_ERR_CONFIG,
                     std::string("missing ") + key + " (set " + flag + ")"};
  return p;
}

void print_epoch(const char *epoch_json, void *) {
  std::cerr << epoch_json << '\n';
}

// -- subcommands -----------------------------------------------------------

struct TrainArgs {
  ConfigFlags cfg;
  std::string checkpoint;
  bool quiet = false;
};

int run_train(const TrainArgs &a) {
  json cfg = a.cfg.resolve();
  DatasetPtr train = load_dataset(required_path(cfg, "train_path", "--train"));
  DatasetPtr dev;
  if (!cfg.value("dev_path", std::string()).empty())
    dev = load_dataset(cfg["dev_path"].get<std::string>());
  std::vector<const gf_dataset *> sources{train.get()};
  if (dev)
    sources.push_back(dev.get());

  gf_model *raw = nullptr;
  check(gf_model_create(cfg.dump().c_str(), sources.data(), sources.size(),
                        &raw));
  ModelPtr model(raw);
  const json resolved = model_config(model.get());
  json summary;
  if (const std::string emb = resolved.value("embeddings_path", std::string());
      !emb.empty()) {
    std::size_t found = 0;
    check(gf_model_load_embeddings(model.get(), emb.c_str(), &found));
    summary["embeddings_found"] = found;
  }

  char *result = nullptr;
  check(gf_train(model.get(), train.get(), dev.get(),
                 a.quiet ? nullptr : print_epoch, nullptr, &result));
  summary["training"] = json::parse(take(result));

  const std::string out_dir = resolved.value("output_dir", std::string("."));
  const std::string ckpt =
      a.checkpoint.empty() ? join_path(out_dir, "checkpoint.json") : a.checkpoint;
  const std::string vocab = join_path(out_dir, "vocab.txt");
  for (const std::string &f : {ckpt, vocab}) {
    const auto parent = std::filesystem::path(f).parent_path();
    std::error_code ec;
    if (!parent.empty())
      std::filesystem::create_directories(parent, ec);
    if (ec)
      throw ApiFailure{GF_ERR_IO, "cannot create " + parent.string() + ": " +
                                      ec.message()};
  }
  check(gf_model_save(model.get(), ckpt.c_str()));
  check(gf_model_save_vocab(model.get(), vocab.c_str()));
  summary["checkpoint"] = ckpt;
  summary["vocab"] = vocab;
  std::cout << summary.dump(2) << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, out;
  bool predicted_history = false;
  bool with_predictions = false;
};

std::string data_or_dev(const std::string &data, const gf_model *m) {
  if (!data.empty())
    return data;
  return required_path(model_config(m), "dev_path", "--data");
}

int run_eval(const EvalArgs &a) {
  ModelPtr model = load_model(a.checkpoint);
  DatasetPtr ds = load_dataset(data_or_dev(a.data, model.get()));
  char *report = nullptr;
  check(gf_evaluate(model.get(), ds.get(), a.predicted_history,
                    a.with_predictions, &report));
  emit(a.out, json::parse(take(report)).dump(2) + "\n");
  return 0;
}

int run_predict(const EvalArgs &a) {
  ModelPtr model = load_model(a.checkpoint);
  DatasetPtr ds = load_dataset(data_or_dev(a.data, model.get()));
  char *lines = nullptr;
  check(gf_predict(model.get(), ds.get(), a.predicted_history, &lines));
  emit(a.out, take(lines));
  return 0;
}

struct AblateArgs {
  ConfigFlags cfg;
  std::string rows, eval_path, out;
};

int run_ablate(const AblateArgs &a) {
  json cfg = a.cfg.resolve();
  DatasetPtr train = load_dataset(required_path(cfg, "train_path", "--train"));
  DatasetPtr dev;
  if (!cfg.value("dev_path", std::string()).empty())
    dev = load_dataset(cfg["dev_path"].get<std::string>());
  DatasetPtr eval_owned;
  const gf_dataset *eval = dev.get();
  if (!a.eval_path.empty()) {
    eval_owned = load_dataset(a.eval_path);
    eval = eval_owned.get();
  }
  if (!eval)
    throw ApiFailure{GF_ERR_CONFIG, "ablate needs --eval or --dev"};
  char *result = nullptr;
  check(gf_ablate(cfg.dump().c_str(), a.rows.empty() ? nullptr : a.rows.c_str(),
                  train.get(), dev.get(), eval, &result));
  emit(a.out, json::parse(take(result)).dump(2) + "\n");
  return 0;
}

struct FlowArgs {
  std::string checkpoint, data, json_out, text_out, graph_out;
  double threshold = 0.5;
  std::string format = "text";
};

int run_flow_trace(const FlowArgs &a) {
  ModelPtr model = load_model(a.checkpoint);
  DatasetPtr ds = load_dataset(data_or_dev(a.data, model.get()));
  char *js = nullptr, *text = nullptr;
  check(gf_flow_trace(model.get(), ds.get(), a.threshold, &js, &text));
  const std::string json_text = json::parse(take(js)).dump(2) + "\n";
  const std::string plain = take(text);
  if (!a.json_out.empty())
    write_file(a.json_out, json_text);
  if (!a.text_out.empty())
    write_file(a.text_out, plain);
  if (!a.graph_out.empty()) {
    char *rows = nullptr;
    check(gf_graph_dump(model.get(), ds.get(), &rows));
    write_file(a.graph_out, take(rows));
  }
  std::cout << (a.format == "json" ? json_text : plain) << std::flush;
  return 0;
}

struct SyntheticArgs {
  std::optional<std::size_t> dialogs, turns, min_context, max_context,
      entity_vocab;
  std::optional<double> history_rate, type_rate;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_gen_synthetic(const SyntheticArgs &a) {
  json spec = json::object();
  auto set = [&](const char *key, const auto &v) {
    if (v)
      spec[key] = *v;
  };
  set("dialogs", a.dialogs);
  set("turns", a.turns);
  set("min_context", a.min_context);
  set("max_context", a.max_context);
  set("entity_vocab", a.entity_vocab);
  set("history_rate", a.history_rate);
  set("type_rate", a.type_rate);
  set("seed", a.seed);
  gf_dataset *raw = nullptr;
  check(gf_dataset_synthetic(spec.dump().c_str(), &raw));
  DatasetPtr ds(raw);
  if (a.out.empty() || a.out == "-") {
    char *text = nullptr;
    check(gf_dataset_to_json(ds.get(), &text));
    std::cout << take(text) << '\n';
  } else {
    check(gf_dataset_save(ds.get(), a.out.c_str()));
    std::cout << json{{"path", a.out}, {"dialogs", gf_dataset_size(ds.get())}}
                     .dump()
              << '\n';
  }
  return 0;
}

int run_grad_check(std::uint64_t seed, const std::string &out) {
  char *result = nullptr;
  check(gf_grad_check(seed, &result));
  json report = json::parse(take(result));
  emit(out, report.dump(2) + "\n");
  if (!report.at("pass").get<bool>()) {
    std::cerr << "graphflow: gradient check failed\n";
    return kExitFailure;
  }
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"GraphFlow conversational reading comprehension"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gf_version()));

  TrainArgs train_args;
  auto *train = app.add_subcommand("train", "Train a model and checkpoint it");
  train_args.cfg.add_to(*train);
  train->add_option("--checkpoint", train_args.checkpoint,
                    "Checkpoint path (default <output-dir>/checkpoint.json)");
  train->add_flag("-q,--quiet", train_args.quiet, "No per-epoch log");

  EvalArgs eval_args;
  auto add_eval_options = [](CLI::App *sub, EvalArgs &a) {
    sub->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")
        ->required();
    sub->add_option("--data", a.data, "Dataset (default: the config dev set)");
    sub->add_option("-o,--out", a.out, "Output file (default stdout)");
    sub->add_flag("--predicted-history", a.predicted_history,
                  "Condition on the model's own earlier answers");
  };
  auto *eval = app.add_subcommand("eval", "F1 and per-type accuracy");
  add_eval_options(eval, eval_args);
  eval->add_flag("--with-predictions", eval_args.with_predictions,
                 "Include per-turn predictions");

  EvalArgs predict_args;
  auto *predict =
      app.add_subcommand("predict", "Per-turn predictions as JSON lines");
  add_eval_options(predict, predict_args);

  AblateArgs ablate_args;
  auto *ablate = app.add_subcommand("ablate", "Train and compare ablations");
  ablate_args.cfg.add_to(*ablate);
  ablate->add_option("--rows", ablate_args.rows,
                     "Comma-separated rows (default full,-RecurrentConn,"
                     "-RGNN,-kNN)");
  ablate->add_option("--eval", ablate_args.eval_path,
                     "Evaluation dataset (default: the dev set)");
  ablate->add_option("-o,--out", ablate_args.out, "Output file");

  FlowArgs flow_args;
  auto *flow = app.add_subcommand(
      "flow-trace", "Per-word change of node states between turns");
  flow->add_option("--checkpoint", flow_args.checkpoint, "Trained checkpoint")
      ->required();
  flow->add_option("--data", flow_args.data,
                   "Dataset (default: the config dev set)");
  flow->add_option("--threshold", flow_args.threshold,
                   "Highlight words below this cosine similarity")
      ->capture_default_str()
      ->check(CLI::Range(-1.0, 1.0));
  flow->add_option("--format", flow_args.format, "stdout format")
      ->capture_default_str()
      ->check(CLI::IsMember({"text", "json"}));
  flow->add_option("--json-out", flow_args.json_out, "Also write JSON here");
  flow->add_option("--text-out", flow_args.text_out, "Also write text here");
  flow->add_option("--graph-dump", flow_args.graph_out,
                   "Write per-turn graph rows as JSON lines");

  SyntheticArgs syn_args;
  auto *syn = app.add_subcommand("gen-synthetic",
                                 "Generate a synthetic conversation corpus");
  syn->add_option("--dialogs", syn_args.dialogs);
  syn->add_option("--turns", syn_args.turns);
  syn->add_option("--min-context", syn_args.min_context);
  syn->add_option("--max-context", syn_args.max_context);
  syn->add_option("--entity-vocab", syn_args.entity_vocab);
  syn->add_option("--history-rate", syn_args.history_rate,
                  "Fraction of turns that depend on the previous answer");
  syn->add_option("--type-rate", syn_args.type_rate,
                  "Fraction of yes/no/unknown answers");
  syn->add_option("--seed", syn_args.seed);
  syn->add_option("-o,--out", syn_args.out, "Output file (default stdout)");

  std::uint64_t gc_seed = 1;
  std::string gc_out;
  auto *gc = app.add_subcommand("grad-check",
                                "Finite-difference gradient checks");
  gc->add_option("--seed", gc_seed)->capture_default_str();
  gc->add_option("-o,--out", gc_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (train->parsed())
      return run_train(train_args);
    if (eval->parsed())
      return run_eval(eval_args);
    if (predict->parsed())
      return run_predict(predict_args);
    if (ablate->parsed())
      return run_ablate(ablate_args);
    if (flow->parsed())
      return run_flow_trace(flow_args);
    if (syn->parsed())
      return run_gen_synthetic(syn_args);
    if (gc->parsed())
      return run_grad_check(gc_seed, gc_out);
  } catch (const ApiFailure &f) {
    std::cerr << "graphflow: " << gf_status_name(f.status) << " error: "
              << f.message << '\n';
    return static_cast<int>(f.status);
  } catch (const std::exception &e) {
    std::cerr << "graphflow: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
