// SPDX-License-Identifier: Apache-2.0
#include "harness/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

namespace graphflow {

using nlohmann::json;

EncoderOptions Config::encoder_options(std::size_t vocab_size,
                                       bool training) const {
  EncoderOptions o;
  o.word_vocab = vocab_size;
  o.word_dim = word_dim;
  o.pos_vocab = pos_vocab;
  o.pos_dim = pos_dim;
  o.ner_vocab = ner_vocab;
  o.ner_dim = ner_dim;
  o.exact_match_dim = exact_match_dim;
  o.turn_marker_dim = turn_marker_dim;
  o.hidden = hidden;
  o.history = history;
  o.prepend_questions = !ablation.no_pre_ques;
  o.prepend_answers = !ablation.no_pre_ans;
  o.answer_locations = !ablation.no_pre_ans_loc;
  const double emb_rate =
      embeddings_path.empty() ? dropout_embedding : dropout_pretrained;
  o.dropout_embedding = training ? emb_rate : 0.0;
  o.dropout_rnn = training ? dropout_rnn : 0.0;
  return o;
}

ReasoningOptions Config::reasoning_options(bool training) const {
  ReasoningOptions r;
  r.hidden = hidden;
  r.rgnn.hops = hops;
  r.rgnn.recurrent = !ablation.no_recurrent_conn;
  r.rgnn.graph_cell = !ablation.no_rgnn;
  r.dropout_rnn = training ? dropout_rnn : 0.0;
  return r;
}

void Config::validate() const {
  auto positive = [](std::size_t v, const char *name) {
    if (v == 0)
      throw ConfigError(std::string(name) + " must be positive");
  };
  positive(hidden, "hidden");
  positive(word_dim, "word_dim");
  positive(pos_dim, "pos_dim");
  positive(ner_dim, "ner_dim");
  positive(exact_match_dim, "exact_match_dim");
  positive(turn_marker_dim, "turn_marker_dim");
  positive(pos_vocab, "pos_vocab");
  positive(ner_vocab, "ner_vocab");
  positive(k, "k");
  positive(hops, "hops");
  positive(max_span_len, "max_span_len");
  if (hidden % 2 != 0)
    throw ConfigError("hidden must be even");
  auto rate = [](double v, const char *name) {
    if (!(v >= 0.0 && v < 1.0))
      throw ConfigError(std::string(name) + " must be in [0, 1)");
  };
  rate(dropout_embedding, "dropout_embedding");
  rate(dropout_pretrained, "dropout_pretrained");
  rate(dropout_rnn, "dropout_rnn");
  if (!(learning_rate > 0.0))
    throw ConfigError("learning_rate must be positive");
  if (grad_clip < 0.0)
    throw ConfigError("grad_clip must be >= 0");
  if (target_f1 < 0.0 || target_f1 > 1.0)
    throw ConfigError("target_f1 must be in [0, 1]");
  if (profile != "coqa" && profile != "quac" && profile != "doqa")
    throw ConfigError("profile must be coqa, quac or doqa");
  if (device != "cpu")
    throw ConfigError("only the cpu device is supported");
}

json config_to_json(const Config &c) {
  return {
      {"hidden", c.hidden},
      {"word_dim", c.word_dim},
      {"pos_dim", c.pos_dim},
      {"ner_dim", c.ner_dim},
      {"exact_match_dim", c.exact_match_dim},
      {"turn_marker_dim", c.turn_marker_dim},
      {"pos_vocab", c.pos_vocab},
      {"ner_vocab", c.ner_vocab},
      {"k", c.k},
      {"hops", c.hops},
      {"history", c.history},
      {"max_span_len", c.max_span_len},
      {"profile", c.profile},
      {"device", c.device},
      {"dropout_embedding", c.dropout_embedding},
      {"dropout_pretrained", c.dropout_pretrained},
      {"dropout_rnn", c.dropout_rnn},
      {"learning_rate", c.learning_rate},
      {"grad_clip", c.grad_clip},
      {"epochs", c.epochs},
      {"target_f1", c.target_f1},
      {"seed", c.seed},
      {"ablation",
       {{"no_recurrent_conn", c.ablation.no_recurrent_conn},
        {"no_rgnn", c.ablation.no_rgnn},
        {"no_knn", c.ablation.no_knn},
        {"no_pre_ques", c.ablation.no_pre_ques},
        {"no_pre_ans", c.ablation.no_pre_ans},
        {"no_pre_ans_loc", c.ablation.no_pre_ans_loc}}},
      {"predicted_history", c.predicted_history},
      {"train_path", c.train_path},
      {"dev_path", c.dev_path},
      {"embeddings_path", c.embeddings_path},
      {"output_dir", c.output_dir},
  };
}

Config config_from_json(const json &j) {
  if (!j.is_object())
    throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "hidden", "word_dim", "pos_dim", "ner_dim", "exact_match_dim",
      "turn_marker_dim", "pos_vocab", "ner_vocab", "k", "hops", "history",
      "max_span_len", "profile", "device", "dropout_embedding",
      "dropout_pretrained", "dropout_rnn", "learning_rate", "grad_clip",
      "epochs", "target_f1", "seed", "ablation", "predicted_history",
      "train_path", "dev_path", "embeddings_path", "output_dir"};
  for (const auto &[key, _] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown config key '" + key + "'");

  Config c;
  try {
    auto get = [&](const char *key, auto &field) {
      if (j.contains(key))
        j.at(key).get_to(field);
    };
    get("hidden", c.hidden);
    get("word_dim", c.word_dim);
    get("pos_dim", c.pos_dim);
    get("ner_dim", c.ner_dim);
    get("exact_match_dim", c.exact_match_dim);
    get("turn_marker_dim", c.turn_marker_dim);
    get("pos_vocab", c.pos_vocab);
    get("ner_vocab", c.ner_vocab);
    get("k", c.k);
    get("profile", c.profile);
    c.hops = c.profile == "quac" ? 3 : 5;
    get("hops", c.hops);
    get("history", c.history);
    get("max_span_len", c.max_span_len);
    get("device", c.device);
    get("dropout_embedding", c.dropout_embedding);
    get("dropout_pretrained", c.dropout_pretrained);
    get("dropout_rnn", c.dropout_rnn);
    get("learning_rate", c.learning_rate);
    get("grad_clip", c.grad_clip);
    get("epochs", c.epochs);
    get("target_f1", c.target_f1);
    get("seed", c.seed);
    get("predicted_history", c.predicted_history);
    get("train_path", c.train_path);
    get("dev_path", c.dev_path);
    get("embeddings_path", c.embeddings_path);
    get("output_dir", c.output_dir);
    if (j.contains("ablation")) {
      const auto &a = j.at("ablation");
      static const std::set<std::string> flags = {
          "no_recurrent_conn", "no_rgnn", "no_knn",
          "no_pre_ques", "no_pre_ans", "no_pre_ans_loc"};
      for (const auto &[key, _] : a.items())
        if (!flags.count(key))
          throw ConfigError("unknown ablation flag '" + key + "'");
      auto flag = [&](const char *key, bool &field) {
        if (a.contains(key))
          a.at(key).get_to(field);
      };
      flag("no_recurrent_conn", c.ablation.no_recurrent_conn);
      flag("no_rgnn", c.ablation.no_rgnn);
      flag("no_knn", c.ablation.no_knn);
      flag("no_pre_ques", c.ablation.no_pre_ques);
      flag("no_pre_ans", c.ablation.no_pre_ans);
      flag("no_pre_ans_loc", c.ablation.no_pre_ans_loc);
    }
  } catch (const json::exception &e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

Config load_config(const std::string &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error &e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

std::string resolve_data_path(const std::string &path) {
  if (path.empty())
    return path;
  std::filesystem::path p(path);
  if (p.is_absolute())
    return path;
  if (const char *dir = std::getenv("GRAPHFLOW_DATA_DIR"); dir && *dir)
    return (std::filesystem::path(dir) / p).string();
  return path;
}

} // namespace graphflow
