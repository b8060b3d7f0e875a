// SPDX-License-Identifier: Apache-2.0
/**
 * @file   config.hpp
 * @brief  Model, training and ablation settings (JSON serializable).
 */
#ifndef GRAPHFLOW_HARNESS_CONFIG_HPP
#define GRAPHFLOW_HARNESS_CONFIG_HPP

#include "encoding/encoding.hpp"
#include "rgnn/rgnn.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace graphflow {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct AblationFlags {
  bool no_recurrent_conn = false;
  bool no_rgnn = false;
  bool no_knn = false;
  bool no_pre_ques = false;
  bool no_pre_ans = false;
  bool no_pre_ans_loc = false;

  friend bool operator==(const AblationFlags &, const AblationFlags &) = default;
};

struct Config {
  // model
  std::size_t hidden = 300;
  std::size_t word_dim = 64;
  std::size_t pos_dim = 12;
  std::size_t ner_dim = 8;
  std::size_t exact_match_dim = 3;
  std::size_t turn_marker_dim = 3;
  std::size_t pos_vocab = 50;
  std::size_t ner_vocab = 20;
  std::size_t k = 10;
  std::size_t hops = 5;
  std::size_t history = 2;
  std::size_t max_span_len = 15;
  // "coqa" / "doqa" (5 hops) or "quac" (3 hops); applied when hops is absent.
  std::string profile = "coqa";
  std::string device = "cpu";

  // training
  double dropout_embedding = 0.3;
  double dropout_pretrained = 0.4;
  double dropout_rnn = 0.3;
  double learning_rate = 0.001;
  double grad_clip = 10.0; // global norm, 0 disables
  std::size_t epochs = 30;
  /// Stop once the selection F1 reaches this value (0 disables).
  double target_f1 = 0.0;
  std::uint64_t seed = 42;

  AblationFlags ablation;
  /// Inference: prepend/mark the model's own earlier answers instead of gold.
  bool predicted_history = false;

  // paths (relative ones resolve against $GRAPHFLOW_DATA_DIR when set)
  std::string train_path;
  std::string dev_path;
  std::string embeddings_path;
  std::string output_dir = ".";

  EncoderOptions encoder_options(std::size_t vocab_size,
                                 bool training) const;
  ReasoningOptions reasoning_options(bool training) const;
  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

nlohmann::json config_to_json(const Config &cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
Config config_from_json(const nlohmann::json &j);
Config load_config(const std::string &path);

/// Resolves `path` against $GRAPHFLOW_DATA_DIR when it is relative.
std::string resolve_data_path(const std::string &path);

} // namespace graphflow

#endif
