// SPDX-License-Identifier: Apache-2.0
/**
 * @file   model.hpp
 * @brief  The full model: parameters, vocabulary and a per-conversation
 *         forward pass that steps every stage turn by turn.
 */
#ifndef GRAPHFLOW_HARNESS_MODEL_HPP
#define GRAPHFLOW_HARNESS_MODEL_HPP

#include "graph_learning/graph_learning.hpp"
#include "harness/config.hpp"
#include "harness/text.hpp"
#include "numerics/checkpoint.hpp"
#include "prediction/prediction.hpp"

#include <filesystem>
#include <random>
#include <vector>

namespace graphflow {

struct TurnResult {
  DecodedAnswer answer;
  std::string answer_text;
  Tensor start, end, type; // probabilities
  Tensor node_states;      // final context states, one row per word
  std::vector<nlohmann::json> graph; // per-row dump, filled on request
};

struct ConversationResult {
  std::vector<TurnResult> turns;
  double loss = 0.0; // mean over turns
};

struct ForwardOptions {
  bool training = false;
  /// Dropout randomness; null disables dropout regardless of rates.
  std::mt19937_64 *rng = nullptr;
  /// Condition each turn on the model's own earlier answers.
  bool predicted_history = false;
  bool dump_graphs = false;
};

class GraphFlowModel {
public:
  /// Declares every parameter for `cfg` and this vocabulary, initialized
  /// from cfg.seed.
  GraphFlowModel(Config cfg, Vocabulary vocab);

  static ParamSet declare(const Config &cfg, std::size_t vocab_size);

  const Config &config() const { return cfg_; }
  const Vocabulary &vocabulary() const { return vocab_; }
  const ParamSet &param_set() const { return decls_; }
  Bindings &params() { return params_; }
  const Bindings &params() const { return params_; }

  /// Runs every turn. When `grads` is non-null the loss is back-propagated
  /// and the parameter gradients are stored there.
  ConversationResult run(const Conversation &conv, const ForwardOptions &opts,
                         Gradients *grads = nullptr) const;

  /// Loss of a conversation as a differentiable expression of the params
  /// (no dropout); used by the gradient checker.
  Expression loss_expression(const Conversation &conv) const;

  /// Overwrites word-embedding rows from a "token v1 v2 ..." text file.
  /// Returns the number of vocabulary words found.
  std::size_t load_embeddings(const std::filesystem::path &path);

  Checkpoint to_checkpoint(nlohmann::json extra = nlohmann::json::object()) const;
  static GraphFlowModel from_checkpoint(const Checkpoint &ckpt);

  void save(const std::filesystem::path &path,
            nlohmann::json extra = nlohmann::json::object()) const;
  static GraphFlowModel load(const std::filesystem::path &path);

private:
  Var forward(Tape &tape, const Conversation &conv, const ForwardOptions &opts,
              ConversationResult *out) const;

  Config cfg_;
  Vocabulary vocab_;
  ParamSet decls_;
  Bindings params_;
};

/// Text for a decoded answer: the span's tokens joined by spaces, or the
/// type name.
std::string answer_text(const Conversation &conv, const DecodedAnswer &ans);

} // namespace graphflow

#endif
