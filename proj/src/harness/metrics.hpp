// SPDX-License-Identifier: Apache-2.0
/**
 * @file   metrics.hpp
 * @brief  Word-level F1, per-type accuracy, HEQ-Q and prediction records.
 */
#ifndef GRAPHFLOW_HARNESS_METRICS_HPP
#define GRAPHFLOW_HARNESS_METRICS_HPP

#include "harness/model.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <string_view>
#include <vector>

namespace graphflow {

/// Bag-of-words F1 over tokenized words. 1 when both are empty, 0 when
/// only one is.
double f1_score(std::string_view prediction, std::string_view gold);

struct TypeAccuracy {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy() const {
    return total ? static_cast<double>(correct) / total : 0.0;
  }
};

struct EvalReport {
  std::size_t turns = 0;
  double f1 = 0.0;   // mean over turns
  double loss = 0.0; // mean over conversations
  std::array<TypeAccuracy, kNumAnswerTypes> by_type{};
  /// Fraction of questions with F1 >= human F1; only when every turn has a
  /// human reference.
  std::optional<double> heq_q;
  std::vector<nlohmann::json> predictions;
};

nlohmann::json prediction_json(const Conversation &conv, std::size_t turn,
                               const TurnResult &r);

EvalReport evaluate(const GraphFlowModel &model,
                    const std::vector<Conversation> &convs,
                    bool predicted_history = false);

nlohmann::json report_json(const EvalReport &r, bool with_predictions);

} // namespace graphflow

#endif
