// SPDX-License-Identifier: Apache-2.0
/**
 * @file   ablation.hpp
 * @brief  Named ablation variants trained and evaluated on shared data.
 */
#ifndef GRAPHFLOW_HARNESS_ABLATION_HPP
#define GRAPHFLOW_HARNESS_ABLATION_HPP

#include "harness/trainer.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace graphflow {

struct AblationRow {
  std::string name;
  /// Published CoQA dev F1 of the corresponding row, for context only.
  std::optional<double> reference_f1;
};

/// Known rows: full, -PreQues, -PreAns, -PreAnsLoc, -RecurrentConn, -RGNN,
/// -kNN, 1-His, 0-His.
std::vector<AblationRow> known_ablation_rows();
std::vector<std::string> default_ablation_rows();

/// Applies the row's switches on top of `base`. Throws ConfigError for an
/// unknown name.
Config ablated_config(const Config &base, const std::string &row);

struct AblationResult {
  std::string name;
  std::optional<double> reference_f1;
  double f1 = 0.0;
  double loss = 0.0;
  std::size_t best_epoch = 0;
};

/// Trains every row from the same seed and data and evaluates it on `eval`.
std::vector<AblationResult> run_ablation(
    const Config &base, const std::vector<std::string> &rows,
    const std::vector<Conversation> &train_set,
    const std::vector<Conversation> &dev_set,
    const std::vector<Conversation> &eval_set, const Vocabulary &vocab);

nlohmann::json ablation_json(const std::vector<AblationResult> &results);

} // namespace graphflow

#endif
