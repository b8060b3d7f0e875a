// SPDX-License-Identifier: Apache-2.0
#include "harness/ablation.hpp"

namespace graphflow {

using nlohmann::json;

std::vector<AblationRow> known_ablation_rows() {
  return {{"full", 78.3},          {"-PreQues", 78.2},
          {"-PreAns", 77.7},       {"-PreAnsLoc", 76.6},
          {"-RecurrentConn", 69.9}, {"-RGNN", 68.8},
          {"-kNN", 69.9},          {"1-His", 78.2},
          {"0-His", 76.7}};
}

std::vector<std::string> default_ablation_rows() {
  return {"full", "-RecurrentConn", "-RGNN", "-kNN"};
}

Config ablated_config(const Config &base, const std::string &row) {
  Config c = base;
  if (row == "full")
    return c;
  if (row == "-PreQues")
    c.ablation.no_pre_ques = true;
  else if (row == "-PreAns")
    c.ablation.no_pre_ans = true;
  else if (row == "-PreAnsLoc")
    c.ablation.no_pre_ans_loc = true;
  else if (row == "-RecurrentConn")
    c.ablation.no_recurrent_conn = true;
  else if (row == "-RGNN")
    c.ablation.no_rgnn = true;
  else if (row == "-kNN")
    c.ablation.no_knn = true;
  else if (row == "1-His")
    c.history = 1;
  else if (row == "0-His")
    c.history = 0;
  else
    throw ConfigError("unknown ablation row '" + row + "'");
  return c;
}

std::vector<AblationResult> run_ablation(
    const Config &base, const std::vector<std::string> &rows,
    const std::vector<Conversation> &train_set,
    const std::vector<Conversation> &dev_set,
    const std::vector<Conversation> &eval_set, const Vocabulary &vocab) {
  const auto known = known_ablation_rows();
  std::vector<AblationResult> out;
  for (const auto &row : rows) {
    GraphFlowModel model(ablated_config(base, row), vocab);
    TrainResult tr = train(model, train_set, dev_set);
    EvalReport rep = evaluate(model, eval_set);
    AblationResult r;
    r.name = row;
    for (const auto &k : known)
      if (k.name == row)
        r.reference_f1 = k.reference_f1;
    r.f1 = rep.f1;
    r.loss = rep.loss;
    r.best_epoch = tr.best_epoch;
    out.push_back(std::move(r));
  }
  return out;
}

json ablation_json(const std::vector<AblationResult> &results) {
  json rows = json::array();
  for (const auto &r : results)
    rows.push_back({{"row", r.name},
                    {"f1", 100.0 * r.f1},
                    {"loss", r.loss},
                    {"best_epoch", r.best_epoch},
                    {"reference_f1",
                     r.reference_f1 ? json(*r.reference_f1) : json()}});
  return {{"rows", std::move(rows)}};
}

} // namespace graphflow
