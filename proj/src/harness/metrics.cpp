// SPDX-License-Identifier: Apache-2.0
#include "harness/metrics.hpp"

#include "harness/text.hpp"

#include <algorithm>
#include <map>

namespace graphflow {

using nlohmann::json;

double f1_score(std::string_view prediction, std::string_view gold) {
  const auto p = tokenize_words(prediction);
  const auto g = tokenize_words(gold);
  if (p.empty() && g.empty())
    return 1.0;
  if (p.empty() || g.empty())
    return 0.0;
  std::map<std::string, std::size_t> counts;
  for (const auto &w : g)
    ++counts[w];
  std::size_t common = 0;
  for (const auto &w : p) {
    auto it = counts.find(w);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0)
    return 0.0;
  const double precision = static_cast<double>(common) / p.size();
  const double recall = static_cast<double>(common) / g.size();
  return 2.0 * precision * recall / (precision + recall);
}

json prediction_json(const Conversation &conv, std::size_t turn,
                     const TurnResult &r) {
  json scores = json::object();
  for (std::size_t c = 0; c < r.type.size(); ++c)
    scores[std::string(answer_type_name(static_cast<AnswerType>(c)))] =
        r.type[c];
  json out = {{"conversation_id", conv.id},
              {"turn_id", conv.turns[turn].id},
              {"type", answer_type_name(r.answer.type)},
              {"span_text", r.answer.span ? json(r.answer_text) : json()},
              {"start", r.answer.span ? json(r.answer.span->start) : json()},
              {"end", r.answer.span ? json(r.answer.span->end) : json()},
              {"answer", r.answer_text},
              {"scores",
               {{"type", std::move(scores)},
                {"type_score", r.answer.type_score},
                {"span_score", r.answer.span_score}}}};
  return out;
}

EvalReport evaluate(const GraphFlowModel &model,
                    const std::vector<Conversation> &convs,
                    bool predicted_history) {
  EvalReport rep;
  double f1_sum = 0.0, loss_sum = 0.0;
  std::size_t heq_hits = 0, heq_total = 0;
  ForwardOptions opts;
  opts.predicted_history = predicted_history;
  for (const auto &conv : convs) {
    ConversationResult res = model.run(conv, opts);
    loss_sum += res.loss;
    for (std::size_t t = 0; t < conv.turns.size(); ++t) {
      const Turn &gold = conv.turns[t];
      const TurnResult &r = res.turns[t];
      const double f1 = f1_score(r.answer_text, gold.answer_text);
      f1_sum += f1;
      ++rep.turns;
      auto &acc = rep.by_type[static_cast<std::size_t>(gold.type)];
      ++acc.total;
      if (r.answer.type == gold.type)
        ++acc.correct;
      if (gold.human_f1) {
        ++heq_total;
        if (f1 >= *gold.human_f1)
          ++heq_hits;
      }
      rep.predictions.push_back(prediction_json(conv, t, r));
    }
  }
  if (rep.turns > 0)
    rep.f1 = f1_sum / rep.turns;
  if (!convs.empty())
    rep.loss = loss_sum / convs.size();
  if (heq_total > 0 && heq_total == rep.turns)
    rep.heq_q = static_cast<double>(heq_hits) / heq_total;
  return rep;
}

json report_json(const EvalReport &r, bool with_predictions) {
  json types = json::object();
  for (std::size_t c = 0; c < kNumAnswerTypes; ++c) {
    const auto &a = r.by_type[c];
    if (a.total == 0)
      continue;
    types[std::string(answer_type_name(static_cast<AnswerType>(c)))] = {
        {"total", a.total}, {"correct", a.correct}, {"accuracy", a.accuracy()}};
  }
  json out = {{"turns", r.turns},
              {"f1", r.f1},
              {"loss", r.loss},
              {"type_accuracy", std::move(types)}};
  if (r.heq_q)
    out["heq_q"] = *r.heq_q;
  if (with_predictions)
    out["predictions"] = r.predictions;
  return out;
}

} // namespace graphflow
