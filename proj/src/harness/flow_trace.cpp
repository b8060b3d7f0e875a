// SPDX-License-Identifier: Apache-2.0
#include "harness/flow_trace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace graphflow {

using nlohmann::json;

double cosine_similarity(const double *a, const double *b, std::size_t n,
                         bool *zero_norm) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    if (zero_norm)
      *zero_norm = true;
    return 1.0;
  }
  if (zero_norm)
    *zero_norm = false;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

FlowTrace flow_trace(const std::vector<Tensor> &states, double threshold) {
  FlowTrace trace;
  trace.threshold = threshold;
  for (std::size_t i = 1; i < states.size(); ++i) {
    const Tensor &cur = states[i];
    const Tensor &prev = states[i - 1];
    if (cur.shape() != prev.shape())
      throw ShapeError("flow trace: turn " + std::to_string(i) + " states " +
                       shape_str(cur.shape()) + " vs " +
                       shape_str(prev.shape()));
    FlowTurn ft;
    ft.turn = i;
    const std::size_t m = cur.rows(), d = cur.cols();
    for (std::size_t j = 0; j < m; ++j) {
      bool zero = false;
      const double s = cosine_similarity(&cur.data()[j * d],
                                         &prev.data()[j * d], d, &zero);
      ft.similarity.push_back(s);
      ft.zero_norm.push_back(zero);
      ft.highlighted.push_back(s < threshold);
    }
    ft.rank.resize(m);
    std::iota(ft.rank.begin(), ft.rank.end(), std::size_t{0});
    std::stable_sort(ft.rank.begin(), ft.rank.end(),
                     [&](std::size_t a, std::size_t b) {
                       return ft.similarity[a] < ft.similarity[b];
                     });
    trace.turns.push_back(std::move(ft));
  }
  return trace;
}

FlowTrace flow_trace(const GraphFlowModel &model, const Conversation &conv,
                     double threshold) {
  ConversationResult res = model.run(conv, ForwardOptions{});
  std::vector<Tensor> states;
  for (auto &t : res.turns)
    states.push_back(std::move(t.node_states));
  return flow_trace(states, threshold);
}

std::vector<std::size_t> top_quartile(const FlowTurn &turn) {
  const std::size_t m = turn.rank.size();
  const std::size_t q = (m + 3) / 4;
  return {turn.rank.begin(), turn.rank.begin() + q};
}

json flow_trace_json(const Conversation &conv, const FlowTrace &trace) {
  json turns = json::array();
  for (const auto &ft : trace.turns) {
    json words = json::array();
    for (std::size_t j = 0; j < ft.similarity.size(); ++j)
      if (ft.highlighted[j])
        words.push_back(j);
    json zero = json::array();
    for (std::size_t j = 0; j < ft.zero_norm.size(); ++j)
      if (ft.zero_norm[j])
        zero.push_back(j);
    turns.push_back({{"turn_id", conv.turns.at(ft.turn).id},
                     {"previous_turn_id", conv.turns.at(ft.turn - 1).id},
                     {"similarity", ft.similarity},
                     {"highlighted", std::move(words)},
                     {"zero_norm", std::move(zero)},
                     {"rank", ft.rank}});
  }
  json tokens = json::array();
  for (const auto &t : conv.context)
    tokens.push_back(t.surface);
  return {{"conversation_id", conv.id},
          {"threshold", trace.threshold},
          {"context", std::move(tokens)},
          {"turns", std::move(turns)}};
}

std::string flow_trace_text(const Conversation &conv, const FlowTrace &trace) {
  std::ostringstream os;
  os << "conversation " << conv.id << " (threshold " << trace.threshold
     << ")\n";
  for (const auto &ft : trace.turns) {
    const Turn &turn = conv.turns.at(ft.turn);
    os << "turn " << turn.id << ":";
    for (const auto &t : turn.question)
      os << ' ' << t.surface;
    os << "\n  ";
    for (std::size_t j = 0; j < conv.context.size(); ++j) {
      if (j)
        os << ' ';
      if (ft.highlighted[j])
        os << '[' << conv.context[j].surface << ']';
      else
        os << conv.context[j].surface;
    }
    os << '\n';
  }
  return os.str();
}

} // namespace graphflow
