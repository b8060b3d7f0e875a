// SPDX-License-Identifier: Apache-2.0
#include "rgnn/rgnn.hpp"

#include "encoding/encoding.hpp"

#include <stdexcept>

namespace graphflow {

void FusionParams::declare(ParamSet &ps, std::string_view prefix,
                           std::size_t d) {
  ps.add(join_name(prefix, "weight"), {d, 4 * d}, 4 * d);
  ps.add(join_name(prefix, "bias"), {1, d}, 4 * d);
}

FusionParams FusionParams::bind(Tape &tape, std::string_view prefix) {
  return {tape.leaf(join_name(prefix, "weight")),
          tape.leaf(join_name(prefix, "bias"))};
}

Var fuse(Var a, Var b, const FusionParams &p) {
  if (a.shape() != b.shape())
    throw ShapeError("fuse: operands " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  Var features = concat_cols({a, b, mul(a, b), sub(a, b)});
  Var z = sigmoid(add_row_broadcast(matmul_nt(features, p.weight), p.bias));
  return lerp(z, a, b);
}

Var ggnn(Var nodes, Var adjacency, std::size_t hops, const GruCell &cell) {
  if (hops < 1)
    throw std::invalid_argument("ggnn: hops must be >= 1");
  if (adjacency.rows() != nodes.rows() || adjacency.cols() != nodes.rows())
    throw ShapeError("ggnn: adjacency " + shape_str(adjacency.shape()) +
                     " for " + std::to_string(nodes.rows()) + " nodes");
  Var h = nodes;
  for (std::size_t hop = 0; hop < hops; ++hop) {
    Var aggregate = matmul(adjacency, h);
    h = gru_update(cell, h, aggregate);
  }
  return h;
}

// -- recurrent layer ----------------------------------------------------------

void RecurrentGraphLayer::declare(ParamSet &ps, std::string_view prefix,
                                  std::size_t d) {
  GruCell::declare(ps, join_name(prefix, "cell"), d, d);
  FusionParams::declare(ps, join_name(prefix, "fusion"), d);
}

RecurrentGraphLayer RecurrentGraphLayer::bind(Tape &tape,
                                              std::string_view prefix,
                                              RgnnOptions opts) {
  return RecurrentGraphLayer(GruCell::bind(tape, join_name(prefix, "cell")),
                             FusionParams::bind(tape,
                                                join_name(prefix, "fusion")),
                             opts);
}

Var RecurrentGraphLayer::step(Var nodes, Var adjacency) {
  Var input = nodes;
  if (previous_ && opts_.recurrent)
    input = fuse(nodes, *previous_, fusion_);
  Var out = opts_.graph_cell ? ggnn(input, adjacency, opts_.hops, cell_)
                             : input;
  previous_ = out;
  return out;
}

std::vector<Var> rgnn_sequence(RecurrentGraphLayer layer,
                               const std::vector<Var> &nodes,
                               const std::vector<Var> &adjacency) {
  if (nodes.size() != adjacency.size())
    throw std::invalid_argument("rgnn_sequence: " +
                                std::to_string(nodes.size()) +
                                " node matrices for " +
                                std::to_string(adjacency.size()) + " graphs");
  layer.reset();
  std::vector<Var> out;
  out.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0 && nodes[i].rows() != nodes[0].rows())
      throw ShapeError("rgnn_sequence: node count changes across turns");
    out.push_back(layer.step(nodes[i], adjacency[i]));
  }
  return out;
}

// -- stacked reasoning --------------------------------------------------------

void StackedReasoner::declare(ParamSet &ps, std::size_t context_dim,
                              std::size_t word_dim, std::size_t d) {
  if (d % 2 != 0)
    throw std::invalid_argument("hidden size must be even");
  LstmCell::declare(ps, "reason.context.fwd", context_dim, d / 2);
  LstmCell::declare(ps, "reason.context.bwd", context_dim, d / 2);
  RecurrentGraphLayer::declare(ps, "reason.layer1", d);
  ps.add("reason.align2.projection", {d, d + word_dim}, d + word_dim);
  LstmCell::declare(ps, "reason.high.fwd", 2 * d, d / 2);
  LstmCell::declare(ps, "reason.high.bwd", 2 * d, d / 2);
  RecurrentGraphLayer::declare(ps, "reason.layer2", d);
}

StackedReasoner StackedReasoner::bind(Tape &tape, ReasoningOptions opts) {
  return StackedReasoner(
      LstmCell::bind(tape, "reason.context.fwd"),
      LstmCell::bind(tape, "reason.context.bwd"),
      RecurrentGraphLayer::bind(tape, "reason.layer1", opts.rgnn),
      tape.leaf("reason.align2.projection"),
      LstmCell::bind(tape, "reason.high.fwd"),
      LstmCell::bind(tape, "reason.high.bwd"),
      RecurrentGraphLayer::bind(tape, "reason.layer2", opts.rgnn), opts);
}

StackedReasoner::TurnStates
StackedReasoner::step(Var context, Var graph, Var questions,
                      Var context_words, Var question_words,
                      std::mt19937_64 *rng) {
  TurnStates s;
  s.initial = dropout(bilstm(context_fwd_, context_bwd_, context),
                      opts_.dropout_rnn, rng);
  s.first = first_.step(s.initial, graph);
  Var h_context = concat_cols({s.first, context_words});
  Var h_question = concat_cols({questions, question_words});
  s.realigned =
      align(h_context, h_question, questions, align_projection_).output;
  s.second_in = dropout(
      bilstm(high_fwd_, high_bwd_, concat_cols({s.first, s.realigned})),
      opts_.dropout_rnn, rng);
  s.output = second_.step(s.second_in, graph);
  return s;
}

} // namespace graphflow
