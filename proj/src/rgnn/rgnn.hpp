// SPDX-License-Identifier: Apache-2.0
/**
 * @file   rgnn.hpp
 * @brief  Recurrent graph neural network over the per-turn context graphs.
 *
 * Each turn runs a shared gated graph cell on that turn's graph; its input
 * is a gated fusion of the turn's node embeddings with the cell's output from
 * the previous turn. Two such layers are stacked, the second one fed by a
 * bidirectional recurrence over [layer-1 output ; re-aligned question].
 */
#ifndef GRAPHFLOW_RGNN_HPP
#define GRAPHFLOW_RGNN_HPP

#include "numerics/layers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace graphflow {

struct FusionParams {
  Var weight; // d x 4d
  Var bias;   // 1 x d

  static void declare(ParamSet &ps, std::string_view prefix, std::size_t d);
  static FusionParams bind(Tape &tape, std::string_view prefix);
};

/// z = sigmoid([a; b; a*b; a-b] W^T + bias);  out = z*a + (1-z)*b, row-wise.
Var fuse(Var a, Var b, const FusionParams &params);

/// `hops` rounds of: aggregate = adjacency * nodes, then a gated recurrent
/// update of every node with its aggregate. Same cell at every hop.
Var ggnn(Var nodes, Var adjacency, std::size_t hops, const GruCell &cell);

struct RgnnOptions {
  std::size_t hops = 5;
  /// false: Fuse(a, b) = a (no temporal connection between turns).
  bool recurrent = true;
  /// false: the graph cell is the identity.
  bool graph_cell = true;
};

/// One recurrent graph layer, stepped turn by turn.
class RecurrentGraphLayer {
public:
  RecurrentGraphLayer(GruCell cell, FusionParams fusion, RgnnOptions opts)
      : cell_(cell), fusion_(fusion), opts_(opts) {}

  static void declare(ParamSet &ps, std::string_view prefix, std::size_t d);
  static RecurrentGraphLayer bind(Tape &tape, std::string_view prefix,
                                  RgnnOptions opts);

  /// Output for the next turn. The first call skips fusion.
  Var step(Var nodes, Var adjacency);
  void reset() { previous_.reset(); }

  const GruCell &cell() const { return cell_; }
  const FusionParams &fusion() const { return fusion_; }

private:
  GruCell cell_;
  FusionParams fusion_;
  RgnnOptions opts_;
  std::optional<Var> previous_;
};

std::vector<Var> rgnn_sequence(RecurrentGraphLayer layer,
                               const std::vector<Var> &nodes,
                               const std::vector<Var> &adjacency);

struct ReasoningOptions {
  std::size_t hidden = 64;
  RgnnOptions rgnn;
  double dropout_rnn = 0.0;
};

/// Two stacked recurrent graph layers with question re-alignment in between.
class StackedReasoner {
public:
  static void declare(ParamSet &ps, std::size_t context_dim,
                      std::size_t word_dim, std::size_t hidden);
  static StackedReasoner bind(Tape &tape, ReasoningOptions opts);

  struct TurnStates {
    Var initial;   // C: local recurrence over the context word vectors
    Var first;     // C-bar: layer-1 output
    Var realigned; // f2_align
    Var second_in; // C-hat
    Var output;    // C-tilde
  };

  /// `context` m x d_c; `graph` m x m normalized adjacency; `questions`
  /// n' x d; `context_words` m x e and `question_words` n' x e.
  TurnStates step(Var context, Var graph, Var questions, Var context_words,
                  Var question_words, std::mt19937_64 *dropout_rng = nullptr);

private:
  StackedReasoner(LstmCell cf, LstmCell cb, RecurrentGraphLayer l1,
                  Var align2, LstmCell hf, LstmCell hb,
                  RecurrentGraphLayer l2, ReasoningOptions opts)
      : context_fwd_(cf), context_bwd_(cb), first_(std::move(l1)),
        align_projection_(align2), high_fwd_(hf), high_bwd_(hb),
        second_(std::move(l2)), opts_(opts) {}

  LstmCell context_fwd_, context_bwd_;
  RecurrentGraphLayer first_;
  Var align_projection_;
  LstmCell high_fwd_, high_bwd_;
  RecurrentGraphLayer second_;
  ReasoningOptions opts_;
};

} // namespace graphflow

#endif
