// SPDX-License-Identifier: Apache-2.0
/**
 * @file   graph_learning.hpp
 * @brief  Per-turn context graph: dense attention scores, then kNN
 *         sparsification with a softmax over the kept neighbors.
 */
#ifndef GRAPHFLOW_GRAPH_LEARNING_HPP
#define GRAPHFLOW_GRAPH_LEARNING_HPP

#include "numerics/autodiff.hpp"

#include <json.hpp>

#include <vector>

namespace graphflow {

struct ContextGraph {
  Var dense;                                   // m x m scores
  std::vector<std::vector<std::size_t>> kept;  // per row, ascending columns
  std::vector<std::uint8_t> mask;              // m*m, 1 = kept
  Var normalized;                              // m x m, row-stochastic
};

/// A = (X * |u|) X^T for context rows X (m x d_c) and weights u (1 x d_c).
/// The absolute value keeps the effective weights non-negative.
Var weighted_adjacency(Var context, Var weights);

/// Keeps the min(K, m) largest scores per row, the diagonal always among
/// them (ties to the lower column), and normalizes the kept scores with a
/// softmax. Dropped entries are exactly zero and receive no gradient.
ContextGraph sparsify_topk(Var dense, std::size_t k);

/// Full row softmax over every column (the no-sparsification ablation).
ContextGraph dense_graph(Var dense);

/// One JSON object per row: {turn, row, kept, weights}.
std::vector<nlohmann::json> graph_dump(const ContextGraph &graph,
                                       std::size_t turn);

} // namespace graphflow

#endif
