// SPDX-License-Identifier: Apache-2.0
#include "graph_learning/graph_learning.hpp"

#include <stdexcept>

namespace graphflow {

Var weighted_adjacency(Var context, Var weights) {
  return matmul_nt(mul_row_broadcast(context, abs(weights)), context);
}

namespace {
ContextGraph finish(Var dense, std::vector<std::uint8_t> mask) {
  const std::size_t m = dense.rows();
  ContextGraph g;
  g.dense = dense;
  g.kept.resize(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c)
      if (mask[r * m + c])
        g.kept[r].push_back(c);
  g.mask = std::move(mask);
  g.normalized = softmax_rows(dense, &g.mask);
  return g;
}
} // namespace

ContextGraph sparsify_topk(Var dense, std::size_t k) {
  if (k < 1)
    throw std::invalid_argument("neighborhood size K must be >= 1");
  if (dense.rows() != dense.cols())
    throw ShapeError("sparsify_topk: adjacency must be square, got " +
                     shape_str(dense.shape()));
  return finish(dense, topk_mask(dense.value(), k, /*force_diagonal=*/true));
}

ContextGraph dense_graph(Var dense) {
  const std::size_t m = dense.rows();
  return finish(dense, std::vector<std::uint8_t>(m * m, 1));
}

std::vector<nlohmann::json> graph_dump(const ContextGraph &graph,
                                       std::size_t turn) {
  std::vector<nlohmann::json> rows;
  const Tensor &w = graph.normalized.value();
  for (std::size_t r = 0; r < graph.kept.size(); ++r) {
    std::vector<double> weights;
    for (auto c : graph.kept[r])
      weights.push_back(w(r, c));
    rows.push_back({{"turn", turn},
                    {"row", r},
                    {"kept", graph.kept[r]},
                    {"weights", weights}});
  }
  return rows;
}

} // namespace graphflow
