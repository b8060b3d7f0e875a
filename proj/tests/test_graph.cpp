// SPDX-License-Identifier: Apache-2.0
#include "graph_learning/graph_learning.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>

using namespace graphflow;
using doctest::Approx;

TEST_CASE("weighted adjacency is X diag(|u|) X^T") {
  Bindings b{{"x", Tensor::matrix(2, 2, {1, 0, 0, 2})},
             {"u", Tensor::matrix(1, 2, {1, 1})}};
  auto adj = [](Tape &t) {
    return weighted_adjacency(t.leaf("x"), t.leaf("u"));
  };
  CHECK(evaluate(adj, b).storage() == std::vector<double>{1, 0, 0, 4});
  b["u"] = Tensor::matrix(1, 2, {-1, 3});
  CHECK(evaluate(adj, b).storage() == std::vector<double>{1, 0, 0, 12});
}

TEST_CASE("top-k sparsification keeps self and normalizes kept scores") {
  Bindings b{{"a", Tensor::matrix(3, 3, {5, 1, 0, 1, 3, 2, 0, 2, 4})}};
  Tape t(&b);
  ContextGraph g = sparsify_topk(t.leaf("a"), 2);
  const Tensor &n = g.normalized.value();
  CHECK(n(0, 0) == Approx(0.9820137900379085).epsilon(1e-12));
  CHECK(n(0, 1) == Approx(0.0179862099620915).epsilon(1e-12));
  CHECK(n(0, 2) == 0.0);
  CHECK(n(1, 1) == Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(n(1, 2) == Approx(0.2689414213699951).epsilon(1e-12));
  CHECK(n(1, 0) == 0.0);
  CHECK(n(2, 2) == Approx(0.8807970779778823).epsilon(1e-12));
  CHECK(n(2, 1) == Approx(0.1192029220221177).epsilon(1e-12));
  CHECK(g.kept[0] == std::vector<std::size_t>{0, 1});
  CHECK(g.kept[2] == std::vector<std::size_t>{1, 2});

  auto rows = graph_dump(g, 3);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1]["turn"] == 3);
  CHECK(rows[1]["row"] == 1);
  CHECK(rows[1]["kept"] == nlohmann::json::array({1, 2}));
  CHECK(rows[1]["weights"][0].get<double>() == n(1, 1));
}

TEST_CASE("K at least m keeps every entry") {
  Bindings b{{"a", Tensor::matrix(2, 2, {0, 0, 1, 1})}};
  Tape t(&b);
  ContextGraph g = sparsify_topk(t.leaf("a"), 10);
  CHECK(g.normalized.value().storage() ==
        std::vector<double>{0.5, 0.5, 0.5, 0.5});
  ContextGraph d = dense_graph(t.leaf("a"));
  CHECK(d.normalized.value() == g.normalized.value());
  CHECK_THROWS_AS(sparsify_topk(t.leaf("a"), 0), std::invalid_argument);
}

TEST_CASE("graph invariants hold on random instances") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng() % 12, dc = 1 + rng() % 6,
                      k = 1 + rng() % 8;
    Bindings b{{"x", oracle::random_tensor(rng, {m, dc}, -2, 2)},
               {"u", oracle::random_tensor(rng, {1, dc}, -2, 2)}};
    Tape t(&b);
    Var dense = weighted_adjacency(t.leaf("x"), t.leaf("u"));
    ContextGraph g = sparsify_topk(dense, k);
    const Tensor &a = dense.value();
    const Tensor &n = g.normalized.value();
    for (std::size_t r = 0; r < m; ++r) {
      CHECK(g.kept[r].size() == std::min(k, m));
      CHECK(std::count(g.kept[r].begin(), g.kept[r].end(), r) == 1);
      double s = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        CHECK(std::abs(a(r, c) - a(c, r)) <= 1e-9);
        CHECK(n(r, c) >= 0.0);
        s += n(r, c);
      }
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("masked scores receive exactly zero gradient") {
  std::mt19937_64 rng(3);
  Bindings b{{"s", oracle::random_tensor(rng, {6, 6})}};
  Tensor proj = oracle::random_tensor(rng, {6, 6});
  std::vector<std::uint8_t> mask;
  Gradients g = gradients(
      [&](Tape &t) {
        ContextGraph cg = sparsify_topk(t.leaf("s"), 3);
        mask = cg.mask;
        return sum(mul_const(cg.normalized, proj));
      },
      b);
  const Tensor &gs = g.at("s");
  std::size_t nonzero_kept = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i])
      CHECK(gs[i] == 0.0);
    else
      nonzero_kept += gs[i] != 0.0;
  }
  CHECK(nonzero_kept > 0);
}
