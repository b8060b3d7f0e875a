// SPDX-License-Identifier: Apache-2.0
/**
 * @file   oracles.hpp
 * @brief  Straightforward reference implementations used by the unit tests
 *         and the acceptance suite. Plain loops over doubles, no tape.
 */
#ifndef GRAPHFLOW_TESTS_ORACLES_HPP
#define GRAPHFLOW_TESTS_ORACLES_HPP

#include "harness/text.hpp"
#include "numerics/autodiff.hpp"
#include "prediction/prediction.hpp"

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace graphflow::oracle {

inline Tensor random_tensor(std::mt19937_64 &rng, Shape shape,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape), 0.0);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto &v : t.storage())
    v = dist(rng);
  return t;
}

// a (r x k) * b (k x c)
inline Tensor matmul(const Tensor &a, const Tensor &b) {
  Tensor out({a.rows(), b.cols()}, 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p)
        s += a(i, p) * b(p, j);
      out(i, j) = s;
    }
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// x (1 x in) . row `r` of w (rows x in)
inline double dot_row(const Tensor &x, std::size_t xr, const Tensor &w,
                      std::size_t r) {
  double s = 0.0;
  for (std::size_t c = 0; c < w.cols(); ++c)
    s += x(xr, c) * w(r, c);
  return s;
}

struct GruWeights {
  Tensor w_input, w_hidden_gate, w_hidden_cand, bias;
};

inline GruWeights gru_weights(const Bindings &b, const std::string &prefix) {
  return {b.at(prefix + ".w_input"), b.at(prefix + ".w_hidden_gate"),
          b.at(prefix + ".w_hidden_cand"), b.at(prefix + ".bias")};
}

/// Row-wise GRU: z, r gates; cand = tanh(W_c x + U_c (r*h) + b_c);
/// h' = (1 - z) h + z cand.
inline Tensor gru(const GruWeights &w, const Tensor &h, const Tensor &x) {
  const std::size_t n = h.cols();
  Tensor out(h.shape(), 0.0);
  for (std::size_t i = 0; i < h.rows(); ++i) {
    std::vector<double> z(n), r(n), rh(n);
    for (std::size_t u = 0; u < n; ++u) {
      z[u] = sigmoid(dot_row(x, i, w.w_input, u) +
                     dot_row(h, i, w.w_hidden_gate, u) + w.bias(0, u));
      r[u] = sigmoid(dot_row(x, i, w.w_input, n + u) +
                     dot_row(h, i, w.w_hidden_gate, n + u) + w.bias(0, n + u));
      rh[u] = r[u] * h(i, u);
    }
    for (std::size_t u = 0; u < n; ++u) {
      double hc = 0.0;
      for (std::size_t c = 0; c < n; ++c)
        hc += rh[c] * w.w_hidden_cand(u, c);
      const double cand = std::tanh(dot_row(x, i, w.w_input, 2 * n + u) + hc +
                                    w.bias(0, 2 * n + u));
      out(i, u) = (1.0 - z[u]) * h(i, u) + z[u] * cand;
    }
  }
  return out;
}

inline Tensor ggnn(const Tensor &nodes, const Tensor &adjacency,
                   std::size_t hops, const GruWeights &w) {
  Tensor h = nodes;
  for (std::size_t k = 0; k < hops; ++k)
    h = gru(w, h, matmul(adjacency, h));
  return h;
}

/// z = sigmoid([a, b, a*b, a-b] W^T + bias); z*a + (1-z)*b.
inline Tensor fuse(const Tensor &a, const Tensor &b, const Tensor &weight,
                   const Tensor &bias) {
  const std::size_t d = a.cols();
  Tensor out(a.shape(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::vector<double> f;
    for (std::size_t c = 0; c < d; ++c)
      f.push_back(a(i, c));
    for (std::size_t c = 0; c < d; ++c)
      f.push_back(b(i, c));
    for (std::size_t c = 0; c < d; ++c)
      f.push_back(a(i, c) * b(i, c));
    for (std::size_t c = 0; c < d; ++c)
      f.push_back(a(i, c) - b(i, c));
    for (std::size_t u = 0; u < d; ++u) {
      double s = bias(0, u);
      for (std::size_t c = 0; c < 4 * d; ++c)
        s += f[c] * weight(u, c);
      const double z = sigmoid(s);
      out(i, u) = z * a(i, u) + (1.0 - z) * b(i, u);
    }
  }
  return out;
}

/// Every (s, e) pair, in order, keeping the first strict maximum.
inline Span best_span(const std::vector<double> &ps,
                      const std::vector<double> &pe, std::size_t max_len) {
  Span best;
  double best_score = -1.0;
  for (std::size_t s = 0; s < ps.size(); ++s)
    for (std::size_t e = s; e < pe.size() && e - s + 1 <= max_len; ++e)
      if (ps[s] * pe[e] > best_score) {
        best_score = ps[s] * pe[e];
        best = Span{s, e};
      }
  return best;
}

/// Bag-of-words F1 by explicit multiset counting.
inline double f1(const std::vector<std::string> &pred,
                 const std::vector<std::string> &gold) {
  if (pred.empty() && gold.empty())
    return 1.0;
  if (pred.empty() || gold.empty())
    return 0.0;
  std::map<std::string, int> cp, cg;
  for (const auto &w : pred)
    ++cp[w];
  for (const auto &w : gold)
    ++cg[w];
  int common = 0;
  for (const auto &[w, n] : cp)
    if (auto it = cg.find(w); it != cg.end())
      common += std::min(n, it->second);
  if (common == 0)
    return 0.0;
  const double p = static_cast<double>(common) / pred.size();
  const double r = static_cast<double>(common) / gold.size();
  return 2.0 * p * r / (p + r);
}

} // namespace graphflow::oracle

#endif
