// SPDX-License-Identifier: Apache-2.0
/**
 * @file   layers.hpp
 * @brief  Parameter declarations and recurrent cells composed from primitives.
 *
 * Sequences are matrices with one row per time step.
 */
#ifndef GRAPHFLOW_NUMERICS_LAYERS_HPP
#define GRAPHFLOW_NUMERICS_LAYERS_HPP

#include "numerics/autodiff.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace graphflow {

struct ParamDecl {
  std::string name;
  Shape shape;
  std::size_t fan_in = 1;
};

/// Ordered list of trainable tensors a model needs.
class ParamSet {
public:
  void add(std::string name, Shape shape, std::size_t fan_in);
  const std::vector<ParamDecl> &decls() const { return decls_; }
  /// Uniform in +-1/sqrt(fan_in), drawn in declaration order.
  Bindings initialize(std::uint64_t seed) const;
  /// Throws if `params` is missing a declared tensor or has a wrong shape.
  void validate(const Bindings &params) const;

private:
  std::vector<ParamDecl> decls_;
};

std::string join_name(std::string_view prefix, std::string_view leaf);

/// Dense layer y = x W^T + b.
struct Linear {
  Var weight; // out x in
  Var bias;   // 1 x out

  static void declare(ParamSet &ps, std::string_view prefix, std::size_t in,
                      std::size_t out);
  static Linear bind(Tape &tape, std::string_view prefix);
  Var operator()(Var x) const;
};

/// LSTM with gate order (input, forget, candidate, output).
struct LstmCell {
  Var w_input;  // 4h x in
  Var w_hidden; // 4h x h
  Var bias;     // 1 x 4h
  std::size_t hidden = 0;

  static void declare(ParamSet &ps, std::string_view prefix, std::size_t in,
                      std::size_t hidden);
  static LstmCell bind(Tape &tape, std::string_view prefix);
};

struct LstmState {
  Var h;
  Var c;
};

/// One step for a single row input x (1 x in).
LstmState lstm_step(const LstmCell &cell, Var x_projected, LstmState prev);

/// Runs the cell over rows of `inputs` (T x in); returns T x h. With
/// `reverse`, row t holds the state after reading rows T-1 ... t.
Var lstm_sequence(const LstmCell &cell, Var inputs, bool reverse);

/// Row t = [forward state after rows 0..t ; backward state after rows T-1..t].
Var bilstm(const LstmCell &fwd, const LstmCell &bwd, Var inputs);

/// Gated recurrent update in the GGNN form:
///   z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br)
///   cand = tanh(x Wh + (r * h) Uh + bh),  h' = (1 - z) * h + z * cand
/// Rows of `h` and `x` are updated independently with shared weights.
struct GruCell {
  Var w_input;       // 3h x in   (z, r, cand)
  Var w_hidden_gate; // 2h x h    (z, r)
  Var w_hidden_cand; // h x h
  Var bias;          // 1 x 3h
  std::size_t hidden = 0;

  static void declare(ParamSet &ps, std::string_view prefix, std::size_t in,
                      std::size_t hidden);
  static GruCell bind(Tape &tape, std::string_view prefix);
};

Var gru_update(const GruCell &cell, Var h, Var x);

/// Inverted dropout: keeps each entry with probability 1 - rate and rescales
/// by 1 / (1 - rate). Identity when rate == 0 or rng is null.
Var dropout(Var x, double rate, std::mt19937_64 *rng);

} // namespace graphflow

#endif
