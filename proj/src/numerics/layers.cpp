// SPDX-License-Identifier: Apache-2.0
#include "numerics/layers.hpp"

#include <cmath>

namespace graphflow {

void ParamSet::add(std::string name, Shape shape, std::size_t fan_in) {
  for (const auto &d : decls_)
    if (d.name == name)
      throw std::invalid_argument("duplicate parameter " + name);
  decls_.push_back({std::move(name), std::move(shape), fan_in});
}

Bindings ParamSet::initialize(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  Bindings out;
  for (const auto &d : decls_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(d.shape);
    for (auto &v : t.storage())
      v = dist(rng);
    out.emplace(d.name, std::move(t));
  }
  return out;
}

void ParamSet::validate(const Bindings &params) const {
  for (const auto &d : decls_) {
    auto it = params.find(d.name);
    if (it == params.end())
      throw BindingError("missing parameter '" + d.name + "'");
    if (it->second.shape() != d.shape)
      throw ShapeError("parameter '" + d.name + "' has shape " +
                       shape_str(it->second.shape()) + ", expected " +
                       shape_str(d.shape));
  }
}

std::string join_name(std::string_view prefix, std::string_view leaf) {
  std::string out(prefix);
  if (!out.empty())
    out += '.';
  out += leaf;
  return out;
}

// -- Linear -------------------------------------------------------------------

void Linear::declare(ParamSet &ps, std::string_view prefix, std::size_t in,
                     std::size_t out) {
  ps.add(join_name(prefix, "weight"), {out, in}, in);
  ps.add(join_name(prefix, "bias"), {1, out}, in);
}

Linear Linear::bind(Tape &tape, std::string_view prefix) {
  return {tape.leaf(join_name(prefix, "weight")),
          tape.leaf(join_name(prefix, "bias"))};
}

Var Linear::operator()(Var x) const {
  return add_row_broadcast(matmul_nt(x, weight), bias);
}

// -- LSTM ---------------------------------------------------------------------

void LstmCell::declare(ParamSet &ps, std::string_view prefix, std::size_t in,
                       std::size_t hidden) {
  ps.add(join_name(prefix, "w_input"), {4 * hidden, in}, hidden);
  ps.add(join_name(prefix, "w_hidden"), {4 * hidden, hidden}, hidden);
  ps.add(join_name(prefix, "bias"), {1, 4 * hidden}, hidden);
}

LstmCell LstmCell::bind(Tape &tape, std::string_view prefix) {
  LstmCell c;
  c.w_input = tape.leaf(join_name(prefix, "w_input"));
  c.w_hidden = tape.leaf(join_name(prefix, "w_hidden"));
  c.bias = tape.leaf(join_name(prefix, "bias"));
  c.hidden = c.w_hidden.cols();
  return c;
}

LstmState lstm_step(const LstmCell &cell, Var x_projected, LstmState prev) {
  const std::size_t h = cell.hidden;
  Var pre = add(x_projected, matmul_nt(prev.h, cell.w_hidden));
  Var i = sigmoid(slice_cols(pre, 0, h));
  Var f = sigmoid(slice_cols(pre, h, h));
  Var g = tanh(slice_cols(pre, 2 * h, h));
  Var o = sigmoid(slice_cols(pre, 3 * h, h));
  Var c = add(mul(f, prev.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

Var lstm_sequence(const LstmCell &cell, Var inputs, bool reverse) {
  Tape &tape = *inputs.tape;
  const std::size_t steps = inputs.rows();
  // Input projections for all steps at once.
  Var proj = add_row_broadcast(matmul_nt(inputs, cell.w_input), cell.bias);
  Var zero = tape.constant(Tensor({1, cell.hidden}, 0.0));
  LstmState state{zero, zero};
  std::vector<Var> outs(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    state = lstm_step(cell, slice_rows(proj, t, 1), state);
    outs[t] = state.h;
  }
  return concat_rows(outs);
}

Var bilstm(const LstmCell &fwd, const LstmCell &bwd, Var inputs) {
  return concat_cols(
      {lstm_sequence(fwd, inputs, false), lstm_sequence(bwd, inputs, true)});
}

// -- GRU ----------------------------------------------------------------------

void GruCell::declare(ParamSet &ps, std::string_view prefix, std::size_t in,
                      std::size_t hidden) {
  ps.add(join_name(prefix, "w_input"), {3 * hidden, in}, hidden);
  ps.add(join_name(prefix, "w_hidden_gate"), {2 * hidden, hidden}, hidden);
  ps.add(join_name(prefix, "w_hidden_cand"), {hidden, hidden}, hidden);
  ps.add(join_name(prefix, "bias"), {1, 3 * hidden}, hidden);
}

GruCell GruCell::bind(Tape &tape, std::string_view prefix) {
  GruCell c;
  c.w_input = tape.leaf(join_name(prefix, "w_input"));
  c.w_hidden_gate = tape.leaf(join_name(prefix, "w_hidden_gate"));
  c.w_hidden_cand = tape.leaf(join_name(prefix, "w_hidden_cand"));
  c.bias = tape.leaf(join_name(prefix, "bias"));
  c.hidden = c.w_hidden_cand.cols();
  return c;
}

Var gru_update(const GruCell &cell, Var h, Var x) {
  const std::size_t n = cell.hidden;
  Var xin = add_row_broadcast(matmul_nt(x, cell.w_input), cell.bias);
  Var hg = matmul_nt(h, cell.w_hidden_gate);
  Var z = sigmoid(add(slice_cols(xin, 0, n), slice_cols(hg, 0, n)));
  Var r = sigmoid(add(slice_cols(xin, n, n), slice_cols(hg, n, n)));
  Var cand = tanh(add(slice_cols(xin, 2 * n, n),
                      matmul_nt(mul(r, h), cell.w_hidden_cand)));
  // (1 - z) * h + z * cand
  return add(h, mul(z, sub(cand, h)));
}

Var dropout(Var x, double rate, std::mt19937_64 *rng) {
  if (rate <= 0.0 || rng == nullptr)
    return x;
  if (rate >= 1.0)
    throw std::invalid_argument("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.shape());
  const double scale = 1.0 / (1.0 - rate);
  for (auto &v : mask.storage())
    v = keep(*rng) ? scale : 0.0;
  return mul_const(x, mask);
}

} // namespace graphflow
