// SPDX-License-Identifier: Apache-2.0
/**
 * @file   autodiff.hpp
 * @brief  Define-by-run expression graph with reverse-mode gradients.
 *
 * A Tape records every primitive as it is evaluated. Leaves are looked up by
 * name in a Bindings map (the map must outlive the tape); the same name always
 * resolves to the same node, so a parameter used at several places accumulates
 * its gradient into one buffer.
 *
 * Matrices that hold one vector per word are stored one row per word.
 */
#ifndef GRAPHFLOW_NUMERICS_AUTODIFF_HPP
#define GRAPHFLOW_NUMERICS_AUTODIFF_HPP

#include "numerics/tensor.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace graphflow {

using Bindings = std::map<std::string, Tensor, std::less<>>;
using Gradients = std::map<std::string, Tensor, std::less<>>;

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape *tape = nullptr;
  std::uint32_t id = 0;

  const Tensor &value() const;
  const Shape &shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  Add,
  Sub,
  Mul,
  Lerp,
  MulConst,
  Affine,
  AddRowBroadcast,
  MulRowBroadcast,
  MatMul,
  MatMulNT,
  Transpose,
  Sigmoid,
  Tanh,
  Relu,
  Exp,
  Abs,
  LogClamp,
  SoftmaxRows,
  ConcatCols,
  ConcatRows,
  SliceRows,
  SliceCols,
  Embedding,
  MeanRows,
  MaxRows,
  Sum,
  Element,
  Reshape,
};

const char *op_name(Op op);

class Tape {
public:
  explicit Tape(const Bindings *bindings = nullptr) : bindings_(bindings) {}
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Differentiable leaf bound by name. Throws BindingError when unbound.
  Var leaf(std::string_view name);
  /// Non-differentiable input.
  Var constant(Tensor value);

  const Tensor &value(Var v) const;
  /// Gradient accumulated by backward(); nullptr if none reached the node.
  const Tensor *grad(Var v) const;

  /// Reverse sweep from `out`. `seed` defaults to ones (scalar outputs).
  void backward(Var out, const Tensor *seed = nullptr);

  /// Gradient per bound leaf referenced on this tape (zeros if unreached).
  Gradients leaf_gradients() const;

  std::size_t size() const { return nodes_.size(); }

  /// Hash of every discrete choice made so far: relu/abs signs, max-pool
  /// winners, softmax masks and active log clamps. Two evaluations with the
  /// same signature lie on the same smooth piece of the function.
  std::uint64_t decision_signature() const;

  // Primitive recording; use the free functions below.
  struct Node {
    Op op = Op::Constant;
    bool needs_grad = false;
    std::vector<std::uint32_t> in;
    Tensor value;
    const Tensor *ref = nullptr;
    Tensor grad;
    std::vector<std::size_t> idx;
    std::vector<std::uint8_t> mask;
    double a = 0.0, b = 0.0;
    Tensor aux;
    std::string name;

    const Tensor &val() const { return ref ? *ref : value; }
  };

  Var record(Node node);
  const Node &node(Var v) const { return nodes_[v.id]; }
  [[noreturn]] void shape_fail(Op op, const std::string &what) const;

private:
  void backprop_node(Node &n);
  Tensor &grad_buffer(std::uint32_t id);

  const Bindings *bindings_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::uint32_t> leaves_;
};

// Elementwise (identical shapes).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// z * a + (1 - z) * b for gates z in [0, 1]. The result is kept inside
/// [min(a, b), max(a, b)] despite rounding; gradients are the exact ones.
Var lerp(Var z, Var a, Var b);
/// x * c elementwise for a constant tensor c (dropout masks, fixed weights).
Var mul_const(Var x, const Tensor &c);
/// scale * x + shift.
Var affine(Var x, double scale, double shift);
/// x (r x c) plus a bias broadcast over rows (bias has c entries).
Var add_row_broadcast(Var x, Var bias);
/// x (r x c) scaled column-wise by a row of c weights.
Var mul_row_broadcast(Var x, Var weights);

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var exp(Var x);
Var abs(Var x);
/// log(max(x, floor)); gradient is zero where the floor is active.
Var log_clamped(Var x, double floor);

/// Row-wise softmax. With a mask (one byte per entry, nonzero = kept),
/// masked entries are exactly zero and receive zero gradient.
Var softmax_rows(Var x, const std::vector<std::uint8_t> *mask = nullptr);

Var concat_cols(const std::vector<Var> &parts);
Var concat_rows(const std::vector<Var> &parts);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);

/// Gathers rows of `table` (V x e) for each id. Throws on out-of-range ids.
Var embedding(Var table, const std::vector<std::size_t> &ids);

Var mean_rows(Var x);
/// Column-wise max over rows; ties go to the lower row index.
Var max_rows(Var x);
Var sum(Var x);
Var element(Var x, std::size_t r, std::size_t c);
Var reshape(Var x, Shape shape);

/// Per-row keep mask of the k largest entries (ties to the lower column).
/// With `force_diagonal`, entry (r, r) is always kept and counts toward k.
std::vector<std::uint8_t> topk_mask(const Tensor &scores, std::size_t k,
                                    bool force_diagonal);

// -- expression-level API -----------------------------------------------------

using Expression = std::function<Var(Tape &)>;

Tensor evaluate(const Expression &expr, const Bindings &bindings);

/// Gradients of every binding. `seed` is required for non-scalar outputs.
Gradients gradients(const Expression &expr, const Bindings &bindings,
                    const Tensor *seed = nullptr);

struct ParamCheck {
  std::string name;
  std::size_t coords_checked = 0;
  /// Coordinates whose stencil crossed a kink even at the smallest step.
  std::size_t coords_skipped = 0;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct GradientReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;
  double epsilon = 0.0;
  bool pass() const;
  double worst() const;
};

struct CheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-6;
  /// Coordinates sampled per parameter; all of them if the tensor is smaller.
  std::size_t coords_per_param = 32;
  std::uint64_t seed = 0;
  /// Restrict the check to these names (empty: every binding).
  std::vector<std::string> only;
  /// When a perturbed evaluation changes the decision signature, retry the
  /// coordinate with the step divided by 10, down to this bound.
  double min_epsilon = 1e-9;
  /// Combine the central differences at epsilon and epsilon/2 as
  /// (4 D(eps/2) - D(eps)) / 3, cancelling the eps^2 truncation term.
  bool richardson = false;
  /// Hook applied to the analytic gradients before comparison.
  std::function<void(Gradients &)> tamper;
};

inline constexpr double kRelErrorFloor = 1e-8;

double relative_error(double analytic, double numeric);

/// Central-difference check of a scalar expression. Bindings are copied.
GradientReport finite_difference_check(const Expression &expr,
                                       Bindings bindings,
                                       const CheckOptions &opts = {});

} // namespace graphflow

#endif
