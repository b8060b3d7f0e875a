// SPDX-License-Identifier: Apache-2.0
#include "numerics/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace graphflow {

const char *op_name(Op op) {
  switch (op) {
  case Op::Leaf: return "leaf";
  case Op::Constant: return "constant";
  case Op::Add: return "add";
  case Op::Sub: return "sub";
  case Op::Mul: return "mul";
  case Op::Lerp: return "lerp";
  case Op::MulConst: return "mul_const";
  case Op::Affine: return "affine";
  case Op::AddRowBroadcast: return "add_row_broadcast";
  case Op::MulRowBroadcast: return "mul_row_broadcast";
  case Op::MatMul: return "matmul";
  case Op::MatMulNT: return "matmul_nt";
  case Op::Transpose: return "transpose";
  case Op::Sigmoid: return "sigmoid";
  case Op::Tanh: return "tanh";
  case Op::Relu: return "relu";
  case Op::Exp: return "exp";
  case Op::Abs: return "abs";
  case Op::LogClamp: return "log_clamped";
  case Op::SoftmaxRows: return "softmax_rows";
  case Op::ConcatCols: return "concat_cols";
  case Op::ConcatRows: return "concat_rows";
  case Op::SliceRows: return "slice_rows";
  case Op::SliceCols: return "slice_cols";
  case Op::Embedding: return "embedding";
  case Op::MeanRows: return "mean_rows";
  case Op::MaxRows: return "max_rows";
  case Op::Sum: return "sum";
  case Op::Element: return "element";
  case Op::Reshape: return "reshape";
  }
  return "?";
}

const Tensor &Var::value() const { return tape->value(*this); }

// -- tape ---------------------------------------------------------------------

Var Tape::leaf(std::string_view name) {
  std::string key(name);
  if (auto it = leaves_.find(key); it != leaves_.end())
    return Var{this, it->second};
  if (!bindings_)
    throw BindingError("leaf '" + key + "' referenced without bindings");
  auto it = bindings_->find(name);
  if (it == bindings_->end())
    throw BindingError("unbound leaf '" + key + "'");
  Node n;
  n.op = Op::Leaf;
  n.needs_grad = true;
  n.ref = &it->second;
  n.name = key;
  Var v = record(std::move(n));
  leaves_.emplace(std::move(key), v.id);
  return v;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return record(std::move(n));
}

const Tensor &Tape::value(Var v) const { return nodes_[v.id].val(); }

const Tensor *Tape::grad(Var v) const {
  const auto &g = nodes_[v.id].grad;
  return g.empty() ? nullptr : &g;
}

Var Tape::record(Node node) {
  if (node.op != Op::Leaf && !node.val().all_finite())
    throw NumericError(std::string("non-finite value produced by ") +
                       op_name(node.op) + " (node #" +
                       std::to_string(nodes_.size()) + ")");
  if (node.op != Op::Leaf && node.op != Op::Constant)
    for (auto i : node.in)
      node.needs_grad = node.needs_grad || nodes_[i].needs_grad;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::shape_fail(Op op, const std::string &what) const {
  throw ShapeError(std::string("shape error at node #") +
                   std::to_string(nodes_.size()) + " (" + op_name(op) +
                   "): " + what);
}

Tensor &Tape::grad_buffer(std::uint32_t id) {
  auto &n = nodes_[id];
  if (n.grad.empty())
    n.grad = Tensor(n.val().shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var out, const Tensor *seed) {
  if (out.tape != this)
    throw std::invalid_argument("backward: variable from another tape");
  const auto &ov = nodes_[out.id].val();
  for (auto &n : nodes_)
    if (!n.grad.empty())
      n.grad.fill(0.0);
  Tensor &g = grad_buffer(out.id);
  if (seed) {
    if (seed->shape() != ov.shape())
      throw ShapeError("backward: seed shape " + shape_str(seed->shape()) +
                       " does not match output " + shape_str(ov.shape()));
    g = *seed;
  } else {
    if (ov.size() != 1)
      throw ShapeError("backward: non-scalar output " + shape_str(ov.shape()) +
                       " requires a seed");
    g.fill(1.0);
  }
  for (std::int64_t i = out.id; i >= 0; --i) {
    auto &n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.empty())
      continue;
    backprop_node(n);
  }
}

Gradients Tape::leaf_gradients() const {
  Gradients out;
  for (const auto &[name, id] : leaves_) {
    const auto &n = nodes_[id];
    out[name] = n.grad.empty() ? Tensor(n.val().shape(), 0.0) : n.grad;
  }
  return out;
}

// -- kernels ------------------------------------------------------------------

namespace {

// out(r x c) += a(r x k) * b(k x c)
void gemm_nn(const double *a, const double *b, double *out, std::size_t r,
             std::size_t k, std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) {
    double *o = out + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0)
        continue;
      const double *brow = b + p * c;
      for (std::size_t j = 0; j < c; ++j)
        o[j] += av * brow[j];
    }
  }
}

// out(r x c) += a(r x k) * b(c x k)^T
void gemm_nt(const double *a, const double *b, double *out, std::size_t r,
             std::size_t k, std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) {
    const double *arow = a + i * k;
    for (std::size_t j = 0; j < c; ++j) {
      const double *brow = b + j * k;
      // Independent partial sums let the compiler vectorize the reduction.
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        s0 += arow[p] * brow[p];
        s1 += arow[p + 1] * brow[p + 1];
        s2 += arow[p + 2] * brow[p + 2];
        s3 += arow[p + 3] * brow[p + 3];
      }
      for (; p < k; ++p)
        s0 += arow[p] * brow[p];
      out[i * c + j] += (s0 + s1) + (s2 + s3);
    }
  }
}

// out(k x c) += a(r x k)^T * b(r x c)
void gemm_tn(const double *a, const double *b, double *out, std::size_t r,
             std::size_t k, std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) {
    const double *brow = b + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0)
        continue;
      double *o = out + p * c;
      for (std::size_t j = 0; j < c; ++j)
        o[j] += av * brow[j];
    }
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tape &tape_of(Var a) {
  if (!a.tape)
    throw std::invalid_argument("variable is not attached to a tape");
  return *a.tape;
}

Tape &tape_of(Var a, Var b) {
  if (a.tape != b.tape)
    throw std::invalid_argument("operands live on different tapes");
  return tape_of(a);
}

Tape::Node unary(Op op, Var x, Tensor value) {
  Tape::Node n;
  n.op = op;
  n.in = {x.id};
  n.value = std::move(value);
  return n;
}

void require_same_shape(Tape &t, Op op, Var a, Var b) {
  if (a.shape() != b.shape())
    t.shape_fail(op, "operands " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
}

void require_rank2(Tape &t, Op op, Var a) {
  if (a.value().rank() != 2)
    t.shape_fail(op, "expected a matrix, got " + shape_str(a.shape()));
}

} // namespace

// -- primitives ---------------------------------------------------------------

template <typename F>
static Var elementwise2(Op op, Var a, Var b, F f) {
  Tape &t = tape_of(a, b);
  require_same_shape(t, op, a, b);
  const auto &av = a.value(), &bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = f(av[i], bv[i]);
  Tape::Node n;
  n.op = op;
  n.in = {a.id, b.id};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var add(Var a, Var b) {
  return elementwise2(Op::Add, a, b, [](double x, double y) { return x + y; });
}
Var sub(Var a, Var b) {
  return elementwise2(Op::Sub, a, b, [](double x, double y) { return x - y; });
}
Var mul(Var a, Var b) {
  return elementwise2(Op::Mul, a, b, [](double x, double y) { return x * y; });
}

Var lerp(Var z, Var a, Var b) {
  Tape &t = tape_of(a, b);
  tape_of(a, z);
  require_same_shape(t, Op::Lerp, a, b);
  require_same_shape(t, Op::Lerp, a, z);
  const auto &zv = z.value(), &av = a.value(), &bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = zv[i] * av[i] + (1.0 - zv[i]) * bv[i];
    out[i] = std::clamp(v, std::min(av[i], bv[i]), std::max(av[i], bv[i]));
  }
  Tape::Node n;
  n.op = Op::Lerp;
  n.in = {z.id, a.id, b.id};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var mul_const(Var x, const Tensor &c) {
  Tape &t = tape_of(x);
  if (x.shape() != c.shape())
    t.shape_fail(Op::MulConst, "operand " + shape_str(x.shape()) +
                                   " vs constant " + shape_str(c.shape()));
  Tensor out(x.shape());
  const auto &xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = xv[i] * c[i];
  auto n = unary(Op::MulConst, x, std::move(out));
  n.aux = c;
  return t.record(std::move(n));
}

Var affine(Var x, double scale, double shift) {
  Tape &t = tape_of(x);
  Tensor out(x.shape());
  const auto &xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = scale * xv[i] + shift;
  auto n = unary(Op::Affine, x, std::move(out));
  n.a = scale;
  return t.record(std::move(n));
}

Var add_row_broadcast(Var x, Var bias) {
  Tape &t = tape_of(x, bias);
  const auto &xv = x.value(), &bv = bias.value();
  if (bv.size() != xv.cols())
    t.shape_fail(Op::AddRowBroadcast, "bias " + shape_str(bv.shape()) +
                                          " for matrix " +
                                          shape_str(xv.shape()));
  Tensor out = xv;
  const std::size_t c = xv.cols();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += bv[i % c];
  Tape::Node n;
  n.op = Op::AddRowBroadcast;
  n.in = {x.id, bias.id};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var mul_row_broadcast(Var x, Var weights) {
  Tape &t = tape_of(x, weights);
  const auto &xv = x.value(), &wv = weights.value();
  if (wv.size() != xv.cols())
    t.shape_fail(Op::MulRowBroadcast, "weights " + shape_str(wv.shape()) +
                                          " for matrix " +
                                          shape_str(xv.shape()));
  Tensor out = xv;
  const std::size_t c = xv.cols();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] *= wv[i % c];
  Tape::Node n;
  n.op = Op::MulRowBroadcast;
  n.in = {x.id, weights.id};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var matmul(Var a, Var b) {
  Tape &t = tape_of(a, b);
  require_rank2(t, Op::MatMul, a);
  require_rank2(t, Op::MatMul, b);
  const auto &av = a.value(), &bv = b.value();
  if (av.cols() != bv.rows())
    t.shape_fail(Op::MatMul, shape_str(av.shape()) + " x " +
                                 shape_str(bv.shape()));
  Tensor out({av.rows(), bv.cols()}, 0.0);
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), av.rows(),
          av.cols(), bv.cols());
  Tape::Node n;
  n.op = Op::MatMul;
  n.in = {a.id, b.id};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var matmul_nt(Var a, Var b) {
  Tape &t = tape_of(a, b);
  require_rank2(t, Op::MatMulNT, a);
  require_rank2(t, Op::MatMulNT, b);
  const auto &av = a.value(), &bv = b.value();
  if (av.cols() != bv.cols())
    t.shape_fail(Op::MatMulNT, shape_str(av.shape()) + " x " +
                                   shape_str(bv.shape()) + "^T");
  Tensor out({av.rows(), bv.rows()}, 0.0);
  gemm_nt(av.data().data(), bv.data().data(), out.data().data(), av.rows(),
          av.cols(), bv.rows());
  Tape::Node n;
  n.op = Op::MatMulNT;
  n.in = {a.id, b.id};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var transpose(Var a) {
  Tape &t = tape_of(a);
  require_rank2(t, Op::Transpose, a);
  return t.record(unary(Op::Transpose, a, a.value().transposed()));
}

template <typename F>
static Var elementwise1(Op op, Var x, F f) {
  Tape &t = tape_of(x);
  const auto &xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = f(xv[i]);
  return t.record(unary(op, x, std::move(out)));
}

Var sigmoid(Var x) { return elementwise1(Op::Sigmoid, x, sigmoid_scalar); }
Var tanh(Var x) {
  return elementwise1(Op::Tanh, x, [](double v) { return std::tanh(v); });
}
Var relu(Var x) {
  return elementwise1(Op::Relu, x,
                      [](double v) { return v > 0.0 ? v : 0.0; });
}
Var exp(Var x) {
  return elementwise1(Op::Exp, x, [](double v) { return std::exp(v); });
}
Var abs(Var x) {
  return elementwise1(Op::Abs, x, [](double v) { return std::abs(v); });
}

Var log_clamped(Var x, double floor) {
  Tape &t = tape_of(x);
  const auto &xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::log(std::max(xv[i], floor));
  auto n = unary(Op::LogClamp, x, std::move(out));
  n.a = floor;
  return t.record(std::move(n));
}

Var softmax_rows(Var x, const std::vector<std::uint8_t> *mask) {
  Tape &t = tape_of(x);
  const auto &xv = x.value();
  if (mask && mask->size() != xv.size())
    t.shape_fail(Op::SoftmaxRows, "mask length " +
                                      std::to_string(mask->size()) +
                                      " for " + shape_str(xv.shape()));
  const std::size_t R = xv.rows(), C = xv.cols();
  Tensor out(xv.shape(), 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < C; ++c)
      if (!mask || (*mask)[r * C + c])
        mx = std::max(mx, xv[r * C + c]);
    if (mx == -INFINITY)
      t.shape_fail(Op::SoftmaxRows,
                   "row " + std::to_string(r) + " has no kept entries");
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      if (!mask || (*mask)[r * C + c]) {
        const double e = std::exp(xv[r * C + c] - mx);
        out[r * C + c] = e;
        z += e;
      }
    for (std::size_t c = 0; c < C; ++c)
      out[r * C + c] /= z;
  }
  auto n = unary(Op::SoftmaxRows, x, std::move(out));
  if (mask)
    n.mask = *mask;
  return t.record(std::move(n));
}

Var concat_cols(const std::vector<Var> &parts) {
  if (parts.empty())
    throw ShapeError("concat_cols: no operands");
  Tape &t = tape_of(parts[0]);
  const std::size_t R = parts[0].rows();
  std::size_t C = 0;
  for (auto p : parts) {
    tape_of(parts[0], p);
    require_rank2(t, Op::ConcatCols, p);
    if (p.rows() != R)
      t.shape_fail(Op::ConcatCols, "row counts " + std::to_string(R) +
                                       " and " + std::to_string(p.rows()));
    C += p.cols();
  }
  Tensor out({R, C});
  Tape::Node n;
  n.op = Op::ConcatCols;
  std::size_t off = 0;
  for (auto p : parts) {
    const auto &pv = p.value();
    for (std::size_t r = 0; r < R; ++r)
      std::copy_n(pv.data().begin() + r * pv.cols(), pv.cols(),
                  out.data().begin() + r * C + off);
    n.in.push_back(p.id);
    n.idx.push_back(off);
    off += pv.cols();
  }
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var concat_rows(const std::vector<Var> &parts) {
  if (parts.empty())
    throw ShapeError("concat_rows: no operands");
  Tape &t = tape_of(parts[0]);
  const std::size_t C = parts[0].cols();
  std::size_t R = 0;
  for (auto p : parts) {
    tape_of(parts[0], p);
    if (p.cols() != C)
      t.shape_fail(Op::ConcatRows, "column counts " + std::to_string(C) +
                                       " and " + std::to_string(p.cols()));
    R += p.rows();
  }
  Tensor out({R, C});
  Tape::Node n;
  n.op = Op::ConcatRows;
  std::size_t off = 0;
  for (auto p : parts) {
    const auto &pv = p.value();
    std::copy(pv.data().begin(), pv.data().end(), out.data().begin() + off);
    n.in.push_back(p.id);
    n.idx.push_back(off);
    off += pv.size();
  }
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  Tape &t = tape_of(x);
  const auto &xv = x.value();
  if (count == 0 || begin + count > xv.rows())
    t.shape_fail(Op::SliceRows, "rows [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) +
                                    ") of " + shape_str(xv.shape()));
  const std::size_t C = xv.cols();
  Tensor out({count, C});
  std::copy_n(xv.data().begin() + begin * C, count * C, out.data().begin());
  auto n = unary(Op::SliceRows, x, std::move(out));
  n.idx = {begin};
  return t.record(std::move(n));
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  Tape &t = tape_of(x);
  const auto &xv = x.value();
  if (count == 0 || begin + count > xv.cols())
    t.shape_fail(Op::SliceCols, "cols [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) +
                                    ") of " + shape_str(xv.shape()));
  const std::size_t R = xv.rows(), C = xv.cols();
  Tensor out({R, count});
  for (std::size_t r = 0; r < R; ++r)
    std::copy_n(xv.data().begin() + r * C + begin, count,
                out.data().begin() + r * count);
  auto n = unary(Op::SliceCols, x, std::move(out));
  n.idx = {begin};
  return t.record(std::move(n));
}

Var embedding(Var table, const std::vector<std::size_t> &ids) {
  Tape &t = tape_of(table);
  require_rank2(t, Op::Embedding, table);
  const auto &tv = table.value();
  if (ids.empty())
    t.shape_fail(Op::Embedding, "empty id list");
  const std::size_t E = tv.cols();
  Tensor out({ids.size(), E});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows())
      t.shape_fail(Op::Embedding, "id " + std::to_string(ids[i]) +
                                      " outside table of " +
                                      std::to_string(tv.rows()) + " rows");
    std::copy_n(tv.data().begin() + ids[i] * E, E,
                out.data().begin() + i * E);
  }
  auto n = unary(Op::Embedding, table, std::move(out));
  n.idx = ids;
  return t.record(std::move(n));
}

Var mean_rows(Var x) {
  Tape &t = tape_of(x);
  const auto &xv = x.value();
  const std::size_t R = xv.rows(), C = xv.cols();
  Tensor out({1, C}, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c)
      out[c] += xv[r * C + c];
  for (std::size_t c = 0; c < C; ++c)
    out[c] /= static_cast<double>(R);
  return t.record(unary(Op::MeanRows, x, std::move(out)));
}

Var max_rows(Var x) {
  Tape &t = tape_of(x);
  const auto &xv = x.value();
  const std::size_t R = xv.rows(), C = xv.cols();
  Tensor out({1, C});
  std::vector<std::size_t> arg(C, 0);
  for (std::size_t c = 0; c < C; ++c) {
    double best = xv[c];
    for (std::size_t r = 1; r < R; ++r)
      if (xv[r * C + c] > best) {
        best = xv[r * C + c];
        arg[c] = r;
      }
    out[c] = best;
  }
  auto n = unary(Op::MaxRows, x, std::move(out));
  n.idx = std::move(arg);
  return t.record(std::move(n));
}

Var sum(Var x) {
  Tape &t = tape_of(x);
  const auto &xv = x.value();
  // Extended accumulator: keeps the reduction's rounding out of finite
  // differences of scalar losses.
  long double acc = 0.0L;
  for (double v : xv.data())
    acc += v;
  const double s = static_cast<double>(acc);
  return t.record(unary(Op::Sum, x, Tensor::scalar(s)));
}

Var element(Var x, std::size_t r, std::size_t c) {
  Tape &t = tape_of(x);
  const auto &xv = x.value();
  if (r >= xv.rows() || c >= xv.cols())
    t.shape_fail(Op::Element, "index (" + std::to_string(r) + "," +
                                  std::to_string(c) + ") of " +
                                  shape_str(xv.shape()));
  auto n = unary(Op::Element, x, Tensor::scalar(xv(r, c)));
  n.idx = {r * xv.cols() + c};
  return t.record(std::move(n));
}

Var reshape(Var x, Shape shape) {
  Tape &t = tape_of(x);
  if (shape_numel(shape) != x.value().size())
    t.shape_fail(Op::Reshape, shape_str(x.shape()) + " -> " +
                                  shape_str(shape));
  return t.record(
      unary(Op::Reshape, x, Tensor(std::move(shape), x.value().storage())));
}

std::vector<std::uint8_t> topk_mask(const Tensor &scores, std::size_t k,
                                    bool force_diagonal) {
  if (k == 0)
    throw std::invalid_argument("topk_mask: k must be at least 1");
  const std::size_t R = scores.rows(), C = scores.cols();
  if (force_diagonal && R > C)
    throw ShapeError("topk_mask: diagonal forcing needs rows <= cols");
  std::vector<std::uint8_t> mask(R * C, 0);
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < R; ++r) {
    const double *row = scores.data().data() + r * C;
    order.resize(C);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t want = std::min(k, C);
    if (force_diagonal) {
      mask[r * C + r] = 1;
      --want;
      order.erase(order.begin() + static_cast<std::ptrdiff_t>(r));
    }
    std::stable_sort(order.begin(), order.end(),
                     [row](std::size_t a, std::size_t b) {
                       return row[a] > row[b];
                     });
    for (std::size_t i = 0; i < want; ++i)
      mask[r * C + order[i]] = 1;
  }
  return mask;
}

// -- reverse sweep ------------------------------------------------------------

void Tape::backprop_node(Node &n) {
  const Tensor &g = n.grad;
  const Tensor &y = n.val();
  auto in_grad = [&](std::size_t k) -> Tensor * {
    auto id = n.in[k];
    if (!nodes_[id].needs_grad)
      return nullptr;
    return &grad_buffer(id);
  };
  auto in_val = [&](std::size_t k) -> const Tensor & {
    return nodes_[n.in[k]].val();
  };

  switch (n.op) {
  case Op::Leaf:
  case Op::Constant:
    return;
  case Op::Add:
  case Op::Sub: {
    const double sb = n.op == Op::Add ? 1.0 : -1.0;
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i];
    if (auto *gb = in_grad(1))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*gb)[i] += sb * g[i];
    return;
  }
  case Op::Mul: {
    const Tensor &a = in_val(0), &b = in_val(1);
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i] * b[i];
    if (auto *gb = in_grad(1))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*gb)[i] += g[i] * a[i];
    return;
  }
  case Op::Lerp: {
    const Tensor &z = in_val(0), &a = in_val(1), &b = in_val(2);
    if (auto *gz = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*gz)[i] += g[i] * (a[i] - b[i]);
    if (auto *ga = in_grad(1))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i] * z[i];
    if (auto *gb = in_grad(2))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*gb)[i] += g[i] * (1.0 - z[i]);
    return;
  }
  case Op::MulConst:
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i] * n.aux[i];
    return;
  case Op::Affine:
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += n.a * g[i];
    return;
  case Op::AddRowBroadcast: {
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i];
    if (auto *gb = in_grad(1)) {
      const std::size_t C = g.cols();
      for (std::size_t i = 0; i < g.size(); ++i)
        (*gb)[i % C] += g[i];
    }
    return;
  }
  case Op::MulRowBroadcast: {
    const Tensor &x = in_val(0), &w = in_val(1);
    const std::size_t C = g.cols();
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i] * w[i % C];
    if (auto *gb = in_grad(1))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*gb)[i % C] += g[i] * x[i];
    return;
  }
  case Op::MatMul: {
    const Tensor &a = in_val(0), &b = in_val(1);
    if (auto *ga = in_grad(0))
      gemm_nt(g.data().data(), b.data().data(), ga->data().data(), a.rows(),
              b.cols(), a.cols());
    if (auto *gb = in_grad(1))
      gemm_tn(a.data().data(), g.data().data(), gb->data().data(), a.rows(),
              a.cols(), b.cols());
    return;
  }
  case Op::MatMulNT: {
    // y = a b^T; da = g b; db = g^T a
    const Tensor &a = in_val(0), &b = in_val(1);
    if (auto *ga = in_grad(0))
      gemm_nn(g.data().data(), b.data().data(), ga->data().data(), a.rows(),
              b.rows(), a.cols());
    if (auto *gb = in_grad(1))
      gemm_tn(g.data().data(), a.data().data(), gb->data().data(), a.rows(),
              b.rows(), a.cols());
    return;
  }
  case Op::Transpose:
    if (auto *ga = in_grad(0)) {
      const std::size_t R = g.rows(), C = g.cols();
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c)
          (*ga)[c * R + r] += g[r * C + c];
    }
    return;
  case Op::Sigmoid:
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
    return;
  case Op::Tanh:
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i] * (1.0 - y[i] * y[i]);
    return;
  case Op::Relu:
    if (auto *ga = in_grad(0)) {
      const Tensor &x = in_val(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > 0.0)
          (*ga)[i] += g[i];
    }
    return;
  case Op::Exp:
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i] * y[i];
    return;
  case Op::Abs:
    if (auto *ga = in_grad(0)) {
      const Tensor &x = in_val(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
    }
    return;
  case Op::LogClamp:
    if (auto *ga = in_grad(0)) {
      const Tensor &x = in_val(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > n.a)
          (*ga)[i] += g[i] / x[i];
    }
    return;
  case Op::SoftmaxRows:
    if (auto *ga = in_grad(0)) {
      const std::size_t R = y.rows(), C = y.cols();
      for (std::size_t r = 0; r < R; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < C; ++c)
          dot += g[r * C + c] * y[r * C + c];
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t i = r * C + c;
          if (!n.mask.empty() && !n.mask[i])
            continue;
          (*ga)[i] += y[i] * (g[i] - dot);
        }
      }
    }
    return;
  case Op::ConcatCols: {
    const std::size_t R = y.rows(), C = y.cols();
    for (std::size_t k = 0; k < n.in.size(); ++k) {
      auto *ga = in_grad(k);
      if (!ga)
        continue;
      const std::size_t pc = ga->cols(), off = n.idx[k];
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < pc; ++c)
          (*ga)[r * pc + c] += g[r * C + off + c];
    }
    return;
  }
  case Op::ConcatRows:
    for (std::size_t k = 0; k < n.in.size(); ++k) {
      auto *ga = in_grad(k);
      if (!ga)
        continue;
      const std::size_t off = n.idx[k];
      for (std::size_t i = 0; i < ga->size(); ++i)
        (*ga)[i] += g[off + i];
    }
    return;
  case Op::SliceRows:
    if (auto *ga = in_grad(0)) {
      const std::size_t off = n.idx[0] * g.cols();
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[off + i] += g[i];
    }
    return;
  case Op::SliceCols:
    if (auto *ga = in_grad(0)) {
      const std::size_t R = g.rows(), count = g.cols(), C = ga->cols();
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < count; ++c)
          (*ga)[r * C + n.idx[0] + c] += g[r * count + c];
    }
    return;
  case Op::Embedding:
    if (auto *ga = in_grad(0)) {
      const std::size_t E = g.cols();
      for (std::size_t i = 0; i < n.idx.size(); ++i)
        for (std::size_t c = 0; c < E; ++c)
          (*ga)[n.idx[i] * E + c] += g[i * E + c];
    }
    return;
  case Op::MeanRows:
    if (auto *ga = in_grad(0)) {
      const std::size_t R = ga->rows(), C = ga->cols();
      const double inv = 1.0 / static_cast<double>(R);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c)
          (*ga)[r * C + c] += g[c] * inv;
    }
    return;
  case Op::MaxRows:
    if (auto *ga = in_grad(0)) {
      const std::size_t C = ga->cols();
      for (std::size_t c = 0; c < C; ++c)
        (*ga)[n.idx[c] * C + c] += g[c];
    }
    return;
  case Op::Sum:
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < ga->size(); ++i)
        (*ga)[i] += g[0];
    return;
  case Op::Element:
    if (auto *ga = in_grad(0))
      (*ga)[n.idx[0]] += g[0];
    return;
  case Op::Reshape:
    if (auto *ga = in_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i)
        (*ga)[i] += g[i];
    return;
  }
}

// -- expression API -----------------------------------------------------------

std::uint64_t Tape::decision_signature() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node &n = nodes_[id];
    switch (n.op) {
    case Op::Relu:
    case Op::Abs:
      for (double v : nodes_[n.in[0]].val().data())
        mix(v > 0.0 ? 1 : v < 0.0 ? 2 : 3);
      break;
    case Op::LogClamp:
      for (double v : nodes_[n.in[0]].val().data())
        mix(v < n.a ? 5 : 6);
      break;
    case Op::MaxRows:
      for (auto i : n.idx)
        mix(i + 7);
      break;
    case Op::SoftmaxRows:
      for (auto m : n.mask)
        mix(m + 11);
      break;
    default:
      continue;
    }
    mix(id);
  }
  return h;
}

Tensor evaluate(const Expression &expr, const Bindings &bindings) {
  Tape tape(&bindings);
  return expr(tape).value();
}

Gradients gradients(const Expression &expr, const Bindings &bindings,
                    const Tensor *seed) {
  Tape tape(&bindings);
  Var out = expr(tape);
  tape.backward(out, seed);
  Gradients leafs = tape.leaf_gradients();
  Gradients all;
  for (const auto &[name, value] : bindings) {
    auto it = leafs.find(name);
    all[name] = it != leafs.end() ? std::move(it->second)
                                  : Tensor(value.shape(), 0.0);
  }
  return all;
}

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

bool GradientReport::pass() const {
  return std::all_of(params.begin(), params.end(),
                     [](const ParamCheck &p) { return p.pass; });
}

double GradientReport::worst() const {
  double w = 0.0;
  for (const auto &p : params)
    w = std::max(w, p.max_rel_error);
  return w;
}

GradientReport finite_difference_check(const Expression &expr,
                                       Bindings bindings,
                                       const CheckOptions &opts) {
  struct Sample {
    double value;
    std::uint64_t signature;
  };
  auto sample = [&](const Bindings &b) {
    Tape tape(&b);
    Var out = expr(tape);
    if (out.value().size() != 1)
      throw ShapeError("finite_difference_check: expression output " +
                       shape_str(out.shape()) + " is not scalar");
    return Sample{out.value()[0], tape.decision_signature()};
  };
  Gradients analytic = gradients(expr, bindings);
  if (opts.tamper)
    opts.tamper(analytic);
  const std::uint64_t base = sample(bindings).signature;

  GradientReport report;
  report.tolerance = opts.tolerance;
  report.epsilon = opts.epsilon;
  std::mt19937_64 rng(opts.seed);

  for (auto &[name, tensor] : bindings) {
    if (!opts.only.empty() &&
        std::find(opts.only.begin(), opts.only.end(), name) == opts.only.end())
      continue;
    std::vector<std::size_t> coords(tensor.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opts.coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    ParamCheck pc;
    pc.name = name;
    const Tensor &ga = analytic.at(name);
    // Central difference at step h; false if the stencil leaves the smooth
    // piece containing the unperturbed point.
    auto central = [&](std::size_t i, double h, double &out) {
      const double saved = tensor[i];
      tensor[i] = saved + h;
      const Sample p = sample(bindings);
      tensor[i] = saved - h;
      const Sample m = sample(bindings);
      tensor[i] = saved;
      out = (p.value - m.value) / (2.0 * h);
      return p.signature == base && m.signature == base;
    };
    for (auto i : coords) {
      bool smooth = false;
      double numeric = 0.0;
      for (double h = opts.epsilon; h >= opts.min_epsilon && !smooth;
           h /= 10.0) {
        smooth = central(i, h, numeric);
        if (smooth && opts.richardson) {
          double half = 0.0;
          smooth = central(i, h / 2.0, half);
          numeric = (4.0 * half - numeric) / 3.0;
        }
      }
      if (!smooth) {
        ++pc.coords_skipped;
        continue;
      }
      pc.max_rel_error =
          std::max(pc.max_rel_error, relative_error(ga[i], numeric));
      ++pc.coords_checked;
    }
    pc.pass = pc.max_rel_error <= opts.tolerance;
    report.params.push_back(std::move(pc));
  }
  return report;
}

} // namespace graphflow
