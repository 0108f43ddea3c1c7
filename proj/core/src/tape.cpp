#include "ganreg/tape.hpp"

#include <string>

#include "ganreg/error.hpp"

namespace ganreg::diff {
namespace {

std::string shape_str(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

[[noreturn]] void shape_fail(Op op, const std::string& detail) {
  throw ShapeError(std::string(op_name(op)) + ": " + detail);
}

Tape& common_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw Error("operation on an empty Var");
  if (&a.tape() != &b.tape()) throw Error("operands belong to different tapes");
  return a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error("operation on an empty Var");
  return a.tape();
}

Var unary(Op op, Var a, double attr = 0.0) {
  return tape_of(a).record(op, a, Var{}, attr, a.rows(), a.cols());
}

Var same_shape_binary(Op op, Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    shape_fail(op, shape_str(a.rows(), a.cols()) + " vs " + shape_str(b.rows(), b.cols()));
  return t.record(op, a, b, 0.0, a.rows(), a.cols());
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Variable: return "variable";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::AddRow: return "add_row";
    case Op::SumRows: return "sum_rows";
    case Op::SumCols: return "sum_cols";
    case Op::Sum: return "sum";
    case Op::BroadcastRows: return "broadcast_rows";
    case Op::BroadcastCols: return "broadcast_cols";
    case Op::BroadcastScalar: return "broadcast_scalar";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::Reciprocal: return "reciprocal";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::LeakySlope: return "leaky_slope";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Var

Index Var::rows() const { return tape_->rows(*this); }
Index Var::cols() const { return tape_->cols(*this); }
const Mat& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Mat& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar(): node is " + shape_str(v.rows(), v.cols()));
  return v(0, 0);
}

// ---------------------------------------------------------------------------
// GradMap

Var GradMap::operator[](Var wrt) const {
  for (const auto& [k, g] : entries_)
    if (k == wrt) return g;
  throw Error("gradient was not requested for node " + std::to_string(wrt.id()));
}

bool GradMap::contains(Var wrt) const {
  for (const auto& e : entries_)
    if (e.first == wrt) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Tape

const Tape::Node& Tape::node(Var v) const {
  check_owner(v);
  return nodes_[static_cast<std::size_t>(v.id())];
}

void Tape::check_owner(Var v) const {
  if (!v.valid() || &v.tape() != this || v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size())
    throw Error("Var does not belong to this tape");
}

Var Tape::variable(Mat value, std::string name) {
  if (!kernels::all_finite(value)) throw NonFiniteError("variable '" + name + "' bound to a non-finite value");
  Node n;
  n.op = Op::Variable;
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  n.has_value = true;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Index rows, Index cols, std::string name) {
  Node n;
  n.op = Op::Variable;
  n.rows = rows;
  n.cols = cols;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Mat value) {
  if (!kernels::all_finite(value)) throw NonFiniteError("constant with a non-finite value");
  Node n;
  n.op = Op::Constant;
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  n.has_value = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(double value) { return constant(Mat::Constant(1, 1, value)); }

void Tape::bind(Var v, Mat value) {
  check_owner(v);
  Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (n.op != Op::Variable) throw Error("bind: node " + std::to_string(v.id()) + " is not a variable");
  if (value.rows() != n.rows || value.cols() != n.cols)
    throw ShapeError("bind '" + n.name + "': expected " + shape_str(n.rows, n.cols) + ", got " +
                     shape_str(value.rows(), value.cols()));
  if (!kernels::all_finite(value)) throw NonFiniteError("variable '" + n.name + "' bound to a non-finite value");
  n.value = std::move(value);
  n.has_value = true;
}

const Mat& Tape::value(Var v) const {
  const Node& n = node(v);
  if (!n.has_value)
    throw UnboundVariableError(n.op == Op::Variable ? "variable '" + n.name + "' is unbound"
                                                    : "node depends on an unbound variable");
  return n.value;
}

bool Tape::inputs_ready(const Node& n) const {
  if (n.a >= 0 && !nodes_[static_cast<std::size_t>(n.a)].has_value) return false;
  if (n.b >= 0 && !nodes_[static_cast<std::size_t>(n.b)].has_value) return false;
  return true;
}

void Tape::compute(Node& n) {
  const Mat* a = n.a >= 0 ? &nodes_[static_cast<std::size_t>(n.a)].value : nullptr;
  const Mat* b = n.b >= 0 ? &nodes_[static_cast<std::size_t>(n.b)].value : nullptr;
  const double c = n.attr;
  switch (n.op) {
    case Op::Variable:
    case Op::Constant:
      return;
    case Op::Add: n.value = *a + *b; break;
    case Op::Sub: n.value = *a - *b; break;
    case Op::Mul: n.value = a->cwiseProduct(*b); break;
    case Op::Neg: n.value = -*a; break;
    case Op::Scale: n.value = *a * c; break;
    case Op::AddScalar: n.value = (a->array() + c).matrix(); break;
    case Op::MatMul: n.value = kernels::matmul(*a, *b); break;
    case Op::Transpose: n.value = kernels::transpose(*a); break;
    case Op::AddRow: n.value = kernels::add_row(*a, *b); break;
    case Op::SumRows: n.value = a->colwise().sum(); break;
    case Op::SumCols: n.value = a->rowwise().sum(); break;
    case Op::Sum: n.value = Mat::Constant(1, 1, a->sum()); break;
    case Op::BroadcastRows: n.value = a->replicate(n.rows, 1); break;
    case Op::BroadcastCols: n.value = a->replicate(1, n.cols); break;
    case Op::BroadcastScalar: n.value = Mat::Constant(n.rows, n.cols, (*a)(0, 0)); break;
    case Op::Tanh: n.value = kernels::map(*a, [](double t) { return kernels::tanh(t); }); break;
    case Op::Sigmoid: n.value = kernels::map(*a, kernels::sigmoid); break;
    case Op::Softplus: n.value = kernels::map(*a, kernels::softplus); break;
    case Op::Exp: n.value = kernels::map(*a, [](double t) { return std::exp(t); }); break;
    case Op::Log: n.value = kernels::map(*a, [](double t) { return std::log(t); }); break;
    case Op::Square: n.value = a->cwiseProduct(*a); break;
    case Op::Reciprocal: n.value = kernels::map(*a, [](double t) { return 1.0 / t; }); break;
    case Op::LeakyRelu:
      n.value = kernels::map(*a, [c](double t) { return kernels::leaky_relu(t, c); });
      break;
    case Op::LeakySlope:
      n.value = kernels::map(*a, [c](double t) { return kernels::leaky_relu_slope(t, c); });
      break;
  }
  if (!kernels::all_finite(n.value))
    throw NonFiniteError("non-finite value produced by " + std::string(op_name(n.op)));
  n.has_value = true;
}

Var Tape::record(Op op, Var a, Var b, double attr, Index rows, Index cols) {
  Node n;
  n.op = op;
  if (a.valid()) {
    check_owner(a);
    n.a = a.id();
  }
  if (b.valid()) {
    check_owner(b);
    n.b = b.id();
  }
  n.attr = attr;
  n.rows = rows;
  n.cols = cols;
  nodes_.push_back(std::move(n));
  Node& back = nodes_.back();
  if (inputs_ready(back)) compute(back);
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::evaluate(const Bindings& bindings) {
  for (const auto& [v, value] : bindings) bind(v, value);
  for (Node& n : nodes_) {
    if (n.op == Op::Variable) {
      if (!n.has_value) throw UnboundVariableError("variable '" + n.name + "' is unbound");
      continue;
    }
    if (n.op == Op::Constant) continue;
    compute(n);
  }
}

void Tape::vjp(int id, Var g, std::vector<Var>& adjoint, const std::vector<char>& live) {
  // Builders below append to nodes_, so copy what is needed out of the node first.
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  const Op op = n.op;
  const int ia = n.a;
  const int ib = n.b;
  const Var A = ia >= 0 ? Var(this, ia) : Var{};
  const Var B = ib >= 0 ? Var(this, ib) : Var{};
  const Var Y(this, id);
  const double c = n.attr;
  const Index a_rows = ia >= 0 ? nodes_[static_cast<std::size_t>(ia)].rows : 0;
  const Index a_cols = ia >= 0 ? nodes_[static_cast<std::size_t>(ia)].cols : 0;

  auto wants = [&](int j) { return j >= 0 && live[static_cast<std::size_t>(j)]; };
  auto acc = [&](int j, Var contrib) {
    Var& slot = adjoint[static_cast<std::size_t>(j)];
    slot = slot.valid() ? slot + contrib : contrib;
  };

  switch (op) {
    case Op::Variable:
    case Op::Constant:
    case Op::LeakySlope:
      return;
    case Op::Add:
      if (wants(ia)) acc(ia, g);
      if (wants(ib)) acc(ib, g);
      return;
    case Op::Sub:
      if (wants(ia)) acc(ia, g);
      if (wants(ib)) acc(ib, -g);
      return;
    case Op::Mul:
      if (wants(ia)) acc(ia, g * B);
      if (wants(ib)) acc(ib, g * A);
      return;
    case Op::Neg:
      if (wants(ia)) acc(ia, -g);
      return;
    case Op::Scale:
      if (wants(ia)) acc(ia, g * c);
      return;
    case Op::AddScalar:
      if (wants(ia)) acc(ia, g);
      return;
    case Op::MatMul:
      if (wants(ia)) acc(ia, matmul(g, transpose(B)));
      if (wants(ib)) acc(ib, matmul(transpose(A), g));
      return;
    case Op::Transpose:
      if (wants(ia)) acc(ia, transpose(g));
      return;
    case Op::AddRow:
      if (wants(ia)) acc(ia, g);
      if (wants(ib)) acc(ib, sum_rows(g));
      return;
    case Op::SumRows:
      if (wants(ia)) acc(ia, broadcast_rows(g, a_rows));
      return;
    case Op::SumCols:
      if (wants(ia)) acc(ia, broadcast_cols(g, a_cols));
      return;
    case Op::Sum:
      if (wants(ia)) acc(ia, broadcast_scalar(g, a_rows, a_cols));
      return;
    case Op::BroadcastRows:
      if (wants(ia)) acc(ia, sum_rows(g));
      return;
    case Op::BroadcastCols:
      if (wants(ia)) acc(ia, sum_cols(g));
      return;
    case Op::BroadcastScalar:
      if (wants(ia)) acc(ia, sum(g));
      return;
    case Op::Tanh:
      if (wants(ia)) acc(ia, g * (1.0 - square(Y)));
      return;
    case Op::Sigmoid:
      if (wants(ia)) acc(ia, g * (Y * sigmoid(-A)));
      return;
    case Op::Softplus:
      if (wants(ia)) acc(ia, g * sigmoid(A));
      return;
    case Op::Exp:
      if (wants(ia)) acc(ia, g * Y);
      return;
    case Op::Log:
      if (wants(ia)) acc(ia, g * reciprocal(A));
      return;
    case Op::Square:
      if (wants(ia)) acc(ia, g * (2.0 * A));
      return;
    case Op::Reciprocal:
      if (wants(ia)) acc(ia, -(g * square(Y)));
      return;
    case Op::LeakyRelu:
      if (wants(ia)) acc(ia, g * leaky_slope(A, c));
      return;
  }
}

GradMap Tape::backward(Var output, std::span<const Var> wrt) {
  check_owner(output);
  const Node& out = node(output);
  if (out.rows != 1 || out.cols != 1)
    throw ShapeError("backward: output must be scalar, got " + shape_str(out.rows, out.cols));
  for (Var w : wrt) check_owner(w);

  const auto n_out = static_cast<std::size_t>(output.id()) + 1;
  std::vector<char> live(n_out, 0);
  for (Var w : wrt)
    if (static_cast<std::size_t>(w.id()) < n_out) live[static_cast<std::size_t>(w.id())] = 1;
  for (std::size_t i = 0; i < n_out; ++i) {
    const Node& nd = nodes_[i];
    if (live[i] || nd.op == Op::LeakySlope) continue;
    if ((nd.a >= 0 && live[static_cast<std::size_t>(nd.a)]) || (nd.b >= 0 && live[static_cast<std::size_t>(nd.b)]))
      live[i] = 1;
  }

  std::vector<Var> adjoint(n_out);
  if (live[n_out - 1]) adjoint[n_out - 1] = constant(1.0);
  for (std::size_t i = n_out; i-- > 0;) {
    if (!live[i] || !adjoint[i].valid()) continue;
    vjp(static_cast<int>(i), adjoint[i], adjoint, live);
  }

  GradMap grads;
  grads.entries_.reserve(wrt.size());
  for (Var w : wrt) {
    const auto id = static_cast<std::size_t>(w.id());
    Var g = (id < n_out && adjoint[id].valid()) ? adjoint[id] : constant(Mat::Zero(w.rows(), w.cols()));
    grads.entries_.emplace_back(w, g);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Builders

Var operator+(Var a, Var b) { return same_shape_binary(Op::Add, a, b); }
Var operator-(Var a, Var b) { return same_shape_binary(Op::Sub, a, b); }
Var operator*(Var a, Var b) { return same_shape_binary(Op::Mul, a, b); }
Var operator-(Var a) { return unary(Op::Neg, a); }
Var operator*(double c, Var a) { return unary(Op::Scale, a, c); }
Var operator*(Var a, double c) { return unary(Op::Scale, a, c); }
Var operator+(Var a, double c) { return unary(Op::AddScalar, a, c); }
Var operator+(double c, Var a) { return unary(Op::AddScalar, a, c); }
Var operator-(double c, Var a) { return unary(Op::AddScalar, unary(Op::Neg, a), c); }

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (a.cols() != b.rows())
    shape_fail(Op::MatMul, shape_str(a.rows(), a.cols()) + " * " + shape_str(b.rows(), b.cols()));
  return t.record(Op::MatMul, a, b, 0.0, a.rows(), b.cols());
}

Var transpose(Var a) { return tape_of(a).record(Op::Transpose, a, Var{}, 0.0, a.cols(), a.rows()); }

Var add_row(Var a, Var row) {
  Tape& t = common_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols())
    shape_fail(Op::AddRow, shape_str(a.rows(), a.cols()) + " + row " + shape_str(row.rows(), row.cols()));
  return t.record(Op::AddRow, a, row, 0.0, a.rows(), a.cols());
}

Var affine(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

Var sum_rows(Var a) { return tape_of(a).record(Op::SumRows, a, Var{}, 0.0, 1, a.cols()); }
Var sum_cols(Var a) { return tape_of(a).record(Op::SumCols, a, Var{}, 0.0, a.rows(), 1); }
Var sum(Var a) { return tape_of(a).record(Op::Sum, a, Var{}, 0.0, 1, 1); }

Var mean(Var a) {
  const auto count = static_cast<double>(a.rows() * a.cols());
  if (count == 0) throw ShapeError("mean of an empty node");
  return sum(a) * (1.0 / count);
}

Var broadcast_rows(Var a, Index rows) {
  if (a.rows() != 1) shape_fail(Op::BroadcastRows, "expected one row, got " + shape_str(a.rows(), a.cols()));
  return tape_of(a).record(Op::BroadcastRows, a, Var{}, static_cast<double>(rows), rows, a.cols());
}

Var broadcast_cols(Var a, Index cols) {
  if (a.cols() != 1) shape_fail(Op::BroadcastCols, "expected one column, got " + shape_str(a.rows(), a.cols()));
  return tape_of(a).record(Op::BroadcastCols, a, Var{}, static_cast<double>(cols), a.rows(), cols);
}

Var broadcast_scalar(Var a, Index rows, Index cols) {
  if (a.rows() != 1 || a.cols() != 1)
    shape_fail(Op::BroadcastScalar, "expected 1x1, got " + shape_str(a.rows(), a.cols()));
  return tape_of(a).record(Op::BroadcastScalar, a, Var{}, 0.0, rows, cols);
}

Var tanh(Var a) { return unary(Op::Tanh, a); }
Var sigmoid(Var a) { return unary(Op::Sigmoid, a); }
Var softplus(Var a) { return unary(Op::Softplus, a); }
Var exp(Var a) { return unary(Op::Exp, a); }
Var log(Var a) { return unary(Op::Log, a); }
Var square(Var a) { return unary(Op::Square, a); }
Var reciprocal(Var a) { return unary(Op::Reciprocal, a); }
Var relu(Var a) { return unary(Op::LeakyRelu, a, 0.0); }
Var leaky_relu(Var a, double slope) { return unary(Op::LeakyRelu, a, slope); }
Var leaky_slope(Var a, double slope) { return unary(Op::LeakySlope, a, slope); }
Var log_sigmoid(Var a) { return -softplus(-a); }
Var row_sq_norm(Var a) { return sum_cols(square(a)); }

Var input_grad_sq_norm(Var logits, Var x) {
  if (logits.cols() != 1) throw ShapeError("input_grad_sq_norm: logits must be n x 1, got " +
                                           shape_str(logits.rows(), logits.cols()));
  if (logits.rows() != x.rows()) throw ShapeError("input_grad_sq_norm: logits and inputs differ in row count");
  const GradMap g = logits.tape().backward(sum(logits), {x});
  return row_sq_norm(g[x]);
}

}  // namespace ganreg::diff
