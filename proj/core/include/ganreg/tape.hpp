#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ganreg/kernels.hpp"

namespace ganreg::diff {

// Reverse-mode differentiation over matrix-valued nodes.
//
// A Tape records operations in creation order (which is a valid topological
// order). Values are computed eagerly whenever every input is bound, and the
// whole recording can be replayed with new bindings through evaluate().
// backward() appends the gradient computation to the same tape, so gradients
// are ordinary nodes and can be differentiated again; this is how the
// input-gradient penalty is differentiated with respect to network weights.

enum class Op : std::uint8_t {
  Variable,
  Constant,
  Add,
  Sub,
  Mul,        // elementwise
  Neg,
  Scale,      // a * attr
  AddScalar,  // a + attr
  MatMul,
  Transpose,
  AddRow,           // a (n x k) + b (1 x k) broadcast over rows
  SumRows,          // n x k -> 1 x k
  SumCols,          // n x k -> n x 1
  Sum,              // -> 1 x 1
  BroadcastRows,    // 1 x k -> attr x k
  BroadcastCols,    // n x 1 -> n x attr
  BroadcastScalar,  // 1 x 1 -> shape of b
  Tanh,
  Sigmoid,
  Softplus,
  Exp,
  Log,
  Square,
  Reciprocal,
  LeakyRelu,   // slope attr; relu is slope 0
  LeakySlope,  // derivative of LeakyRelu; piecewise constant, zero gradient
};

std::string_view op_name(Op op);

class Tape;

/// Handle to a node of a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  Index rows() const;
  Index cols() const;
  const Mat& value() const;
  /// Value of a 1 x 1 node.
  double scalar() const;

  friend bool operator==(const Var& a, const Var& b) { return a.tape_ == b.tape_ && a.id_ == b.id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

using Bindings = std::vector<std::pair<Var, Mat>>;

/// Gradients of a scalar output with respect to a requested set of nodes.
class GradMap {
 public:
  /// Gradient node for `wrt`; throws if it was not requested.
  Var operator[](Var wrt) const;
  const Mat& value(Var wrt) const { return (*this)[wrt].value(); }
  bool contains(Var wrt) const;
  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  friend class Tape;
  std::vector<std::pair<Var, Var>> entries_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Bound variable.
  Var variable(Mat value, std::string name = {});
  /// Unbound placeholder; must be bound before its value is read.
  Var variable(Index rows, Index cols, std::string name = {});
  Var constant(Mat value);
  Var constant(double value);

  void bind(Var v, Mat value);

  /// Rebinds the given variables and recomputes every node in recording order.
  void evaluate(const Bindings& bindings = {});

  /// Reverse-mode gradient of the scalar `output`. The returned gradient nodes
  /// live on this tape and are themselves differentiable.
  GradMap backward(Var output, std::span<const Var> wrt);
  GradMap backward(Var output, std::initializer_list<Var> wrt) {
    return backward(output, std::span<const Var>(wrt.begin(), wrt.size()));
  }

  std::size_t size() const { return nodes_.size(); }
  const Mat& value(Var v) const;
  Index rows(Var v) const { return node(v).rows; }
  Index cols(Var v) const { return node(v).cols; }
  Op op(Var v) const { return node(v).op; }
  const std::string& name(Var v) const { return node(v).name; }

  Var record(Op op, Var a, Var b, double attr, Index rows, Index cols);

 private:
  struct Node {
    Op op = Op::Constant;
    int a = -1;
    int b = -1;
    double attr = 0.0;
    Index rows = 0;
    Index cols = 0;
    Mat value;
    bool has_value = false;
    std::string name;
  };

  const Node& node(Var v) const;
  void check_owner(Var v) const;
  bool inputs_ready(const Node& n) const;
  void compute(Node& n);
  void vjp(int id, Var grad, std::vector<Var>& adjoint, const std::vector<char>& live);

  std::vector<Node> nodes_;
};

// Operation builders. Shapes are checked at recording time (ShapeError).
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);  // elementwise
Var operator-(Var a);
Var operator*(double c, Var a);
Var operator*(Var a, double c);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(double c, Var a);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add_row(Var a, Var row);
/// x * w + b for a batch x (n x in), weight w (in x out) and bias b (1 x out).
Var affine(Var x, Var w, Var b);
Var sum_rows(Var a);
Var sum_cols(Var a);
Var sum(Var a);
Var mean(Var a);
Var broadcast_rows(Var a, Index rows);
Var broadcast_cols(Var a, Index cols);
Var broadcast_scalar(Var a, Index rows, Index cols);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var reciprocal(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var leaky_slope(Var a, double slope);
/// ln sigma(a) = -softplus(-a)
Var log_sigmoid(Var a);
/// Squared Euclidean norm of each row: n x k -> n x 1.
Var row_sq_norm(Var a);

/// ||grad_x logit(x)||^2 for every row of the batch `x`.
///
/// `logits` must be n x 1 and computed row-wise from `x` (no coupling between
/// rows), so that the gradient of sum(logits) w.r.t. x holds each row's own
/// input gradient. The result stays on the tape and can be differentiated
/// with respect to the parameters that produced `logits`.
Var input_grad_sq_norm(Var logits, Var x);

}  // namespace ganreg::diff
