#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

namespace operant::ad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

// Reverse-mode automatic differentiation over a batch of columns.
//
// Every node is a (rows x ncols) matrix; column j belongs to batch element j
// and never mixes with other columns (the only cross-row op, dot_rows,
// contracts rows within a column).  Parameters (weights, biases) are
// registered once per tape and shared by all columns; backward() accumulates
// their cotangents, so seeding column j with dL/dT_j yields dL/dtheta summed
// over the batch, while a one-column tape seeded with 1 yields a single
// term's parameter gradient.
//
// Input derivatives are handled by the Jet layer (jet.hpp): derivative
// channels are ordinary nodes built from these primitives, so reverse-mode
// through them yields exact mixed parameter/input derivatives.

struct Var {
  std::int32_t id = -1;
  [[nodiscard]] bool valid() const { return id >= 0; }
};

class Tape {
 public:
  explicit Tape(Eigen::Index ncols);

  [[nodiscard]] Eigen::Index ncols() const { return ncols_; }
  [[nodiscard]] std::size_t node_count() const { return ops_.size(); }

  // Parameter registration.  The tape stores pointers; the caller keeps the
  // underlying matrices alive for the tape's lifetime.
  int add_weight(const Mat* w);
  int add_bias(const Vec* b);

  Var constant(Mat value);

  // layer_tag >= 0 enables a finite-value check on the op's output and names
  // the layer in the resulting diagnostic.
  Var affine(int w_slot, int b_slot, Var x, int layer_tag = -1);
  Var matmul(int w_slot, Var x, int layer_tag = -1);

  Var tanh(Var x);
  Var mul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var one_minus(Var a);
  Var square(Var a);
  // Columnwise dot product of rows [r0, r1): returns a 1 x ncols node.
  Var dot_rows(Var a, Var b, Eigen::Index r0, Eigen::Index r1);

  [[nodiscard]] const Mat& value(Var v) const;

  // Reverse sweep from the given cotangent seeds.  May be called once per
  // tape; parameter cotangents accumulate across all seeds.
  void backward(const std::vector<std::pair<Var, RowVec>>& seeds);
  void backward(Var v, const RowVec& seed);
  void backward(Var v);  // one-column convenience, seed 1.0

  // Parameter cotangents after backward(); empty matrices mean "never
  // touched", i.e. an exact zero gradient.
  [[nodiscard]] const Mat& weight_grad(int w_slot) const;
  [[nodiscard]] const Vec& bias_grad(int b_slot) const;

 private:
  enum class OpKind : std::uint8_t {
    kConstant, kAffine, kMatmul, kTanh, kMul, kAdd, kSub, kNeg,
    kScale, kAddScalar, kOneMinus, kSquare, kDotRows,
  };
  struct Op {
    OpKind kind;
    std::int32_t out;
    std::int32_t a = -1, b = -1;
    std::int32_t w = -1, bias = -1;
    double c = 0.0;
    Eigen::Index r0 = 0, r1 = 0;
  };

  Var push(OpKind kind, Mat value, Op op);
  void check_finite(const Mat& m, int layer_tag) const;
  void accum(std::int32_t node, const Mat& contribution);

  Eigen::Index ncols_;
  std::vector<Mat> val_;
  std::vector<Mat> grad_;
  std::vector<Op> ops_;
  std::vector<const Mat*> weights_;
  std::vector<const Vec*> biases_;
  std::vector<Mat> wgrad_;
  std::vector<Vec> bgrad_;
  bool swept_ = false;
};

}  // namespace operant::ad
