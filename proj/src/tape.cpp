#include "operant/tape.hpp"

#include <string>

#include "operant/errors.hpp"

namespace operant::ad {

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(where) + ": operand shapes differ (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
}

}  // namespace

Tape::Tape(Eigen::Index ncols) : ncols_(ncols) {
  if (ncols <= 0) throw ConfigError("tape batch width must be positive");
}

int Tape::add_weight(const Mat* w) {
  weights_.push_back(w);
  wgrad_.emplace_back();
  return static_cast<int>(weights_.size()) - 1;
}

int Tape::add_bias(const Vec* b) {
  biases_.push_back(b);
  bgrad_.emplace_back();
  return static_cast<int>(biases_.size()) - 1;
}

Var Tape::push(OpKind kind, Mat value, Op op) {
  op.kind = kind;
  op.out = static_cast<std::int32_t>(val_.size());
  val_.push_back(std::move(value));
  ops_.push_back(op);
  return Var{op.out};
}

void Tape::check_finite(const Mat& m, int layer_tag) const {
  if (layer_tag >= 0 && !m.allFinite())
    throw NumericalError("non-finite values in output of layer " +
                         std::to_string(layer_tag));
}

Var Tape::constant(Mat value) {
  if (value.cols() != ncols_)
    throw ShapeError("tape constant has " + std::to_string(value.cols()) +
                     " columns, batch width is " + std::to_string(ncols_));
  return push(OpKind::kConstant, std::move(value), Op{});
}

Var Tape::affine(int w_slot, int b_slot, Var x, int layer_tag) {
  const Mat& w = *weights_[static_cast<std::size_t>(w_slot)];
  const Vec& b = *biases_[static_cast<std::size_t>(b_slot)];
  const Mat& in = value(x);
  if (w.cols() != in.rows())
    throw ShapeError("affine: weight is " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + " but input has " +
                     std::to_string(in.rows()) + " rows");
  if (b.size() != w.rows())
    throw ShapeError("affine: bias length " + std::to_string(b.size()) +
                     " does not match weight rows " + std::to_string(w.rows()));
  Mat out(w.rows(), ncols_);
  out.noalias() = w * in;
  out.colwise() += b;
  check_finite(out, layer_tag);
  Op op;
  op.a = x.id;
  op.w = w_slot;
  op.bias = b_slot;
  return push(OpKind::kAffine, std::move(out), op);
}

Var Tape::matmul(int w_slot, Var x, int layer_tag) {
  const Mat& w = *weights_[static_cast<std::size_t>(w_slot)];
  const Mat& in = value(x);
  if (w.cols() != in.rows())
    throw ShapeError("matmul: weight is " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + " but input has " +
                     std::to_string(in.rows()) + " rows");
  Mat out(w.rows(), ncols_);
  out.noalias() = w * in;
  check_finite(out, layer_tag);
  Op op;
  op.a = x.id;
  op.w = w_slot;
  return push(OpKind::kMatmul, std::move(out), op);
}

Var Tape::tanh(Var x) {
  Op op;
  op.a = x.id;
  return push(OpKind::kTanh, value(x).array().tanh().matrix(), op);
}

Var Tape::mul(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  require_same_shape(va, vb, "mul");
  Op op;
  op.a = a.id;
  op.b = b.id;
  return push(OpKind::kMul, va.cwiseProduct(vb), op);
}

Var Tape::add(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  require_same_shape(va, vb, "add");
  Op op;
  op.a = a.id;
  op.b = b.id;
  return push(OpKind::kAdd, va + vb, op);
}

Var Tape::sub(Var a, Var b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  require_same_shape(va, vb, "sub");
  Op op;
  op.a = a.id;
  op.b = b.id;
  return push(OpKind::kSub, va - vb, op);
}

Var Tape::neg(Var a) {
  Op op;
  op.a = a.id;
  return push(OpKind::kNeg, -value(a), op);
}

Var Tape::scale(Var a, double c) {
  Op op;
  op.a = a.id;
  op.c = c;
  return push(OpKind::kScale, c * value(a), op);
}

Var Tape::add_scalar(Var a, double c) {
  Op op;
  op.a = a.id;
  op.c = c;
  return push(OpKind::kAddScalar, value(a).array() + c, op);
}

Var Tape::one_minus(Var a) {
  Op op;
  op.a = a.id;
  return push(OpKind::kOneMinus, (1.0 - value(a).array()).matrix(), op);
}

Var Tape::square(Var a) {
  const Mat& va = value(a);
  Op op;
  op.a = a.id;
  return push(OpKind::kSquare, va.cwiseProduct(va), op);
}

Var Tape::dot_rows(Var a, Var b, Eigen::Index r0, Eigen::Index r1) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  require_same_shape(va, vb, "dot_rows");
  if (r0 < 0 || r1 > va.rows() || r0 >= r1)
    throw ShapeError("dot_rows: row range [" + std::to_string(r0) + ", " +
                     std::to_string(r1) + ") invalid for " +
                     std::to_string(va.rows()) + " rows");
  Mat out = va.middleRows(r0, r1 - r0)
                .cwiseProduct(vb.middleRows(r0, r1 - r0))
                .colwise()
                .sum();
  Op op;
  op.a = a.id;
  op.b = b.id;
  op.r0 = r0;
  op.r1 = r1;
  return push(OpKind::kDotRows, std::move(out), op);
}

const Mat& Tape::value(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= val_.size())
    throw ShapeError("tape: invalid node reference");
  return val_[static_cast<std::size_t>(v.id)];
}

void Tape::accum(std::int32_t node, const Mat& contribution) {
  Mat& g = grad_[static_cast<std::size_t>(node)];
  if (g.size() == 0)
    g = contribution;
  else
    g += contribution;
}

void Tape::backward(Var v, const RowVec& seed) {
  backward(std::vector<std::pair<Var, RowVec>>{{v, seed}});
}

void Tape::backward(Var v) {
  if (ncols_ != 1)
    throw ShapeError("scalar backward() requires a one-column tape");
  backward(v, RowVec::Ones(1));
}

void Tape::backward(const std::vector<std::pair<Var, RowVec>>& seeds) {
  if (swept_) throw ConfigError("tape backward() may run only once");
  swept_ = true;
  grad_.assign(val_.size(), Mat());
  for (const auto& [var, seed] : seeds) {
    const Mat& v = value(var);
    if (v.rows() != 1)
      throw ShapeError("backward seeds must target 1-row nodes");
    if (seed.size() != ncols_)
      throw ShapeError("backward seed length " + std::to_string(seed.size()) +
                       " does not match batch width " + std::to_string(ncols_));
    accum(var.id, seed);
  }

  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    const Op& op = *it;
    const Mat& g = grad_[static_cast<std::size_t>(op.out)];
    if (g.size() == 0) continue;  // node does not influence any seed
    switch (op.kind) {
      case OpKind::kConstant:
        break;
      case OpKind::kAffine: {
        const Mat& in = val_[static_cast<std::size_t>(op.a)];
        Mat& gw = wgrad_[static_cast<std::size_t>(op.w)];
        if (gw.size() == 0) gw = Mat::Zero(g.rows(), in.rows());
        gw.noalias() += g * in.transpose();
        Vec& gb = bgrad_[static_cast<std::size_t>(op.bias)];
        if (gb.size() == 0) gb = Vec::Zero(g.rows());
        gb += g.rowwise().sum();
        const Mat& w = *weights_[static_cast<std::size_t>(op.w)];
        accum(op.a, w.transpose() * g);
        break;
      }
      case OpKind::kMatmul: {
        const Mat& in = val_[static_cast<std::size_t>(op.a)];
        Mat& gw = wgrad_[static_cast<std::size_t>(op.w)];
        if (gw.size() == 0) gw = Mat::Zero(g.rows(), in.rows());
        gw.noalias() += g * in.transpose();
        const Mat& w = *weights_[static_cast<std::size_t>(op.w)];
        accum(op.a, w.transpose() * g);
        break;
      }
      case OpKind::kTanh: {
        const Mat& out = val_[static_cast<std::size_t>(op.out)];
        accum(op.a, (1.0 - out.array().square()).matrix().cwiseProduct(g));
        break;
      }
      case OpKind::kMul:
        accum(op.a, val_[static_cast<std::size_t>(op.b)].cwiseProduct(g));
        accum(op.b, val_[static_cast<std::size_t>(op.a)].cwiseProduct(g));
        break;
      case OpKind::kAdd:
        accum(op.a, g);
        accum(op.b, g);
        break;
      case OpKind::kSub:
        accum(op.a, g);
        accum(op.b, -g);
        break;
      case OpKind::kNeg:
        accum(op.a, -g);
        break;
      case OpKind::kScale:
        accum(op.a, op.c * g);
        break;
      case OpKind::kAddScalar:
        accum(op.a, g);
        break;
      case OpKind::kOneMinus:
        accum(op.a, -g);
        break;
      case OpKind::kSquare:
        accum(op.a, 2.0 * val_[static_cast<std::size_t>(op.a)].cwiseProduct(g));
        break;
      case OpKind::kDotRows: {
        const Mat& va = val_[static_cast<std::size_t>(op.a)];
        const Mat& vb = val_[static_cast<std::size_t>(op.b)];
        const Eigen::Index len = op.r1 - op.r0;
        Mat ga = Mat::Zero(va.rows(), ncols_);
        ga.middleRows(op.r0, len) =
            vb.middleRows(op.r0, len).array().rowwise() * g.row(0).array();
        accum(op.a, ga);
        Mat gb = Mat::Zero(vb.rows(), ncols_);
        gb.middleRows(op.r0, len) =
            va.middleRows(op.r0, len).array().rowwise() * g.row(0).array();
        accum(op.b, gb);
        break;
      }
    }
  }
}

const Mat& Tape::weight_grad(int w_slot) const {
  return wgrad_[static_cast<std::size_t>(w_slot)];
}

const Vec& Tape::bias_grad(int b_slot) const {
  return bgrad_[static_cast<std::size_t>(b_slot)];
}

}  // namespace operant::ad
