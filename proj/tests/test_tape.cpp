#include <doctest.h>

#include <Eigen/Core>
#include <cmath>

#include "operant/errors.hpp"
#include "operant/jet.hpp"
#include "operant/rng.hpp"
#include "operant/tape.hpp"
#include "test_util.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using operant::ad::Jet;
using operant::ad::Tape;
using operant::ad::Var;

namespace {

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, operant::rng::Stream& s) {
  MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = s.normal();
  return m;
}

// Scalar reference function mirroring the graph built in the gradient tests:
// f(W1, b1, W2, b2) = sum over outputs of (w2 tanh(W1 x + b1) + b2)^2,
// evaluated without any tape machinery.
double dense_ref(const MatrixXd& w1, const VectorXd& b1, const MatrixXd& w2,
                 const VectorXd& b2, const VectorXd& x) {
  const VectorXd h = ((w1 * x + b1).array().tanh()).matrix();
  const VectorXd out = w2 * h + b2;
  return out.squaredNorm();
}

}  // namespace

TEST_SUITE_BEGIN("tape");

TEST_CASE("affine forward matches a hand computation") {
  Tape t(2);
  MatrixXd w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  VectorXd b(2);
  b << 0.5, -0.5;
  MatrixXd x(3, 2);
  x << 1, 0, 0, 1, 1, 1;
  const int ws = t.add_weight(&w);
  const int bs = t.add_bias(&b);
  const Var out = t.affine(ws, bs, t.constant(x));
  MatrixXd want(2, 2);
  want << 4.5, 5.5, 9.5, 10.5;
  CHECK((t.value(out) - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reverse sweep matches finite differences on a dense composite") {
  operant::rng::Stream s(31, 0);
  MatrixXd w1 = random_matrix(4, 3, s);
  VectorXd b1 = random_matrix(4, 1, s);
  MatrixXd w2 = random_matrix(2, 4, s);
  VectorXd b2 = random_matrix(2, 1, s);
  const VectorXd x = random_matrix(3, 1, s);

  auto run = [&](const MatrixXd& w1v, const VectorXd& b1v, const MatrixXd& w2v,
                 const VectorXd& b2v, Tape& t, int* slots) {
    slots[0] = t.add_weight(&w1v);
    slots[1] = t.add_bias(&b1v);
    slots[2] = t.add_weight(&w2v);
    slots[3] = t.add_bias(&b2v);
    const Var h = t.tanh(t.affine(slots[0], slots[1], t.constant(x)));
    const Var out = t.affine(slots[2], slots[3], h);
    return t.dot_rows(t.square(out), t.add_scalar(t.scale(out, 0.0), 1.0), 0, 2);
  };

  Tape t(1);
  int slots[4];
  const Var loss = run(w1, b1, w2, b2, t, slots);
  CHECK(testutil::rel_err(t.value(loss)(0, 0), dense_ref(w1, b1, w2, b2, x)) < 1e-12);
  t.backward(loss);

  // Finite differences over every entry of W1 via the same scalar.
  auto f_w1 = [&](const VectorXd& flat) {
    MatrixXd w = w1;
    Eigen::Map<VectorXd>(w.data(), w.size()) = flat;
    return dense_ref(w, b1, w2, b2, x);
  };
  const VectorXd got_w1 =
      Eigen::Map<const VectorXd>(t.weight_grad(slots[0]).data(), w1.size());
  const VectorXd fd_w1 = testutil::fd_grad(
      f_w1, Eigen::Map<const VectorXd>(w1.data(), w1.size()));
  CHECK(testutil::rel_err_vec(got_w1, fd_w1) < 1e-6);

  auto f_b2 = [&](const VectorXd& flat) { return dense_ref(w1, b1, w2, flat, x); };
  CHECK(testutil::rel_err_vec(t.bias_grad(slots[3]), testutil::fd_grad(f_b2, b2)) <
        1e-6);
}

TEST_CASE("jet channels carry first and second input derivatives") {
  operant::rng::Stream s(77, 0);
  MatrixXd w1 = random_matrix(5, 2, s);
  VectorXd b1 = random_matrix(5, 1, s);
  MatrixXd w2 = random_matrix(1, 5, s);
  VectorXd b2 = random_matrix(1, 1, s);

  auto value_at = [&](double x0, double x1) {
    const VectorXd in = (VectorXd(2) << x0, x1).finished();
    return (w2 * ((w1 * in + b1).array().tanh()).matrix() + b2)(0);
  };

  const double x0 = 0.3, x1 = -0.8;
  Tape t(1);
  const int w1s = t.add_weight(&w1);
  const int b1s = t.add_bias(&b1);
  const int w2s = t.add_weight(&w2);
  const int b2s = t.add_bias(&b2);

  Jet in = operant::ad::jet_constant(t, (VectorXd(2) << x0, x1).finished(), 1);
  MatrixXd one_hot = MatrixXd::Zero(2, 1);
  one_hot(0, 0) = 1.0;
  in.ch[0].d1 = t.constant(one_hot);

  const Jet h = jet_tanh(t, jet_affine(t, w1s, b1s, in));
  const Jet out = jet_affine(t, w2s, b2s, h);

  const double d1 = t.value(out.ch[0].d1)(0, 0);
  const double d2 = t.value(out.ch[0].d2)(0, 0);
  auto f = [&](double v) { return value_at(v, x1); };
  CHECK(testutil::rel_err(d1, testutil::fd_d1(f, x0)) < 1e-6);
  CHECK(testutil::rel_err(d2, testutil::fd_d2(f, x0), 1e-6) < 1e-5);
}

TEST_CASE("channels opted out of second derivatives skip them but keep d1 exact") {
  operant::rng::Stream s(79, 0);
  MatrixXd w1 = random_matrix(5, 2, s);
  VectorXd b1 = random_matrix(5, 1, s);
  MatrixXd w2 = random_matrix(1, 5, s);
  VectorXd b2 = random_matrix(1, 1, s);
  const VectorXd x = (VectorXd(2) << 0.3, -0.8).finished();
  MatrixXd one_hot = MatrixXd::Zero(2, 1);
  one_hot(0, 0) = 1.0;

  auto run = [&](bool want_d2) {
    Tape t(1);
    const int w1s = t.add_weight(&w1);
    const int b1s = t.add_bias(&b1);
    const int w2s = t.add_weight(&w2);
    const int b2s = t.add_bias(&b2);
    Jet in = operant::ad::jet_constant(t, x, 1);
    in.ch[0].d1 = t.constant(one_hot);
    in.ch[0].want_d2 = want_d2;
    const Jet out =
        jet_affine(t, w2s, b2s, jet_tanh(t, jet_affine(t, w1s, b1s, in)));
    return std::make_tuple(t.value(out.ch[0].d1)(0, 0), out.ch[0].d2.valid(),
                           t.node_count());
  };

  const auto [d1_full, has_d2_full, nodes_full] = run(true);
  const auto [d1_lean, has_d2_lean, nodes_lean] = run(false);
  CHECK(has_d2_full);
  CHECK(!has_d2_lean);
  CHECK(d1_lean == d1_full);  // identical op sequence for the first derivative
  CHECK(nodes_lean < nodes_full);

  // A product inherits the request from either factor.
  Tape t(1);
  Jet a = operant::ad::jet_constant(t, (VectorXd(1) << 0.4).finished(), 1);
  Jet b = operant::ad::jet_constant(t, (VectorXd(1) << -1.1).finished(), 1);
  a.ch[0].d1 = t.constant(MatrixXd::Ones(1, 1));
  b.ch[0].d1 = t.constant(MatrixXd::Ones(1, 1));
  a.ch[0].want_d2 = false;
  b.ch[0].want_d2 = false;
  CHECK(!jet_mul(t, a, b).ch[0].d2.valid());
  b.ch[0].want_d2 = true;
  CHECK(jet_mul(t, a, b).ch[0].d2.valid());
}

TEST_CASE("parameter gradients of an input-derivative head match finite differences") {
  // The mixed object d/dtheta (d^2 f / dx^2): reverse mode through the jet
  // channels, judged against finite differences in theta of an
  // independently computed second input derivative.
  operant::rng::Stream s(78, 0);
  MatrixXd w1 = random_matrix(4, 1, s);
  VectorXd b1 = random_matrix(4, 1, s);
  MatrixXd w2 = random_matrix(1, 4, s);
  VectorXd b2 = random_matrix(1, 1, s);
  const double x0 = 0.37;

  // Independent d2/dx2 via one-dimensional finite differences of a plain eval.
  auto d2_of = [&](const MatrixXd& w1v, const VectorXd& b1v) {
    auto f = [&](double v) {
      const VectorXd in = (VectorXd(1) << v).finished();
      return (w2 * ((w1v * in + b1v).array().tanh()).matrix() + b2)(0);
    };
    return testutil::fd_d2(f, x0, 1e-3);
  };

  Tape t(1);
  const int w1s = t.add_weight(&w1);
  const int b1s = t.add_bias(&b1);
  const int w2s = t.add_weight(&w2);
  const int b2s = t.add_bias(&b2);
  Jet in = operant::ad::jet_constant(t, (VectorXd(1) << x0).finished(), 1);
  in.ch[0].d1 = t.constant(MatrixXd::Ones(1, 1));
  const Jet out = jet_affine(t, w2s, b2s, jet_tanh(t, jet_affine(t, w1s, b1s, in)));
  t.backward(out.ch[0].d2);

  auto f_w1 = [&](const VectorXd& flat) {
    MatrixXd w = w1;
    Eigen::Map<VectorXd>(w.data(), w.size()) = flat;
    return d2_of(w, b1);
  };
  const VectorXd got =
      Eigen::Map<const VectorXd>(t.weight_grad(w1s).data(), w1.size());
  const VectorXd fd = testutil::fd_grad(
      f_w1, Eigen::Map<const VectorXd>(w1.data(), w1.size()), 1e-5);
  // The reference itself carries O(h^2) truncation error from fd_d2.
  CHECK(testutil::rel_err_vec(got, fd, 1e-8) < 1e-4);
}

TEST_CASE("batched evaluation agrees with per-column tapes") {
  operant::rng::Stream s(55, 0);
  MatrixXd w1 = random_matrix(6, 3, s);
  VectorXd b1 = random_matrix(6, 1, s);
  MatrixXd w2 = random_matrix(1, 6, s);
  VectorXd b2 = random_matrix(1, 1, s);
  const MatrixXd xs = random_matrix(3, 8, s);
  Eigen::RowVectorXd seed(8);
  for (int j = 0; j < 8; ++j) seed(j) = 0.25 * (j + 1);

  Tape batch(8);
  const int slots[4] = {batch.add_weight(&w1), batch.add_bias(&b1),
                        batch.add_weight(&w2), batch.add_bias(&b2)};
  const Var out_b = batch.affine(
      slots[2], slots[3], batch.tanh(batch.affine(slots[0], slots[1],
                                                  batch.constant(xs))));
  batch.backward(out_b, seed);

  MatrixXd acc_w1 = MatrixXd::Zero(6, 3);
  for (int j = 0; j < 8; ++j) {
    Tape t(1);
    const int ws1 = t.add_weight(&w1);
    const int bs1 = t.add_bias(&b1);
    const int ws2 = t.add_weight(&w2);
    const int bs2 = t.add_bias(&b2);
    const Var out =
        t.affine(ws2, bs2, t.tanh(t.affine(ws1, bs1, t.constant(xs.col(j)))));
    CHECK(t.value(out)(0, 0) == doctest::Approx(batch.value(out_b)(0, j)).epsilon(1e-14));
    t.backward(out, (Eigen::RowVectorXd(1) << seed(j)).finished());
    acc_w1 += t.weight_grad(ws1);
  }
  CHECK((batch.weight_grad(slots[0]) - acc_w1).cwiseAbs().maxCoeff() <
        1e-13 * std::max(1.0, acc_w1.cwiseAbs().maxCoeff()));
}

TEST_CASE("shape mismatches are rejected") {
  Tape t(1);
  MatrixXd w = MatrixXd::Ones(2, 3);
  VectorXd b = VectorXd::Ones(2);
  const int ws = t.add_weight(&w);
  const int bs = t.add_bias(&b);
  const Var bad = t.constant(MatrixXd::Ones(4, 1));
  CHECK_THROWS_AS((void)t.affine(ws, bs, bad), operant::ShapeError);

  const Var a = t.constant(MatrixXd::Ones(2, 1));
  const Var c = t.constant(MatrixXd::Ones(3, 1));
  CHECK_THROWS_AS((void)t.mul(a, c), operant::ShapeError);
  CHECK_THROWS_AS((void)t.dot_rows(a, a, 0, 5), operant::ShapeError);
}

TEST_CASE("non-finite layer output raises a numerical error naming the layer") {
  Tape t(1);
  MatrixXd w = MatrixXd::Constant(1, 1, std::numeric_limits<double>::infinity());
  VectorXd b = VectorXd::Zero(1);
  const int ws = t.add_weight(&w);
  const int bs = t.add_bias(&b);
  const Var x = t.constant(MatrixXd::Ones(1, 1));
  CHECK_THROWS_WITH_AS((void)t.affine(ws, bs, x, 7),
                       doctest::Contains("layer 7"), operant::NumericalError);
}

TEST_CASE("backward may only run once per tape") {
  Tape t(1);
  const Var x = t.constant(MatrixXd::Ones(1, 1));
  const Var y = t.square(x);
  t.backward(y);
  CHECK_THROWS_AS(t.backward(y), operant::ConfigError);
}

TEST_SUITE_END();
