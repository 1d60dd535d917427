#include <doctest.h>

#include <cmath>
#include <numeric>

#include "operant/errors.hpp"
#include "operant/ntk.hpp"
#include "test_util.hpp"

using namespace operant;
using constraint::ConstraintTerm;
using constraint::TermKind;
using data::Benchmark;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

TEST_SUITE_BEGIN("ntk-engine");

namespace {

field::GrfSpec se_grf() {
  field::GrfSpec g;
  g.kernel_family = field::KernelFamily::kSquaredExponential;
  g.length_scale = 0.2;
  return g;
}

field::GrfSpec periodic_grf() {
  field::GrfSpec g;
  g.kernel_family = field::KernelFamily::kPeriodicSpectral;
  g.output_scale = 25.0;
  g.num_modes = 4;
  return g;
}

data::OperatorDataset anti_ds(std::uint64_t seed = 91) {
  return data::generate_dataset({Benchmark::kAntiderivative, 1e-2, 3, 12, 2, 0},
                                se_grf(), 1, seed);
}
data::OperatorDataset burg_ds() {
  return data::generate_dataset({Benchmark::kBurgers, 0.05, 1, 12, 2, 2},
                                periodic_grf(), 1, 92);
}

net::DeepOnetParams small_model(const data::OperatorDataset& ds,
                                net::Architecture arch, std::uint64_t seed) {
  return net::make_deeponet(arch, ds.spec.m_sensors, ds.spec.point_dim(), 6, 2,
                            4, {0, 4}, seed);
}

std::vector<long> iota_indices(std::size_t n) {
  std::vector<long> all(n);
  std::iota(all.begin(), all.end(), 0L);
  return all;
}

// Finite-difference Jacobian row of one term in the flat parameter order.
Vec fd_term_grad(const net::DeepOnetParams& model, const ConstraintTerm& term,
                 const data::OperatorDataset& ds) {
  net::DeepOnetParams probe = model;
  auto f = [&](const Vec& flat) {
    probe.unflatten(flat);
    return constraint::eval_constraint(probe, term, ds);
  };
  return testutil::fd_grad(f, model.flatten(), 1e-5);
}

Vec rk4_flow(const Mat& h, Vec x, double time, int steps) {
  const double dt = time / steps;
  const double rate = 4.0 / static_cast<double>(h.rows());
  auto f = [&](const Vec& v) { return Vec((-rate) * (h * v)); };
  for (int s = 0; s < steps; ++s) {
    const Vec k1 = f(x);
    const Vec k2 = f(x + 0.5 * dt * k1);
    const Vec k3 = f(x + 0.5 * dt * k2);
    const Vec k4 = f(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

Mat random_orthogonal(Eigen::Index n, std::uint64_t seed) {
  rng::Stream s(seed, 0);
  Mat a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = s.normal();
  return Eigen::HouseholderQR<Mat>(a).householderQ();
}

}  // namespace

TEST_CASE("kernel diagonal matches squared finite-difference gradient norms") {
  const auto ds = burg_ds();
  const auto model = small_model(ds, net::Architecture::kMlp, 3);
  const auto terms = constraint::assemble_terms(ds);
  const std::vector<long> pick{0, 3, 5, 7};
  const Vec diag = ntk::ntk_diag(model, terms, ds, pick);
  for (std::size_t r = 0; r < pick.size(); ++r) {
    const Vec fd =
        fd_term_grad(model, terms[static_cast<std::size_t>(pick[r])], ds);
    CHECK(testutil::rel_err(diag[static_cast<Eigen::Index>(r)], fd.squaredNorm(),
                            1e-8) < 1e-6);
  }
}

TEST_CASE("dense kernel matches the finite-difference Jacobian outer product") {
  const auto ds = anti_ds();
  const auto model = small_model(ds, net::Architecture::kModifiedDeepOnet, 4);
  const auto terms = constraint::assemble_terms(ds);
  const auto all = iota_indices(terms.size());
  const Mat h = ntk::ntk_full(model, terms, ds, all);

  Mat j_fd(static_cast<Eigen::Index>(terms.size()), model.parameter_count());
  for (std::size_t r = 0; r < terms.size(); ++r)
    j_fd.row(static_cast<Eigen::Index>(r)) = fd_term_grad(model, terms[r], ds);
  const Mat h_fd = j_fd * j_fd.transpose();
  CHECK((h - h_fd).norm() / h_fd.norm() < 1e-6);

  // The diagonal path and the dense path agree on shared entries.
  const Vec diag = ntk::ntk_diag(model, terms, ds, all);
  for (Eigen::Index i = 0; i < diag.size(); ++i)
    CHECK(testutil::rel_err(h(i, i), diag[i]) < 1e-12);
}

TEST_CASE("the kernel is positive semi-definite with its largest entry on the diagonal") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto ds = seed % 2 == 0 ? anti_ds(91 + seed) : burg_ds();
    const auto arch = seed % 3 == 0 ? net::Architecture::kMlp
                      : seed % 3 == 1 ? net::Architecture::kModifiedMlp
                                      : net::Architecture::kModifiedDeepOnet;
    const auto model = small_model(ds, arch, 100 + seed);
    const auto terms = constraint::assemble_terms(ds);
    const Mat h = ntk::ntk_full(model, terms, ds, iota_indices(terms.size()));

    CHECK(h == h.transpose());  // symmetrised exactly
    const Vec eigs = ntk::ntk_spectrum(h);
    CHECK(eigs[eigs.size() - 1] >= -1e-10 * h.trace());
    CHECK(testutil::rel_err(h.cwiseAbs().maxCoeff(), h.diagonal().maxCoeff()) <
          1e-12);
    ++checked;
  }
  CHECK(checked == 6);
}

TEST_CASE("weights follow the inverse-diagonal power law") {
  rng::Stream s(17, 0);
  Vec diag(9);
  for (Eigen::Index i = 0; i < diag.size(); ++i)
    diag[i] = std::pow(10.0, s.uniform(-6.0, 2.0));

  for (const double alpha : {0.0, 0.5, 1.0}) {
    const auto ws = ntk::ntk_weights(diag, alpha);
    CHECK(ws.alpha == alpha);
    CHECK(ws.clamped == 0);
    CHECK(ws.last_update_step == -1);
    const double hmax = diag.maxCoeff();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
      const long double want =
          std::pow(static_cast<long double>(hmax) /
                       std::max(static_cast<long double>(diag[i]),
                                static_cast<long double>(1e-12 * hmax)),
                   static_cast<long double>(alpha));
      CHECK(testutil::rel_err(ws.lambdas[i], static_cast<double>(want)) < 1e-12);
      CHECK(ws.lambdas[i] >= 1.0);  // every weight lifts, none suppresses
    }
    if (alpha == 0.0)
      for (Eigen::Index i = 0; i < diag.size(); ++i) CHECK(ws.lambdas[i] == 1.0);
  }

  // The argmax term always gets weight exactly 1, making it the minimum.
  Eigen::Index argmax = 0;
  diag.maxCoeff(&argmax);
  for (const double alpha : {0.5, 1.0}) {
    const auto ws = ntk::ntk_weights(diag, alpha);
    CHECK(ws.lambdas[argmax] == 1.0);
    CHECK(ws.lambdas.minCoeff() == 1.0);
  }

  // A vanished entry is clamped, not divided by, and the clamp is counted.
  Vec with_zero = diag;
  with_zero[2] = 0.0;
  const auto ws = ntk::ntk_weights(with_zero, 1.0);
  CHECK(testutil::rel_err(ws.lambdas[2], 1e12) < 1e-12);
  CHECK(std::isfinite(ws.lambdas.maxCoeff()));
  CHECK(ws.clamped == 1);

  CHECK_THROWS_AS(ntk::ntk_weights(Vec::Zero(3), 1.0), NumericalError);
  Vec bad = diag;
  bad[1] = -1.0;
  CHECK_THROWS_AS(ntk::ntk_weights(bad, 1.0), NumericalError);
  CHECK_THROWS_AS(ntk::ntk_weights(diag, -0.5), ConfigError);
  CHECK_THROWS_AS(ntk::ntk_weights(diag, 1.5), ConfigError);
  CHECK_THROWS_AS(ntk::ntk_weights(Vec(), 1.0), ConfigError);
}

TEST_CASE("weights ignore a uniform rescaling of the kernel") {
  rng::Stream s(18, 0);
  Vec diag(7);
  for (Eigen::Index i = 0; i < diag.size(); ++i)
    diag[i] = std::pow(10.0, s.uniform(-4.0, 3.0));
  // Scaling by a power of two keeps every ratio bit-identical.
  const Vec a = ntk::ntk_weights(diag, 0.5).lambdas;
  const Vec b = ntk::ntk_weights(4.0 * diag, 0.5).lambdas;
  for (Eigen::Index i = 0; i < diag.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("the linearised flow matches an independent integrator") {
  const Eigen::Index n = 10;
  const Mat q = random_orthogonal(n, 5);
  Vec spectrum(n);
  rng::Stream s(19, 0);
  for (Eigen::Index i = 0; i < n; ++i) spectrum[i] = s.uniform(0.0, 5.0);
  const Mat h = q * spectrum.asDiagonal() * q.transpose();
  Vec t0(n);
  for (Eigen::Index i = 0; i < n; ++i) t0[i] = s.normal();

  const Vec pred = ntk::predict_linear_dynamics(h, t0, 0.7, n);
  const Vec ref = rk4_flow(h, t0, 0.7, 4000);
  CHECK(testutil::rel_err_vec(pred, ref) < 1e-8);

  // The term count sets the rate: doubling it halves the decay exponent.
  const Vec slower = ntk::predict_linear_dynamics(h, t0, 0.7, 2 * n);
  const Vec same = ntk::predict_linear_dynamics(h, t0, 0.35, n);
  CHECK(testutil::rel_err_vec(slower, same) < 1e-12);

  // Time zero is the identity, bit for bit.
  const Vec frozen = ntk::predict_linear_dynamics(h, t0, 0.0, n);
  for (Eigen::Index i = 0; i < n; ++i) CHECK(frozen[i] == t0[i]);

  CHECK_THROWS_AS(ntk::predict_linear_dynamics(h, t0, -1.0, n), ConfigError);
  CHECK_THROWS_AS(ntk::predict_linear_dynamics(h, t0, 1.0, 0), ConfigError);
  CHECK_THROWS_AS(ntk::predict_linear_dynamics(h, Vec::Zero(n + 1), 1.0, n),
                  ShapeError);
  CHECK_THROWS_AS(
      ntk::predict_linear_dynamics(Mat::Zero(2, 3), Vec::Zero(2), 1.0, 2),
      ShapeError);
}

TEST_CASE("the spectrum recovers a constructed eigensystem in descending order") {
  const Eigen::Index n = 12;
  const Mat q = random_orthogonal(n, 6);
  Vec spectrum(n);
  rng::Stream s(20, 0);
  for (Eigen::Index i = 0; i < n; ++i) spectrum[i] = s.uniform(0.1, 9.0);
  const Mat h = q * spectrum.asDiagonal() * q.transpose();

  Vec want = spectrum;
  std::sort(want.data(), want.data() + n, std::greater<double>());
  const Vec got = ntk::ntk_spectrum(h);
  CHECK(testutil::rel_err_vec(got, want) < 1e-10);
  for (Eigen::Index i = 0; i + 1 < n; ++i) CHECK(got[i] >= got[i + 1]);
}

TEST_CASE("a parameter-detached term carries an exactly zero diagonal entry") {
  const auto ds = burg_ds();
  auto model = small_model(ds, net::Architecture::kMlp, 7);
  for (auto& layer : model.trunk.layers) layer.W.setZero();
  const auto terms = constraint::assemble_terms(ds);

  std::vector<long> periodic;
  for (std::size_t i = 0; i < terms.size(); ++i)
    if (terms[i].kind == TermKind::kPeriodicValue)
      periodic.push_back(static_cast<long>(i));
  REQUIRE(!periodic.empty());

  const Vec diag = ntk::ntk_diag(model, terms, ds, periodic);
  for (Eigen::Index i = 0; i < diag.size(); ++i) CHECK(diag[i] == 0.0);
}

TEST_CASE("oversized dense kernels are refused") {
  const auto ds = anti_ds();
  const auto model = small_model(ds, net::Architecture::kMlp, 8);
  const auto terms = constraint::assemble_terms(ds);
  const std::vector<long> too_many(2001, 0L);
  CHECK_THROWS_AS(ntk::ntk_full(model, terms, ds, too_many), ConfigError);
  CHECK_THROWS_AS(ntk::ntk_diag(model, terms, ds, {}), ConfigError);
  CHECK_THROWS_AS(ntk::ntk_full(model, terms, ds, {99}), ConfigError);
}

TEST_CASE("plain gradient descent follows the kernel prediction at early times") {
  // Euler training of the unweighted loss is, for small steps, the
  // linearised flow of the term vector under the frozen kernel.
  const auto ds = anti_ds();
  auto model = small_model(ds, net::Architecture::kMlp, 9);
  const auto terms = constraint::assemble_terms(ds);
  const auto all = iota_indices(terms.size());
  const auto n = static_cast<Eigen::Index>(terms.size());
  const Vec ones = Vec::Ones(n);

  const Mat h = ntk::ntk_full(model, terms, ds, all);
  const auto before = constraint::eval_batch(model, terms, ds, all, ones, false);

  const double lr = 1e-4;
  const int steps = 1000;
  Vec theta = model.flatten();
  for (int s = 0; s < steps; ++s) {
    const auto be = constraint::eval_batch(model, terms, ds, all, ones, true);
    theta -= lr * be.grad;
    model.unflatten(theta);
  }
  const auto after = constraint::eval_batch(model, terms, ds, all, ones, false);

  const Vec pred =
      ntk::predict_linear_dynamics(h, before.term_values, lr * steps, n);
  CHECK(testutil::rel_err_vec(after.term_values, pred) < 0.05);
  // The flow actually moved; the check is not vacuous.
  CHECK((after.term_values - before.term_values).norm() >
        0.05 * before.term_values.norm());
}

TEST_SUITE_END();
