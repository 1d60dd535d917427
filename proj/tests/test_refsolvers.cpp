#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>

#include "operant/errors.hpp"
#include "operant/fieldgen.hpp"
#include "operant/refsolvers.hpp"
#include "test_util.hpp"

using namespace operant;
using field::InputFunction;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace {

constexpr double kPi = std::numbers::pi;

InputFunction tabulate(int m, const std::function<double(double)>& f) {
  InputFunction fn;
  fn.sensor_locations.resize(m);
  fn.sensor_values.resize(m);
  for (int i = 0; i < m; ++i) {
    fn.sensor_locations[i] = static_cast<double>(i) / (m - 1);
    fn.sensor_values[i] = f(fn.sensor_locations[i]);
  }
  return fn;
}

Vec linspace(int n, double lo, double hi) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("refsolvers");

TEST_CASE("piecewise-linear interpolation: exact at nodes, hull enforced") {
  Vec xs(3), ys(3);
  xs << 0.0, 0.4, 1.0;
  ys << 1.0, 3.0, -1.0;
  CHECK(field::interp_linear(xs, ys, 0.4) == 3.0);
  CHECK(field::interp_linear(xs, ys, 0.0) == 1.0);
  CHECK(field::interp_linear(xs, ys, 1.0) == -1.0);
  CHECK(field::interp_linear(xs, ys, 0.2) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(field::interp_linear(xs, ys, 0.7) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(field::interp_linear(xs, ys, -0.01), DataError);
  CHECK_THROWS_AS(field::interp_linear(xs, ys, 1.01), DataError);
}

TEST_CASE("antiderivative of the zero function is exactly zero") {
  const auto u = tabulate(11, [](double) { return 0.0; });
  const auto sol = refsol::integrate_antiderivative(u, linspace(5, 0.0, 1.0));
  for (int i = 0; i < 5; ++i) CHECK(sol.values(0, i) == 0.0);
  CHECK(sol.time.size() == 0);
  CHECK(sol.solver == "rk45-antiderivative");
}

TEST_CASE("antiderivative of one is the identity") {
  const auto u = tabulate(2, [](double) { return 1.0; });
  const Vec q = linspace(11, 0.0, 1.0);
  const auto sol = refsol::integrate_antiderivative(u, q);
  for (int i = 0; i < 11; ++i)
    CHECK(std::abs(sol.values(0, i) - q[i]) <= 1e-9);
  CHECK(sol.values(0, 0) == 0.0);  // value at zero is pinned, not integrated
}

TEST_CASE("antiderivative of a dense cosine table matches the analytic sine") {
  const auto u = tabulate(2001, [](double x) { return std::cos(kPi * x); });
  const Vec q = linspace(11, 0.0, 1.0);
  const auto sol = refsol::integrate_antiderivative(u, q);
  for (int i = 0; i < 11; ++i)
    CHECK(std::abs(sol.values(0, i) - std::sin(kPi * q[i]) / kPi) <= 1e-6);
}

TEST_CASE("antiderivative is linear in the integrand") {
  field::GrfSpec spec;
  spec.length_scale = 0.15;
  const Vec grid = linspace(100, 0.0, 1.0);
  const auto u1 = field::sample_grf(spec, grid, 11);
  const auto u2 = field::sample_grf(spec, grid, 22);
  InputFunction combo = u1;
  combo.sensor_values = 2.5 * u1.sensor_values - 1.25 * u2.sensor_values;
  const Vec q = linspace(5, 0.2, 1.0);
  const auto s1 = refsol::integrate_antiderivative(u1, q);
  const auto s2 = refsol::integrate_antiderivative(u2, q);
  const auto sc = refsol::integrate_antiderivative(combo, q);
  for (int i = 0; i < 5; ++i)
    CHECK(std::abs(sc.values(0, i) -
                   (2.5 * s1.values(0, i) - 1.25 * s2.values(0, i))) <= 1e-8);
}

TEST_CASE("antiderivative keeps the caller's query order") {
  const auto u = tabulate(50, [](double x) { return std::exp(x); });
  Vec q(5);
  q << 0.7, 0.2, 1.0, 0.2, 0.0;
  const auto sol = refsol::integrate_antiderivative(u, q);
  for (int i = 0; i < 5; ++i) {
    Vec single(1);
    single << q[i];
    const auto one = refsol::integrate_antiderivative(u, single);
    CHECK(sol.values(0, i) == doctest::Approx(one.values(0, 0)).epsilon(1e-12));
  }
  CHECK(sol.values(0, 4) == 0.0);
}

TEST_CASE("antiderivative input validation and failure modes") {
  const auto u = tabulate(10, [](double x) { return x; });
  Vec bad(1);
  bad << 1.5;
  CHECK_THROWS_AS(refsol::integrate_antiderivative(u, bad), ConfigError);
  bad << -0.1;
  CHECK_THROWS_AS(refsol::integrate_antiderivative(u, bad), ConfigError);

  InputFunction offset = u;
  offset.sensor_locations.array() += 0.25;  // hull no longer starts at 0
  offset.sensor_locations *= 0.5;
  Vec q(1);
  q << 0.4;
  CHECK_THROWS_AS(refsol::integrate_antiderivative(offset, q), ConfigError);

  InputFunction poison = u;
  poison.sensor_values[5] = std::nan("");
  Vec q1(1);
  q1 << 1.0;
  CHECK_THROWS_WITH_AS(refsol::integrate_antiderivative(poison, q1),
                       doctest::Contains("non-finite"), NumericalError);
}

TEST_CASE("transport: initial row is the imposed sine") {
  const auto u = tabulate(2, [](double) { return 1.0; });
  const auto sol = refsol::solve_advection(u, 50, 80);
  for (int i = 0; i < 50; ++i)
    CHECK(sol.values(0, i) == refsol::advection_initial(sol.space[i]));
  for (int n = 0; n < 80; ++n)
    CHECK(sol.values(n, 0) == refsol::advection_inflow(sol.time[n]));
}

TEST_CASE("transport at unit speed follows the characteristics") {
  const auto u = tabulate(2, [](double) { return 1.0; });
  const auto sol = refsol::solve_advection(u, 100, 200);
  // The initial and inflow profiles meet with a derivative jump that rides
  // the line x = t and sheds a dispersive wake about ten cells wide at this
  // resolution; the scheme is clean only in the smooth region beyond it.
  double worst = 0.0;
  for (int n = 0; n < 200; ++n)
    for (int i = 0; i < 100; ++i) {
      const double x = sol.space[i], t = sol.time[n];
      if (x - t <= 0.1) continue;
      worst = std::max(worst,
                       std::abs(sol.values(n, i) - std::sin(kPi * (x - t))));
    }
  CHECK(worst <= 1e-3);
  // Inside the wake the pointwise error is visibly worse but still bounded.
  double wake = 0.0;
  for (int n = 0; n < 200; ++n)
    for (int i = 0; i < 100; ++i) {
      const double x = sol.space[i], t = sol.time[n];
      if (x <= t || x - t > 0.1) continue;
      wake = std::max(wake, std::abs(sol.values(n, i) - std::sin(kPi * (x - t))));
    }
  CHECK(wake <= 5e-2);
}

TEST_CASE("transport converges at second order against the exact solution") {
  const auto u = tabulate(2, [](double) { return 1.0; });
  const auto coarse = refsol::solve_advection(u, 100, 200);
  const auto fine = refsol::solve_advection(u, 199, 399);
  // Compare on shared nodes away from the inflow-corner derivative kink.
  double e_coarse = 0.0, e_fine = 0.0;
  int count = 0;
  for (int n = 0; n < 200; ++n)
    for (int i = 0; i < 100; ++i) {
      const double x = coarse.space[i], t = coarse.time[n];
      if (x <= t + 0.1) continue;
      const double exact = std::sin(kPi * (x - t));
      e_coarse += std::pow(coarse.values(n, i) - exact, 2);
      e_fine += std::pow(fine.values(2 * n, 2 * i) - exact, 2);
      ++count;
    }
  REQUIRE(count > 1000);
  const double ratio = std::sqrt(e_coarse / e_fine);
  CHECK(ratio >= 3.0);
  CHECK(ratio <= 5.0);
}

TEST_CASE("transport stability limit reports the step count needed") {
  const auto u = tabulate(2, [](double) { return 3.0; });
  CHECK(refsol::advection_required_nt(u, 100) == 298);
  CHECK_THROWS_WITH_AS(refsol::solve_advection(u, 100, 100),
                       doctest::Contains("298"), ConfigError);
  const auto zero_speed = tabulate(2, [](double) { return 0.0; });
  CHECK_THROWS_AS(refsol::solve_advection(zero_speed, 50, 50), ConfigError);
}

TEST_CASE("transport with a spatially varying speed stays sane") {
  field::GrfSpec spec;
  spec.length_scale = 0.2;
  const auto v = field::sample_grf(spec, linspace(100, 0.0, 1.0), 3);
  const auto u = field::make_positive_advection_coeff(v);
  const int nt = refsol::advection_required_nt(u, 100);
  const auto sol = refsol::solve_advection(u, 100, nt);
  CHECK(sol.values.allFinite());
  CHECK(sol.params.at("cfl") <= 1.0 + 1e-12);
  // Transport does not amplify: values stay within the data bounds (plus
  // the mild over/undershoot second-order schemes admit).
  CHECK(sol.values.cwiseAbs().maxCoeff() <= 1.2);
}

TEST_CASE("burgers: constants are steady states") {
  const auto u0 = tabulate(33, [](double) { return 0.7; });
  const auto sol = refsol::solve_burgers(u0, 0.05, 32, 1e-2, 10);
  REQUIRE(sol.time.size() == 11);
  for (Eigen::Index n = 0; n < sol.time.size(); ++n)
    for (int j = 0; j < 32; ++j)
      CHECK(std::abs(sol.values(n, j) - 0.7) <= 1e-10);
}

TEST_CASE("burgers: resolution-doubled run agrees to tight tolerance") {
  // 129 sensor nodes sit on both solver grids, so each run interpolates the
  // same initial profile exactly; a coarser table would make the two runs
  // solve slightly different problems and hide the real agreement.
  const auto u0 = tabulate(129, [](double x) { return std::sin(2 * kPi * x); });
  const auto coarse = refsol::solve_burgers(u0, 0.1, 64, 1e-3, 100);
  const auto fine = refsol::solve_burgers(u0, 0.1, 128, 5e-4, 200);
  // Snapshot index 1 is t = 0.1 in both runs; fine grid contains the coarse.
  REQUIRE(coarse.time[1] == doctest::Approx(0.1).epsilon(1e-12));
  REQUIRE(fine.time[1] == doctest::Approx(0.1).epsilon(1e-12));
  double worst = 0.0;
  for (int j = 0; j < 64; ++j)
    worst = std::max(worst,
                     std::abs(coarse.values(1, j) - fine.values(1, 2 * j)));
  CHECK(worst <= 1e-6);
}

TEST_CASE("burgers: spatial mean is conserved") {
  const auto fn = field::sample_periodic_grf(
      [] {
        field::GrfSpec s;
        s.kernel_family = field::KernelFamily::kPeriodicSpectral;
        s.output_scale = 25.0;
        s.num_modes = 16;
        return s;
      }(),
      linspace(65, 0.0, 1.0), 12);
  const auto sol = refsol::solve_burgers(fn, 0.01, 128, 1e-3, 100);
  const double mean0 = sol.values.row(0).mean();
  for (Eigen::Index n = 1; n < sol.time.size(); ++n)
    CHECK(std::abs(sol.values.row(n).mean() - mean0) <= 1e-8);
}

TEST_CASE("burgers: retained spectrum stays clean for smooth data") {
  const auto u0 = tabulate(65, [](double x) { return std::sin(2 * kPi * x); });
  const auto sol = refsol::solve_burgers(u0, 0.01, 128, 1e-3, 10);
  const int keep = 42;  // highest surviving mode under the 2/3 rule at n=128
  const Eigen::Index last = sol.time.size() - 1;
  double total = 0.0, top = 0.0;
  for (int j = 1; j <= 64; ++j) {
    double re = 0.0, im = 0.0;
    for (int i = 0; i < 128; ++i) {
      const double arg = 2.0 * kPi * j * sol.space[i];
      re += sol.values(last, i) * std::cos(arg);
      im -= sol.values(last, i) * std::sin(arg);
    }
    const double energy = re * re + im * im;
    total += energy;
    if (j == keep) top = energy;
  }
  CHECK(top <= 1e-6 * total);
}

TEST_CASE("burgers: runaway amplitude is reported as instability") {
  const auto u0 = tabulate(65, [](double x) { return 5.0 * std::sin(2 * kPi * x); });
  CHECK_THROWS_WITH_AS(refsol::solve_burgers(u0, 1e-6, 64, 0.05, 1),
                       doctest::Contains("unstable"), NumericalError);
}

TEST_CASE("burgers parameter validation") {
  const auto u0 = tabulate(33, [](double x) { return std::sin(2 * kPi * x); });
  CHECK_THROWS_AS(refsol::solve_burgers(u0, 0.0, 64, 1e-3, 10), ConfigError);
  CHECK_THROWS_AS(refsol::solve_burgers(u0, 0.01, 63, 1e-3, 10), ConfigError);
  CHECK_THROWS_AS(refsol::solve_burgers(u0, 0.01, 64, 3e-4, 10), ConfigError);
  CHECK_THROWS_AS(refsol::solve_burgers(u0, 0.01, 64, 1e-3, 7), ConfigError);
  auto shifted = u0;
  shifted.sensor_locations.array() += 0.01;
  CHECK_THROWS_AS(refsol::solve_burgers(shifted, 0.01, 64, 1e-3, 10), ConfigError);
}

TEST_CASE("burgers initial data may live on a different grid than the solver") {
  const auto u0 = tabulate(100, [](double x) { return std::cos(2 * kPi * x); });
  const auto sol = refsol::solve_burgers(u0, 0.05, 128, 1e-2, 10);
  CHECK(sol.values.allFinite());
  CHECK(sol.values(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("solution shape and lookup guards") {
  refsol::ReferenceSolution sol;
  sol.space = linspace(4, 0.0, 1.0);
  sol.values = Mat::Zero(2, 4);
  CHECK_THROWS_AS(sol.validate(), ShapeError);  // no time grid for 2 rows
  sol.time = linspace(2, 0.0, 1.0);
  CHECK_NOTHROW(sol.validate());
  sol.values(1, 2) = std::nan("");
  CHECK_THROWS_AS(sol.validate(), NumericalError);
  sol.values(1, 2) = 0.0;
  CHECK_THROWS_AS(sol.at(2, 0), ShapeError);
  CHECK_THROWS_AS(sol.at(0, 4), ShapeError);
  CHECK(sol.at(1, 2) == 0.0);
}

TEST_CASE("solutions round-trip through disk bitwise") {
  namespace fs = std::filesystem;
  const std::string p2d = (fs::temp_directory_path() / "operant_sol2d").string();
  const auto u = tabulate(2, [](double) { return 1.0; });
  const auto sol = refsol::solve_advection(u, 20, 40);
  refsol::save_reference_solution(p2d, sol);
  const auto back = refsol::load_reference_solution(p2d);
  CHECK(back.solver == sol.solver);
  CHECK(back.params.at("cfl") == sol.params.at("cfl"));
  REQUIRE(back.values.rows() == sol.values.rows());
  REQUIRE(back.values.cols() == sol.values.cols());
  for (Eigen::Index n = 0; n < sol.values.rows(); ++n)
    for (Eigen::Index i = 0; i < sol.values.cols(); ++i)
      CHECK(back.values(n, i) == sol.values(n, i));
  for (Eigen::Index n = 0; n < sol.time.size(); ++n)
    CHECK(back.time[n] == sol.time[n]);

  const std::string p1d = (fs::temp_directory_path() / "operant_sol1d").string();
  const auto curve = refsol::integrate_antiderivative(
      tabulate(30, [](double x) { return x * x; }), linspace(7, 0.0, 1.0));
  refsol::save_reference_solution(p1d, curve);
  const auto curve_back = refsol::load_reference_solution(p1d);
  CHECK(curve_back.time.size() == 0);
  for (int i = 0; i < 7; ++i)
    CHECK(curve_back.values(0, i) == curve.values(0, i));

  CHECK_THROWS_AS(refsol::load_reference_solution(p2d + "_nope"), DataError);
}

TEST_SUITE_END();
