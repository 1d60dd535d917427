#include "operant/refsolvers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include "operant/errors.hpp"
#include "operant/io.hpp"

namespace operant::refsol {

namespace {

constexpr double kPi = std::numbers::pi;

// Dormand-Prince 4(5): for a right-hand side that depends only on the
// integration variable the stage combinations collapse, leaving the node
// abscissae and the two quadrature weight rows.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kB5[7] = {35.0 / 384,      0.0,        500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784,  11.0 / 84,  0.0};
constexpr double kB4[7] = {5179.0 / 57600,  0.0,        7571.0 / 16695,
                           393.0 / 640,     -92097.0 / 339200,
                           187.0 / 2100,    1.0 / 40};

}  // namespace

void ReferenceSolution::validate() const {
  const Eigen::Index expected_rows = time.size() == 0 ? 1 : time.size();
  if (values.rows() != expected_rows || values.cols() != space.size())
    throw ShapeError("solution values are " + std::to_string(values.rows()) +
                     "x" + std::to_string(values.cols()) + " but the grid is " +
                     std::to_string(expected_rows) + "x" +
                     std::to_string(space.size()));
  if (!values.allFinite())
    throw NumericalError("solution contains non-finite values");
}

double ReferenceSolution::at(Eigen::Index time_index,
                             Eigen::Index space_index) const {
  const Eigen::Index rows = time.size() == 0 ? 1 : time.size();
  if (time_index < 0 || time_index >= rows || space_index < 0 ||
      space_index >= space.size())
    throw ShapeError("solution lookup (" + std::to_string(time_index) + ", " +
                     std::to_string(space_index) + ") outside the stored grid");
  return values(time_index, space_index);
}

ReferenceSolution integrate_antiderivative(const field::InputFunction& u,
                                           const Vec& query) {
  const Vec& xs = u.sensor_locations;
  const Vec& ys = u.sensor_values;
  if (xs.size() < 2) throw ConfigError("need at least two sensors to integrate");
  for (Eigen::Index i = 1; i < xs.size(); ++i)
    if (xs[i] <= xs[i - 1])
      throw ConfigError("sensor locations must be strictly increasing");
  double max_q = 0.0;
  for (Eigen::Index i = 0; i < query.size(); ++i) {
    if (query[i] < 0.0 || query[i] > 1.0)
      throw ConfigError("query point " + std::to_string(query[i]) +
                        " outside [0,1]");
    max_q = std::max(max_q, query[i]);
  }
  if (max_q > 0.0 && (xs[0] > 0.0 || xs[xs.size() - 1] < max_q))
    throw ConfigError(
        "integration runs from 0, so sensors must cover [0, max query]");

  // Integrate once, visiting the queries in ascending order.
  std::vector<Eigen::Index> order(query.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return query[a] < query[b]; });

  Vec out(query.size());
  double t = 0.0, s = 0.0, h_ctrl = 1e-2;
  Eigen::Index kink = 0;  // first sensor index with xs[kink] > t
  constexpr double kTol = 1e-9;
  const auto rhs = [&](double y) { return field::interp_linear(xs, ys, y); };

  for (Eigen::Index oi : order) {
    const double target = query[oi];
    while (t < target) {
      while (kink < xs.size() && xs[kink] <= t) ++kink;
      // Clip the trial step to the next interpolation kink and the target:
      // between kinks the integrand is linear and the quadrature is exact.
      double h = h_ctrl;
      enum { kFree, kAtKink, kAtTarget } clip = kFree;
      if (kink < xs.size() && t + h >= xs[kink]) {
        h = xs[kink] - t;
        clip = kAtKink;
      }
      if (t + h >= target) {
        h = target - t;
        clip = kAtTarget;
      }
      // A step the controller shrank below resolution is an error; a step
      // that is merely geometrically short (the gap to the next kink or to
      // the target after rounding) is legitimate and integrates a sliver.
      if (clip == kFree && h < 1e-14)
        throw NumericalError("adaptive step underflow near y=" +
                             std::to_string(t));

      double k[7];
      for (int i = 0; i < 7; ++i)
        k[i] = rhs(std::min(t + kC[i] * h, xs[xs.size() - 1]));
      double inc5 = 0.0, err = 0.0;
      for (int i = 0; i < 7; ++i) {
        inc5 += kB5[i] * k[i];
        err += (kB5[i] - kB4[i]) * k[i];
      }
      err = std::abs(h * err);
      if (!std::isfinite(err) || !std::isfinite(inc5))
        throw NumericalError("integrand produced non-finite values near y=" +
                             std::to_string(t));
      if (err <= kTol) {
        s += h * inc5;
        if (clip == kAtTarget)
          t = target;
        else if (clip == kAtKink)
          t = xs[kink];
        else
          t += h;
        const double grown =
            h * std::clamp(0.9 * std::pow(kTol / std::max(err, 1e-300), 0.2),
                           0.2, 5.0);
        // Keep the controller's own proposal when geometry shortened the
        // step, so sliver steps cannot collapse the working step size.
        h_ctrl = clip == kFree ? grown : std::max(h_ctrl, grown);
      } else {
        h_ctrl = h * std::clamp(0.9 * std::pow(kTol / err, 0.2), 0.2, 5.0);
        if (h_ctrl < 1e-14)
          throw NumericalError("adaptive step underflow near y=" +
                               std::to_string(t));
      }
    }
    out[oi] = target == 0.0 ? 0.0 : s;
  }

  ReferenceSolution sol;
  sol.space = query;
  sol.values = out.transpose();
  sol.solver = "rk45-antiderivative";
  sol.params = {{"abs_tol", kTol}};
  sol.validate();
  return sol;
}

double advection_initial(double x) { return std::sin(kPi * x); }
double advection_inflow(double t) { return std::sin(kPi * t / 2.0); }

namespace {

Vec advection_speeds(const field::InputFunction& u, int nx) {
  Vec w(nx);
  for (int i = 0; i < nx; ++i)
    w[i] = field::eval_linear(u, static_cast<double>(i) / (nx - 1));
  return w;
}

}  // namespace

int advection_required_nt(const field::InputFunction& u, int nx) {
  if (nx < 3) throw ConfigError("advection grid needs nx >= 3");
  const double umax = advection_speeds(u, nx).maxCoeff();
  // dt <= dx / umax  <=>  nt - 1 >= umax * (nx - 1).
  return static_cast<int>(std::ceil(umax * (nx - 1) - 1e-9)) + 1;
}

ReferenceSolution solve_advection(const field::InputFunction& u, int nx, int nt) {
  if (nx < 3) throw ConfigError("advection grid needs nx >= 3");
  if (nt < 2) throw ConfigError("advection grid needs nt >= 2");
  const Vec w = advection_speeds(u, nx);
  if (w.minCoeff() <= 0.0)
    throw ConfigError(
        "advection speed must be strictly positive for the inflow boundary");
  const double dx = 1.0 / (nx - 1), dt = 1.0 / (nt - 1);
  const double cfl = w.maxCoeff() * dt / dx;
  if (cfl > 1.0 + 1e-12)
    throw ConfigError("CFL " + std::to_string(cfl) + " exceeds 1 at nx=" +
                      std::to_string(nx) + ", nt=" + std::to_string(nt) +
                      "; need nt >= " +
                      std::to_string(advection_required_nt(u, nx)));

  Mat s(nt, nx);
  Vec x(nx);
  for (int i = 0; i < nx; ++i) {
    x[i] = static_cast<double>(i) / (nx - 1);
    s(0, i) = advection_initial(x[i]);
  }

  Vec cur = s.row(0), next(nx);
  const double r = dt / dx;
  for (int n = 1; n < nt; ++n) {
    const double ghost = 2.0 * cur[nx - 1] - cur[nx - 2];
    for (int i = 1; i < nx; ++i) {
      const double sp = i + 1 < nx ? cur[i + 1] : ghost;
      const double sm = cur[i - 1];
      const double u_right = i + 1 < nx ? 0.5 * (w[i] + w[i + 1]) : w[nx - 1];
      const double u_left = 0.5 * (w[i] + w[i - 1]);
      const double advect = 0.5 * r * w[i] * (sp - sm);
      const double correct = 0.5 * r * r * w[i] *
                             (u_right * (sp - cur[i]) - u_left * (cur[i] - sm));
      next[i] = cur[i] - advect + correct;
    }
    next[0] = advection_inflow(n * dt);
    s.row(n) = next;
    cur.swap(next);
  }

  ReferenceSolution sol;
  sol.space = x;
  sol.time.resize(nt);
  for (int n = 0; n < nt; ++n) sol.time[n] = n * dt;
  sol.values = std::move(s);
  sol.solver = "lax-wendroff";
  sol.params = {{"dx", dx}, {"dt", dt}, {"cfl", cfl},
                {"nx", double(nx)}, {"nt", double(nt)}};
  sol.validate();
  return sol;
}

namespace {

// Periodic extension of the sensor polyline for sampling onto the FFT grid.
double periodic_sample(const field::InputFunction& u0, double x) {
  return field::eval_periodic(u0, x);
}

struct FftPair {
  int n;
  std::vector<double> real;
  std::vector<std::complex<double>> spec;
  fftw_plan fwd, bwd;

  explicit FftPair(int n_)
      : n(n_), real(n_), spec(n_ / 2 + 1),
        fwd(fftw_plan_dft_r2c_1d(n_, real.data(),
                                 reinterpret_cast<fftw_complex*>(spec.data()),
                                 FFTW_ESTIMATE)),
        bwd(fftw_plan_dft_c2r_1d(n_,
                                 reinterpret_cast<fftw_complex*>(spec.data()),
                                 real.data(), FFTW_ESTIMATE)) {}
  ~FftPair() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  FftPair(const FftPair&) = delete;
  FftPair& operator=(const FftPair&) = delete;

  std::vector<std::complex<double>> forward(const std::vector<double>& grid) {
    real = grid;
    fftw_execute(fwd);
    return spec;
  }
  // Normalized inverse; the c2r plan scribbles on its input, so copy first.
  std::vector<double> inverse(const std::vector<std::complex<double>>& v) {
    spec = v;
    fftw_execute(bwd);
    std::vector<double> out(real);
    for (double& r : out) r /= n;
    return out;
  }
};

}  // namespace

ReferenceSolution solve_burgers(const field::InputFunction& u0, double nu,
                                int n_modes, double dt, int snapshot_every) {
  if (!(nu > 0.0)) throw ConfigError("viscosity must be positive");
  if (n_modes < 8 || n_modes % 2 != 0)
    throw ConfigError("mode count must be even and at least 8");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const long long nsteps = std::llround(1.0 / dt);
  if (nsteps < 1 || std::abs(nsteps * dt - 1.0) > 1e-9)
    throw ConfigError("dt must divide the unit time horizon");
  if (snapshot_every < 1 || nsteps % snapshot_every != 0)
    throw ConfigError("snapshot stride must divide the " +
                      std::to_string(nsteps) + " time steps");
  if (u0.sensor_locations.size() < 2 || u0.sensor_locations[0] != 0.0)
    throw ConfigError("initial data must be sampled from x=0 for the periodic grid");

  const int n = n_modes, nc = n / 2 + 1;
  std::vector<double> grid0(n);
  for (int j = 0; j < n; ++j)
    grid0[j] = periodic_sample(u0, static_cast<double>(j) / n);
  double amp0 = 0.0;
  for (double g : grid0) amp0 = std::max(amp0, std::abs(g));
  const double blow_up = amp0 > 0.0 ? 1e3 * amp0
                                    : std::numeric_limits<double>::infinity();

  FftPair fft(n);
  std::vector<std::complex<double>> v = fft.forward(grid0);

  // Wavenumbers, dealiasing mask, and the ETDRK4 phi-coefficients via
  // contour averaging (32 points on the unit circle around each dt*L).
  const int keep = n / 3;
  std::vector<double> e1(nc), e2(nc), q(nc), f1(nc), f2(nc), f3(nc);
  std::vector<std::complex<double>> gmul(nc);
  constexpr int kM = 32;
  for (int j = 0; j < nc; ++j) {
    const double kj = 2.0 * kPi * j;
    const double z = -nu * kj * kj * dt;
    e1[j] = std::exp(z);
    e2[j] = std::exp(0.5 * z);
    gmul[j] = j <= keep ? std::complex<double>(0.0, -0.5 * kj)
                        : std::complex<double>(0.0, 0.0);
    std::complex<double> sq{}, s1{}, s2{}, s3{};
    for (int m = 1; m <= kM; ++m) {
      const std::complex<double> zr =
          z + std::exp(std::complex<double>(0.0, kPi * (m - 0.5) / kM));
      const std::complex<double> ez = std::exp(zr);
      sq += (std::exp(0.5 * zr) - 1.0) / zr;
      const std::complex<double> zr3 = zr * zr * zr;
      s1 += (-4.0 - zr + ez * (4.0 - 3.0 * zr + zr * zr)) / zr3;
      s2 += (2.0 + zr + ez * (-2.0 + zr)) / zr3;
      s3 += (-4.0 - 3.0 * zr - zr * zr + ez * (4.0 - zr)) / zr3;
    }
    q[j] = dt * sq.real() / kM;
    f1[j] = dt * s1.real() / kM;
    f2[j] = dt * s2.real() / kM;
    f3[j] = dt * s3.real() / kM;
  }

  const auto nonlinear = [&](const std::vector<std::complex<double>>& vh,
                             bool check) {
    std::vector<double> w = fft.inverse(vh);
    if (check) {
      for (double val : w)
        if (!(std::abs(val) <= blow_up))
          throw NumericalError(
              "solution magnitude exceeded 1000x the initial amplitude; the "
              "time step is unstable for this viscosity");
    }
    for (double& val : w) val *= val;
    std::vector<std::complex<double>> out = fft.forward(w);
    for (int j = 0; j < nc; ++j) out[j] *= gmul[j];
    return out;
  };

  const int nsnap = static_cast<int>(nsteps / snapshot_every) + 1;
  Mat snaps(nsnap, n);
  for (int j = 0; j < n; ++j) snaps(0, j) = grid0[j];

  std::vector<std::complex<double>> a(nc), b(nc), c(nc);
  for (long long step = 1; step <= nsteps; ++step) {
    const auto nv = nonlinear(v, true);
    for (int j = 0; j < nc; ++j) a[j] = e2[j] * v[j] + q[j] * nv[j];
    const auto na = nonlinear(a, false);
    for (int j = 0; j < nc; ++j) b[j] = e2[j] * v[j] + q[j] * na[j];
    const auto nb = nonlinear(b, false);
    for (int j = 0; j < nc; ++j)
      c[j] = e2[j] * a[j] + q[j] * (2.0 * nb[j] - nv[j]);
    const auto ncv = nonlinear(c, false);
    for (int j = 0; j < nc; ++j)
      v[j] = e1[j] * v[j] + f1[j] * nv[j] + 2.0 * f2[j] * (na[j] + nb[j]) +
             f3[j] * ncv[j];
    if (step % snapshot_every == 0) {
      const std::vector<double> w = fft.inverse(v);
      const int row = static_cast<int>(step / snapshot_every);
      for (int j = 0; j < n; ++j) snaps(row, j) = w[j];
    }
  }

  ReferenceSolution sol;
  sol.space.resize(n);
  for (int j = 0; j < n; ++j) sol.space[j] = static_cast<double>(j) / n;
  sol.time.resize(nsnap);
  for (int i = 0; i < nsnap; ++i) sol.time[i] = i * snapshot_every * dt;
  sol.values = std::move(snaps);
  sol.solver = "etdrk4-spectral";
  sol.params = {{"nu", nu}, {"dt", dt}, {"n_modes", double(n)},
                {"snapshot_every", double(snapshot_every)},
                {"dealias_keep", double(keep)}};
  sol.validate();
  return sol;
}

void save_reference_solution(const std::string& path_prefix,
                             const ReferenceSolution& sol) {
  sol.validate();
  if (sol.time.size() == 0) {
    io::CsvWriter csv(path_prefix + ".csv", {"location", "value"}, {});
    for (Eigen::Index i = 0; i < sol.space.size(); ++i)
      csv.row_numeric({sol.space[i], sol.values(0, i)});
    csv.flush();
  } else {
    io::CsvWriter csv(path_prefix + ".csv", {"t", "x", "value"}, {});
    for (Eigen::Index ti = 0; ti < sol.time.size(); ++ti)
      for (Eigen::Index xi = 0; xi < sol.space.size(); ++xi)
        csv.row_numeric({sol.time[ti], sol.space[xi], sol.values(ti, xi)});
    csv.flush();
  }

  nlohmann::json j;
  j["solver"] = sol.solver;
  j["params"] = sol.params;
  j["space"] = std::vector<double>(sol.space.data(),
                                   sol.space.data() + sol.space.size());
  j["time"] = std::vector<double>(sol.time.data(),
                                  sol.time.data() + sol.time.size());
  io::write_text_file(path_prefix + ".json", j.dump(1) + "\n");
}

ReferenceSolution load_reference_solution(const std::string& path_prefix) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(path_prefix + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("solution sidecar parse failure at " + path_prefix +
                    ".json: " + e.what());
  }
  ReferenceSolution sol;
  try {
    sol.solver = j.at("solver");
    for (const auto& [key, val] : j.at("params").items())
      sol.params[key] = val.get<double>();
    const std::vector<double> sp = j.at("space");
    const std::vector<double> tm = j.at("time");
    sol.space = Eigen::Map<const Vec>(sp.data(), sp.size());
    sol.time = Eigen::Map<const Vec>(tm.data(), tm.size());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("solution sidecar missing field at " + path_prefix +
                    ".json: " + e.what());
  }

  const io::CsvTable table = io::read_csv(path_prefix + ".csv");
  const Eigen::Index rows = sol.time.size() == 0 ? 1 : sol.time.size();
  if (static_cast<Eigen::Index>(table.rows.size()) != rows * sol.space.size())
    throw DataError("solution file " + path_prefix + ".csv holds " +
                    std::to_string(table.rows.size()) + " rows; the sidecar grid" +
                    " implies " + std::to_string(rows * sol.space.size()));
  sol.values.resize(rows, sol.space.size());
  const int vcol = table.column_index("value");
  if (vcol < 0)
    throw DataError("solution file " + path_prefix + ".csv lacks a value column");
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < sol.space.size(); ++c)
      sol.values(r, c) =
          table.number(static_cast<std::size_t>(r * sol.space.size() + c), vcol);
  sol.validate();
  return sol;
}

}  // namespace operant::refsol
