#include "operant/fieldgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "operant/errors.hpp"
#include "operant/io.hpp"
#include "operant/rng.hpp"

namespace operant::field {

namespace {

void check_sensors(const Vec& sensors, Eigen::Index min_count) {
  if (sensors.size() < min_count)
    throw ConfigError("need at least " + std::to_string(min_count) +
                      " sensor locations, got " + std::to_string(sensors.size()));
  for (Eigen::Index i = 0; i < sensors.size(); ++i) {
    if (sensors[i] < 0.0 || sensors[i] > 1.0)
      throw ConfigError("sensor location " + std::to_string(sensors[i]) +
                        " outside [0,1]");
    if (i > 0 && sensors[i] <= sensors[i - 1])
      throw ConfigError("sensor locations must be strictly increasing");
  }
}

}  // namespace

std::string kernel_family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::kSquaredExponential: return "squared-exponential";
    case KernelFamily::kPeriodicSpectral: return "periodic-spectral";
  }
  throw ConfigError("unhandled kernel family");
}

KernelFamily kernel_family_from_name(const std::string& name) {
  if (name == "squared-exponential") return KernelFamily::kSquaredExponential;
  if (name == "periodic-spectral") return KernelFamily::kPeriodicSpectral;
  throw ConfigError("unknown kernel family '" + name +
                    "' (expected squared-exponential or periodic-spectral)");
}

void GrfSpec::validate() const {
  if (!(length_scale > 0.0))
    throw ConfigError("length_scale must be positive");
  if (!(output_scale >= 0.0))
    throw ConfigError("output_scale must be non-negative");
  if (kernel_family == KernelFamily::kPeriodicSpectral) {
    if (!(spectral_exponent > 0.0))
      throw ConfigError("spectral_exponent must be positive");
    if (!(spectral_shift > 0.0))
      throw ConfigError("spectral_shift must be positive");
    if (num_modes < 0) throw ConfigError("num_modes must be non-negative");
  }
}

Mat rbf_covariance(const Vec& sensors, double length_scale) {
  const Eigen::Index m = sensors.size();
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  Mat c(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    c(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double d = sensors[i] - sensors[j];
      const double v = std::exp(-d * d * inv);
      c(i, j) = v;
      c(j, i) = v;  // mirrored, so symmetry is exact
    }
  }
  return c;
}

Mat cholesky_with_jitter(const Mat& covariance, double unit_variance) {
  if (covariance.rows() != covariance.cols())
    throw ShapeError("covariance must be square");
  const double max_jitter = 1e-4 * unit_variance;
  for (double jitter = 1e-10 * unit_variance; jitter <= max_jitter * 1.0000001;
       jitter *= 10.0) {
    Mat c = covariance;
    c.diagonal().array() += jitter;
    Eigen::LLT<Mat> llt(c);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericalError(
      "covariance matrix is not positive semi-definite even after jitter "
      "escalation to 1e-4 of the unit variance");
}

InputFunction sample_grf(const GrfSpec& spec, const Vec& sensors,
                         std::uint64_t seed) {
  spec.validate();
  if (spec.kernel_family != KernelFamily::kSquaredExponential)
    throw ConfigError("sample_grf requires the squared-exponential family");
  check_sensors(sensors, 2);

  // Factor the amplitude out of the kernel (k^2 * base): sample at unit
  // variance and scale, so output_scale enters each value exactly once.
  const Mat l = cholesky_with_jitter(rbf_covariance(sensors, spec.length_scale),
                                     /*unit_variance=*/1.0);
  rng::Stream st = rng::Stream(seed, rng::purpose::field_values);
  Vec z(sensors.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = st.normal();

  InputFunction fn;
  fn.sensor_locations = sensors;
  fn.sensor_values = spec.output_scale * (l * z).eval();
  fn.seed = seed;
  return fn;
}

InputFunction sample_periodic_grf(const GrfSpec& spec, const Vec& sensors,
                                  std::uint64_t seed) {
  spec.validate();
  if (spec.kernel_family != KernelFamily::kPeriodicSpectral)
    throw ConfigError("sample_periodic_grf requires the periodic-spectral family");
  check_sensors(sensors, 2);
  const Eigen::Index m = sensors.size();
  if (2 * static_cast<Eigen::Index>(spec.num_modes) > m)
    throw ConfigError("num_modes=" + std::to_string(spec.num_modes) +
                      " exceeds the Nyquist limit for m=" + std::to_string(m) +
                      " sensors (need num_modes <= m/2)");

  rng::Stream st = rng::Stream(seed, rng::purpose::field_values);
  const double two_pi = 2.0 * std::numbers::pi;
  // Unit-amplitude standard deviations of the KL coefficients.
  const auto base_sd = [&](int j) {
    const double w = two_pi * j;
    return std::pow(w * w + spec.spectral_shift, -0.5 * spec.spectral_exponent);
  };
  const double dc = base_sd(0) * st.normal();
  Vec cos_c(spec.num_modes), sin_c(spec.num_modes);
  for (int j = 1; j <= spec.num_modes; ++j) {
    const double sd = base_sd(j);
    cos_c[j - 1] = sd * st.normal();
    sin_c[j - 1] = sd * st.normal();
  }

  const double sqrt2 = std::numbers::sqrt2;
  Vec base(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double acc = dc;
    for (int j = 1; j <= spec.num_modes; ++j) {
      const double arg = two_pi * j * sensors[i];
      acc += sqrt2 * (cos_c[j - 1] * std::cos(arg) + sin_c[j - 1] * std::sin(arg));
    }
    base[i] = acc;
  }

  InputFunction fn;
  fn.sensor_locations = sensors;
  fn.sensor_values = spec.output_scale * base;
  fn.seed = seed;
  return fn;
}

InputFunction sample_field(const GrfSpec& spec, const Vec& sensors,
                           std::uint64_t seed) {
  return spec.kernel_family == KernelFamily::kSquaredExponential
             ? sample_grf(spec, sensors, seed)
             : sample_periodic_grf(spec, sensors, seed);
}

double output_scale_from_exponent(double a) { return std::pow(10.0, a); }

double draw_output_scale(std::uint64_t seed) {
  rng::Stream st = rng::Stream(seed, rng::purpose::output_scale);
  return output_scale_from_exponent(st.uniform(-2.0, 2.0));
}

InputFunction make_positive_advection_coeff(const InputFunction& v) {
  if (v.sensor_values.size() == 0)
    throw ConfigError("cannot shift an empty input function");
  InputFunction u = v;
  const double lo = v.sensor_values.minCoeff();
  u.sensor_values = v.sensor_values.array() - lo + 1.0;
  return u;
}

double interp_linear(const Vec& xs, const Vec& ys, double x) {
  if (xs.size() != ys.size())
    throw ShapeError("interpolation nodes and values differ in length");
  if (xs.size() == 0) throw ShapeError("cannot interpolate an empty function");
  if (x < xs[0] || x > xs[xs.size() - 1])
    throw DataError("interpolation point " + std::to_string(x) +
                    " outside the sensor hull [" + std::to_string(xs[0]) + ", " +
                    std::to_string(xs[xs.size() - 1]) + "]");
  // Exact at the nodes (including both hull ends).
  const double* begin = xs.data();
  const double* end = begin + xs.size();
  const auto it = std::upper_bound(begin, end, x);
  if (it == end) return ys[ys.size() - 1];
  const Eigen::Index hi = it - begin;
  if (hi == 0) return ys[0];
  if (xs[hi - 1] == x) return ys[hi - 1];
  const double w = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
  return ys[hi - 1] + w * (ys[hi] - ys[hi - 1]);
}

double eval_linear(const InputFunction& fn, double x) {
  return interp_linear(fn.sensor_locations, fn.sensor_values, x);
}

double eval_periodic(const InputFunction& fn, double x) {
  const Vec& xs = fn.sensor_locations;
  const Vec& ys = fn.sensor_values;
  if (xs.size() == 0) throw ShapeError("cannot interpolate an empty function");
  if (xs[0] != 0.0)
    throw ConfigError("periodic evaluation requires sensors starting at x=0");
  if (x < 0.0 || x > 1.0)
    throw DataError("periodic evaluation point " + std::to_string(x) +
                    " outside [0, 1]");
  if (x <= xs[xs.size() - 1]) return interp_linear(xs, ys, x);
  // Between the last sensor and the first one wrapped past 1.
  const double span = xs[0] + 1.0 - xs[xs.size() - 1];
  const double w = (x - xs[xs.size() - 1]) / span;
  return ys[ys.size() - 1] + w * (ys[0] - ys[ys.size() - 1]);
}

void save_input_function(const std::string& path_prefix,
                         const InputFunction& fn, const GrfSpec& spec) {
  io::CsvWriter csv(path_prefix + ".csv", {"location", "value"}, {});
  for (Eigen::Index i = 0; i < fn.sensor_locations.size(); ++i)
    csv.row_numeric({fn.sensor_locations[i], fn.sensor_values[i]});
  csv.flush();

  nlohmann::json j;
  j["kernel_family"] = kernel_family_name(spec.kernel_family);
  j["length_scale"] = spec.length_scale;
  j["output_scale"] = spec.output_scale;
  if (spec.kernel_family == KernelFamily::kPeriodicSpectral) {
    j["spectral_exponent"] = spec.spectral_exponent;
    j["spectral_shift"] = spec.spectral_shift;
    j["num_modes"] = spec.num_modes;
  }
  j["seed"] = fn.seed;
  io::write_text_file(path_prefix + ".json", j.dump(1) + "\n");
}

std::pair<InputFunction, GrfSpec> load_input_function(
    const std::string& path_prefix) {
  const io::CsvTable table = io::read_csv(path_prefix + ".csv");
  const int loc = table.column_index("location");
  const int val = table.column_index("value");
  if (loc < 0 || val < 0)
    throw DataError("field file " + path_prefix +
                    ".csv lacks location/value columns");
  InputFunction fn;
  const std::size_t m = table.rows.size();
  fn.sensor_locations.resize(static_cast<Eigen::Index>(m));
  fn.sensor_values.resize(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    fn.sensor_locations[static_cast<Eigen::Index>(i)] = table.number(i, loc);
    fn.sensor_values[static_cast<Eigen::Index>(i)] = table.number(i, val);
  }

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(path_prefix + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("sidecar parse failure at " + path_prefix + ".json: " +
                    e.what());
  }
  GrfSpec spec;
  try {
    spec.kernel_family = kernel_family_from_name(j.at("kernel_family"));
    spec.length_scale = j.at("length_scale");
    spec.output_scale = j.at("output_scale");
    if (spec.kernel_family == KernelFamily::kPeriodicSpectral) {
      spec.spectral_exponent = j.at("spectral_exponent");
      spec.spectral_shift = j.at("spectral_shift");
      spec.num_modes = j.at("num_modes");
    }
    fn.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("sidecar missing field at " + path_prefix + ".json: " +
                    e.what());
  }
  spec.validate();
  return {std::move(fn), spec};
}

}  // namespace operant::field
