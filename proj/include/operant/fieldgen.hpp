#pragma once
// Random input functions on [0,1]: Gaussian random fields discretized at
// sensor locations.  Two families: a squared-exponential kernel sampled by
// Cholesky factorization, and a periodic field built from a truncated
// Karhunen-Loeve expansion in the trigonometric eigenbasis.  Sampling is a
// pure function of (spec, sensors, seed).

#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace operant::field {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class KernelFamily { kSquaredExponential, kPeriodicSpectral };

std::string kernel_family_name(KernelFamily f);
KernelFamily kernel_family_from_name(const std::string& name);

struct GrfSpec {
  KernelFamily kernel_family = KernelFamily::kSquaredExponential;
  double length_scale = 0.2;  // domain units
  double output_scale = 1.0;  // marginal standard deviation multiplier
  // Periodic-spectral family only: mode j carries variance
  //   output_scale^2 * ((2*pi*j)^2 + spectral_shift)^(-spectral_exponent),
  // truncated at num_modes cosine/sine pairs plus the DC mode.
  double spectral_exponent = 4.0;
  double spectral_shift = 25.0;
  int num_modes = 32;

  void validate() const;  // ConfigError on violation
};

struct InputFunction {
  Vec sensor_locations;  // strictly increasing, inside [0,1]
  Vec sensor_values;
  std::uint64_t seed = 0;
};

// Unit-variance squared-exponential covariance exp(-(x-x')^2 / (2 l^2)),
// assembled exactly symmetric.
Mat rbf_covariance(const Vec& sensors, double length_scale);

// Lower-triangular factor of C + jitter*I.  Jitter starts at 1e-10 *
// unit_variance and escalates tenfold up to 1e-4 * unit_variance; past that
// the matrix is declared not positive semi-definite (NumericalError).
Mat cholesky_with_jitter(const Mat& covariance, double unit_variance);

InputFunction sample_grf(const GrfSpec& spec, const Vec& sensors,
                         std::uint64_t seed);
InputFunction sample_periodic_grf(const GrfSpec& spec, const Vec& sensors,
                                  std::uint64_t seed);
// Dispatch on spec.kernel_family.
InputFunction sample_field(const GrfSpec& spec, const Vec& sensors,
                           std::uint64_t seed);

// Random amplitude k = 10^a with a uniform on [-2, 2].
double output_scale_from_exponent(double a);
double draw_output_scale(std::uint64_t seed);

// u(x) = v(x) - min v + 1: strictly positive, minimum exactly 1.
InputFunction make_positive_advection_coeff(const InputFunction& v);

// Piecewise-linear interpolation between sensors; exact at the nodes.
// Evaluating outside the sensor hull is an error (DataError), never an
// extrapolation.
double interp_linear(const Vec& xs, const Vec& ys, double x);
double eval_linear(const InputFunction& fn, double x);

// Unit-periodic variant for functions sampled on [0, 1): past the last
// sensor the polyline wraps to the first sensor shifted by one period.
// Requires sensors starting at x = 0 and x in [0, 1].
double eval_periodic(const InputFunction& fn, double x);

// Disk layout: <prefix>.csv holds one row per sensor (location, value);
// <prefix>.json records the generating spec and seed so the file is
// self-describing and the kernel family stays swappable.
void save_input_function(const std::string& path_prefix,
                         const InputFunction& fn, const GrfSpec& spec);
std::pair<InputFunction, GrfSpec> load_input_function(
    const std::string& path_prefix);

}  // namespace operant::field
