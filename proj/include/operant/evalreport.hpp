#pragma once

#include <map>
#include <vector>

#include "operant/dataset.hpp"
#include "operant/deeponet.hpp"

// Test-error reporting: relative L2 errors of an operator network against the
// dataset's stored reference solutions, plus the residual-weight map used to
// visualise where adaptive weighting concentrates.
namespace operant::report {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ||pred - truth||_2 / ||truth||_2.  NumericalError when the truth vector has
// zero norm (the metric is undefined) or either vector is non-finite;
// ShapeError on length mismatch.
double relative_l2(const Vec& pred, const Vec& truth);

// Value-only forward pass over many evaluation points: y holds one point per
// column, the result holds one prediction per column.  Internally chunked so
// arbitrarily fine grids evaluate in bounded memory, with a fixed chunk width
// so results do not depend on grid size partitioning.
Vec forward_grid(const net::DeepOnetParams& p, const Vec& u, const Mat& y);

struct SampleError {
  long sample_id = 0;   // position in the test list
  double scale = 1.0;   // amplitude group (antiderivative; 1 otherwise)
  double rel_l2 = 0.0;
};

struct ScaleStats {
  double mean = 0.0;
  double stddev = 0.0;  // population convention, matching the top level
  int count = 0;
};

struct EvalReport {
  std::vector<SampleError> per_sample;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over samples
  // Amplitude-group breakdown; single entry {1.0, ...} for the PDE benchmarks.
  std::map<double, ScaleStats> per_scale;
  double wall_seconds = 0.0;
};

// Predicts every test sample on its stored reference grid and scores it with
// relative_l2 over the flattened grid values.  DataError when the test list is
// empty or a sample lacks its reference.
EvalReport evaluate(const net::DeepOnetParams& model,
                    const data::OperatorDataset& ds);

// Residual-weight map lambda(x, t) = (H_max / H(x, t))^alpha where H(x, t) is
// the squared parameter-gradient norm of the interior residual at that point
// and H_max the maximum over the grid.  Entries below the kernel floor are
// clamped before the power, mirroring the training-time weight rule.  Rows
// index x_grid, columns index t_grid; the maximising entry is exactly 1 and
// alpha = 0 gives the all-ones map.  ConfigError for a benchmark without an
// interior residual or alpha outside [0, 1].
Mat residual_weight_map(const net::DeepOnetParams& model,
                        const field::InputFunction& u, const Vec& x_grid,
                        const Vec& t_grid, double alpha,
                        data::Benchmark benchmark, double viscosity = 1e-2);

}  // namespace operant::report
