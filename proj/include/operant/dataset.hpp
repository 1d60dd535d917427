#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "operant/fieldgen.hpp"
#include "operant/refsolvers.hpp"

namespace operant::data {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Benchmark { kAntiderivative, kAdvection, kBurgers };

std::string benchmark_name(Benchmark b);
Benchmark benchmark_from_name(const std::string& name);

// Problem sizes of one benchmark instance.  N train samples, each carrying m
// sensor readings, P targeted/boundary points per role and Q interior
// residual points (Q unused for the purely supervised antiderivative task).
struct BenchmarkSpec {
  Benchmark tag = Benchmark::kAntiderivative;
  double viscosity = 1e-2;  // burgers only
  int n_train = 0;
  int m_sensors = 0;
  int p_points = 0;
  int q_points = 0;

  void validate() const;
  // Scalar loss terms contributed by one sample: P (antiderivative,
  // supervised), 2P + Q (advection: initial + inflow + residual), or
  // 3P + Q (burgers: initial + periodic value/derivative pairs + residual).
  [[nodiscard]] int terms_per_sample() const;
  [[nodiscard]] long n_terms() const;
  // Trunk input dimension: 1 (curve query) or 2 (space-time point).
  [[nodiscard]] int point_dim() const;
};

// One training sample.  Point blocks are stored by role; the constraint
// assembler expands them into typed loss terms:
//   query: targeted points — antiderivative query locations y (targets s(y)),
//     or initial-condition locations x (targets f(x) resp. u0(x));
//   boundary: advection inflow times t (targets g(t)), or burgers boundary
//     times t (untargeted periodic value/derivative pairs);
//   collocation: interior residual points (x, t).
struct OperatorSample {
  field::InputFunction u;
  double scale = 1.0;  // amplitude factor applied to the base field
  Vec query;
  Vec target;
  Vec boundary;
  Vec boundary_target;  // advection only
  Mat collocation;      // Q x 2
};

struct TestSample {
  field::InputFunction u;
  double scale = 1.0;
  refsol::ReferenceSolution reference;
};

struct OperatorDataset {
  BenchmarkSpec spec;
  field::GrfSpec grf;
  std::uint64_t seed = 0;
  int n_test = 0;  // per amplitude group for the antiderivative benchmark
  std::vector<OperatorSample> train;
  std::vector<TestSample> test;

  void validate() const;
};

// The five amplitude groups of the scale-bias study.
const std::vector<double>& antiderivative_test_scales();

// Deterministic dataset synthesis: every sample's randomness flows from a
// per-sample stream split off the root seed, so any sample is reproducible
// in isolation.  Targets come from the reference solvers (antiderivative)
// or the benchmark's closed-form initial/boundary data.  Test samples carry
// reference solutions on dense grids.
OperatorDataset generate_dataset(const BenchmarkSpec& spec,
                                 const field::GrfSpec& grf, int n_test,
                                 std::uint64_t seed);

// Directory layout: manifest.json (sizes, generator settings, seeds, the
// launching config) plus long-format CSVs for sensors, point blocks and
// test references.  Loading validates counts against the manifest.
void save_dataset(const std::filesystem::path& dir, const OperatorDataset& ds,
                  const std::string& config_json = "");
OperatorDataset load_dataset(const std::filesystem::path& dir);

}  // namespace operant::data
