#pragma once
// Ground-truth generators for the three benchmarks: adaptive Runge-Kutta
// quadrature for antiderivatives, a variable-coefficient Lax-Wendroff scheme
// for linear transport with inflow forcing, and a Fourier pseudo-spectral
// ETDRK4 integrator for viscous Burgers flow on the periodic unit interval.

#include <map>
#include <string>

#include <Eigen/Dense>

#include "operant/fieldgen.hpp"

namespace operant::refsol {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ReferenceSolution {
  Vec space;           // spatial grid (or query locations for curves)
  Vec time;            // empty for curve solutions
  Mat values;          // time.size() x space.size(); 1 x space.size() if no time
  std::string solver;  // scheme tag
  std::map<std::string, double> params;  // dt, CFL, mode counts, ...

  // ShapeError on grid/value mismatch, NumericalError on non-finite values.
  void validate() const;
  // Value at the nearest stored grid node (validated lookups for evaluation).
  double at(Eigen::Index time_index, Eigen::Index space_index) const;
};

// s(y) = integral of u from 0 to y, s(0) = 0, Dormand-Prince 4(5) with
// adaptive steps clipped to sensor boundaries (piecewise-linear u integrates
// exactly between its nodes).  Absolute step tolerance 1e-9.  Query points
// must lie in [0,1] and inside the sensor hull; results keep query order.
ReferenceSolution integrate_antiderivative(const field::InputFunction& u,
                                           const Vec& query);

// Fixed problem data for the transport benchmark.
double advection_initial(double x);  // sin(pi x)
double advection_inflow(double t);   // sin(pi t / 2)
// Smallest nt with max(u) * dt / dx <= 1 on an nx-point unit grid.
int advection_required_nt(const field::InputFunction& u, int nx);

// ds/dt + u(x) ds/dx = 0 on the unit square with s(x,0) = sin(pi x) and
// s(0,t) = sin(pi t/2).  Second-order Lax-Wendroff with face-averaged
// speeds; the outflow edge uses a linearly extrapolated ghost value.
// Speeds must be strictly positive; a CFL violation reports the nt needed.
ReferenceSolution solve_advection(const field::InputFunction& u, int nx, int nt);

// ds/dt + s ds/dx = nu d2s/dx2, periodic on [0,1), integrated to t=1.
// Fourier collocation with 2/3-rule dealiasing; ETDRK4 coefficients by
// contour averaging.  Snapshots every snapshot_every steps (t=0 included).
// Blow-up past 1000x the initial amplitude aborts with NumericalError.
ReferenceSolution solve_burgers(const field::InputFunction& u0, double nu,
                                int n_modes, double dt, int snapshot_every);

// Disk layout mirrors the input-function files: <prefix>.csv rows are
// (location, value) for curves or (t, x, value) time-major for fields;
// <prefix>.json carries the solver tag, parameters, and both grids.
void save_reference_solution(const std::string& path_prefix,
                             const ReferenceSolution& sol);
ReferenceSolution load_reference_solution(const std::string& path_prefix);

}  // namespace operant::refsol
