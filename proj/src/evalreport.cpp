#include "operant/evalreport.hpp"

#include <chrono>
#include <cmath>

#include "operant/constraints.hpp"
#include "operant/errors.hpp"
#include "operant/tape.hpp"
#include "operant/threading.hpp"

namespace operant::report {

namespace {

constexpr Eigen::Index kChunk = 2048;

// Flattens a reference solution into aligned (point, value) columns.  Curve
// solutions use 1-D query points; space-time solutions use (x, t) pairs in
// time-major order matching values(t, s).
void grid_columns(const refsol::ReferenceSolution& ref, Mat* points,
                  Vec* truth) {
  const Eigen::Index s = ref.space.size();
  if (ref.time.size() == 0) {
    *points = ref.space.transpose();
    *truth = ref.values.row(0).transpose();
    return;
  }
  const Eigen::Index t = ref.time.size();
  points->resize(2, s * t);
  truth->resize(s * t);
  for (Eigen::Index it = 0; it < t; ++it) {
    for (Eigen::Index is = 0; is < s; ++is) {
      const Eigen::Index col = it * s + is;
      (*points)(0, col) = ref.space[is];
      (*points)(1, col) = ref.time[it];
      (*truth)[col] = ref.values(it, is);
    }
  }
}

double population_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (const double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace

double relative_l2(const Vec& pred, const Vec& truth) {
  if (pred.size() != truth.size())
    throw ShapeError("relative L2 needs equal lengths, got " +
                     std::to_string(pred.size()) + " and " +
                     std::to_string(truth.size()));
  if (truth.size() == 0) throw ShapeError("relative L2 of empty vectors");
  if (!pred.allFinite() || !truth.allFinite())
    throw NumericalError("relative L2 over non-finite values");
  const double denom = truth.norm();
  if (denom == 0.0)
    throw NumericalError(
        "relative L2 is undefined against an all-zero reference");
  return (pred - truth).norm() / denom;
}

Vec forward_grid(const net::DeepOnetParams& p, const Vec& u, const Mat& y) {
  p.validate();
  if (u.size() != p.branch.input_size())
    throw ShapeError("operator input carries " + std::to_string(u.size()) +
                     " sensor readings, the branch expects " +
                     std::to_string(p.branch.input_size()));
  if (y.rows() != p.trunk.input_size())
    throw ShapeError("evaluation points are " + std::to_string(y.rows()) +
                     "-dimensional, the trunk expects " +
                     std::to_string(p.trunk.input_size()));
  Vec out(y.cols());
  for (Eigen::Index start = 0; start < y.cols(); start += kChunk) {
    const Eigen::Index b = std::min(kChunk, y.cols() - start);
    ad::Tape tape(b);
    const auto bound = net::bind(tape, p);
    const ad::Jet uj =
        ad::jet_constant(tape, u.replicate(1, b), 0);
    const ad::Jet yj =
        ad::jet_constant(tape, y.middleCols(start, b), 0);
    auto outs = net::deeponet_graph(tape, bound, uj, yj);
    if (outs.size() != 1)
      throw ConfigError("grid evaluation requires a single-output network");
    out.segment(start, b) = tape.value(outs[0].v).row(0).transpose();
  }
  return out;
}

EvalReport evaluate(const net::DeepOnetParams& model,
                    const data::OperatorDataset& ds) {
  const auto start = std::chrono::steady_clock::now();
  if (ds.test.empty())
    throw DataError("evaluation needs test samples with references");
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    if (ds.test[i].reference.space.size() == 0 ||
        ds.test[i].reference.values.size() == 0)
      throw DataError("test sample " + std::to_string(i) +
                      " lacks a reference solution");
  }

  EvalReport rep;
  rep.per_sample.resize(ds.test.size());
  const auto n = static_cast<std::int64_t>(ds.test.size());
  threading::parallel_for_chunked(
      n, 1, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
          const auto& te = ds.test[static_cast<std::size_t>(i)];
          Mat points;
          Vec truth;
          grid_columns(te.reference, &points, &truth);
          const Vec pred =
              forward_grid(model, te.u.sensor_values, points);
          rep.per_sample[static_cast<std::size_t>(i)] = {
              static_cast<long>(i), te.scale, relative_l2(pred, truth)};
        }
      });

  std::vector<double> all;
  std::map<double, std::vector<double>> by_scale;
  for (const auto& s : rep.per_sample) {
    all.push_back(s.rel_l2);
    by_scale[s.scale].push_back(s.rel_l2);
  }
  rep.mean = 0.0;
  for (const double e : all) rep.mean += e;
  rep.mean /= static_cast<double>(all.size());
  rep.stddev = population_std(all, rep.mean);
  for (const auto& [scale, errs] : by_scale) {
    ScaleStats st;
    st.count = static_cast<int>(errs.size());
    for (const double e : errs) st.mean += e;
    st.mean /= static_cast<double>(errs.size());
    st.stddev = population_std(errs, st.mean);
    rep.per_scale[scale] = st;
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return rep;
}

Mat residual_weight_map(const net::DeepOnetParams& model,
                        const field::InputFunction& u, const Vec& x_grid,
                        const Vec& t_grid, double alpha,
                        data::Benchmark benchmark, double viscosity) {
  if (benchmark == data::Benchmark::kAntiderivative)
    throw ConfigError(
        "the supervised curve benchmark has no interior residual to map");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("weight exponent must lie in [0, 1], got " +
                      std::to_string(alpha));
  if (x_grid.size() == 0 || t_grid.size() == 0)
    throw ConfigError("weight map needs a non-empty grid");

  // A one-sample carrier dataset so the residual machinery sees the right
  // benchmark tag, viscosity, and input function.
  data::OperatorDataset carrier;
  carrier.spec.tag = benchmark;
  carrier.spec.viscosity = viscosity;
  carrier.spec.n_train = 1;
  carrier.spec.m_sensors = static_cast<int>(u.sensor_values.size());
  carrier.train.resize(1);
  carrier.train[0].u = u;

  const Eigen::Index nx = x_grid.size(), nt = t_grid.size();
  Mat h(nx, nt);
  threading::parallel_for_chunked(
      nx * nt, nt, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
        for (std::int64_t k = begin; k < end; ++k) {
          const Eigen::Index ix = k / nt, it = k % nt;
          constraint::ConstraintTerm term;
          term.kind = constraint::TermKind::kPdeResidual;
          term.sample_index = 0;
          term.point = (Vec(2) << x_grid[ix], t_grid[it]).finished();
          h(ix, it) =
              constraint::term_gradient(model, term, carrier).squaredNorm();
        }
      });
  if (!h.allFinite())
    throw NumericalError("residual gradients are non-finite on the grid");

  const double hmax = h.maxCoeff();
  if (!(hmax > 0.0))
    throw NumericalError("all residual gradients vanish on the grid");
  const double floor = 1e-12 * hmax;
  Mat lam(nx, nt);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < nt; ++j)
      lam(i, j) = std::pow(hmax / std::max(h(i, j), floor), alpha);
  return lam;
}

}  // namespace operant::report
