#include "operant/constraints.hpp"

#include <cmath>
#include <utility>

#include "operant/errors.hpp"

namespace operant::constraint {

namespace {

constexpr int kNumKinds = 6;

int kind_rank(TermKind k) { return static_cast<int>(k); }

// Kinds whose term is (prediction - stored target).
bool is_value_kind(TermKind k) {
  return k == TermKind::kDataFit || k == TermKind::kInitial ||
         k == TermKind::kBoundaryDirichlet;
}

bool is_periodic_kind(TermKind k) {
  return k == TermKind::kPeriodicValue || k == TermKind::kPeriodicDerivative;
}

bool kind_allowed(TermKind k, data::Benchmark b) {
  switch (b) {
    case data::Benchmark::kAntiderivative:
      return k == TermKind::kDataFit;
    case data::Benchmark::kAdvection:
      return k == TermKind::kInitial || k == TermKind::kBoundaryDirichlet ||
             k == TermKind::kPdeResidual;
    case data::Benchmark::kBurgers:
      return k == TermKind::kInitial || is_periodic_kind(k) ||
             k == TermKind::kPdeResidual;
  }
  return false;
}

Vec point1(double a) { return (Vec(1) << a).finished(); }
Vec point2(double a, double b) { return (Vec(2) << a, b).finished(); }

// Seed matrix for derivative channel `row`: d/d(point coordinate `row`).
Mat direction_seed(Eigen::Index dim, Eigen::Index cols, Eigen::Index row) {
  Mat s = Mat::Zero(dim, cols);
  s.row(row).setOnes();
  return s;
}

ad::Jet input_jet(ad::Tape& t, Mat value, std::size_t nchannels,
                  const std::vector<bool>& want_d2) {
  ad::Jet j = ad::jet_constant(t, std::move(value), nchannels);
  for (std::size_t c = 0; c < nchannels; ++c) j.ch[c].want_d2 = want_d2[c];
  return j;
}

// Evaluation-point jet with one derivative channel per seeded coordinate.
ad::Jet point_jet(ad::Tape& t, const Mat& y,
                  const std::vector<Eigen::Index>& seed_rows,
                  const std::vector<bool>& want_d2) {
  ad::Jet j = input_jet(t, y, seed_rows.size(), want_d2);
  for (std::size_t c = 0; c < seed_rows.size(); ++c)
    j.ch[c].d1 = t.constant(direction_seed(y.rows(), y.cols(), seed_rows[c]));
  return j;
}

ad::Var single_output(std::vector<ad::Jet> outs, const char* where) {
  if (outs.size() != 1)
    throw ConfigError(std::string(where) +
                      " requires a single-output operator network, got " +
                      std::to_string(outs.size()) + " components");
  return outs[0].v;
}

ad::Jet single_output_jet(std::vector<ad::Jet> outs, const char* where) {
  if (outs.size() != 1)
    throw ConfigError(std::string(where) +
                      " requires a single-output operator network, got " +
                      std::to_string(outs.size()) + " components");
  return std::move(outs[0]);
}

}  // namespace

std::string term_kind_name(TermKind k) {
  switch (k) {
    case TermKind::kDataFit: return "data-fit";
    case TermKind::kInitial: return "initial";
    case TermKind::kBoundaryDirichlet: return "boundary-dirichlet";
    case TermKind::kPeriodicValue: return "periodic-value";
    case TermKind::kPeriodicDerivative: return "periodic-derivative";
    case TermKind::kPdeResidual: return "pde-residual";
  }
  throw ConfigError("unknown term kind");
}

TermKind term_kind_from_name(const std::string& name) {
  for (const auto k :
       {TermKind::kDataFit, TermKind::kInitial, TermKind::kBoundaryDirichlet,
        TermKind::kPeriodicValue, TermKind::kPeriodicDerivative,
        TermKind::kPdeResidual}) {
    if (term_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown term kind \"" + name + "\"");
}

std::vector<ConstraintTerm> assemble_terms(const data::OperatorDataset& ds) {
  ds.validate();
  const auto& spec = ds.spec;
  std::vector<ConstraintTerm> terms;
  terms.reserve(static_cast<std::size_t>(spec.n_terms()));

  for (int s = 0; s < spec.n_train; ++s) {
    const data::OperatorSample& smp = ds.train[static_cast<std::size_t>(s)];
    switch (spec.tag) {
      case data::Benchmark::kAntiderivative:
        for (Eigen::Index i = 0; i < smp.query.size(); ++i)
          terms.push_back({TermKind::kDataFit, s, point1(smp.query[i]), true,
                           smp.target[i]});
        break;
      case data::Benchmark::kAdvection:
        for (Eigen::Index i = 0; i < smp.query.size(); ++i)
          terms.push_back({TermKind::kInitial, s, point2(smp.query[i], 0.0),
                           true, smp.target[i]});
        for (Eigen::Index i = 0; i < smp.boundary.size(); ++i)
          terms.push_back({TermKind::kBoundaryDirichlet, s,
                           point2(0.0, smp.boundary[i]), true,
                           smp.boundary_target[i]});
        for (Eigen::Index i = 0; i < smp.collocation.rows(); ++i)
          terms.push_back({TermKind::kPdeResidual, s,
                           point2(smp.collocation(i, 0), smp.collocation(i, 1)),
                           false, 0.0});
        break;
      case data::Benchmark::kBurgers:
        for (Eigen::Index i = 0; i < smp.query.size(); ++i)
          terms.push_back({TermKind::kInitial, s, point2(smp.query[i], 0.0),
                           true, smp.target[i]});
        for (Eigen::Index i = 0; i < smp.boundary.size(); ++i)
          terms.push_back({TermKind::kPeriodicValue, s, point1(smp.boundary[i]),
                           false, 0.0});
        for (Eigen::Index i = 0; i < smp.boundary.size(); ++i)
          terms.push_back({TermKind::kPeriodicDerivative, s,
                           point1(smp.boundary[i]), false, 0.0});
        for (Eigen::Index i = 0; i < smp.collocation.rows(); ++i)
          terms.push_back({TermKind::kPdeResidual, s,
                           point2(smp.collocation(i, 0), smp.collocation(i, 1)),
                           false, 0.0});
        break;
    }
  }

  if (static_cast<long>(terms.size()) != spec.n_terms())
    throw ConfigError("assembled " + std::to_string(terms.size()) +
                      " terms but the problem sizes promise " +
                      std::to_string(spec.n_terms()));
  return terms;
}

std::vector<KindBatch> gather_batches(const data::OperatorDataset& ds,
                                      const std::vector<ConstraintTerm>& terms,
                                      const std::vector<long>& indices) {
  if (indices.empty()) throw ConfigError("term batch is empty");
  const Eigen::Index m = ds.spec.m_sensors;

  // Pass 1: widths per kind.
  std::vector<Eigen::Index> widths(kNumKinds, 0);
  for (long idx : indices) {
    if (idx < 0 || idx >= static_cast<long>(terms.size()))
      throw ConfigError("term index " + std::to_string(idx) +
                        " out of range for " + std::to_string(terms.size()) +
                        " terms");
    const TermKind k = terms[static_cast<std::size_t>(idx)].kind;
    if (!kind_allowed(k, ds.spec.tag))
      throw ConfigError(term_kind_name(k) + " terms do not occur in the " +
                        data::benchmark_name(ds.spec.tag) + " benchmark");
    ++widths[kind_rank(k)];
  }

  std::vector<KindBatch> batches;
  std::vector<int> slot(kNumKinds, -1);
  for (int k = 0; k < kNumKinds; ++k) {
    if (widths[k] == 0) continue;
    slot[k] = static_cast<int>(batches.size());
    KindBatch kb;
    kb.kind = static_cast<TermKind>(k);
    const Eigen::Index b = widths[k];
    kb.positions.reserve(static_cast<std::size_t>(b));
    kb.u.resize(m, b);
    const Eigen::Index d = ds.spec.point_dim();
    kb.y.resize(d, b);
    if (is_periodic_kind(kb.kind)) kb.y2.resize(d, b);
    if (kb.kind == TermKind::kPdeResidual &&
        ds.spec.tag == data::Benchmark::kAdvection)
      kb.coeff.resize(b);
    kb.target = Vec::Zero(b);
    batches.push_back(std::move(kb));
  }

  // Pass 2: fill columns in request order.
  std::vector<Eigen::Index> at(kNumKinds, 0);
  for (std::size_t pos = 0; pos < indices.size(); ++pos) {
    const ConstraintTerm& term =
        terms[static_cast<std::size_t>(indices[pos])];
    const int k = kind_rank(term.kind);
    KindBatch& kb = batches[static_cast<std::size_t>(slot[k])];
    const Eigen::Index j = at[k]++;
    kb.positions.push_back(pos);

    const data::OperatorSample& smp =
        ds.train[static_cast<std::size_t>(term.sample_index)];
    if (smp.u.sensor_values.size() != m)
      throw ShapeError("sample " + std::to_string(term.sample_index) +
                       " carries " + std::to_string(smp.u.sensor_values.size()) +
                       " sensor values, expected " + std::to_string(m));
    kb.u.col(j) = smp.u.sensor_values;

    if (is_periodic_kind(term.kind)) {
      if (term.point.size() != 1)
        throw ShapeError("periodic term point must be the boundary time alone");
      kb.y.col(j) = point2(0.0, term.point[0]);
      kb.y2.col(j) = point2(1.0, term.point[0]);
    } else {
      if (term.point.size() != ds.spec.point_dim())
        throw ShapeError("term point has " + std::to_string(term.point.size()) +
                         " coordinates, expected " +
                         std::to_string(ds.spec.point_dim()));
      kb.y.col(j) = term.point;
    }

    if (is_value_kind(term.kind)) {
      if (!term.has_target)
        throw DataError(term_kind_name(term.kind) +
                        " term lacks the target it is fit against");
      kb.target[j] = term.target;
    }
    if (kb.coeff.size() > 0) kb.coeff[j] = field::eval_linear(smp.u, term.point[0]);
  }
  return batches;
}

ad::Var term_graph(ad::Tape& t, const net::BoundDeepOnet& bp,
                   const KindBatch& kb, const data::BenchmarkSpec& spec) {
  const Eigen::Index b = kb.y.cols();
  if (t.ncols() != b)
    throw ShapeError("tape carries " + std::to_string(t.ncols()) +
                     " columns but the batch holds " + std::to_string(b));

  switch (kb.kind) {
    case TermKind::kDataFit:
    case TermKind::kInitial:
    case TermKind::kBoundaryDirichlet: {
      const ad::Jet uj = ad::jet_constant(t, kb.u, 0);
      const ad::Jet yj = ad::jet_constant(t, kb.y, 0);
      const ad::Var g = single_output(net::deeponet_graph(t, bp, uj, yj),
                                      "value constraint");
      return t.sub(g, t.constant(kb.target.transpose()));
    }
    case TermKind::kPeriodicValue: {
      const ad::Jet uj = ad::jet_constant(t, kb.u, 0);
      const ad::Jet y0 = ad::jet_constant(t, kb.y, 0);
      const ad::Jet y1 = ad::jet_constant(t, kb.y2, 0);
      const ad::Var g0 = single_output(net::deeponet_graph(t, bp, uj, y0),
                                       "periodic constraint");
      const ad::Var g1 = single_output(net::deeponet_graph(t, bp, uj, y1),
                                       "periodic constraint");
      return t.sub(g0, g1);
    }
    case TermKind::kPeriodicDerivative: {
      // One first-derivative channel along x on both faces.
      const std::vector<bool> want{false};
      const ad::Jet uj = input_jet(t, kb.u, 1, want);
      const ad::Jet y0 = point_jet(t, kb.y, {0}, want);
      const ad::Jet y1 = point_jet(t, kb.y2, {0}, want);
      const ad::Jet g0 = single_output_jet(net::deeponet_graph(t, bp, uj, y0),
                                           "periodic derivative");
      const ad::Jet g1 = single_output_jet(net::deeponet_graph(t, bp, uj, y1),
                                           "periodic derivative");
      return t.sub(g0.ch[0].d1, g1.ch[0].d1);
    }
    case TermKind::kPdeResidual: {
      switch (spec.tag) {
        case data::Benchmark::kAdvection: {
          // T = dG/dt + u(x) dG/dx: first derivatives only.
          const std::vector<bool> want{false, false};
          const ad::Jet uj = input_jet(t, kb.u, 2, want);
          const ad::Jet yj = point_jet(t, kb.y, {0, 1}, want);
          const ad::Jet g = single_output_jet(
              net::deeponet_graph(t, bp, uj, yj), "transport residual");
          const ad::Var speed = t.constant(kb.coeff.transpose());
          return t.add(g.ch[1].d1, t.mul(speed, g.ch[0].d1));
        }
        case data::Benchmark::kBurgers: {
          // T = dG/dt + G dG/dx - nu d2G/dx2: the x channel carries a
          // second derivative, the t channel stays first-order.
          const std::vector<bool> want{true, false};
          const ad::Jet uj = input_jet(t, kb.u, 2, want);
          const ad::Jet yj = point_jet(t, kb.y, {0, 1}, want);
          const ad::Jet g = single_output_jet(
              net::deeponet_graph(t, bp, uj, yj), "viscous residual");
          const ad::Var convect = t.add(g.ch[1].d1, t.mul(g.v, g.ch[0].d1));
          return t.sub(convect, t.scale(g.ch[0].d2, spec.viscosity));
        }
        case data::Benchmark::kAntiderivative:
          throw ConfigError(
              "the supervised curve benchmark has no interior residual");
      }
      throw ConfigError("unknown benchmark");
    }
  }
  throw ConfigError("unknown term kind");
}

BatchEval eval_batch(const net::DeepOnetParams& model,
                     const std::vector<ConstraintTerm>& terms,
                     const data::OperatorDataset& ds,
                     const std::vector<long>& indices, const Vec& lambdas,
                     bool want_grad) {
  if (lambdas.size() != static_cast<Eigen::Index>(terms.size()))
    throw ConfigError("weight vector carries " + std::to_string(lambdas.size()) +
                      " entries for " + std::to_string(terms.size()) +
                      " terms");
  if (model.n_outputs() != 1)
    throw ConfigError("constraint losses require a single-output operator "
                      "network, got " +
                      std::to_string(model.n_outputs()) + " components");

  const auto batches = gather_batches(ds, terms, indices);
  const double n = static_cast<double>(indices.size());

  BatchEval out;
  out.term_values.resize(static_cast<Eigen::Index>(indices.size()));
  if (want_grad) out.grad = Vec::Zero(model.parameter_count());

  for (const KindBatch& kb : batches) {
    ad::Tape t(kb.y.cols());
    const net::BoundDeepOnet bp = net::bind(t, model);
    const ad::Var tv = term_graph(t, bp, kb, ds.spec);
    const Mat& values = t.value(tv);

    double part = 0.0;
    ad::RowVec seed(kb.y.cols());
    for (Eigen::Index j = 0; j < kb.y.cols(); ++j) {
      const std::size_t pos = kb.positions[static_cast<std::size_t>(j)];
      const long global = indices[pos];
      const double lam = lambdas[global];
      const double tval = values(0, j);
      out.term_values[static_cast<Eigen::Index>(pos)] = tval;
      part += lam * tval * tval;
      seed[j] = (4.0 / n) * lam * tval;
    }
    part *= 2.0 / n;
    out.weighted_loss += part;
    if (kb.kind == TermKind::kPdeResidual)
      out.comp_residual += part;
    else if (kb.kind == TermKind::kDataFit || kb.kind == TermKind::kInitial)
      out.comp_data += part;
    else
      out.comp_boundary += part;

    if (want_grad) {
      t.backward({{tv, seed}});
      out.grad += net::collect_grad(t, bp, model);
    }
  }
  return out;
}

double eval_constraint(const net::DeepOnetParams& model,
                       const ConstraintTerm& term,
                       const data::OperatorDataset& ds) {
  const std::vector<ConstraintTerm> one{term};
  return eval_batch(model, one, ds, {0}, Vec::Ones(1), false).term_values[0];
}

Vec term_gradient(const net::DeepOnetParams& model, const ConstraintTerm& term,
                  const data::OperatorDataset& ds) {
  const std::vector<ConstraintTerm> one{term};
  ad::Tape t(1);
  const net::BoundDeepOnet bp = net::bind(t, model);
  const auto batches = gather_batches(ds, one, {0});
  const ad::Var tv = term_graph(t, bp, batches[0], ds.spec);
  t.backward(tv);
  return net::collect_grad(t, bp, model);
}

double weighted_loss(const net::DeepOnetParams& model,
                     const std::vector<ConstraintTerm>& terms,
                     const data::OperatorDataset& ds, const Vec& lambdas) {
  std::vector<long> all(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) all[i] = static_cast<long>(i);
  return eval_batch(model, terms, ds, all, lambdas, false).weighted_loss;
}

double weighted_loss(const net::DeepOnetParams& model,
                     const std::vector<ConstraintTerm>& terms,
                     const data::OperatorDataset& ds,
                     const WeightState& weights) {
  return weighted_loss(model, terms, ds, weights.lambdas);
}

}  // namespace operant::constraint
