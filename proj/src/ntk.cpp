#include "operant/ntk.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "operant/errors.hpp"

namespace operant::ntk {

namespace {

constexpr long kFullKernelLimit = 2000;
constexpr double kFloorRatio = 1e-12;

Mat term_jacobian(const net::DeepOnetParams& model,
                  const std::vector<constraint::ConstraintTerm>& terms,
                  const data::OperatorDataset& ds,
                  const std::vector<long>& indices) {
  if (indices.empty()) throw ConfigError("kernel requested over zero terms");
  Mat j(static_cast<Eigen::Index>(indices.size()), model.parameter_count());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const long idx = indices[r];
    if (idx < 0 || idx >= static_cast<long>(terms.size()))
      throw ConfigError("term index " + std::to_string(idx) +
                        " out of range for " + std::to_string(terms.size()) +
                        " terms");
    j.row(static_cast<Eigen::Index>(r)) =
        constraint::term_gradient(model, terms[static_cast<std::size_t>(idx)],
                                  ds);
  }
  return j;
}

std::vector<long> all_indices(std::size_t n) {
  std::vector<long> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<long>(i);
  return all;
}

void require_square_matching(const Mat& h, const Vec& t0) {
  if (h.rows() != h.cols())
    throw ShapeError("kernel must be square, got " + std::to_string(h.rows()) +
                     " x " + std::to_string(h.cols()));
  if (t0.size() != h.rows())
    throw ShapeError("state carries " + std::to_string(t0.size()) +
                     " entries for a " + std::to_string(h.rows()) +
                     "-term kernel");
}

}  // namespace

Vec ntk_diag(const net::DeepOnetParams& model,
             const std::vector<constraint::ConstraintTerm>& terms,
             const data::OperatorDataset& ds,
             const std::vector<long>& indices) {
  if (indices.empty()) throw ConfigError("kernel requested over zero terms");
  Vec out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const long idx = indices[r];
    if (idx < 0 || idx >= static_cast<long>(terms.size()))
      throw ConfigError("term index " + std::to_string(idx) +
                        " out of range for " + std::to_string(terms.size()) +
                        " terms");
    const Vec g = constraint::term_gradient(
        model, terms[static_cast<std::size_t>(idx)], ds);
    const double h = g.squaredNorm();
    if (!std::isfinite(h))
      throw NumericalError("kernel diagonal entry for term " +
                           std::to_string(idx) + " is not finite");
    out[static_cast<Eigen::Index>(r)] = h;
  }
  return out;
}

Vec ntk_diag(const net::DeepOnetParams& model,
             const std::vector<constraint::ConstraintTerm>& terms,
             const data::OperatorDataset& ds) {
  return ntk_diag(model, terms, ds, all_indices(terms.size()));
}

Mat ntk_full(const net::DeepOnetParams& model,
             const std::vector<constraint::ConstraintTerm>& terms,
             const data::OperatorDataset& ds,
             const std::vector<long>& indices) {
  if (static_cast<long>(indices.size()) > kFullKernelLimit)
    throw ConfigError("dense kernel over " + std::to_string(indices.size()) +
                      " terms exceeds the " + std::to_string(kFullKernelLimit) +
                      "-term limit; use the diagonal instead");
  const Mat j = term_jacobian(model, terms, ds, indices);
  Mat h = j * j.transpose();
  // The product is symmetric up to rounding; symmetrise so downstream
  // eigensolves see it exactly.
  h = ((h + h.transpose()) * 0.5).eval();
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    for (Eigen::Index k = 0; k < h.cols(); ++k)
      if (!std::isfinite(h(i, k)))
        throw NumericalError("kernel entry (" + std::to_string(i) + ", " +
                             std::to_string(k) + ") is not finite");
  return h;
}

Mat ntk_full(const net::DeepOnetParams& model,
             const std::vector<constraint::ConstraintTerm>& terms,
             const data::OperatorDataset& ds) {
  return ntk_full(model, terms, ds, all_indices(terms.size()));
}

constraint::WeightState ntk_weights(const Vec& diag, double alpha) {
  if (diag.size() == 0) throw ConfigError("weights requested over zero terms");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("weight exponent must lie in [0, 1], got " +
                      std::to_string(alpha));
  for (Eigen::Index i = 0; i < diag.size(); ++i)
    if (!std::isfinite(diag[i]) || diag[i] < 0.0)
      throw NumericalError("kernel diagonal entry " + std::to_string(i) +
                           " is not a finite non-negative number");
  const double hmax = diag.maxCoeff();
  if (hmax <= 0.0)
    throw NumericalError(
        "kernel diagonal vanished entirely; no balance is defined");
  const double floor = kFloorRatio * hmax;
  constraint::WeightState ws;
  ws.alpha = alpha;
  ws.lambdas.resize(diag.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (diag[i] < floor) ++ws.clamped;
    ws.lambdas[i] = std::pow(hmax / std::max(diag[i], floor), alpha);
  }
  return ws;
}

Vec predict_linear_dynamics(const Mat& h, const Vec& t0, double time,
                            long n_terms) {
  require_square_matching(h, t0);
  if (n_terms <= 0)
    throw ConfigError("term count must be positive, got " +
                      std::to_string(n_terms));
  if (!(time >= 0.0))
    throw ConfigError("flow time must be non-negative, got " +
                      std::to_string(time));
  if (time == 0.0) return t0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  if (es.info() != Eigen::Success)
    throw NumericalError("kernel eigendecomposition failed");
  const double rate = 4.0 / static_cast<double>(n_terms);
  const Vec decay =
      (-rate * time * es.eigenvalues().array()).exp().matrix();
  return es.eigenvectors() *
         (decay.asDiagonal() * (es.eigenvectors().transpose() * t0));
}

Vec ntk_spectrum(const Mat& h) {
  if (h.rows() != h.cols())
    throw ShapeError("kernel must be square, got " + std::to_string(h.rows()) +
                     " x " + std::to_string(h.cols()));
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalError("kernel eigendecomposition failed");
  return es.eigenvalues().reverse();
}

}  // namespace operant::ntk
