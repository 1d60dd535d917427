#pragma once
// Neural-tangent-kernel probes of the constraint system.  With J the
// (terms x parameters) Jacobian dT/dtheta, the kernel is H = J J^T; its
// diagonal drives the adaptive loss weights
//   lambda_k = (max_j H_jj / H_kk)^alpha
// and under plain gradient flow the linearised residual vector follows
//   dT/dt = -(4 / N) H T.

#include <vector>

#include "operant/constraints.hpp"

namespace operant::ntk {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// H_kk = ||dT_k/dtheta||^2 for each requested term, one reverse sweep per
// term.  Entries are exact zeros for terms no parameter influences.
// Omitting `indices` covers every term.
Vec ntk_diag(const net::DeepOnetParams& model,
             const std::vector<constraint::ConstraintTerm>& terms,
             const data::OperatorDataset& ds, const std::vector<long>& indices);
Vec ntk_diag(const net::DeepOnetParams& model,
             const std::vector<constraint::ConstraintTerm>& terms,
             const data::OperatorDataset& ds);

// Dense kernel over the requested terms.  Quadratic in the count, so batches
// beyond 2000 terms are refused; use ntk_diag for weight updates at scale.
Mat ntk_full(const net::DeepOnetParams& model,
             const std::vector<constraint::ConstraintTerm>& terms,
             const data::OperatorDataset& ds, const std::vector<long>& indices);
Mat ntk_full(const net::DeepOnetParams& model,
             const std::vector<constraint::ConstraintTerm>& terms,
             const data::OperatorDataset& ds);

// Balancing weights from a kernel diagonal, for alpha in [0, 1].  Entries
// are clamped from below at 1e-12 times the largest entry before the ratio
// is raised to alpha, so a degenerate term cannot produce an infinite
// weight; the result records how many entries hit the clamp.  The argmax
// entry maps to exactly 1 (every weight is >= 1), and alpha = 0 gives every
// term exactly weight 1.
constraint::WeightState ntk_weights(const Vec& diag, double alpha);

// Closed-form solution of the linearised flow after `time` units:
//   T(time) = Q exp(-(4 / n_terms) Lambda time) Q^T T(0)
// with H = Q Lambda Q^T.  `n_terms` is the term count normalising the loss
// (equal to h.rows() for a full-system kernel).  time = 0 returns t0
// unchanged.
Vec predict_linear_dynamics(const Mat& h, const Vec& t0, double time,
                            long n_terms);

// Eigenvalues of the (symmetric) kernel, descending.
Vec ntk_spectrum(const Mat& h);

}  // namespace operant::ntk
