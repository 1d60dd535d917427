#pragma once
// Expands a benchmark dataset into the flat list of scalar loss terms T_k
// whose weighted sum of squares is trained on, and evaluates those terms
// (values and parameter gradients) either one at a time or batched by kind.
//
// The loss is the fully decoupled form
//   L = (2 / N) * sum_k lambda_k * T_k^2
// where N counts the evaluated terms and every T_k is a single scalar:
// a misfit at one point, one boundary tie, or one interior residual.

#include <cstddef>
#include <string>
#include <vector>

#include "operant/dataset.hpp"
#include "operant/deeponet.hpp"

namespace operant::constraint {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class TermKind {
  kDataFit,             // supervised curve query: G(u)(y) - s(y)
  kInitial,             // t = 0 slice: G(u)(x, 0) - u0(x)
  kBoundaryDirichlet,   // inflow value: G(u)(0, t) - g(t)
  kPeriodicValue,       // G(u)(0, t) - G(u)(1, t)
  kPeriodicDerivative,  // d/dx G(u)(0, t) - d/dx G(u)(1, t)
  kPdeResidual,         // interior residual of the governing equation
};

std::string term_kind_name(TermKind k);
TermKind term_kind_from_name(const std::string& name);  // ConfigError if unknown

// One scalar loss term.  `point` follows per-kind conventions:
//   kDataFit             (y)     curve query location
//   kInitial             (x, 0)
//   kBoundaryDirichlet   (0, t)
//   kPeriodicValue       (t)     the shared boundary time
//   kPeriodicDerivative  (t)
//   kPdeResidual         (x, t)
struct ConstraintTerm {
  TermKind kind = TermKind::kDataFit;
  int sample_index = 0;
  Vec point;
  bool has_target = false;
  double target = 0.0;
};

// Flat term list: sample-major; within a sample, kinds in enum order; within
// a kind, points in stored order.  The result length always equals
// ds.spec.n_terms().
std::vector<ConstraintTerm> assemble_terms(const data::OperatorDataset& ds);

// Terms of one kind gathered for a single batched graph evaluation.
// Column j of every matrix belongs to the j-th term of this batch.
struct KindBatch {
  TermKind kind = TermKind::kDataFit;
  std::vector<std::size_t> positions;  // into the evaluated index list
  Mat u;       // m x B sensor values of each term's sample
  Mat y;       // point_dim x B evaluation points
  Mat y2;      // second evaluation point (periodic pairs only, else empty)
  Vec coeff;   // transport speed u(x) at each point (advection residual only)
  Vec target;  // zero where the kind carries no target
};

// Partitions an arbitrary subset of terms (by index into `terms`) into
// per-kind batches, preserving the requested order inside each batch.
std::vector<KindBatch> gather_batches(const data::OperatorDataset& ds,
                                      const std::vector<ConstraintTerm>& terms,
                                      const std::vector<long>& indices);

// Builds the batched graph of one kind's term values on an existing tape
// (whose column count must equal the batch width) and returns the 1 x B node
// holding T for every term in the batch.
ad::Var term_graph(ad::Tape& t, const net::BoundDeepOnet& bp,
                   const KindBatch& kb, const data::BenchmarkSpec& spec);

// Single-term conveniences (one-column tapes).
double eval_constraint(const net::DeepOnetParams& model,
                       const ConstraintTerm& term,
                       const data::OperatorDataset& ds);
// dT/dtheta in flat parameter order; exact zeros where the term never
// touches a parameter.
Vec term_gradient(const net::DeepOnetParams& model, const ConstraintTerm& term,
                  const data::OperatorDataset& ds);

struct BatchEval {
  double weighted_loss = 0.0;
  Vec term_values;  // one per requested index, in request order
  Vec grad;         // d(weighted_loss)/dtheta; empty unless requested
  // The weighted loss split by constraint role; the three parts sum to
  // weighted_loss.  Data-fit and initial terms count as "data", Dirichlet
  // and periodic ties as "boundary".
  double comp_data = 0.0;
  double comp_boundary = 0.0;
  double comp_residual = 0.0;
};

// Evaluates the weighted loss over the chosen subset of terms, normalised by
// the subset size: L = (2 / B) * sum lambda_k T_k^2.  `lambdas` carries one
// weight per entry of `terms` (the full list), indexed globally; weights are
// treated as constants, so the gradient is (4 / B) * sum lambda_k T_k dT_k.
BatchEval eval_batch(const net::DeepOnetParams& model,
                     const std::vector<ConstraintTerm>& terms,
                     const data::OperatorDataset& ds,
                     const std::vector<long>& indices, const Vec& lambdas,
                     bool want_grad);

// Per-term weights plus the metadata of the scheme that produced them.
// `clamped` counts entries that hit the floor clamp when the weights were
// computed; `last_update_step` is -1 until a training loop refreshes them.
struct WeightState {
  Vec lambdas;
  double alpha = 0.0;
  long last_update_step = -1;
  long clamped = 0;
};

// Full-dataset loss: eval_batch over every term.
double weighted_loss(const net::DeepOnetParams& model,
                     const std::vector<ConstraintTerm>& terms,
                     const data::OperatorDataset& ds, const Vec& lambdas);
double weighted_loss(const net::DeepOnetParams& model,
                     const std::vector<ConstraintTerm>& terms,
                     const data::OperatorDataset& ds, const WeightState& weights);

}  // namespace operant::constraint
