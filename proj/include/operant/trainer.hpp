#pragma once
// Optimisation loop: Adam with bias correction, a staircase learning-rate
// decay, minibatched term sampling, and the four loss-weighting schemes
// (uniform, fixed per-kind, data-magnitude-guided, kernel-guided).

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "operant/ntk.hpp"

namespace operant::train {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct AdamState {
  Vec m, v;
  long step = 0;  // completed updates
};

// One bias-corrected Adam update in place (beta1 = 0.9, beta2 = 0.999,
// eps = 1e-8).  A fresh state starts from zero moments; a zero gradient
// leaves the parameters unchanged while the moments keep decaying.
void adam_step(Vec& theta, AdamState& state, const Vec& grad, double lr);

// base_lr * decay_rate^floor(step / decay_every)
double lr_at(long step, double base_lr, double decay_rate, long decay_every);

enum class WeightScheme { kNone, kFixed, kDataGuided, kNtkGuided };
std::string weight_scheme_name(WeightScheme s);
WeightScheme weight_scheme_from_name(const std::string& name);

struct TrainConfig {
  WeightScheme scheme = WeightScheme::kNone;
  // Exponent of the kernel-guided rule; must be set for that scheme.
  std::optional<double> alpha;
  // Per-kind multipliers of the fixed scheme; kinds left out keep weight 1.
  std::map<constraint::TermKind, double> fixed_weights;
  int batch_size = 1000;
  long iterations = 0;
  double base_lr = 1e-3;
  double decay_rate = 0.9;
  long decay_every = 2000;
  long ntk_update_every = 100;
  long log_every = 100;
  double data_weight_cap = 1e6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LogRow {
  long step = 0;
  double loss_ic = 0.0;   // data-fit and initial share of the weighted loss
  double loss_bc = 0.0;   // boundary and periodic share
  double loss_res = 0.0;  // interior residual share
  double loss_total_weighted = 0.0;
  double lr = 0.0;
  double lambda_min = 0.0, lambda_max = 0.0, lambda_mean = 0.0;
};

struct TrainLog {
  std::vector<LogRow> rows;  // steps strictly increasing
  double wall_seconds = 0.0;
};

// Pinned column set (step, loss_ic, loss_bc, loss_res, loss_total_weighted,
// lr, lambda_min, lambda_max, lambda_mean).  Wall time stays out of the file
// so identical runs produce identical bytes.
void save_log_csv(const std::filesystem::path& path, const TrainLog& log,
                  const std::vector<std::string>& comment_lines = {});

// Per-sample magnitude weights: lambda_i = 1 / max_j |target_ij| over the
// sample's stored targets, broadcast to every term of that sample.  Samples
// without targets keep weight 1; reciprocals beyond `cap` (all-zero targets
// included) clamp to it, counted in the result.
constraint::WeightState data_guided_weights(const data::OperatorDataset& ds,
                                            double cap = 1e6);

// Called at every kernel-guided weight refresh with the step, the minibatch
// term indices, the kernel diagonal over that batch, and the refreshed
// weights for it (aligned with the batch).
using UpdateObserver =
    std::function<void(long step, const std::vector<long>& batch,
                       const Vec& diag, const Vec& lambdas_batch)>;

struct TrainResult {
  net::DeepOnetParams model;
  TrainLog log;
  constraint::WeightState weights;  // final full-length per-term state
};

// Runs cfg.iterations Adam steps on the decoupled weighted loss.  Minibatch
// indices are drawn without replacement per step, reshuffled each epoch from
// the config seed; the epoch drops the final short batch.  Kernel-guided
// weights refresh from the current minibatch diagonal every
// ntk_update_every steps (the max runs over the minibatch, not all terms)
// and persist in between; weights are constants to the differentiation.
TrainResult train(const net::DeepOnetParams& init,
                  const data::OperatorDataset& ds, const TrainConfig& cfg,
                  const UpdateObserver& observer = {});

// Histogram of one sample's pooled loss-gradient entries, d/dtheta of
// (2/n_i) sum T^2 over that sample's terms.  Bins are uniform over the
// sample's own [min, max] entry range, widened by 0.5 each way when the
// range collapses; counts sum to the parameter count.
struct SampleHistogram {
  int sample_id = 0;
  Vec edges;                // bins + 1 ascending edges
  Eigen::VectorXi counts;   // bins entries
};
std::vector<SampleHistogram> gradient_histogram(
    const net::DeepOnetParams& model, const data::OperatorDataset& ds,
    const std::vector<int>& sample_ids, int bins);

}  // namespace operant::train
