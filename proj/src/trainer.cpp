#include "operant/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "operant/errors.hpp"
#include "operant/io.hpp"
#include "operant/rng.hpp"

namespace operant::train {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

void fisher_yates(std::vector<long>& perm, rng::Stream& stream) {
  for (std::size_t i = perm.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
}

std::string describe_bad_terms(const std::vector<constraint::ConstraintTerm>& terms,
                               const std::vector<long>& batch, const Vec& values,
                               const Vec& lambdas) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const long k = batch[static_cast<std::size_t>(i)];
    // A term can be finite while its weighted square still overflows.
    if (std::isfinite(lambdas[k] * values[i] * values[i])) continue;
    const auto& t = terms[static_cast<std::size_t>(k)];
    return "; first overflowing term: " + constraint::term_kind_name(t.kind) +
           " of sample " + std::to_string(t.sample_index) + " (term " +
           std::to_string(k) + ")";
  }
  return "";
}

}  // namespace

void adam_step(Vec& theta, AdamState& state, const Vec& grad, double lr) {
  if (state.m.size() == 0) {
    state.m = Vec::Zero(theta.size());
    state.v = Vec::Zero(theta.size());
  }
  if (grad.size() != theta.size() || state.m.size() != theta.size())
    throw ShapeError("optimizer state, parameters and gradient must agree: " +
                     std::to_string(theta.size()) + " parameters, " +
                     std::to_string(grad.size()) + " gradient entries, " +
                     std::to_string(state.m.size()) + " moment entries");
  for (Eigen::Index i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw NumericalError("non-finite gradient entry " + std::to_string(i) +
                           " at optimizer update " +
                           std::to_string(state.step + 1));
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw ConfigError("learning rate must be positive and finite, got " +
                      std::to_string(lr));

  state.step += 1;
  state.m = kBeta1 * state.m + (1.0 - kBeta1) * grad;
  state.v = kBeta2 * state.v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  const double corr1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  const Vec m_hat = state.m / corr1;
  const Vec v_hat = state.v / corr2;
  theta -= lr * (m_hat.array() / (v_hat.array().sqrt() + kEps)).matrix();
}

double lr_at(long step, double base_lr, double decay_rate, long decay_every) {
  if (step < 0)
    throw ConfigError("step must be non-negative, got " + std::to_string(step));
  if (!(base_lr > 0.0))
    throw ConfigError("base learning rate must be positive");
  if (decay_every <= 0)
    throw ConfigError("decay interval must be positive, got " +
                      std::to_string(decay_every));
  if (!(decay_rate > 0.0 && decay_rate <= 1.0))
    throw ConfigError("decay rate must lie in (0, 1], got " +
                      std::to_string(decay_rate));
  return base_lr * std::pow(decay_rate, static_cast<double>(step / decay_every));
}

std::string weight_scheme_name(WeightScheme s) {
  switch (s) {
    case WeightScheme::kNone: return "none";
    case WeightScheme::kFixed: return "fixed";
    case WeightScheme::kDataGuided: return "data-guided";
    case WeightScheme::kNtkGuided: return "ntk-guided";
  }
  throw ConfigError("unknown weight scheme");
}

WeightScheme weight_scheme_from_name(const std::string& name) {
  if (name == "none") return WeightScheme::kNone;
  if (name == "fixed") return WeightScheme::kFixed;
  if (name == "data-guided") return WeightScheme::kDataGuided;
  if (name == "ntk-guided") return WeightScheme::kNtkGuided;
  throw ConfigError("unknown weight scheme \"" + name +
                    "\" (expected none, fixed, data-guided or ntk-guided)");
}

void TrainConfig::validate() const {
  if (batch_size <= 0)
    throw ConfigError("batch size must be positive, got " +
                      std::to_string(batch_size));
  if (iterations < 0)
    throw ConfigError("iteration count must be non-negative, got " +
                      std::to_string(iterations));
  if (!(base_lr > 0.0) || !std::isfinite(base_lr))
    throw ConfigError("base learning rate must be positive and finite");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0))
    throw ConfigError("decay rate must lie in (0, 1], got " +
                      std::to_string(decay_rate));
  if (decay_every <= 0) throw ConfigError("decay interval must be positive");
  if (ntk_update_every <= 0)
    throw ConfigError("weight update interval must be positive");
  if (log_every <= 0) throw ConfigError("log interval must be positive");
  if (!(data_weight_cap > 0.0))
    throw ConfigError("data weight cap must be positive");
  if (scheme == WeightScheme::kNtkGuided) {
    if (!alpha.has_value())
      throw ConfigError("the kernel-guided scheme requires the exponent alpha");
    if (!(*alpha >= 0.0 && *alpha <= 1.0))
      throw ConfigError("alpha must lie in [0, 1], got " +
                        std::to_string(*alpha));
  }
  if (scheme == WeightScheme::kFixed && fixed_weights.empty())
    throw ConfigError("the fixed scheme requires at least one per-kind weight");
  for (const auto& [kind, w] : fixed_weights)
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ConfigError("fixed weight for " + constraint::term_kind_name(kind) +
                        " must be a finite non-negative number");
}

void save_log_csv(const std::filesystem::path& path, const TrainLog& log,
                  const std::vector<std::string>& comment_lines) {
  io::CsvWriter w(path,
                  {"step", "loss_ic", "loss_bc", "loss_res",
                   "loss_total_weighted", "lr", "lambda_min", "lambda_max",
                   "lambda_mean"},
                  comment_lines);
  for (const LogRow& r : log.rows)
    w.row_numeric({static_cast<double>(r.step), r.loss_ic, r.loss_bc,
                   r.loss_res, r.loss_total_weighted, r.lr, r.lambda_min,
                   r.lambda_max, r.lambda_mean});
  w.flush();
}

constraint::WeightState data_guided_weights(const data::OperatorDataset& ds,
                                            double cap) {
  if (!(cap > 0.0) || !std::isfinite(cap))
    throw ConfigError("data weight cap must be positive and finite");
  const auto terms = constraint::assemble_terms(ds);

  Vec per_sample(ds.spec.n_train);
  constraint::WeightState ws;
  for (int i = 0; i < ds.spec.n_train; ++i) {
    const auto& smp = ds.train[static_cast<std::size_t>(i)];
    double norm = 0.0;
    bool any = false;
    for (Eigen::Index j = 0; j < smp.target.size(); ++j) {
      norm = std::max(norm, std::abs(smp.target[j]));
      any = true;
    }
    for (Eigen::Index j = 0; j < smp.boundary_target.size(); ++j) {
      norm = std::max(norm, std::abs(smp.boundary_target[j]));
      any = true;
    }
    double w = 1.0;
    if (any) {
      w = norm > 0.0 ? 1.0 / norm : cap;
      if (w > cap) w = cap;
      if (w == cap) ++ws.clamped;
    }
    per_sample[i] = w;
  }

  ws.lambdas.resize(static_cast<Eigen::Index>(terms.size()));
  for (std::size_t k = 0; k < terms.size(); ++k)
    ws.lambdas[static_cast<Eigen::Index>(k)] = per_sample[terms[k].sample_index];
  return ws;
}

TrainResult train(const net::DeepOnetParams& init,
                  const data::OperatorDataset& ds, const TrainConfig& cfg,
                  const UpdateObserver& observer) {
  cfg.validate();
  ds.validate();
  const auto start = std::chrono::steady_clock::now();

  const auto terms = constraint::assemble_terms(ds);
  const long nstar = static_cast<long>(terms.size());
  const long b = std::min<long>(cfg.batch_size, nstar);
  const long steps_per_epoch = nstar / b;  // the short remainder is dropped

  TrainResult out;
  out.model = init;
  out.weights.lambdas = Vec::Ones(nstar);

  switch (cfg.scheme) {
    case WeightScheme::kNone:
      break;
    case WeightScheme::kFixed:
      for (long k = 0; k < nstar; ++k) {
        const auto it =
            cfg.fixed_weights.find(terms[static_cast<std::size_t>(k)].kind);
        if (it != cfg.fixed_weights.end()) out.weights.lambdas[k] = it->second;
      }
      break;
    case WeightScheme::kDataGuided:
      out.weights = data_guided_weights(ds, cfg.data_weight_cap);
      break;
    case WeightScheme::kNtkGuided:
      out.weights.alpha = *cfg.alpha;
      break;
  }

  if (cfg.iterations == 0) return out;

  Vec theta = out.model.flatten();
  AdamState adam;

  rng::Stream shuffle_stream(cfg.seed, rng::purpose::minibatch);
  std::vector<long> perm(static_cast<std::size_t>(nstar));
  std::iota(perm.begin(), perm.end(), 0L);

  for (long it = 0; it < cfg.iterations; ++it) {
    const long pos = it % steps_per_epoch;
    if (pos == 0) fisher_yates(perm, shuffle_stream);
    const std::vector<long> batch(
        perm.begin() + pos * b, perm.begin() + (pos + 1) * b);

    if (cfg.scheme == WeightScheme::kNtkGuided &&
        it % cfg.ntk_update_every == 0) {
      const Vec diag = ntk::ntk_diag(out.model, terms, ds, batch);
      const auto refreshed = ntk::ntk_weights(diag, *cfg.alpha);
      for (std::size_t j = 0; j < batch.size(); ++j)
        out.weights.lambdas[batch[j]] =
            refreshed.lambdas[static_cast<Eigen::Index>(j)];
      out.weights.clamped = refreshed.clamped;
      out.weights.last_update_step = it;
      if (observer) observer(it, batch, diag, refreshed.lambdas);
    }

    const auto be = constraint::eval_batch(out.model, terms, ds, batch,
                                           out.weights.lambdas, true);
    if (!std::isfinite(be.weighted_loss))
      throw NumericalError(
          "loss became non-finite at step " + std::to_string(it) +
          " (weights in [" +
          std::to_string(out.weights.lambdas.minCoeff()) + ", " +
          std::to_string(out.weights.lambdas.maxCoeff()) + "])" +
          describe_bad_terms(terms, batch, be.term_values,
                             out.weights.lambdas));

    const double lr = lr_at(it, cfg.base_lr, cfg.decay_rate, cfg.decay_every);
    adam_step(theta, adam, be.grad, lr);
    out.model.unflatten(theta);

    if (it % cfg.log_every == 0 || it == cfg.iterations - 1) {
      LogRow row;
      row.step = it;
      row.loss_ic = be.comp_data;
      row.loss_bc = be.comp_boundary;
      row.loss_res = be.comp_residual;
      row.loss_total_weighted = be.weighted_loss;
      row.lr = lr;
      row.lambda_min = out.weights.lambdas.minCoeff();
      row.lambda_max = out.weights.lambdas.maxCoeff();
      row.lambda_mean = out.weights.lambdas.mean();
      if (!out.log.rows.empty() && out.log.rows.back().step == row.step)
        out.log.rows.back() = row;
      else
        out.log.rows.push_back(row);
    }
  }

  out.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return out;
}

std::vector<SampleHistogram> gradient_histogram(
    const net::DeepOnetParams& model, const data::OperatorDataset& ds,
    const std::vector<int>& sample_ids, int bins) {
  if (sample_ids.empty())
    throw ConfigError("histogram requested over zero samples");
  if (bins <= 0)
    throw ConfigError("histogram needs a positive bin count, got " +
                      std::to_string(bins));
  const auto terms = constraint::assemble_terms(ds);

  std::vector<SampleHistogram> out;
  out.reserve(sample_ids.size());
  for (const int sid : sample_ids) {
    if (sid < 0 || sid >= ds.spec.n_train)
      throw ConfigError("sample " + std::to_string(sid) +
                        " out of range for " + std::to_string(ds.spec.n_train) +
                        " training samples");
    std::vector<long> mine;
    for (std::size_t k = 0; k < terms.size(); ++k)
      if (terms[k].sample_index == sid) mine.push_back(static_cast<long>(k));
    const auto be = constraint::eval_batch(
        model, terms, ds, mine, Vec::Ones(static_cast<Eigen::Index>(terms.size())),
        true);

    SampleHistogram h;
    h.sample_id = sid;
    double lo = be.grad.minCoeff(), hi = be.grad.maxCoeff();
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
    h.edges.resize(bins + 1);
    for (int e = 0; e <= bins; ++e)
      h.edges[e] = lo + (hi - lo) * static_cast<double>(e) / bins;
    h.counts = Eigen::VectorXi::Zero(bins);
    for (Eigen::Index i = 0; i < be.grad.size(); ++i) {
      int bin = static_cast<int>((be.grad[i] - lo) / (hi - lo) * bins);
      bin = std::clamp(bin, 0, bins - 1);  // the max lands in the last bin
      h.counts[bin] += 1;
    }
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace operant::train
