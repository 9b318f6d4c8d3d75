#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "unroll/autodiff.hpp"
#include "unroll/error.hpp"
#include "unroll/matrix.hpp"
#include "unroll/metrics.hpp"
#include "unroll/nets.hpp"
#include "unroll/rng.hpp"

namespace unroll {

/// (1/T)·Σ_t ‖pred_t − target_t‖² over the T columns.
inline double mse_loss(const Matrix& pred, const Matrix& target) {
  detail::require_same_shape(pred, target, "mse_loss");
  if (pred.cols() == 0) return 0.0;
  return squared_norm(sub(pred, target)) / static_cast<double>(pred.cols());
}

/// (1/N)·Σ B·|X̂ − X*|² + λ_loss·(1 − B)·|X̂| with B = 𝟙[X* ≠ 0], N the entry count.
inline double masked_loss(const Matrix& pred, const Matrix& target, double lambda_loss) {
  detail::require_same_shape(pred, target, "masked_loss");
  if (!(lambda_loss >= 0.0)) throw ContractError("masked_loss: lambda_loss must be nonnegative");
  if (pred.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    total += target[i] != 0.0 ? d * d : lambda_loss * std::abs(pred[i]);
  }
  return total / static_cast<double>(pred.size());
}

enum class OptimizerKind { kSgd, kAdam };
enum class LossKind { kMse, kMasked };

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch = 32;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::kMse;
  double lambda_loss = 0.01;
  double validation_fraction = 0.2;
  std::size_t threads = 1;

  void validate() const {
    if (epochs < 1) throw ContractError("train: epochs must be at least 1");
    if (batch < 1) throw ContractError("train: batch must be at least 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ContractError("train: lr must be finite and nonnegative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("train: momentum must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ContractError("train: Adam betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ContractError("train: eps must be positive");
    if (!(lambda_loss >= 0.0)) throw ContractError("train: lambda_loss must be nonnegative");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
      throw ContractError("train: validation fraction must lie in [0, 1)");
    }
  }
};

struct OptimizerState {
  std::vector<double> m;  // SGD velocity, or Adam first moment
  std::vector<double> v;  // Adam second moment
  std::size_t steps = 0;
};

/// One update of `params` in place.
inline void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                           const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("optimizer_step: params and gradient lengths differ");
  if (state.m.empty()) state.m.assign(params.size(), 0.0);
  if (state.m.size() != params.size()) throw ShapeError("optimizer_step: optimizer state length mismatch");
  ++state.steps;
  if (cfg.optimizer == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = cfg.momentum * state.m[i] + grads[i];
      params[i] -= cfg.lr * state.m[i];
    }
    return;
  }
  if (state.v.empty()) state.v.assign(params.size(), 0.0);
  const double t = static_cast<double>(state.steps);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

struct BatchGradient {
  double loss = 0.0;          // batch mean
  std::vector<double> grad;   // d(batch mean loss)/d(raw params)
};

namespace detail {

inline double sample_loss_and_grad(const UnrolledModel& model, const Matrix& input, const Matrix& target,
                                   LossKind kind, double lambda_loss, std::span<double> grad) {
  ad::Tape tape;
  const Recorded rec = model.record(tape, input);
  const ad::Var t = tape.leaf(target);
  const ad::Var loss = kind == LossKind::kMse ? tape.mse_loss(rec.output, t) : tape.masked_loss(rec.output, t, lambda_loss);
  const ad::Gradients g = ad::backward(tape, loss);
  std::fill(grad.begin(), grad.end(), 0.0);
  pull_gradient(rec, tape, g, grad);
  return tape.value(loss)[0];
}

// Runs body(i) for i in [0, count) on up to `threads` workers with a static
// interleaved assignment.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Mean loss and gradient over the listed samples (columns). Per-sample
/// gradients are reduced in ascending column order whatever the thread count.
inline BatchGradient batch_gradient(const UnrolledModel& model, const Matrix& inputs, const Matrix& targets,
                                    std::vector<std::size_t> indices, LossKind kind, double lambda_loss,
                                    std::size_t threads = 1) {
  std::sort(indices.begin(), indices.end());
  const std::size_t p = model.param_count();
  std::vector<std::vector<double>> per_sample(indices.size(), std::vector<double>(p));
  std::vector<double> losses(indices.size());
  detail::parallel_for(indices.size(), threads, [&](std::size_t i) {
    losses[i] = detail::sample_loss_and_grad(model, inputs.col(indices[i]), targets.col(indices[i]), kind,
                                             lambda_loss, per_sample[i]);
  });
  BatchGradient out;
  out.grad.assign(p, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.loss += losses[i];
    for (std::size_t j = 0; j < p; ++j) out.grad[j] += per_sample[i][j];
  }
  if (!indices.empty()) {
    const double inv = 1.0 / static_cast<double>(indices.size());
    out.loss *= inv;
    for (double& g : out.grad) g *= inv;
  }
  return out;
}

/// Network outputs for the listed columns, stacked in the given order.
inline Matrix predict_columns(const UnrolledModel& model, const Matrix& inputs, std::span<const std::size_t> indices,
                              std::size_t threads = 1) {
  std::vector<Matrix> outs(indices.size());
  detail::parallel_for(indices.size(), threads, [&](std::size_t i) { outs[i] = model.forward(inputs.col(indices[i])); });
  if (outs.empty()) return Matrix();
  Matrix stacked(outs[0].rows(), outs.size());
  for (std::size_t i = 0; i < outs.size(); ++i) stacked.set_col(i, outs[i]);
  return stacked;
}

inline Matrix select_columns(const Matrix& a, std::span<const std::size_t> indices) {
  Matrix out(a.rows(), indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (std::size_t r = 0; r < a.rows(); ++r) out(r, i) = a(r, indices[i]);
  return out;
}

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Shuffled split of T sample indices; the validation part holds floor(fraction·T) samples.
inline DataSplit split_indices(std::size_t count, double validation_fraction, Rng& rng) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx, rng);
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(count)));
  DataSplit s;
  s.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
  s.validation.assign(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  return s;
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string canonical_string(const TrainConfig& c) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "epochs=%zu;batch=%zu;lr=%.17g;optimizer=%d;momentum=%.17g;beta1=%.17g;beta2=%.17g;eps=%.17g;"
                "seed=%llu;loss=%d;lambda_loss=%.17g;validation=%.17g",
                c.epochs, c.batch, c.lr, static_cast<int>(c.optimizer), c.momentum, c.beta1, c.beta2, c.eps,
                static_cast<unsigned long long>(c.seed), static_cast<int>(c.loss), c.lambda_loss,
                c.validation_fraction);
  return buf;
}

struct TrainReport {
  explicit TrainReport(UnrolledModel m) : model(std::move(m)) {}

  std::vector<double> train_loss;              // per-epoch mean over training samples
  std::vector<double> val_nmse_target;         // vs supervision targets
  std::vector<double> val_nmse_planted;        // vs planted ground truth
  std::vector<double> epoch_seconds;           // wall clock, not part of the determinism contract
  double initial_val_nmse_target = 0.0;        // before any update
  double initial_val_nmse_planted = 0.0;
  double seconds = 0.0;
  UnrolledModel model;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// Supervised mini-batch training. Columns of `inputs`/`targets`/`planted` are
/// samples; `planted` may be empty, in which case it defaults to `targets`.
/// The train/validation split and every epoch's batch order come from one Rng
/// stream seeded with cfg.seed.
inline TrainReport train(UnrolledModel model, const Matrix& inputs, const Matrix& targets, const Matrix& planted,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (inputs.cols() != targets.cols()) throw ShapeError("train: inputs and targets have different sample counts");
  const Matrix& reference = planted.empty() ? targets : planted;
  if (!reference.same_shape(targets)) throw ShapeError("train: planted codes do not match targets");
  if (inputs.cols() == 0) throw ContractError("train: empty dataset");

  const auto start = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  DataSplit split = split_indices(inputs.cols(), cfg.validation_fraction, rng);
  if (split.train.empty()) throw ContractError("train: no training samples after the validation split");
  const Matrix val_target = select_columns(targets, split.validation);
  const Matrix val_planted = select_columns(reference, split.validation);

  auto validate_now = [&](const UnrolledModel& m, double& vs_target, double& vs_planted) {
    if (split.validation.empty()) {
      vs_target = vs_planted = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    const Matrix pred = predict_columns(m, inputs, split.validation, cfg.threads);
    vs_target = nmse(pred, val_target);
    vs_planted = nmse(pred, val_planted);
  };

  TrainReport report(model);
  report.config_hash = fnv1a(canonical_string(cfg));
  report.seed = cfg.seed;
  validate_now(model, report.initial_val_nmse_target, report.initial_val_nmse_planted);

  std::vector<double> flat = model.pack();
  OptimizerState state;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = split.train;
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch) {
      const std::size_t last = std::min(order.size(), first + cfg.batch);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(first),
                                     order.begin() + static_cast<std::ptrdiff_t>(last));
      BatchGradient bg;
      try {
        bg = batch_gradient(model, inputs, targets, batch, cfg.loss, cfg.lambda_loss, cfg.threads);
      } catch (const NumericError& e) {
        throw TrainingError(std::string("forward pass failed: ") + e.what(), epoch);
      }
      const bool finite = std::isfinite(bg.loss) &&
                          std::all_of(bg.grad.begin(), bg.grad.end(), [](double g) { return std::isfinite(g); });
      if (!finite) throw TrainingError("loss or gradient became non-finite", epoch);
      loss_sum += bg.loss * static_cast<double>(batch.size());
      optimizer_step(flat, bg.grad, state, cfg);
      if (!std::all_of(flat.begin(), flat.end(), [](double p) { return std::isfinite(p); })) {
        throw TrainingError("parameters became non-finite", epoch);
      }
      model.unpack(flat);
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
    double vt = 0.0, vp = 0.0;
    try {
      validate_now(model, vt, vp);
    } catch (const NumericError& e) {
      throw TrainingError(std::string("validation failed: ") + e.what(), epoch);
    }
    if (!split.validation.empty() && (!std::isfinite(vt) || !std::isfinite(vp))) {
      throw TrainingError("validation NMSE became non-finite", epoch);
    }
    report.val_nmse_target.push_back(vt);
    report.val_nmse_planted.push_back(vp);
    report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count());
  }
  report.model = std::move(model);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace unroll
