#pragma once

// Glue between configuration files and the library: dataset generation,
// analytic model construction, training options and the CSV artifacts.

#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "unroll/config.hpp"
#include "unroll/datagen.hpp"
#include "unroll/metrics.hpp"
#include "unroll/nets.hpp"
#include "unroll/training.hpp"

namespace unroll {

inline Dataset generate_dataset(const Config& c) {
  const std::string gen = c.get_text("generator", "sparse");
  if (gen == "sparse") {
    SparseCodingSpec s;
    s.n = c.get_uint("n", s.n);
    s.m = c.get_uint("m", s.m);
    s.k = c.get_uint("k", s.k);
    s.t_train = c.get_uint("t_train", s.t_train);
    s.t_test = c.get_uint("t_test", s.t_test);
    s.noise_sigma = c.get_real("noise_sigma", s.noise_sigma);
    s.lambda_sup = c.get_real("lambda_sup", s.lambda_sup);
    s.seed = c.get_uint("seed", s.seed);
    return gen_sparse_coding_dataset(s);
  }
  if (gen == "rpca") {
    RpcaSpec s;
    s.rows = c.get_uint("rows", s.rows);
    s.cols = c.get_uint("cols", s.cols);
    s.rank = c.get_uint("rank", s.rank);
    s.density = c.get_real("density", s.density);
    s.amplitude = c.get_real("amplitude", s.amplitude);
    s.seed = c.get_uint("seed", s.seed);
    return gen_rpca_dataset(s);
  }
  LsparcomSpec s;
  s.n_low = c.get_uint("grid_low", s.n_low);
  s.m_high = c.get_uint("grid_high", s.m_high);
  s.emitters = c.get_uint("emitters", s.emitters);
  s.t_train = c.get_uint("t_train", s.t_train);
  s.t_test = c.get_uint("t_test", s.t_test);
  s.noise_sigma = c.get_real("noise_sigma", s.noise_sigma);
  s.seed = c.get_uint("seed", s.seed);
  return gen_lsparcom_dataset(s);
}

/// Worker count from URK_THREADS; absent means 1.
inline std::size_t env_threads() {
  const char* v = std::getenv("URK_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || n == 0) throw ConfigError("URK_THREADS must be a positive integer", 0);
  return n;
}

inline TrainConfig train_config(const Config& c) {
  TrainConfig t;
  t.epochs = c.get_uint("epochs", t.epochs);
  t.batch = c.get_uint("batch", t.batch);
  t.lr = c.get_real("lr", t.lr);
  t.optimizer = c.get_text("optimizer", "adam") == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
  t.momentum = c.get_real("momentum", t.momentum);
  t.beta1 = c.get_real("beta1", t.beta1);
  t.beta2 = c.get_real("beta2", t.beta2);
  t.eps = c.get_real("eps", t.eps);
  t.seed = c.get_uint("seed", t.seed);
  t.loss = c.get_text("loss", "mse") == "masked" ? LossKind::kMasked : LossKind::kMse;
  t.lambda_loss = c.get_real("lambda_loss", t.lambda_loss);
  t.threads = env_threads();
  return t;
}

/// Input/target/planted columns of one split. `planted` is empty when the
/// dataset has no separate ground truth.
struct SupervisedSplit {
  Matrix inputs, targets, planted;
};

inline SupervisedSplit supervised_split(const Dataset& d, std::string_view split) {
  validate_dataset(d);
  if (dataset_generator(d) == GeneratorKind::kRpca) {
    throw FormatError("dataset holds an RPCA problem, not supervised pairs");
  }
  const std::string s(split);
  SupervisedSplit out{d.matrix("Y_" + s), d.matrix("X_" + s), Matrix()};
  if (d.contains("P_" + s)) out.planted = d.matrix("P_" + s);
  return out;
}

/// The untrained network for dictionary `w`: analytic weights with step bound
/// `mu`. λ and k come from the config when set, else from the given defaults.
inline UnrolledModel analytic_model(const Config& c, const Matrix& w, double mu, double lambda_default,
                                    std::size_t k_default) {
  const ModelKind kind = parse_model_kind(c.get_text("model", "lista"));
  const std::size_t depth = c.get_uint("depth", 10);
  const bool tied = c.get_bool("tied", false);
  const double lambda = c.get_real("lambda_sup", lambda_default);
  switch (kind) {
    case ModelKind::kLista:
      return UnrolledModel(lista_init_analytic(w, mu, lambda, depth, tied));
    case ModelKind::kLiht:
      return UnrolledModel(liht_init_analytic(w, mu, c.get_uint("k", k_default), depth, tied));
    case ModelKind::kLsparcom:
      return UnrolledModel(
          lsparcom_init_analytic(w, mu, c.get_real("act_alpha", 0.05), c.get_real("act_beta", 10.0), depth, tied));
    case ModelKind::kUadmm: {
      const AdmmCoefficients coeffs{lambda, c.get_real("rho", 1.0), c.get_real("eta", 1.0)};
      return UnrolledModel(uadmm_init({Matrix::identity(w.cols())}, {coeffs}, depth, tied, c.get_bool("learn_d", false)),
                           w);
    }
  }
  throw ContractError("unknown model kind");
}

/// Step bound stored with the dataset, or recomputed from W.
inline double dataset_step_bound(const Dataset& d) {
  return d.contains("mu") ? d.scalar("mu") : safe_step_bound(d.matrix("W"), 1);
}

inline UnrolledModel analytic_model(const Config& c, const Dataset& d) {
  validate_dataset(d);
  if (dataset_generator(d) == GeneratorKind::kRpca) throw FormatError("RPCA datasets have no dictionary");
  return analytic_model(c, d.matrix("W"), dataset_step_bound(d), d.contains("lambda_sup") ? d.scalar("lambda_sup") : 0.1,
                        d.contains("k") ? static_cast<std::size_t>(d.scalar("k")) : 1);
}

inline constexpr std::string_view kMetricsHeader = "epoch,train_loss,val_nmse_vs_ista_target,val_nmse_vs_planted,seconds";
inline constexpr std::string_view kEvalHeader = "model,depth,nmse,psnr,params_count,wallclock_ms";

/// One row per epoch. Wall-clock seconds are written as 0 unless requested so
/// that the file is reproducible byte for byte.
inline std::string metrics_csv(const TrainReport& r, bool wallclock) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
    out += std::to_string(e + 1) + ',' + format_number(r.train_loss[e]) + ',' + format_number(r.val_nmse_target[e]) +
           ',' + format_number(r.val_nmse_planted[e]) + ',' + format_number(wallclock ? r.epoch_seconds[e] : 0.0) +
           '\n';
  }
  return out;
}

/// Per-layer ‖W_t − (I − W_e·W)‖_F; empty for networks without the W_t/W_e pair.
inline std::vector<double> coupling_profile(const UnrolledModel& model, const Matrix& w) {
  return std::visit(
      [&](const auto& p) -> std::vector<double> {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, UnrolledAdmmParams>) {
          return {};
        } else {
          return weight_coupling_residual(p, w);
        }
      },
      model.params());
}

inline std::string coupling_csv(const std::vector<double>& init, const std::vector<double>& trained) {
  std::string out = "layer,residual_init,residual_trained\n";
  for (std::size_t l = 0; l < trained.size(); ++l) {
    out += std::to_string(l + 1) + ',' + format_number(l < init.size() ? init[l] : 0.0) + ',' +
           format_number(trained[l]) + '\n';
  }
  return out;
}

struct EvalResult {
  double nmse = 0.0;
  double psnr = 0.0;
};

/// NMSE and PSNR of the network over every column of a split; PSNR uses the
/// largest target magnitude as peak.
inline EvalResult evaluate(const UnrolledModel& model, const SupervisedSplit& s, std::size_t threads = 1) {
  std::vector<std::size_t> all(s.inputs.cols());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Matrix pred = predict_columns(model, s.inputs, all, threads);
  if (pred.empty()) throw DegenerateInputError("evaluate: split has no samples");
  const double peak = max_abs(s.targets);
  return {nmse(pred, s.targets), psnr(pred, s.targets, peak > 0.0 ? peak : 1.0)};
}

inline std::string eval_row(const UnrolledModel& model, const EvalResult& r, double wallclock_ms) {
  return std::string(model_name(model.kind())) + ',' + std::to_string(model.depth()) + ',' + format_number(r.nmse) +
         ',' + format_number(r.psnr) + ',' + std::to_string(model.param_count()) + ',' + format_number(wallclock_ms) +
         '\n';
}

}  // namespace unroll
