#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "unroll/autodiff.hpp"
#include "unroll/matrix.hpp"
#include "unroll/solvers.hpp"

namespace unroll {

// ---------------------------------------------------------------------------
// Parameter bundles. Positive scalars are stored as logarithms (the trainable
// coordinate); accessors return the constrained value.
// ---------------------------------------------------------------------------

struct ListaLayer {
  Matrix we;  // m x n
  Matrix wt;  // m x m
  double log_lambda = 0.0;

  double lambda() const { return std::exp(log_lambda); }
};

/// LISTA weights. When tied, `layers` holds a single entry shared by every layer;
/// otherwise one entry per layer.
struct ListaParams {
  std::size_t depth = 0;
  bool tied = false;
  std::vector<ListaLayer> layers;

  const ListaLayer& layer(std::size_t l) const { return layers.at(tied ? 0 : l); }
};

struct LihtLayer {
  Matrix we;
  Matrix wt;
};

struct LihtParams {
  std::size_t depth = 0;
  bool tied = false;
  std::size_t k = 0;  // sparsity level, not trainable
  std::vector<LihtLayer> layers;

  const LihtLayer& layer(std::size_t l) const { return layers.at(tied ? 0 : l); }
};

struct LSparcomLayer {
  Matrix we;  // M² x N²
  Matrix wt;  // M² x M²
  double alpha = 0.0;
  double log_beta = 0.0;

  double beta() const { return std::exp(log_beta); }
};

struct LSparcomParams {
  std::size_t depth = 0;
  bool tied = false;
  std::vector<LSparcomLayer> layers;

  const LSparcomLayer& layer(std::size_t l) const { return layers.at(tied ? 0 : l); }
};

struct AdmmBranch {
  Matrix d;  // p x m filtering operator
  double log_lambda = 0.0;
  double log_rho = 0.0;
  double log_eta = 0.0;

  double lambda() const { return std::exp(log_lambda); }
  double rho() const { return std::exp(log_rho); }
  double eta() const { return std::exp(log_eta); }
};

struct AdmmStage {
  std::vector<AdmmBranch> branches;
};

struct UnrolledAdmmParams {
  std::size_t depth = 0;
  bool tied = false;
  bool learn_operators = false;  // whether the D_i are trainable
  std::vector<AdmmStage> stages;

  const AdmmStage& stage(std::size_t l) const { return stages.at(tied ? 0 : l); }
};

// ---------------------------------------------------------------------------
// Recording support: a forward pass on a tape reports which leaves correspond
// to which coordinates of the flat raw-parameter vector.
// ---------------------------------------------------------------------------

struct Binding {
  enum class Map {
    kIdentity,  // flat[offset + i] ↔ leaf entry i
    kExp,       // leaf = exp(flat[offset])
    kRatio,     // leaf = exp(flat[offset] − flat[offset2])
  };
  ad::Var var;
  std::size_t offset = 0;
  Map map = Map::kIdentity;
  std::size_t offset2 = 0;
};

struct Recorded {
  ad::Var output;
  std::vector<Binding> bindings;
};

/// Adds d(loss)/d(raw parameters) into `flat`, in binding order.
inline void pull_gradient(const Recorded& rec, const ad::Tape& tape, const ad::Gradients& grads,
                          std::span<double> flat) {
  for (const auto& b : rec.bindings) {
    const Matrix& g = grads[b.var];
    switch (b.map) {
      case Binding::Map::kIdentity:
        for (std::size_t i = 0; i < g.size(); ++i) flat[b.offset + i] += g[i];
        break;
      case Binding::Map::kExp:
        flat[b.offset] += g[0] * tape.value(b.var)[0];
        break;
      case Binding::Map::kRatio: {
        const double d = g[0] * tape.value(b.var)[0];
        flat[b.offset] += d;
        flat[b.offset2] -= d;
        break;
      }
    }
  }
}

namespace detail {

inline void append(std::vector<double>& out, const Matrix& m) {
  out.insert(out.end(), m.values().begin(), m.values().end());
}

inline void take(std::span<const double> flat, std::size_t& pos, Matrix& m) {
  if (pos + m.size() > flat.size()) throw ShapeError("unpack: flat parameter vector too short");
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), m.size(), m.values().begin());
  m.require_finite("unpack");
  pos += m.size();
}

inline double take(std::span<const double> flat, std::size_t& pos) {
  if (pos >= flat.size()) throw ShapeError("unpack: flat parameter vector too short");
  const double v = flat[pos++];
  if (!std::isfinite(v)) throw NumericError("non-finite parameter after unpack");
  return v;
}

inline void finish(std::span<const double> flat, std::size_t pos) {
  if (pos != flat.size()) throw ShapeError("unpack: flat parameter vector too long");
}

// A depth-0 network still keeps one (unused) layer so its shapes are known.
inline std::size_t stored_layers(std::size_t depth, bool tied) { return tied || depth == 0 ? 1 : depth; }

inline void require_column(const Matrix& input, std::size_t rows, const char* who) {
  if (input.rows() != rows || input.cols() != 1) {
    throw ShapeError(std::string(who) + ": input " + input.shape_string() + ", expected " + std::to_string(rows) +
                     "x1");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// LISTA
// ---------------------------------------------------------------------------

/// Weights for which the network reproduces `depth` ISTA iterations:
/// W_t = I − (1/μ)WᵀW, W_e = (1/μ)Wᵀ, threshold λ/μ.
inline ListaParams lista_init_analytic(const Matrix& w, double mu, double lambda, std::size_t depth, bool tied) {
  if (!(mu > 0.0)) throw ContractError("lista_init_analytic: mu must be positive");
  if (!(lambda > 0.0)) throw ContractError("lista_init_analytic: lambda must be positive");
  const StepWeights sw = analytic_step_weights(w, mu);
  ListaParams p{depth, tied, {}};
  const std::size_t n = detail::stored_layers(depth, tied);
  for (std::size_t l = 0; l < n; ++l) p.layers.push_back({sw.we, sw.wt, std::log(lambda / mu)});
  return p;
}

inline std::size_t param_count(const ListaParams& p) {
  std::size_t c = 0;
  for (const auto& l : p.layers) c += l.we.size() + l.wt.size() + 1;
  return c;
}

inline std::vector<double> pack(const ListaParams& p) {
  std::vector<double> out;
  for (const auto& l : p.layers) {
    detail::append(out, l.we);
    detail::append(out, l.wt);
    out.push_back(l.log_lambda);
  }
  return out;
}

inline void unpack(ListaParams& p, std::span<const double> flat) {
  std::size_t pos = 0;
  for (auto& l : p.layers) {
    detail::take(flat, pos, l.we);
    detail::take(flat, pos, l.wt);
    l.log_lambda = detail::take(flat, pos);
  }
  detail::finish(flat, pos);
}

/// x⁰ = 0; x^{l+1} = S_{λ^l}(W_t^l x^l + W_e^l y).
inline Recorded lista_record(ad::Tape& tape, const ListaParams& p, const Matrix& y) {
  Recorded rec;
  std::vector<ad::Var> we, wt, lam;
  std::size_t offset = 0;
  for (const auto& l : p.layers) {
    we.push_back(tape.leaf(l.we));
    rec.bindings.push_back({we.back(), offset});
    offset += l.we.size();
    wt.push_back(tape.leaf(l.wt));
    rec.bindings.push_back({wt.back(), offset});
    offset += l.wt.size();
    lam.push_back(tape.scalar(l.lambda()));
    rec.bindings.push_back({lam.back(), offset, Binding::Map::kExp});
    offset += 1;
  }
  const std::size_t m = p.layers.empty() ? 0 : p.layers[0].wt.rows();
  if (!p.layers.empty()) detail::require_column(y, p.layers[0].we.cols(), "lista_forward");
  const ad::Var yv = tape.leaf(y);
  ad::Var x = tape.leaf(Matrix(m, y.cols()));
  for (std::size_t l = 0; l < p.depth; ++l) {
    const std::size_t i = p.tied ? 0 : l;
    x = tape.soft_threshold(tape.add(tape.matmul(wt[i], x), tape.matmul(we[i], yv)), lam[i]);
  }
  rec.output = x;
  return rec;
}

inline Matrix lista_forward(const ListaParams& p, const Matrix& y) {
  ad::Tape tape;
  const auto rec = lista_record(tape, p, y);
  return tape.value(rec.output);
}

// ---------------------------------------------------------------------------
// Learned IHT
// ---------------------------------------------------------------------------

inline LihtParams liht_init_analytic(const Matrix& w, double mu, std::size_t k, std::size_t depth, bool tied) {
  if (k > w.cols()) throw ContractError("liht_init_analytic: k exceeds the code length");
  const StepWeights sw = analytic_step_weights(w, mu);
  LihtParams p{depth, tied, k, {}};
  const std::size_t n = detail::stored_layers(depth, tied);
  for (std::size_t l = 0; l < n; ++l) p.layers.push_back({sw.we, sw.wt});
  return p;
}

inline std::size_t param_count(const LihtParams& p) {
  std::size_t c = 0;
  for (const auto& l : p.layers) c += l.we.size() + l.wt.size();
  return c;
}

inline std::vector<double> pack(const LihtParams& p) {
  std::vector<double> out;
  for (const auto& l : p.layers) {
    detail::append(out, l.we);
    detail::append(out, l.wt);
  }
  return out;
}

inline void unpack(LihtParams& p, std::span<const double> flat) {
  std::size_t pos = 0;
  for (auto& l : p.layers) {
    detail::take(flat, pos, l.we);
    detail::take(flat, pos, l.wt);
  }
  detail::finish(flat, pos);
}

/// x^{l+1} = H_k(W_t^l x^l + W_e^l y); every layer output is exactly k-sparse or sparser.
inline Recorded liht_record(ad::Tape& tape, const LihtParams& p, const Matrix& y) {
  Recorded rec;
  std::vector<ad::Var> we, wt;
  std::size_t offset = 0;
  for (const auto& l : p.layers) {
    we.push_back(tape.leaf(l.we));
    rec.bindings.push_back({we.back(), offset});
    offset += l.we.size();
    wt.push_back(tape.leaf(l.wt));
    rec.bindings.push_back({wt.back(), offset});
    offset += l.wt.size();
  }
  const std::size_t m = p.layers.empty() ? 0 : p.layers[0].wt.rows();
  if (!p.layers.empty()) detail::require_column(y, p.layers[0].we.cols(), "liht_forward");
  const ad::Var yv = tape.leaf(y);
  ad::Var x = tape.leaf(Matrix(m, 1));
  for (std::size_t l = 0; l < p.depth; ++l) {
    const std::size_t i = p.tied ? 0 : l;
    x = tape.hard_threshold_topk(tape.add(tape.matmul(wt[i], x), tape.matmul(we[i], yv)), p.k);
  }
  rec.output = x;
  return rec;
}

inline Matrix liht_forward(const LihtParams& p, const Matrix& y) {
  ad::Tape tape;
  const auto rec = liht_record(tape, p, y);
  return tape.value(rec.output);
}

// ---------------------------------------------------------------------------
// LSPARCOM (fully connected form)
// ---------------------------------------------------------------------------

/// ISTA-style weights from the PSF dictionary W (N² x M²) with S⁺_{α,β} activations.
inline LSparcomParams lsparcom_init_analytic(const Matrix& w, double mu, double alpha, double beta,
                                             std::size_t depth, bool tied) {
  if (!(beta > 0.0)) throw ContractError("lsparcom_init_analytic: beta must be positive");
  const StepWeights sw = analytic_step_weights(w, mu);
  LSparcomParams p{depth, tied, {}};
  const std::size_t n = detail::stored_layers(depth, tied);
  for (std::size_t l = 0; l < n; ++l) p.layers.push_back({sw.we, sw.wt, alpha, std::log(beta)});
  return p;
}

inline std::size_t param_count(const LSparcomParams& p) {
  std::size_t c = 0;
  for (const auto& l : p.layers) c += l.we.size() + l.wt.size() + 2;
  return c;
}

inline std::vector<double> pack(const LSparcomParams& p) {
  std::vector<double> out;
  for (const auto& l : p.layers) {
    detail::append(out, l.we);
    detail::append(out, l.wt);
    out.push_back(l.alpha);
    out.push_back(l.log_beta);
  }
  return out;
}

inline void unpack(LSparcomParams& p, std::span<const double> flat) {
  std::size_t pos = 0;
  for (auto& l : p.layers) {
    detail::take(flat, pos, l.we);
    detail::take(flat, pos, l.wt);
    l.alpha = detail::take(flat, pos);
    l.log_beta = detail::take(flat, pos);
  }
  detail::finish(flat, pos);
}

inline Recorded lsparcom_record(ad::Tape& tape, const LSparcomParams& p, const Matrix& g) {
  Recorded rec;
  std::vector<ad::Var> we, wt, alpha, beta;
  std::size_t offset = 0;
  for (const auto& l : p.layers) {
    we.push_back(tape.leaf(l.we));
    rec.bindings.push_back({we.back(), offset});
    offset += l.we.size();
    wt.push_back(tape.leaf(l.wt));
    rec.bindings.push_back({wt.back(), offset});
    offset += l.wt.size();
    alpha.push_back(tape.scalar(l.alpha));
    rec.bindings.push_back({alpha.back(), offset});
    offset += 1;
    beta.push_back(tape.scalar(l.beta()));
    rec.bindings.push_back({beta.back(), offset, Binding::Map::kExp});
    offset += 1;
  }
  const std::size_t m = p.layers.empty() ? 0 : p.layers[0].wt.rows();
  if (!p.layers.empty()) detail::require_column(g, p.layers[0].we.cols(), "lsparcom_forward");
  const ad::Var gv = tape.leaf(g);
  ad::Var x = tape.leaf(Matrix(m, g.cols()));
  for (std::size_t l = 0; l < p.depth; ++l) {
    const std::size_t i = p.tied ? 0 : l;
    x = tape.sigmoid_plus_threshold(tape.add(tape.matmul(wt[i], x), tape.matmul(we[i], gv)), alpha[i], beta[i]);
  }
  rec.output = x;
  return rec;
}

/// Recovered high-resolution image, flattened to M² x 1. Entrywise nonnegative.
inline Matrix lsparcom_forward(const LSparcomParams& p, const Matrix& g) {
  ad::Tape tape;
  const auto rec = lsparcom_record(tape, p, g);
  return tape.value(rec.output);
}

// ---------------------------------------------------------------------------
// Unrolled ADMM
// ---------------------------------------------------------------------------

/// Every stage set to the given operators and coefficients, so that the network
/// reproduces `depth` iterations of admm_cs_solve.
inline UnrolledAdmmParams uadmm_init(const std::vector<Matrix>& ops, const std::vector<AdmmCoefficients>& coeffs,
                                     std::size_t depth, bool tied, bool learn_operators) {
  if (ops.size() != coeffs.size()) throw ContractError("uadmm_init: one coefficient triple per operator");
  AdmmStage st;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& c = coeffs[i];
    if (!(c.lambda > 0.0) || !(c.rho > 0.0) || !(c.eta > 0.0)) {
      throw ContractError("uadmm_init: lambda, rho and eta must be positive");
    }
    st.branches.push_back({ops[i], std::log(c.lambda), std::log(c.rho), std::log(c.eta)});
  }
  UnrolledAdmmParams p{depth, tied, learn_operators, {}};
  const std::size_t n = detail::stored_layers(depth, tied);
  for (std::size_t l = 0; l < n; ++l) p.stages.push_back(st);
  return p;
}

inline std::size_t param_count(const UnrolledAdmmParams& p) {
  std::size_t c = 0;
  for (const auto& s : p.stages)
    for (const auto& b : s.branches) c += 3 + (p.learn_operators ? b.d.size() : 0);
  return c;
}

inline std::vector<double> pack(const UnrolledAdmmParams& p) {
  std::vector<double> out;
  for (const auto& s : p.stages) {
    for (const auto& b : s.branches) {
      if (p.learn_operators) detail::append(out, b.d);
      out.push_back(b.log_lambda);
      out.push_back(b.log_rho);
      out.push_back(b.log_eta);
    }
  }
  return out;
}

inline void unpack(UnrolledAdmmParams& p, std::span<const double> flat) {
  std::size_t pos = 0;
  for (auto& s : p.stages) {
    for (auto& b : s.branches) {
      if (p.learn_operators) detail::take(flat, pos, b.d);
      b.log_lambda = detail::take(flat, pos);
      b.log_rho = detail::take(flat, pos);
      b.log_eta = detail::take(flat, pos);
    }
  }
  detail::finish(flat, pos);
}

/// Three updates per stage (linear solve, shrinkage, dual ascent) from
/// x = z_i = α_i = 0. The linear solve is a tape node whose backward pass solves
/// the transposed system.
inline Recorded uadmm_record(ad::Tape& tape, const UnrolledAdmmParams& p, const Matrix& w, const Matrix& y) {
  if (w.rows() != y.rows() || y.cols() != 1) {
    throw ShapeError("unrolled_admm_forward: W " + w.shape_string() + " vs y " + y.shape_string());
  }
  struct BranchVars {
    ad::Var d, dt, dtd, rho, eta, theta;
  };
  Recorded rec;
  std::vector<std::vector<BranchVars>> vars;
  std::size_t offset = 0;
  for (const auto& s : p.stages) {
    std::vector<BranchVars> bv;
    for (const auto& b : s.branches) {
      if (b.d.cols() != w.cols()) throw ShapeError("unrolled_admm_forward: operator " + b.d.shape_string());
      BranchVars v;
      v.d = tape.leaf(b.d);
      if (p.learn_operators) {
        rec.bindings.push_back({v.d, offset});
        offset += b.d.size();
      }
      v.dt = tape.transpose(v.d);
      v.dtd = tape.matmul(v.dt, v.d);
      const std::size_t lam_off = offset, rho_off = offset + 1, eta_off = offset + 2;
      offset += 3;
      v.theta = tape.scalar(std::exp(b.log_lambda - b.log_rho));
      rec.bindings.push_back({v.theta, lam_off, Binding::Map::kRatio, rho_off});
      v.rho = tape.scalar(b.rho());
      rec.bindings.push_back({v.rho, rho_off, Binding::Map::kExp});
      v.eta = tape.scalar(b.eta());
      rec.bindings.push_back({v.eta, eta_off, Binding::Map::kExp});
      bv.push_back(v);
    }
    vars.push_back(std::move(bv));
  }

  const ad::Var gram = tape.leaf(matmul_tn(w, w));
  const ad::Var wty = tape.leaf(matmul_tn(w, y));
  ad::Var x = tape.leaf(Matrix(w.cols(), 1));
  std::vector<ad::Var> z, alpha;
  if (!p.stages.empty()) {
    for (const auto& b : p.stages[0].branches) {
      z.push_back(tape.leaf(Matrix(b.d.rows(), 1)));
      alpha.push_back(tape.leaf(Matrix(b.d.rows(), 1)));
    }
  }
  for (std::size_t l = 0; l < p.depth; ++l) {
    const auto& bv = vars[p.tied ? 0 : l];
    if (bv.size() != z.size()) throw ShapeError("unrolled_admm_forward: stages disagree on branch count");
    ad::Var system = gram;
    ad::Var rhs = wty;
    for (std::size_t i = 0; i < bv.size(); ++i) {
      system = tape.add(system, tape.scale_by_param(bv[i].dtd, bv[i].rho));
      rhs = tape.add(rhs, tape.scale_by_param(tape.matmul(bv[i].dt, tape.sub(z[i], alpha[i])), bv[i].rho));
    }
    x = tape.solve(system, rhs);
    for (std::size_t i = 0; i < bv.size(); ++i) {
      const ad::Var dx = tape.matmul(bv[i].d, x);
      z[i] = tape.soft_threshold(tape.add(dx, alpha[i]), bv[i].theta);
      alpha[i] = tape.add(alpha[i], tape.scale_by_param(tape.sub(dx, z[i]), bv[i].eta));
    }
  }
  rec.output = x;
  return rec;
}

inline Matrix unrolled_admm_forward(const UnrolledAdmmParams& p, const Matrix& w, const Matrix& y) {
  ad::Tape tape;
  const auto rec = uadmm_record(tape, p, w, y);
  return tape.value(rec.output);
}

// ---------------------------------------------------------------------------
// Diagnostics and preprocessing
// ---------------------------------------------------------------------------

/// r_l = ‖W_t^l − (I − W_e^l·W)‖_F for every layer l (tied layers repeat).
template <class Params>
std::vector<double> weight_coupling_residual(const Params& p, const Matrix& w) {
  std::vector<double> out;
  for (std::size_t l = 0; l < p.depth; ++l) {
    const auto& layer = p.layer(l);
    const Matrix coupled = sub(Matrix::identity(layer.wt.rows()), matmul(layer.we, w));
    out.push_back(frobenius_norm(sub(layer.wt, coupled)));
  }
  return out;
}

/// Per-pixel unbiased temporal variance of T ≥ 2 frames, flattened row-major.
inline Matrix variance_image(std::span<const Matrix> frames) {
  if (frames.size() < 2) throw ContractError("variance_image: need at least two frames");
  const Matrix& first = frames.front();
  Matrix mean(first.rows(), first.cols());
  Matrix m2(first.rows(), first.cols());
  double count = 0.0;
  for (const auto& f : frames) {
    detail::require_same_shape(f, first, "variance_image");
    count += 1.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double delta = f[i] - mean[i];
      mean[i] += delta / count;
      m2[i] += delta * (f[i] - mean[i]);
    }
  }
  Matrix out(first.size(), 1);
  for (std::size_t i = 0; i < first.size(); ++i) out[i] = m2[i] / (count - 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Type-erased model used by training, checkpoints and the CLI.
// ---------------------------------------------------------------------------

enum class ModelKind { kLista, kLiht, kLsparcom, kUadmm };

inline std::string_view model_name(ModelKind k) {
  switch (k) {
    case ModelKind::kLista:
      return "lista";
    case ModelKind::kLiht:
      return "liht";
    case ModelKind::kLsparcom:
      return "lsparcom";
    case ModelKind::kUadmm:
      return "uadmm";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "lista") return ModelKind::kLista;
  if (s == "liht") return ModelKind::kLiht;
  if (s == "lsparcom") return ModelKind::kLsparcom;
  if (s == "uadmm") return ModelKind::kUadmm;
  throw ContractError("unknown model kind '" + std::string(s) + "'");
}

class UnrolledModel {
 public:
  using Params = std::variant<ListaParams, LihtParams, LSparcomParams, UnrolledAdmmParams>;

  explicit UnrolledModel(ListaParams p) : params_(std::move(p)) {}
  explicit UnrolledModel(LihtParams p) : params_(std::move(p)) {}
  explicit UnrolledModel(LSparcomParams p) : params_(std::move(p)) {}
  /// The unrolled ADMM network also needs the (fixed) measurement matrix.
  UnrolledModel(UnrolledAdmmParams p, Matrix measurement) : params_(std::move(p)), measurement_(std::move(measurement)) {}

  ModelKind kind() const { return static_cast<ModelKind>(params_.index()); }
  const Params& params() const noexcept { return params_; }
  Params& params() noexcept { return params_; }
  const Matrix& measurement() const noexcept { return measurement_; }

  std::size_t depth() const {
    return std::visit([](const auto& p) { return p.depth; }, params_);
  }
  std::size_t param_count() const {
    return std::visit([](const auto& p) { return unroll::param_count(p); }, params_);
  }
  std::vector<double> pack() const {
    return std::visit([](const auto& p) { return unroll::pack(p); }, params_);
  }
  void unpack(std::span<const double> flat) {
    std::visit([&](auto& p) { unroll::unpack(p, flat); }, params_);
  }

  Recorded record(ad::Tape& tape, const Matrix& input) const {
    return std::visit(
        [&](const auto& p) -> Recorded {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, ListaParams>) return lista_record(tape, p, input);
          if constexpr (std::is_same_v<P, LihtParams>) return liht_record(tape, p, input);
          if constexpr (std::is_same_v<P, LSparcomParams>) return lsparcom_record(tape, p, input);
          if constexpr (std::is_same_v<P, UnrolledAdmmParams>) return uadmm_record(tape, p, measurement_, input);
        },
        params_);
  }

  /// Single-sample inference.
  Matrix forward(const Matrix& input) const {
    ad::Tape tape;
    const auto rec = record(tape, input);
    return tape.value(rec.output);
  }

  /// Column-by-column inference over a batch of inputs.
  Matrix forward_columns(const Matrix& inputs) const {
    Matrix out;
    for (std::size_t c = 0; c < inputs.cols(); ++c) {
      const Matrix x = forward(inputs.col(c));
      if (c == 0) out = Matrix(x.rows(), inputs.cols());
      out.set_col(c, x);
    }
    return out;
  }

 private:
  Params params_;
  Matrix measurement_;
};

}  // namespace unroll
