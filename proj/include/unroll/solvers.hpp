#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "unroll/linalg.hpp"
#include "unroll/matrix.hpp"
#include "unroll/prox.hpp"

namespace unroll {

/// Record of one iterative solve. `objective` has one entry per iteration
/// performed; `iterates` is filled only when requested.
struct SolveTrace {
  Matrix x;
  std::vector<double> objective;
  std::vector<Matrix> iterates;
  std::vector<double> primal_residual;  // ADMM only: sqrt(Σ_i ‖D_i x − z_i‖²) per iteration
  std::size_t iterations = 0;
  bool converged = false;
};

/// W_t = I − (1/μ)WᵀW and W_e = (1/μ)Wᵀ, the weights one ISTA/IHT step applies.
struct StepWeights {
  Matrix wt;
  Matrix we;
};

inline StepWeights analytic_step_weights(const Matrix& w, double mu) {
  if (!(mu > 0.0)) throw ContractError("step weights: mu must be positive");
  const double inv = 1.0 / mu;
  return {sub(Matrix::identity(w.cols()), scale(matmul_tn(w, w), inv)), scale(transpose(w), inv)};
}

inline double lasso_objective(const Matrix& w, const Matrix& y, const Matrix& x, double lambda) {
  return 0.5 * squared_norm(sub(y, matmul(w, x))) + lambda * l1_norm(x);
}

using GradientOperator = std::function<Matrix(const Matrix&)>;
/// prox(v, t): proximal map of the regularizer with threshold t.
using ProxOperator = std::function<Matrix(const Matrix&, double)>;
using StepSchedule = std::function<double(std::size_t)>;

struct PgdOptions {
  std::size_t max_iters = 1000;
  double tol = 0.0;  // stop when ‖x_{k+1} − x_k‖₂ ≤ tol; 0 runs to max_iters unless a fixed point is hit
  bool keep_iterates = false;
  std::function<double(const Matrix&)> objective;  // optional, evaluated on every new iterate
};

/// Proximal gradient descent: x_{k+1} = prox(x_k − γ_{k+1}·∇ρ(x_k); λ·γ_{k+1}).
/// The schedule is queried with k + 1 for the step producing x_{k+1}.
inline SolveTrace pgd_solve(const GradientOperator& grad, const ProxOperator& prox, Matrix x0,
                            const StepSchedule& gamma, double lambda, const PgdOptions& opts) {
  SolveTrace trace;
  Matrix x = std::move(x0);
  for (std::size_t k = 0; k < opts.max_iters; ++k) {
    const double step = gamma(k + 1);
    if (!(step > 0.0)) throw ContractError("pgd_solve: step sizes must be positive");
    const Matrix g = grad(x);
    if (!g.same_shape(x)) throw ShapeError("pgd_solve: gradient shape " + g.shape_string() + " vs " + x.shape_string());
    Matrix v = x;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] - step * g[i];
    Matrix next = prox(v, lambda * step);
    const double change = frobenius_norm(sub(next, x));
    x = std::move(next);
    ++trace.iterations;
    if (opts.objective) trace.objective.push_back(opts.objective(x));
    if (opts.keep_iterates) trace.iterates.push_back(x);
    if (change <= opts.tol) {
      trace.converged = true;
      break;
    }
  }
  trace.x = std::move(x);
  return trace;
}

struct IstaOptions {
  std::size_t max_iters = 1000;
  double tol = 1e-8;
  bool keep_iterates = false;
};

/// ISTA for ½‖y − Wx‖² + λ‖x‖₁ from x⁰ = 0. The threshold per step is λ/μ so
/// that fixed points are lasso minimizers; μ must bound σ_max(W)².
inline SolveTrace ista_solve(const Matrix& w, const Matrix& y, double lambda, double mu, const IstaOptions& opts = {}) {
  if (!(mu > 0.0)) throw ContractError("ista_solve: mu must be positive");
  if (!(lambda >= 0.0)) throw ContractError("ista_solve: lambda must be nonnegative");
  if (w.rows() != y.rows()) throw ShapeError("ista_solve: W " + w.shape_string() + " vs y " + y.shape_string());
  const Matrix gram = matmul_tn(w, w);
  const Matrix wty = matmul_tn(w, y);
  PgdOptions p;
  p.max_iters = opts.max_iters;
  p.tol = opts.tol;
  p.keep_iterates = opts.keep_iterates;
  p.objective = [&](const Matrix& x) { return lasso_objective(w, y, x, lambda); };
  return pgd_solve([&](const Matrix& x) { return sub(matmul(gram, x), wty); },
                   [](const Matrix& v, double t) { return soft_threshold(v, t); }, Matrix(w.cols(), y.cols()),
                   [mu](std::size_t) { return 1.0 / mu; }, lambda, p);
}

/// IHT for ½‖y − Wx‖² s.t. ‖x‖₀ ≤ k, in the W_t/W_e form: x ← H_k(W_t x + W_e y).
/// Stops early only at an exact fixed point.
inline SolveTrace iht_solve(const Matrix& w, const Matrix& y, std::size_t k, double mu, std::size_t max_iters,
                            bool keep_iterates = false) {
  if (k < 1) throw ContractError("iht_solve: k must be at least 1");
  if (k > w.cols()) throw ContractError("iht_solve: k exceeds the code length");
  if (w.rows() != y.rows()) throw ShapeError("iht_solve: W " + w.shape_string() + " vs y " + y.shape_string());
  const StepWeights sw = analytic_step_weights(w, mu);
  const Matrix wey = matmul(sw.we, y);
  SolveTrace trace;
  Matrix x(w.cols(), y.cols());
  for (std::size_t it = 0; it < max_iters; ++it) {
    Matrix next = hard_threshold_topk(add(matmul(sw.wt, x), wey), k);
    const bool fixed = next == x;
    x = std::move(next);
    ++trace.iterations;
    trace.objective.push_back(0.5 * squared_norm(sub(y, matmul(w, x))));
    if (keep_iterates) trace.iterates.push_back(x);
    if (fixed) {
      trace.converged = true;
      break;
    }
  }
  trace.x = std::move(x);
  return trace;
}

struct RpcaResult {
  Matrix low_rank;
  Matrix sparse;
  SolveTrace trace;
};

inline double rpca_objective(const Matrix& y, const Matrix& h1, const Matrix& h2, const Matrix& l, const Matrix& s,
                             double lambda1, double lambda2) {
  const Matrix resid = sub(y, add(matmul(h1, l), matmul(h2, s)));
  return 0.5 * squared_norm(resid) + lambda1 * nuclear_norm(l) + lambda2 * mixed_l12_norm(s);
}

/// Generalized ISTA for ½‖Y − H1·L − H2·S‖_F² + λ1‖L‖_* + λ2‖S‖_{1,2}, from
/// L = S = 0. Both blocks are updated from the previous iterate, with the 1/μ
/// gradient-step scaling applied to the self, cross and data terms alike.
inline RpcaResult rpca_ista_solve(const Matrix& y, const Matrix& h1, const Matrix& h2, double lambda1, double lambda2,
                                  double mu, std::size_t max_iters, double tol = 0.0) {
  if (!(mu > 0.0)) throw ContractError("rpca_ista_solve: mu must be positive");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ContractError("rpca_ista_solve: lambdas must be nonnegative");
  if (h1.rows() != y.rows() || h2.rows() != y.rows()) {
    throw ShapeError("rpca_ista_solve: H1 " + h1.shape_string() + ", H2 " + h2.shape_string() + " vs Y " +
                     y.shape_string());
  }
  const double inv = 1.0 / mu;
  const Matrix a11 = sub(Matrix::identity(h1.cols()), scale(matmul_tn(h1, h1), inv));
  const Matrix a12 = scale(matmul_tn(h1, h2), inv);
  const Matrix b1 = scale(matmul_tn(h1, y), inv);
  const Matrix a22 = sub(Matrix::identity(h2.cols()), scale(matmul_tn(h2, h2), inv));
  const Matrix a21 = scale(matmul_tn(h2, h1), inv);
  const Matrix b2 = scale(matmul_tn(h2, y), inv);

  RpcaResult out{Matrix(h1.cols(), y.cols()), Matrix(h2.cols(), y.cols()), {}};
  for (std::size_t it = 0; it < max_iters; ++it) {
    Matrix l_next = singular_value_threshold(add(sub(matmul(a11, out.low_rank), matmul(a12, out.sparse)), b1), lambda1 * inv);
    Matrix s_next =
        row_group_soft_threshold(add(sub(matmul(a22, out.sparse), matmul(a21, out.low_rank)), b2), lambda2 * inv);
    const double change = std::sqrt(squared_norm(sub(l_next, out.low_rank)) + squared_norm(sub(s_next, out.sparse)));
    out.low_rank = std::move(l_next);
    out.sparse = std::move(s_next);
    ++out.trace.iterations;
    out.trace.objective.push_back(rpca_objective(y, h1, h2, out.low_rank, out.sparse, lambda1, lambda2));
    if (change <= tol) {
      out.trace.converged = true;
      break;
    }
  }
  out.trace.x = out.low_rank;
  return out;
}

struct AdmmCoefficients {
  double lambda = 0.0;
  double rho = 1.0;
  double eta = 1.0;
};

/// ADMM on ½‖Wx − y‖² + Σ_i λ_i‖D_i x‖₁ with splitting z_i = D_i x and scaled
/// duals α_i, all starting at zero:
///   x   ← (WᵀW + Σ ρ_i D_iᵀD_i)⁻¹ (Wᵀy + Σ ρ_i D_iᵀ(z_i − α_i))
///   z_i ← S_{λ_i/ρ_i}(D_i x + α_i)
///   α_i ← α_i + η_i (D_i x − z_i)
inline SolveTrace admm_cs_solve(const Matrix& w, const Matrix& y, const std::vector<Matrix>& ops,
                                const std::vector<AdmmCoefficients>& coeffs, std::size_t max_iters,
                                bool keep_iterates = false) {
  if (ops.size() != coeffs.size()) throw ContractError("admm_cs_solve: one coefficient triple per operator");
  if (w.rows() != y.rows()) throw ShapeError("admm_cs_solve: W " + w.shape_string() + " vs y " + y.shape_string());
  Matrix system = matmul_tn(w, w);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (!(coeffs[i].rho > 0.0)) throw ContractError("admm_cs_solve: rho must be positive");
    if (!(coeffs[i].lambda >= 0.0)) throw ContractError("admm_cs_solve: lambda must be nonnegative");
    if (ops[i].cols() != w.cols()) throw ShapeError("admm_cs_solve: operator " + ops[i].shape_string());
    system = add(system, scale(matmul_tn(ops[i], ops[i]), coeffs[i].rho));
  }
  const Cholesky chol(system);
  const Matrix wty = matmul_tn(w, y);

  std::vector<Matrix> z, alpha;
  for (const auto& d : ops) {
    z.emplace_back(d.rows(), y.cols());
    alpha.emplace_back(d.rows(), y.cols());
  }
  SolveTrace trace;
  Matrix x(w.cols(), y.cols());
  for (std::size_t it = 0; it < max_iters; ++it) {
    Matrix rhs = wty;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      rhs = add(rhs, scale(matmul_tn(ops[i], sub(z[i], alpha[i])), coeffs[i].rho));
    }
    x = chol.solve(rhs);
    double resid2 = 0.0, penalty = 0.0;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const Matrix dx = matmul(ops[i], x);
      z[i] = soft_threshold(add(dx, alpha[i]), coeffs[i].lambda / coeffs[i].rho);
      const Matrix gap = sub(dx, z[i]);
      alpha[i] = add(alpha[i], scale(gap, coeffs[i].eta));
      resid2 += squared_norm(gap);
      penalty += coeffs[i].lambda * l1_norm(dx);
    }
    ++trace.iterations;
    trace.primal_residual.push_back(std::sqrt(resid2));
    trace.objective.push_back(0.5 * squared_norm(sub(matmul(w, x), y)) + penalty);
    if (keep_iterates) trace.iterates.push_back(x);
  }
  trace.x = std::move(x);
  return trace;
}

using Denoiser = std::function<Matrix(const Matrix&)>;

inline Denoiser identity_denoiser() {
  return [](const Matrix& x) { return x; };
}

inline Denoiser soft_threshold_denoiser(double tau) {
  if (!(tau >= 0.0)) throw ContractError("soft_threshold_denoiser: tau must be nonnegative");
  return [tau](const Matrix& x) { return soft_threshold(x, tau); };
}

/// Median of each entry and its two vertical neighbours, edges replicated.
inline Denoiser median3_denoiser() {
  return [](const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) {
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const double a = x(i == 0 ? 0 : i - 1, c);
        const double b = x(i, c);
        const double d = x(i + 1 < x.rows() ? i + 1 : i, c);
        out(i, c) = std::max(std::min(a, b), std::min(std::max(a, b), d));
      }
    }
    return out;
  };
}

/// Alternation z_k = D(x_k); x_{k+1} = (WᵀW + λI)⁻¹(Wᵀy + λ z_k), each
/// data-consistency solve done by conjugate gradient to relative tolerance cg_tol.
/// Starts from x₀ = 0; iterates are x₁..x_K.
inline SolveTrace modl_alternation(const Matrix& w, const Matrix& y, double lambda, const Denoiser& denoiser,
                                   std::size_t iterations, double cg_tol, bool keep_iterates = true) {
  if (!(lambda > 0.0)) throw ContractError("modl_alternation: lambda must be positive");
  if (iterations < 1) throw ContractError("modl_alternation: need at least one iteration");
  if (w.rows() != y.rows()) throw ShapeError("modl_alternation: W " + w.shape_string() + " vs y " + y.shape_string());
  const Matrix wty = matmul_tn(w, y);
  const LinearOperator normal = [&](const Matrix& v) { return add(matmul_tn(w, matmul(w, v)), scale(v, lambda)); };
  const std::size_t cg_budget = 20 * (w.cols() + 10);

  SolveTrace trace;
  Matrix x(w.cols(), y.cols());
  for (std::size_t k = 0; k < iterations; ++k) {
    const Matrix z = denoiser(x);
    if (!z.same_shape(x)) throw ShapeError("modl_alternation: denoiser changed the shape of its input");
    x = cg_solve(normal, add(wty, scale(z, lambda)), cg_tol, cg_budget);
    ++trace.iterations;
    trace.objective.push_back(squared_norm(sub(matmul(w, x), y)) + lambda * squared_norm(sub(x, denoiser(x))));
    if (keep_iterates) trace.iterates.push_back(x);
  }
  trace.converged = true;
  trace.x = std::move(x);
  return trace;
}

}  // namespace unroll
