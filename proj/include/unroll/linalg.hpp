#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "unroll/matrix.hpp"
#include "unroll/rng.hpp"

namespace unroll {

struct SvdResult {
  Matrix u;               // m x r, orthonormal columns
  std::vector<double> s;  // r values, nonincreasing, nonnegative
  Matrix v;               // n x r, orthonormal columns
};

namespace detail {

inline constexpr int kMaxJacobiSweeps = 1000;

// One-sided (Hestenes) Jacobi on a tall matrix. Works on the transpose so that
// the columns being rotated are contiguous rows.
inline SvdResult jacobi_svd_tall(const Matrix& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Matrix ut = transpose(a);        // n x m, row j is column j of the working U
  Matrix vt = Matrix::identity(n);  // row j is column j of V
  const double tol = static_cast<double>(std::max<std::size_t>(m, 1)) * std::numeric_limits<double>::epsilon();

  bool converged = n < 2;
  for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto up = ut.row(p);
        auto uq = ut.row(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += up[i] * up[i];
          beta += uq[i] * uq[i];
          gamma += up[i] * uq[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = up[i], y = uq[i];
          up[i] = c * x - s * y;
          uq[i] = s * x + c * y;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i], y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) throw NumericError("svd: Jacobi iteration did not converge within 1000 sweeps");

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double ss = 0.0;
    for (double x : ut.row(j)) ss += x * x;
    norms[j] = std::sqrt(ss);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return norms[i] > norms[j]; });

  const double smax = n > 0 ? norms[order[0]] : 0.0;
  const double zero_tol = smax * static_cast<double>(std::max(m, n)) * std::numeric_limits<double>::epsilon();

  SvdResult r{Matrix(m, n), std::vector<double>(n, 0.0), Matrix(n, n)};
  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    for (std::size_t i = 0; i < n; ++i) r.v(i, k) = vt(j, i);
    if (norms[j] > zero_tol) {
      r.s[k] = norms[j];
      for (std::size_t i = 0; i < m; ++i) r.u(i, k) = ut(j, i) / norms[j];
    } else {
      missing.push_back(k);
    }
  }

  // Complete U for zero singular values: project standard basis vectors off
  // the accepted columns and take the best-conditioned candidate.
  std::vector<bool> filled(n, true);
  for (std::size_t k : missing) filled[k] = false;
  for (std::size_t k : missing) {
    Matrix best;
    double best_norm = -1.0;
    for (std::size_t e = 0; e < m; ++e) {
      Matrix cand(m, 1);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t c = 0; c < n; ++c) {
          if (!filled[c]) continue;
          double proj = 0.0;
          for (std::size_t i = 0; i < m; ++i) proj += r.u(i, c) * cand[i];
          for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * r.u(i, c);
        }
      }
      const double nrm = frobenius_norm(cand);
      if (nrm > best_norm) {
        best_norm = nrm;
        best = cand;
      }
    }
    for (std::size_t i = 0; i < m; ++i) r.u(i, k) = best[i] / best_norm;
    filled[k] = true;
  }
  return r;
}

// Largest-magnitude entry of every u-column made positive; ties go to the lowest row.
inline void fix_svd_signs(SvdResult& r) {
  for (std::size_t k = 0; k < r.u.cols(); ++k) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < r.u.rows(); ++i) {
      if (std::abs(r.u(i, k)) > best) {
        best = std::abs(r.u(i, k));
        arg = i;
      }
    }
    if (r.u.rows() > 0 && r.u(arg, k) < 0.0) {
      for (std::size_t i = 0; i < r.u.rows(); ++i) r.u(i, k) = -r.u(i, k);
      for (std::size_t i = 0; i < r.v.rows(); ++i) r.v(i, k) = -r.v(i, k);
    }
  }
}

}  // namespace detail

/// Thin SVD by one-sided Jacobi. r = min(m, n); sign-normalized so that the
/// result is a deterministic function of the input.
inline SvdResult svd(const Matrix& a) {
  a.require_finite("svd input");
  SvdResult r;
  if (a.rows() >= a.cols()) {
    r = detail::jacobi_svd_tall(a);
  } else {
    SvdResult t = detail::jacobi_svd_tall(transpose(a));
    r = SvdResult{std::move(t.v), std::move(t.s), std::move(t.u)};
  }
  detail::fix_svd_signs(r);
  return r;
}

/// U·diag(s)·Vᵀ
inline Matrix reconstruct(const Matrix& u, std::span<const double> s, const Matrix& v) {
  Matrix us = u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= s[k];
  return matmul(us, transpose(v));
}

inline double nuclear_norm(const Matrix& a) {
  const auto r = svd(a);
  return std::accumulate(r.s.begin(), r.s.end(), 0.0);
}

/// Estimate of σ_max(a)², the largest eigenvalue of aᵀa, from the Rayleigh
/// quotient after `iters` power steps from a seeded Gaussian start.
inline double power_iteration(const Matrix& a, std::size_t iters, std::uint64_t seed) {
  if (a.empty() || max_abs(a) == 0.0) throw DegenerateInputError("power_iteration: zero matrix");
  Rng rng(seed);
  Matrix v = gaussian_matrix(a.cols(), 1, rng);
  v = scale(v, 1.0 / frobenius_norm(v));
  for (std::size_t it = 0; it < iters; ++it) {
    Matrix w = matmul_tn(a, matmul(a, v));
    const double nrm = frobenius_norm(w);
    if (nrm == 0.0) throw DegenerateInputError("power_iteration: start vector in the null space");
    v = scale(w, 1.0 / nrm);
  }
  return squared_norm(matmul(a, v));
}

using LinearOperator = std::function<Matrix(const Matrix&)>;

/// Conjugate gradient for symmetric positive definite operators, from x = 0.
/// Returns x with ‖A x − b‖₂ ≤ tol·‖b‖₂ (checked on the true residual).
inline Matrix cg_solve(const LinearOperator& apply_a, const Matrix& b, double tol, std::size_t max_iters) {
  if (!(tol > 0.0)) throw ContractError("cg_solve: tol must be positive");
  Matrix x(b.rows(), b.cols());
  const double bnorm = frobenius_norm(b);
  if (bnorm == 0.0) return x;
  const double target = tol * bnorm;

  Matrix r = b;
  Matrix p = r;
  double rr = squared_norm(r);
  for (std::size_t it = 0; it < max_iters; ++it) {
    const Matrix ap = apply_a(p);
    if (!ap.same_shape(b)) throw ShapeError("cg_solve: operator changed the shape of its input");
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) throw NumericError("cg_solve: operator is not positive definite", std::sqrt(rr));
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    double rr_next = squared_norm(r);
    if (std::sqrt(rr_next) <= target) {
      // The recursive residual drifts; confirm against the true one and restart if needed.
      Matrix true_r = sub(b, apply_a(x));
      const double true_norm = frobenius_norm(true_r);
      if (true_norm <= target) return x;
      r = std::move(true_r);
      p = r;
      rr = true_norm * true_norm;
      continue;
    }
    const double beta = rr_next / rr;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    rr = rr_next;
  }
  const double final_res = frobenius_norm(sub(b, apply_a(x)));
  if (final_res <= target) return x;
  throw NumericError("cg_solve: no convergence after " + std::to_string(max_iters) + " iterations, residual " +
                         std::to_string(final_res),
                     final_res);
}

/// Cholesky factorization A = L·Lᵀ of a symmetric positive definite matrix.
class Cholesky {
 public:
  explicit Cholesky(const Matrix& a) : l_(a.rows(), a.cols()) {
    if (a.rows() != a.cols()) throw ShapeError("cholesky: matrix is not square: " + a.shape_string());
    const std::size_t n = a.rows();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
    const double floor = 1e-13 * max_diag;
    for (std::size_t j = 0; j < n; ++j) {
      double d = a(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (!(d > floor)) throw NumericError("cholesky: matrix is singular or not positive definite");
      const double ljj = std::sqrt(d);
      l_(j, j) = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = a(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s / ljj;
      }
    }
  }

  /// Solves A·X = B column by column.
  Matrix solve(const Matrix& b) const {
    const std::size_t n = l_.rows();
    if (b.rows() != n) throw ShapeError("cholesky solve: rhs " + b.shape_string() + " vs system " + l_.shape_string());
    Matrix x = b;
    for (std::size_t c = 0; c < b.cols(); ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = x(i, c);
        for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * x(k, c);
        x(i, c) = s / l_(i, i);
      }
      for (std::size_t i = n; i-- > 0;) {
        double s = x(i, c);
        for (std::size_t k = i + 1; k < n; ++k) s -= l_(k, i) * x(k, c);
        x(i, c) = s / l_(i, i);
      }
    }
    x.require_finite("cholesky solve");
    return x;
  }

  const Matrix& factor() const noexcept { return l_; }

 private:
  Matrix l_;
};

/// LU factorization with partial pivoting, P·A = L·U. Supports solves with A and Aᵀ.
class Lu {
 public:
  explicit Lu(const Matrix& a) : lu_(a), perm_(a.rows()) {
    if (a.rows() != a.cols()) throw ShapeError("lu: matrix is not square: " + a.shape_string());
    const std::size_t n = a.rows();
    std::iota(perm_.begin(), perm_.end(), 0);
    const double scale = max_abs(a);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
      if (!(std::abs(lu_(piv, k)) > 1e-14 * scale)) throw NumericError("lu: matrix is singular");
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = lu_(i, k) / lu_(k, k);
        lu_(i, k) = f;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  Matrix solve(const Matrix& b) const {
    check(b);
    const std::size_t n = lu_.rows();
    Matrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = b(perm_[i], c);
        for (std::size_t k = 0; k < i; ++k) s -= lu_(i, k) * x(k, c);
        x(i, c) = s;
      }
      for (std::size_t i = n; i-- > 0;) {
        double s = x(i, c);
        for (std::size_t k = i + 1; k < n; ++k) s -= lu_(i, k) * x(k, c);
        x(i, c) = s / lu_(i, i);
      }
    }
    x.require_finite("lu solve");
    return x;
  }

  /// Solves Aᵀ·X = B.
  Matrix solve_transposed(const Matrix& b) const {
    check(b);
    const std::size_t n = lu_.rows();
    Matrix w(n, b.cols());
    Matrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
      // Uᵀ w = b
      for (std::size_t i = 0; i < n; ++i) {
        double s = b(i, c);
        for (std::size_t k = 0; k < i; ++k) s -= lu_(k, i) * w(k, c);
        w(i, c) = s / lu_(i, i);
      }
      // Lᵀ v = w, then x = Pᵀ v
      for (std::size_t i = n; i-- > 0;) {
        double s = w(i, c);
        for (std::size_t k = i + 1; k < n; ++k) s -= lu_(k, i) * w(k, c);
        w(i, c) = s;
      }
      for (std::size_t i = 0; i < n; ++i) x(perm_[i], c) = w(i, c);
    }
    x.require_finite("lu solve_transposed");
    return x;
  }

 private:
  void check(const Matrix& b) const {
    if (b.rows() != lu_.rows()) throw ShapeError("lu solve: rhs " + b.shape_string() + " vs system " + lu_.shape_string());
  }

  Matrix lu_;
  std::vector<std::size_t> perm_;
};

}  // namespace unroll
