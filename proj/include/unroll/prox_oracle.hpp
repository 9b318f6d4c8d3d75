#pragma once

// Derivative-free reference for proximal operators. Slow by construction: it
// only evaluates the penalized objective λ·g(u) + ½‖u − z‖² and searches for its
// minimizer, so it shares no code path with the closed-form operators.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "unroll/matrix.hpp"

namespace unroll {

enum class Penalty {
  kZero,      // g = 0
  kL1,        // g = ‖u‖₁, separable
  kRowGroup,  // g = Σ_rows ‖row‖₂, rows of at most 4 entries
  kNuclear,   // g = ‖U‖_*, 2x2 only
};

namespace detail {

// Grid scan of a scalar function over [lo, hi] followed by ternary refinement
// inside the bracketing cell pair.
inline double scan_then_ternary(const std::function<double(double)>& f, double lo, double hi, double step) {
  const auto count = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  double best_u = lo, best_f = f(lo);
  for (std::size_t i = 1; i < count; ++i) {
    const double u = std::min(hi, lo + static_cast<double>(i) * step);
    const double fu = f(u);
    if (fu < best_f) {
      best_f = fu;
      best_u = u;
    }
  }
  double a = best_u - step, b = best_u + step;
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
    if (f(m1) <= f(m2)) {
      b = m2;
    } else {
      a = m1;
    }
  }
  return 0.5 * (a + b);
}

// Golden-section minimization of a convex scalar function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Minimizes a jointly convex function of up to 4 variables over the box
// [−half_width, half_width]^d by nested exact line minimization: the partial
// minimum over the trailing coordinates is again convex in the leading ones.
inline std::vector<double> nested_convex_min(const std::function<double(const std::vector<double>&)>& f,
                                             std::size_t dims, double half_width, double tol) {
  if (dims == 0) return {};
  if (dims > 4) throw ContractError("prox oracle: search limited to 4 dimensions");
  std::vector<double> u(dims, 0.0);
  std::function<double(std::size_t)> inner = [&](std::size_t level) -> double {
    if (level == dims) return f(u);
    auto line = [&](double t) {
      u[level] = t;
      return inner(level + 1);
    };
    const double best = golden_min(line, -half_width, half_width, tol);
    return line(best);
  };
  inner(0);
  return u;
}

}  // namespace detail

/// Minimizer of λ·g(u) + ½‖u − z‖² by derivative-free search over the box
/// ±(‖z‖_max + 3λ), resolved to well below `grid_step`. Separable penalties are
/// scanned per coordinate at `grid_step` and then refined by ternary search.
inline Matrix prox_bruteforce_oracle(Penalty g, const Matrix& z, double lambda, double grid_step) {
  if (!(grid_step > 0.0)) throw ContractError("prox oracle: grid_step must be positive");
  if (!(lambda >= 0.0)) throw ContractError("prox oracle: lambda must be nonnegative");
  const double bound = max_abs(z) + 3.0 * lambda + grid_step;
  switch (g) {
    case Penalty::kZero:
      return z;
    case Penalty::kL1: {
      Matrix out(z.rows(), z.cols());
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double zi = z[i];
        auto obj = [&](double u) { return lambda * std::abs(u) + 0.5 * (u - zi) * (u - zi); };
        out[i] = detail::scan_then_ternary(obj, -bound, bound, grid_step);
      }
      return out;
    }
    case Penalty::kRowGroup: {
      Matrix out(z.rows(), z.cols());
      for (std::size_t r = 0; r < z.rows(); ++r) {
        const auto row = z.row(r);
        auto obj = [&](const std::vector<double>& u) {
          double ss = 0.0, fit = 0.0;
          for (std::size_t j = 0; j < u.size(); ++j) {
            ss += u[j] * u[j];
            fit += (u[j] - row[j]) * (u[j] - row[j]);
          }
          return lambda * std::sqrt(ss) + 0.5 * fit;
        };
        const auto best = detail::nested_convex_min(obj, z.cols(), bound, grid_step * 1e-6);
        for (std::size_t j = 0; j < z.cols(); ++j) out(r, j) = best[j];
      }
      return out;
    }
    case Penalty::kNuclear: {
      if (z.rows() != 2 || z.cols() != 2) throw ContractError("prox oracle: nuclear penalty supports 2x2 only");
      // For 2x2, σ₁ + σ₂ = sqrt(‖X‖_F² + 2|det X|).
      auto obj = [&](const std::vector<double>& u) {
        const double fro2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3];
        const double det = u[0] * u[3] - u[1] * u[2];
        double fit = 0.0;
        for (std::size_t j = 0; j < 4; ++j) fit += (u[j] - z[j]) * (u[j] - z[j]);
        return lambda * std::sqrt(fro2 + 2.0 * std::abs(det)) + 0.5 * fit;
      };
      const auto best = detail::nested_convex_min(obj, 4, bound, grid_step * 1e-6);
      return Matrix(2, 2, best);
    }
  }
  throw ContractError("prox oracle: unsupported penalty kind");
}

}  // namespace unroll
