#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "unroll/linalg.hpp"
#include "unroll/matrix.hpp"

namespace unroll {

inline double soft_threshold_scalar(double x, double lambda) noexcept {
  const double mag = std::abs(x) - lambda;
  if (mag <= 0.0) return 0.0;
  return x > 0.0 ? mag : -mag;
}

/// Entrywise sign(x)·max(|x| − λ, 0).
inline Matrix soft_threshold(const Matrix& x, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("soft_threshold: lambda must be nonnegative");
  Matrix y = x;
  for (double& v : y.values()) v = soft_threshold_scalar(v, lambda);
  return y;
}

/// Flat indices of the k largest-magnitude entries, ties resolved toward the lowest index.
inline std::vector<std::size_t> topk_indices(const Matrix& x, std::size_t k) {
  if (k > x.size()) throw ContractError("hard_threshold_topk: k exceeds the number of entries");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(x[a]) > std::abs(x[b]); });
  order.resize(k);
  return order;
}

/// Keeps the k largest-magnitude entries and zeros the rest.
inline Matrix hard_threshold_topk(const Matrix& x, std::size_t k) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t i : topk_indices(x, k)) y[i] = x[i];
  return y;
}

/// max(0, x) / (1 + exp(−β(|x| − α))). Overflow of the exponential yields 0.
inline double sigmoid_plus_scalar(double x, double alpha, double beta) noexcept {
  if (x <= 0.0) return 0.0;
  return x / (1.0 + std::exp(-beta * (std::abs(x) - alpha)));
}

/// Smooth one-sided (positive) hard threshold.
inline Matrix sigmoid_plus_threshold(const Matrix& x, double alpha, double beta) {
  if (!(beta > 0.0)) throw ContractError("sigmoid_plus_threshold: beta must be positive");
  Matrix y = x;
  for (double& v : y.values()) v = sigmoid_plus_scalar(v, alpha, beta);
  y.require_finite("sigmoid_plus_threshold");
  return y;
}

/// Each row r becomes r·max(0, 1 − λ/‖r‖₂); zero rows stay zero.
inline Matrix row_group_soft_threshold(const Matrix& s, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("row_group_soft_threshold: lambda must be nonnegative");
  Matrix y = s;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto row = y.row(i);
    double ss = 0.0;
    for (double v : row) ss += v * v;
    const double nrm = std::sqrt(ss);
    const double factor = nrm > lambda ? 1.0 - lambda / nrm : 0.0;
    for (double& v : row) v *= factor;
  }
  return y;
}

/// U·diag(S_λ(σ))·Vᵀ, the prox of λ‖·‖_*.
inline Matrix singular_value_threshold(const Matrix& x, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("singular_value_threshold: lambda must be nonnegative");
  SvdResult r = svd(x);
  for (double& s : r.s) s = soft_threshold_scalar(s, lambda);
  return reconstruct(r.u, r.s, r.v);
}

/// Σ over rows of the row ℓ2 norms.
inline double mixed_l12_norm(const Matrix& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double ss = 0.0;
    for (double v : s.row(i)) ss += v * v;
    total += std::sqrt(ss);
  }
  return total;
}

}  // namespace unroll
