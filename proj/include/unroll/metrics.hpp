#pragma once

#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "unroll/error.hpp"
#include "unroll/matrix.hpp"

namespace unroll {

/// ‖x̂ − x*‖² / ‖x*‖²
inline double nmse(const Matrix& estimate, const Matrix& reference) {
  detail::require_same_shape(estimate, reference, "nmse");
  const double den = squared_norm(reference);
  if (den == 0.0) throw DegenerateInputError("nmse: reference has zero norm");
  return squared_norm(sub(estimate, reference)) / den;
}

/// 10·log10(peak²·count / ‖x̂ − x*‖²); +∞ on an exact match.
inline double psnr(const Matrix& estimate, const Matrix& reference, double peak) {
  detail::require_same_shape(estimate, reference, "psnr");
  if (!(peak > 0.0)) throw ContractError("psnr: peak must be positive");
  const double err = squared_norm(sub(estimate, reference));
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak * static_cast<double>(estimate.size()) / err);
}

/// Shortest round-tripping decimal text; infinities as "inf"/"-inf", NaN as "nan".
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace unroll
