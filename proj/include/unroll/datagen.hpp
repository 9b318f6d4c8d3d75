#pragma once

// Synthetic problem families with planted ground truth. A dataset is a URK1
// container with these arrays:
//
//   sparse coding   W, Y_train, X_train, P_train, Y_test, X_test, P_test
//                   (X = converged-ISTA supervision targets, P = planted codes)
//   rpca            Y, Lmat, Smat, H1, H2
//   lsparcom        W, Y_train, X_train, Y_test, X_test  (Y = variance images g_Y)
//
// plus 1x1 metadata scalars (seed, generator, ...).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "unroll/container.hpp"
#include "unroll/error.hpp"
#include "unroll/linalg.hpp"
#include "unroll/matrix.hpp"
#include "unroll/rng.hpp"
#include "unroll/solvers.hpp"

namespace unroll {

using Dataset = Container;

enum class GeneratorKind { kSparse = 0, kRpca = 1, kLsparcom = 2 };

inline GeneratorKind dataset_generator(const Dataset& d) {
  return static_cast<GeneratorKind>(static_cast<int>(d.scalar("generator")));
}

namespace detail {

inline Matrix unit_column_gaussian(std::size_t n, std::size_t m, Rng& rng) {
  Matrix w = gaussian_matrix(n, m, rng);
  for (std::size_t j = 0; j < m; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += w(i, j) * w(i, j);
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t i = 0; i < n; ++i) w(i, j) *= inv;
  }
  return w;
}

// k distinct positions, values with uniform sign and magnitude in [lo, lo + 1).
inline Matrix planted_code(std::size_t m, std::size_t k, double lo, bool signed_values, Rng& rng) {
  Matrix x(m, 1);
  for (std::size_t idx : sample_without_replacement(m, k, rng)) {
    const double sign = signed_values && rng.uniform() < 0.5 ? -1.0 : 1.0;
    x[idx] = sign * (lo + rng.uniform());
  }
  return x;
}

inline void check_columns(const Dataset& d, const char* x, const char* y) {
  if (d.contains(x) && d.contains(y) && d.matrix(x).cols() != d.matrix(y).cols()) {
    throw FormatError(std::string("dataset: ") + x + " and " + y + " have different column counts");
  }
}

}  // namespace detail

/// n x m dictionary with i.i.d. Gaussian entries (row-major draw order), columns scaled to unit ℓ2 norm.
inline Matrix gen_dictionary(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw ContractError("gen_dictionary: n and m must be at least 1");
  Rng rng(seed);
  return detail::unit_column_gaussian(n, m, rng);
}

/// The step bound used throughout: 1.01 · (power-iteration estimate of σ_max(W)²).
inline double safe_step_bound(const Matrix& w, std::uint64_t seed) { return 1.01 * power_iteration(w, 200, seed); }

struct SparseCodingSpec {
  std::size_t n = 20, m = 40, k = 3;
  std::size_t t_train = 1000, t_test = 200;
  double noise_sigma = 0.01;
  double lambda_sup = 0.1;
  std::uint64_t seed = 1;
};

/// Draw order from one Rng(seed) stream: W (row-major), then per sample
/// (training samples first) the support, the values, and the n noise entries.
/// Supervision targets are converged ISTA solutions (tol 1e-10), not the planted codes.
inline Dataset gen_sparse_coding_dataset(const SparseCodingSpec& s) {
  if (s.n < 1 || s.m < 1) throw ContractError("gen_sparse_coding_dataset: n and m must be at least 1");
  if (s.k > s.m) throw ContractError("gen_sparse_coding_dataset: k exceeds m");
  if (!(s.noise_sigma >= 0.0)) throw ContractError("gen_sparse_coding_dataset: noise sigma must be nonnegative");
  if (!(s.lambda_sup >= 0.0)) throw ContractError("gen_sparse_coding_dataset: lambda_sup must be nonnegative");
  Rng rng(s.seed);
  const Matrix w = detail::unit_column_gaussian(s.n, s.m, rng);
  const double mu = safe_step_bound(w, s.seed);

  IstaOptions ista;
  ista.tol = 1e-10;
  ista.max_iters = 200000;
  double iter_sum = 0.0;

  auto make_split = [&](std::size_t t, Matrix& y, Matrix& x, Matrix& planted) {
    y = Matrix(s.n, t);
    x = Matrix(s.m, t);
    planted = Matrix(s.m, t);
    for (std::size_t c = 0; c < t; ++c) {
      const Matrix code = detail::planted_code(s.m, s.k, 0.5, true, rng);
      Matrix yc = matmul(w, code);
      for (std::size_t i = 0; i < s.n; ++i) yc[i] += s.noise_sigma * rng.gaussian();
      planted.set_col(c, code);
      y.set_col(c, yc);
    }
    for (std::size_t c = 0; c < t; ++c) {
      const SolveTrace tr = ista_solve(w, y.col(c), s.lambda_sup, mu, ista);
      if (!tr.converged) throw NumericError("gen_sparse_coding_dataset: ISTA supervision did not converge");
      iter_sum += static_cast<double>(tr.iterations);
      x.set_col(c, tr.x);
    }
  };

  Matrix y_train, x_train, p_train, y_test, x_test, p_test;
  make_split(s.t_train, y_train, x_train, p_train);
  make_split(s.t_test, y_test, x_test, p_test);
  const std::size_t total = s.t_train + s.t_test;

  Dataset d;
  d.put("W", w);
  d.put("Y_train", y_train);
  d.put("X_train", x_train);
  d.put("P_train", p_train);
  d.put("Y_test", y_test);
  d.put("X_test", x_test);
  d.put("P_test", p_test);
  d.put_scalar("generator", static_cast<double>(GeneratorKind::kSparse));
  d.put_scalar("seed", static_cast<double>(s.seed));
  d.put_scalar("k", static_cast<double>(s.k));
  d.put_scalar("noise_sigma", s.noise_sigma);
  d.put_scalar("lambda_sup", s.lambda_sup);
  d.put_scalar("mu", mu);
  d.put_scalar("ista_mean_iters", total > 0 ? iter_sum / static_cast<double>(total) : 0.0);
  return d;
}

struct RpcaSpec {
  std::size_t rows = 32, cols = 50, rank = 2;
  double density = 0.05;
  double amplitude = 5.0;
  std::uint64_t seed = 3;
};

/// Y = H1·L + H2·S with H1 = H2 = I, L = A·Bᵀ (Gaussian factors) and S with
/// Bernoulli(density) support and ±amplitude values. Draw order: A, B (row-major),
/// then per entry of S in row-major order one uniform for support and, when
/// selected, one for the sign.
inline Dataset gen_rpca_dataset(const RpcaSpec& s) {
  if (s.rows < 1 || s.cols < 1) throw ContractError("gen_rpca_dataset: dimensions must be at least 1");
  if (s.rank > std::min(s.rows, s.cols)) throw ContractError("gen_rpca_dataset: rank exceeds min(rows, cols)");
  if (!(s.density >= 0.0 && s.density <= 1.0)) throw ContractError("gen_rpca_dataset: density must lie in [0, 1]");
  Rng rng(s.seed);
  const Matrix a = gaussian_matrix(s.rows, s.rank, rng);
  const Matrix b = gaussian_matrix(s.cols, s.rank, rng);
  const Matrix l = s.rank == 0 ? Matrix(s.rows, s.cols) : matmul(a, transpose(b));
  Matrix sp(s.rows, s.cols);
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (rng.uniform() < s.density) sp[i] = rng.uniform() < 0.5 ? -s.amplitude : s.amplitude;
  }
  const Matrix h1 = Matrix::identity(s.rows);
  const Matrix h2 = Matrix::identity(s.rows);
  Dataset d;
  d.put("Y", add(matmul(h1, l), matmul(h2, sp)));
  d.put("Lmat", l);
  d.put("Smat", sp);
  d.put("H1", h1);
  d.put("H2", h2);
  d.put_scalar("generator", static_cast<double>(GeneratorKind::kRpca));
  d.put_scalar("seed", static_cast<double>(s.seed));
  d.put_scalar("rank", static_cast<double>(s.rank));
  d.put_scalar("density", s.density);
  d.put_scalar("amplitude", s.amplitude);
  return d;
}

inline constexpr double kPsfSigma = 1.0;       // low-resolution pixels
inline constexpr double kPsfTruncation = 3.0;  // radius, low-resolution pixels

/// N² x M² dictionary. Column p·M + q is the Gaussian PSF of an emitter at
/// high-resolution cell (p, q), sampled on the N x N low-resolution grid
/// (row-major) and cut off beyond kPsfTruncation.
inline Matrix psf_dictionary(std::size_t n_low, std::size_t m_high) {
  if (n_low < 1 || m_high < n_low || m_high % n_low != 0) {
    throw ContractError("psf_dictionary: high-resolution size must be a positive multiple of the low-resolution size");
  }
  const double f = static_cast<double>(m_high / n_low);
  Matrix w(n_low * n_low, m_high * m_high);
  for (std::size_t p = 0; p < m_high; ++p) {
    for (std::size_t q = 0; q < m_high; ++q) {
      const double cr = (static_cast<double>(p) + 0.5) / f - 0.5;
      const double cc = (static_cast<double>(q) + 0.5) / f - 0.5;
      for (std::size_t r = 0; r < n_low; ++r) {
        for (std::size_t c = 0; c < n_low; ++c) {
          const double d2 = (static_cast<double>(r) - cr) * (static_cast<double>(r) - cr) +
                            (static_cast<double>(c) - cc) * (static_cast<double>(c) - cc);
          if (d2 > kPsfTruncation * kPsfTruncation) continue;
          w(r * n_low + c, p * m_high + q) = std::exp(-d2 / (2.0 * kPsfSigma * kPsfSigma));
        }
      }
    }
  }
  return w;
}

struct LsparcomSpec {
  std::size_t n_low = 8, m_high = 16, emitters = 5;
  std::size_t t_train = 200, t_test = 50;
  double noise_sigma = 0.0;
  std::uint64_t seed = 2;
};

/// g_Y = W·x for nonnegative sparse x with `emitters` nonzeros in [0.5, 1.5).
inline Dataset gen_lsparcom_dataset(const LsparcomSpec& s) {
  const Matrix w = psf_dictionary(s.n_low, s.m_high);
  if (s.emitters > w.cols()) throw ContractError("gen_lsparcom_dataset: more emitters than grid cells");
  if (!(s.noise_sigma >= 0.0)) throw ContractError("gen_lsparcom_dataset: noise sigma must be nonnegative");
  Rng rng(s.seed);
  auto make_split = [&](std::size_t t, Matrix& y, Matrix& x) {
    y = Matrix(w.rows(), t);
    x = Matrix(w.cols(), t);
    for (std::size_t c = 0; c < t; ++c) {
      const Matrix code = detail::planted_code(w.cols(), s.emitters, 0.5, false, rng);
      Matrix g = matmul(w, code);
      if (s.noise_sigma > 0.0)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s.noise_sigma * rng.gaussian();
      x.set_col(c, code);
      y.set_col(c, g);
    }
  };
  Matrix y_train, x_train, y_test, x_test;
  make_split(s.t_train, y_train, x_train);
  make_split(s.t_test, y_test, x_test);
  Dataset d;
  d.put("W", w);
  d.put("Y_train", y_train);
  d.put("X_train", x_train);
  d.put("Y_test", y_test);
  d.put("X_test", x_test);
  d.put_scalar("generator", static_cast<double>(GeneratorKind::kLsparcom));
  d.put_scalar("seed", static_cast<double>(s.seed));
  d.put_scalar("grid_low", static_cast<double>(s.n_low));
  d.put_scalar("grid_high", static_cast<double>(s.m_high));
  d.put_scalar("emitters", static_cast<double>(s.emitters));
  d.put_scalar("noise_sigma", s.noise_sigma);
  return d;
}

/// Structural checks on a loaded dataset: required arrays present and sample counts consistent.
inline void validate_dataset(const Dataset& d) {
  if (!d.contains("generator")) throw FormatError("dataset: missing generator tag");
  switch (dataset_generator(d)) {
    case GeneratorKind::kSparse:
      for (const char* name : {"W", "Y_train", "X_train", "P_train", "Y_test", "X_test", "P_test"}) (void)d.at(name);
      detail::check_columns(d, "P_train", "Y_train");
      detail::check_columns(d, "P_test", "Y_test");
      [[fallthrough]];
    case GeneratorKind::kLsparcom:
      for (const char* name : {"W", "Y_train", "X_train", "Y_test", "X_test"}) (void)d.at(name);
      detail::check_columns(d, "X_train", "Y_train");
      detail::check_columns(d, "X_test", "Y_test");
      break;
    case GeneratorKind::kRpca:
      for (const char* name : {"Y", "Lmat", "Smat", "H1", "H2"}) (void)d.at(name);
      break;
    default:
      throw FormatError("dataset: unknown generator tag");
  }
}

}  // namespace unroll
