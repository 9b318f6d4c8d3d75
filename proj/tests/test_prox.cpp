#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "unroll/linalg.hpp"
#include "unroll/prox.hpp"
#include "unroll/prox_oracle.hpp"

using namespace unroll;

TEST(SoftThreshold, ScalarCases) {
  EXPECT_EQ(soft_threshold(Matrix::column({3.0}), 1.0)[0], 2.0);
  EXPECT_EQ(soft_threshold(Matrix::column({-0.5}), 1.0)[0], 0.0);
  const Matrix x = oracle::random(4, 3, 1);
  EXPECT_EQ(soft_threshold(x, 0.0), x);
  EXPECT_THROW(soft_threshold(x, -0.1), ContractError);
}

TEST(SoftThreshold, MatchesBruteForceProx) {
  const Matrix z = oracle::random(4, 4, 2);
  const Matrix ref = prox_bruteforce_oracle(Penalty::kL1, z, 0.3, 1e-4);
  EXPECT_LE(max_abs_diff(soft_threshold(z, 0.3), ref), 1e-4);
}

TEST(SoftThreshold, NonexpansiveAndHomogeneous) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = 3.0 * rng.gaussian(), b = 3.0 * rng.gaussian(), lam = rng.uniform();
    EXPECT_LE(std::abs(soft_threshold_scalar(a, lam) - soft_threshold_scalar(b, lam)), std::abs(a - b) * (1.0 + 1e-15));
    const double c = 0.1 + 5.0 * rng.uniform();
    EXPECT_NEAR(soft_threshold_scalar(c * a, c * lam), c * soft_threshold_scalar(a, lam), 1e-12 * (1.0 + c * std::abs(a)));
  }
}

TEST(HardThreshold, Cases) {
  const Matrix x = Matrix::column({3, -1, 0.5, -4});
  EXPECT_EQ(hard_threshold_topk(x, 2), Matrix::column({3, 0, 0, -4}));
  EXPECT_EQ(hard_threshold_topk(x, 0), Matrix(4, 1));
  EXPECT_EQ(hard_threshold_topk(x, 4), x);
  EXPECT_EQ(hard_threshold_topk(Matrix::column({2, -2}), 1), Matrix::column({2, 0}));
  EXPECT_THROW(hard_threshold_topk(x, 5), ContractError);
}

TEST(HardThreshold, AtMostKNonzerosAlways) {
  Rng rng(4);
  for (std::size_t k = 0; k <= 10; ++k) {
    const Matrix x = gaussian_matrix(10, 1, rng);
    EXPECT_LE(count_nonzero(hard_threshold_topk(x, k)), k);
  }
}

TEST(SigmoidPlus, Cases) {
  EXPECT_EQ(sigmoid_plus_threshold(Matrix::column({-1.0}), 0.3, 5.0)[0], 0.0);
  EXPECT_NEAR(sigmoid_plus_threshold(Matrix::column({2.0}), 1.0, 10.0)[0], 2.0 / (1.0 + std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(sigmoid_plus_threshold(Matrix::column({2.0}), 1.0, 10.0)[0], 1.999909, 1e-6);
  EXPECT_THROW(sigmoid_plus_threshold(Matrix::column({1.0}), 0.0, 0.0), ContractError);
}

TEST(SigmoidPlus, ApproachesHardIndicatorForLargeBeta) {
  const double alpha = 0.7;
  double gap = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double x = -2.0 + 0.001 * i;
    if (std::abs(x - alpha) < 0.1) continue;
    const double limit = x > alpha ? x : 0.0;
    gap = std::max(gap, std::abs(sigmoid_plus_scalar(x, alpha, 100.0) - limit));
  }
  EXPECT_LE(gap, 1e-3);
}

TEST(SigmoidPlus, NonnegativeAndMonotoneOnPositiveAxis) {
  for (double beta : {0.5, 3.0, 40.0}) {
    double prev = 0.0;
    for (int i = 0; i <= 5000; ++i) {
      const double x = 0.001 * i;
      const double v = sigmoid_plus_scalar(x, 1.0, beta);
      EXPECT_GE(v, 0.0);
      EXPECT_GE(v, prev);
      prev = v;
    }
    EXPECT_EQ(sigmoid_plus_scalar(-3.0, 1.0, beta), 0.0);
  }
}

TEST(RowGroup, Cases) {
  const Matrix out = row_group_soft_threshold(Matrix::from_rows({{3, 4}, {0.3, 0.4}, {0, 0}}), 1.0);
  EXPECT_NEAR(out(0, 0), 2.4, 1e-15);
  EXPECT_NEAR(out(0, 1), 3.2, 1e-15);
  EXPECT_EQ(out(1, 0), 0.0);
  EXPECT_EQ(out(1, 1), 0.0);
  EXPECT_EQ(out(2, 0), 0.0);
  EXPECT_THROW(row_group_soft_threshold(out, -1.0), ContractError);
}

TEST(RowGroup, MatchesBruteForceProx) {
  const Matrix z = oracle::random(3, 4, 5);
  const Matrix ref = prox_bruteforce_oracle(Penalty::kRowGroup, z, 0.5, 1e-4);
  EXPECT_LE(max_abs_diff(row_group_soft_threshold(z, 0.5), ref), 1e-4);
}

TEST(Svt, Cases) {
  const Matrix d = Matrix::from_rows({{3, 0}, {0, 1}});
  EXPECT_LE(max_abs_diff(singular_value_threshold(d, 2.0), Matrix::from_rows({{1, 0}, {0, 0}})), 1e-14);
  const Matrix x = oracle::random(5, 4, 6);
  EXPECT_LE(max_abs_diff(singular_value_threshold(x, 0.0), x), 1e-8);
}

TEST(Svt, MatchesNuclearGridSearch) {
  const Matrix z = oracle::random(2, 2, 7);
  const Matrix ref = prox_bruteforce_oracle(Penalty::kNuclear, z, 0.7, 1e-2);
  EXPECT_LE(max_abs_diff(singular_value_threshold(z, 0.7), ref), 1e-4);
}

TEST(Svt, OutputSpectrumIsShrunkInputSpectrum) {
  const Matrix x = oracle::random(6, 4, 8);
  const auto s_in = svd(x).s;
  const auto s_out = svd(singular_value_threshold(x, 0.8)).s;
  for (std::size_t i = 0; i < s_in.size(); ++i) EXPECT_NEAR(s_out[i], std::max(0.0, s_in[i] - 0.8), 1e-8);
}

TEST(ProxOracle, BasicCases) {
  EXPECT_NEAR(prox_bruteforce_oracle(Penalty::kL1, Matrix::column({3.0}), 1.0, 1e-3)[0], 2.0, 1e-3);
  const Matrix z = oracle::random(3, 2, 9);
  EXPECT_EQ(prox_bruteforce_oracle(Penalty::kZero, z, 0.4, 1e-3), z);
  const Matrix v = oracle::random(6, 1, 10);
  EXPECT_LE(max_abs_diff(prox_bruteforce_oracle(Penalty::kL1, v, 0.25, 1e-3), soft_threshold(v, 0.25)), 1e-3);
  EXPECT_THROW(prox_bruteforce_oracle(Penalty::kNuclear, Matrix(3, 3), 0.1, 1e-3), ContractError);
}
