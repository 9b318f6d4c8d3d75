#include <gtest/gtest.h>

#include <cmath>

#include "unroll/datagen.hpp"
#include "unroll/linalg.hpp"

using namespace unroll;

namespace {

// Goldens below come from tests/golden/derive_goldens.py, an independent
// reimplementation of the generator streams.
constexpr double kDictionaryFirstEntrySeed7 = 0.030586594104484388;
constexpr double kRpcaYSum = -78.27072958418952;
constexpr double kRpcaYAbsSum = 1856.6571561419032;
constexpr double kLsparcomFirstColumnSum = 30.911285209927055;

std::pair<double, double> checksum(const Matrix& m) {
  double s = 0.0, a = 0.0;
  for (double v : m.values()) {
    s += v;
    a += std::abs(v);
  }
  return {s, a};
}

}  // namespace

TEST(Dictionary, UnitColumnsAndDeterminism) {
  const Matrix w = gen_dictionary(20, 40, 3);
  for (std::size_t j = 0; j < 40; ++j) EXPECT_NEAR(frobenius_norm(w.col(j)), 1.0, 1e-12);
  EXPECT_EQ(w, gen_dictionary(20, 40, 3));
  EXPECT_NE(w, gen_dictionary(20, 40, 4));
  EXPECT_THROW(gen_dictionary(0, 4, 1), ContractError);
}

TEST(Dictionary, GoldenFirstEntry) { EXPECT_EQ(gen_dictionary(20, 40, 7)(0, 0), kDictionaryFirstEntrySeed7); }

TEST(SparseCoding, ShapesPlantedSparsityAndSupervision) {
  SparseCodingSpec s;
  s.n = 10;
  s.m = 16;
  s.k = 3;
  s.t_train = 30;
  s.t_test = 7;
  s.seed = 11;
  const Dataset d = gen_sparse_coding_dataset(s);
  validate_dataset(d);
  EXPECT_EQ(d.matrix("Y_train").rows(), 10u);
  EXPECT_EQ(d.matrix("Y_train").cols(), 30u);
  EXPECT_EQ(d.matrix("X_test").rows(), 16u);
  EXPECT_EQ(d.matrix("X_test").cols(), 7u);
  const Matrix p = d.matrix("P_train");
  for (std::size_t c = 0; c < p.cols(); ++c) {
    const Matrix col = p.col(c);
    EXPECT_EQ(count_nonzero(col), 3u);
    for (double v : col.values()) {
      if (v != 0.0) {
        EXPECT_TRUE(std::abs(v) >= 0.5 && std::abs(v) < 1.5);
      }
    }
  }
  // Supervision targets are ISTA fixed points, never worse than the zero code.
  const Matrix w = d.matrix("W"), y = d.matrix("Y_train"), x = d.matrix("X_train");
  for (std::size_t c = 0; c < y.cols(); ++c) {
    EXPECT_LE(lasso_objective(w, y.col(c), x.col(c), 0.1), lasso_objective(w, y.col(c), Matrix(16, 1), 0.1));
    EXPECT_LE(frobenius_norm(sub(matmul(w, x.col(c)), y.col(c))), frobenius_norm(y.col(c)));
  }
  EXPECT_EQ(d.scalar("k"), 3.0);
  EXPECT_EQ(d.scalar("seed"), 11.0);
  EXPECT_EQ(dataset_generator(d), GeneratorKind::kSparse);
}

TEST(SparseCoding, RegenerationIsBitIdentical) {
  SparseCodingSpec s;
  s.t_train = 20;
  s.t_test = 5;
  EXPECT_EQ(serialize_container(gen_sparse_coding_dataset(s)), serialize_container(gen_sparse_coding_dataset(s)));
}

TEST(SparseCoding, EmptySplitsAreValid) {
  SparseCodingSpec s;
  s.t_train = 0;
  s.t_test = 0;
  const Dataset d = gen_sparse_coding_dataset(s);
  validate_dataset(d);
  EXPECT_EQ(d.matrix("Y_train").cols(), 0u);
  EXPECT_EQ(parse_container(serialize_container(d)), d);
  s.k = 41;
  EXPECT_THROW(gen_sparse_coding_dataset(s), ContractError);
}

TEST(SparseCoding, StandardFamilyMeanIstaIterations) {
  // Recorded from a generation run of the standard family.
  const Dataset d = gen_sparse_coding_dataset(SparseCodingSpec{});
  EXPECT_EQ(d.scalar("ista_mean_iters") * 1200.0, 378284.0);
}

TEST(Rpca, DensityZeroAndRank) {
  RpcaSpec s;
  s.density = 0.0;
  const Dataset d = gen_rpca_dataset(s);
  EXPECT_EQ(d.matrix("Smat"), Matrix(32, 50));
  const auto sv = svd(d.matrix("Lmat")).s;
  EXPECT_GE(sv[1] - sv[2], 1e-8);
  EXPECT_LE(sv[2], 1e-10 * sv[0]);
  RpcaSpec full;
  full.rows = 6;
  full.cols = 9;
  full.rank = 6;
  const auto fs = svd(gen_rpca_dataset(full).matrix("Lmat")).s;
  EXPECT_GE(fs[5], 1e-8);
  full.rank = 7;
  EXPECT_THROW(gen_rpca_dataset(full), ContractError);
}

TEST(Rpca, GoldenChecksum) {
  const Dataset d = gen_rpca_dataset(RpcaSpec{});
  validate_dataset(d);
  const auto [sum, abs_sum] = checksum(d.matrix("Y"));
  EXPECT_EQ(sum, kRpcaYSum);
  EXPECT_EQ(abs_sum, kRpcaYAbsSum);
  EXPECT_EQ(d.matrix("Y"), add(d.matrix("Lmat"), d.matrix("Smat")));
}

TEST(Lsparcom, PsfConventions) {
  const Matrix w = psf_dictionary(8, 16);
  EXPECT_EQ(w.rows(), 64u);
  EXPECT_EQ(w.cols(), 256u);
  // An emitter at the centre of the high-resolution grid gives exactly its PSF column.
  Matrix x(256, 1);
  x[8 * 16 + 8] = 1.0;
  EXPECT_EQ(matmul(w, x), w.col(8 * 16 + 8));
  EXPECT_EQ(matmul(w, Matrix(256, 1)), Matrix(64, 1));
  // Cell (8, 8) sits at low-resolution coordinate (3.75, 3.75).
  EXPECT_NEAR(w(4 * 8 + 4, 8 * 16 + 8), std::exp(-0.0625), 1e-15);
  EXPECT_NEAR(w(3 * 8 + 3, 8 * 16 + 8), std::exp(-0.5625), 1e-15);
  EXPECT_EQ(w(0, 8 * 16 + 8), 0.0);  // beyond the truncation radius
  EXPECT_THROW(psf_dictionary(8, 12), ContractError);
}

TEST(Lsparcom, GoldenChecksumAndNonnegativity) {
  const Dataset d = gen_lsparcom_dataset(LsparcomSpec{});
  validate_dataset(d);
  EXPECT_EQ(checksum(d.matrix("Y_train").col(0)).first, kLsparcomFirstColumnSum);
  for (double v : d.matrix("X_train").values()) EXPECT_GE(v, 0.0);
  for (std::size_t c = 0; c < 10; ++c) EXPECT_EQ(count_nonzero(d.matrix("X_train").col(c)), 5u);
  EXPECT_EQ(d.matrix("Y_test").cols(), 50u);
}

TEST(Dataset, ValidationCatchesBrokenContainers) {
  Dataset missing;
  missing.put_scalar("generator", 1.0);
  EXPECT_THROW(validate_dataset(missing), Error);
  EXPECT_THROW(validate_dataset(Dataset{}), FormatError);
}
