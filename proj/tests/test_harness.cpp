#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "oracles.hpp"
#include "unroll/checkpoint.hpp"
#include "unroll/config.hpp"
#include "unroll/container.hpp"
#include "unroll/metrics.hpp"

using namespace unroll;

namespace {

std::size_t error_line(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Config, ParsesFullFile) {
  const Config c = parse_config(
      "# standard family\n"
      "seed=1\n"
      "model=lista\n"
      "depth = 10   # layers\n"
      "tied=false\n"
      "n=20\nm=40\nk=3\nt_train=1000\nt_test=200\n"
      "noise_sigma=0.01\nlambda_sup=0.1\n"
      "epochs=10\nbatch=32\nlr=1e-3\noptimizer=adam\nloss=mse\nout_dir=runs/a\n");
  EXPECT_EQ(c.get_uint("seed"), 1u);
  EXPECT_EQ(c.text("model"), "lista");
  EXPECT_EQ(c.get_uint("depth"), 10u);
  EXPECT_FALSE(c.get_bool("tied"));
  EXPECT_EQ(c.get_real("lr"), 1e-3);
  EXPECT_EQ(c.text("lr"), "0.001");
  EXPECT_EQ(c.text("out_dir"), "runs/a");
  EXPECT_EQ(c.get_real("eta", 2.5), 2.5);
  EXPECT_THROW(c.require({"seed", "rank"}), ConfigError);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("bogus=1"), 1u);
  EXPECT_EQ(error_line("seed=1\n\n# c\nseed=2\n"), 4u);
  EXPECT_EQ(error_line("seed=1\nno equals sign\n"), 2u);
  EXPECT_EQ(error_line("depth=-3\n"), 1u);
  EXPECT_EQ(error_line("seed=1\nlr=abc\n"), 2u);
  EXPECT_EQ(error_line("model=resnet\n"), 1u);
  EXPECT_EQ(error_line("lr=inf\n"), 1u);
  EXPECT_EQ(error_line("seed=9007199254740993\n"), 1u);
  EXPECT_EQ(error_line("=3\n"), 1u);
  EXPECT_EQ(error_line("seed=\n"), 1u);
  EXPECT_EQ(error_line("seed=1\n"), 0u);
  EXPECT_EQ(parse_config("").size(), 0u);
}

TEST(Config, RoundTripProperty) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (const auto& spec : kConfigSchema) {
      if (rng.uniform() < 0.5) continue;
      std::string value;
      switch (spec.kind) {
        case ValueKind::kUint: value = std::to_string(rng.below(1000000)); break;
        case ValueKind::kReal: value = format_number(std::ldexp(rng.gaussian(), static_cast<int>(rng.below(40)) - 20)); break;
        case ValueKind::kBool: value = rng.uniform() < 0.5 ? "1" : "false"; break;
        case ValueKind::kText: value = "dir" + std::to_string(rng.below(100)); break;
        case ValueKind::kChoice: {
          const std::string_view choices = spec.choices;
          value = std::string(choices.substr(0, choices.find('|')));
          break;
        }
      }
      text += "  " + std::string(spec.name) + " =" + value + "\n";
    }
    const Config c = parse_config(text);
    EXPECT_EQ(parse_config(serialize_config(c)), c);
    EXPECT_EQ(serialize_config(parse_config(serialize_config(c))), serialize_config(c));
  }
}

TEST(Container, EmptyIsEightBytes) {
  const std::string bytes = serialize_container(Container{});
  EXPECT_EQ(bytes, std::string("URK1\0\0\0\0", 8));
  EXPECT_EQ(parse_container(bytes).size(), 0u);
}

TEST(Container, ExactLayout) {
  Container c;
  c.put("ab", Matrix::from_rows({{1.0, 2.0}}));
  const std::string b = serialize_container(c);
  ASSERT_EQ(b.size(), 4u + 4 + 2 + 2 + 1 + 16 + 16);
  EXPECT_EQ(b.substr(0, 4), "URK1");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[8], 2);
  EXPECT_EQ(b.substr(10, 2), "ab");
  EXPECT_EQ(b[12], 2);  // ndims
  EXPECT_EQ(b[13], 1);  // rows, little-endian
  EXPECT_EQ(b[21], 2);  // cols
  EXPECT_EQ(static_cast<unsigned char>(b[29 + 6]), 0xf0);  // 1.0 = 0x3ff0000000000000
  EXPECT_EQ(static_cast<unsigned char>(b[29 + 7]), 0x3f);
}

TEST(Container, RoundTripIsBitExact) {
  Container c;
  c.put("M", Matrix::from_rows({{1.5, -0.0}, {1e-310, 3.0}}));
  c.put_scalar("s", 0.1);
  c.put(NamedArray{"cube", {2, 1, 2}, {1, 2, 3, 4}});
  c.put(NamedArray{"nan", {1}, {std::numeric_limits<double>::quiet_NaN()}});
  c.put(NamedArray{"empty", {0, 7}, {}});
  const Container back = parse_container(serialize_container(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.scalar("s"), 0.1);
  EXPECT_EQ(back.at("s").dims, (std::vector<std::uint64_t>{1, 1}));
  EXPECT_TRUE(std::signbit(back.matrix("M")(0, 1)));

  const auto path = std::filesystem::temp_directory_path() / "unroll_container_test.urk";
  save_container(path.string(), c);
  EXPECT_EQ(load_container(path.string()), c);
  std::filesystem::remove(path);
  EXPECT_THROW(load_container("/nonexistent/dir/x.urk"), FormatError);
}

TEST(Container, RejectsBadInput) {
  Container c;
  c.put_scalar("a", 1.0);
  EXPECT_THROW(c.put_scalar("a", 2.0), FormatError);
  EXPECT_THROW(c.put(NamedArray{"b", {2, 2}, {1.0}}), ShapeError);
  std::string bytes = serialize_container(c);
  EXPECT_THROW(parse_container("URK2" + bytes.substr(4)), FormatError);
  EXPECT_THROW(parse_container(bytes + "x"), FormatError);
  // Same array written twice.
  std::string dup = bytes;
  dup[4] = 2;
  dup += bytes.substr(8);
  EXPECT_THROW(parse_container(dup), FormatError);
  // Huge dims must fail before any allocation.
  std::string huge = "URK1";
  huge += std::string("\x01\0\0\0", 4) + std::string("\x01\0", 2) + "h" + "\x02";
  huge += std::string(8, '\xff') + std::string(8, '\x7f');
  EXPECT_THROW(parse_container(huge), FormatError);
}

TEST(Container, EveryTruncationIsACleanError) {
  Container c;
  c.put("W", oracle::random(3, 4, 1));
  c.put_scalar("seed", 7.0);
  c.put(NamedArray{"v", {5}, {1, 2, 3, 4, 5}});
  const std::string bytes = serialize_container(c);
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    EXPECT_THROW(parse_container(std::string_view(bytes).substr(0, len)), FormatError) << "length " << len;
  }
  // Single-byte corruptions either parse or fail cleanly.
  Rng rng(2);
  for (std::size_t pos = 0; pos < bytes.size(); ++pos) {
    std::string bad = bytes;
    bad[pos] = static_cast<char>(rng.below(256));
    try {
      parse_container(bad);
    } catch (const FormatError&) {
    } catch (const ShapeError&) {
    }
  }
}

TEST(Metrics, NmseAndPsnr) {
  const Matrix a = oracle::random(6, 3, 3);
  const Matrix b = oracle::random(6, 3, 4);
  EXPECT_EQ(nmse(a, a), 0.0);
  EXPECT_EQ(nmse(Matrix(6, 3), a), 1.0);
  EXPECT_NEAR(nmse(b, a), oracle::nmse(b, a), 1e-12);
  EXPECT_THROW(nmse(a, Matrix(6, 3)), DegenerateInputError);
  EXPECT_TRUE(std::isinf(psnr(a, a, 1.0)));
  double err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) err += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_NEAR(psnr(b, a, 2.0), 10.0 * std::log10(4.0 * 18.0 / err), 1e-12);
  EXPECT_THROW(psnr(a, b, 0.0), ContractError);
  EXPECT_THROW(nmse(a, Matrix(3, 6)), ShapeError);
}

TEST(Metrics, FormatNumberRoundTrips) {
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(3.0), "3");
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.gaussian(), static_cast<int>(rng.below(200)) - 100);
    EXPECT_EQ(std::strtod(format_number(v).c_str(), nullptr), v);
  }
}

TEST(Checkpoint, RoundTripsEveryModelKind) {
  const Matrix w = oracle::random(4, 6, 6);
  Rng rng(7);
  auto jitter = [&](UnrolledModel m) {
    auto p = m.pack();
    for (auto& v : p) v += 0.01 * rng.gaussian();
    m.unpack(p);
    return m;
  };
  const std::vector<UnrolledModel> models{
      jitter(UnrolledModel(lista_init_analytic(w, 10.0, 0.1, 3, false))),
      jitter(UnrolledModel(lista_init_analytic(w, 10.0, 0.1, 0, false))),
      jitter(UnrolledModel(liht_init_analytic(w, 10.0, 2, 2, true))),
      jitter(UnrolledModel(lsparcom_init_analytic(w, 10.0, 0.05, 5.0, 2, false))),
      jitter(UnrolledModel(uadmm_init({Matrix::identity(6)}, {{0.1, 1.0, 1.0}}, 3, false, true), w)),
  };
  for (const auto& m : models) {
    const Container c = checkpoint_to_container(m);
    const UnrolledModel back = checkpoint_from_container(parse_container(serialize_container(c)));
    EXPECT_EQ(back.kind(), m.kind());
    EXPECT_EQ(back.depth(), m.depth());
    EXPECT_EQ(back.pack(), m.pack());
    EXPECT_EQ(serialize_container(checkpoint_to_container(back)), serialize_container(c));
    const Matrix y = oracle::random(4, 1, 8);
    EXPECT_EQ(back.forward(y), m.forward(y));
  }
  Container broken = checkpoint_to_container(models[0]);
  Container bad;
  for (const auto& a : broken.arrays())
    if (a.name != "L1.wt") bad.put(a);
  EXPECT_THROW(checkpoint_from_container(bad), FormatError);
}

TEST(Checkpoint, ParamsCountMatchesHandCount) {
  const Matrix w = oracle::random(3, 4, 9);
  EXPECT_EQ(UnrolledModel(lista_init_analytic(w, 10.0, 0.1, 2, false)).param_count(), 2u * (12 + 16 + 1));
  EXPECT_EQ(UnrolledModel(liht_init_analytic(w, 10.0, 1, 2, false)).param_count(), 2u * (12 + 16));
  EXPECT_EQ(UnrolledModel(lsparcom_init_analytic(w, 10.0, 0.1, 1.0, 2, false)).param_count(), 2u * (12 + 16 + 2));
  EXPECT_EQ(UnrolledModel(uadmm_init({Matrix::identity(4)}, {{0.1, 1.0, 1.0}}, 2, false, false), w).param_count(), 6u);
  EXPECT_EQ(UnrolledModel(uadmm_init({Matrix::identity(4)}, {{0.1, 1.0, 1.0}}, 2, false, true), w).param_count(),
            2u * (16 + 3));
}
