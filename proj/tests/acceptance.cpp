// Acceptance suite. Each check runs at its stated tolerance and prints one
// PASS/FAIL line; the exit status is nonzero when any check fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "unroll/checkpoint.hpp"
#include "unroll/experiment.hpp"
#include "unroll/gradcheck.hpp"
#include "unroll/prox.hpp"
#include "unroll/prox_oracle.hpp"
#include "unroll/solvers.hpp"

#ifndef UNROLL_CONFIG_DIR
#define UNROLL_CONFIG_DIR "configs"
#endif

using namespace unroll;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Config load_config(const std::string& name) {
  std::ifstream f(std::string(UNROLL_CONFIG_DIR) + "/" + name);
  if (!f) throw ConfigError("cannot read " + name, 0);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Problem {
  Matrix w, y;
  double mu;
};

// Unit-column Gaussian dictionary with a noisy 3-sparse observation.
Problem random_problem(std::uint64_t seed, std::size_t n, std::size_t m) {
  Problem p;
  p.w = gen_dictionary(n, m, seed);
  Rng rng(seed + 1000);
  Matrix x(m, 1);
  for (std::size_t i : sample_without_replacement(m, 3, rng)) x[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + rng.uniform());
  p.y = matmul(p.w, x);
  for (double& v : p.y.values()) v += 0.01 * rng.gaussian();
  p.mu = safe_step_bound(p.w, 1);
  return p;
}

Matrix difference_operator(std::size_t m) {
  Matrix d(m - 1, m);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return d;
}

std::vector<double> perturbed(std::vector<double> p, Rng& rng) {
  for (auto& v : p) v += 0.02 * rng.gaussian();
  return p;
}

// ---------------------------------------------------------------------------

Outcome keystone_lista() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const Problem p = random_problem(s, 20, 40);
    const ListaParams net = lista_init_analytic(p.w, p.mu, 0.1, 15, false);
    IstaOptions o;
    o.max_iters = 15;
    o.tol = 0.0;
    worst = std::max(worst, max_abs_diff(lista_forward(net, p.y), ista_solve(p.w, p.y, 0.1, p.mu, o).x));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 5.0, "max abs diff " + fmt(worst) + ", " + fmt(secs) + " s"};
}

Outcome keystone_liht_admm() {
  double liht_diff = 0.0;
  bool sparse = true;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const Problem p = random_problem(100 + s, 20, 40);
    const LihtParams net = liht_init_analytic(p.w, p.mu, 3, 15, false);
    const SolveTrace t = iht_solve(p.w, p.y, 3, p.mu, 15, true);
    liht_diff = std::max(liht_diff, max_abs_diff(liht_forward(net, p.y), t.x));
    for (const Matrix& it : t.iterates) sparse = sparse && count_nonzero(it) <= 3;
  }
  double admm_diff = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix w = oracle::random(12, 20, 500 + s), y = oracle::random(12, 1, 600 + s);
    const std::vector<Matrix> ops{Matrix::identity(20), difference_operator(20)};
    const std::vector<AdmmCoefficients> c{{0.1, 1.0, 1.0}, {0.05, 0.5, 0.8}};
    const auto net = uadmm_init(ops, c, 8, s % 2 == 0, false);
    admm_diff = std::max(admm_diff, max_abs_diff(unrolled_admm_forward(net, w, y), admm_cs_solve(w, y, ops, c, 8).x));
  }
  return {liht_diff == 0.0 && sparse && admm_diff <= 1e-10,
          "LIHT max diff " + fmt(liht_diff) + (sparse ? " (iterates k-sparse)" : " (non-sparse iterate)") +
              ", ADMM max diff " + fmt(admm_diff)};
}

using Draw = std::function<std::tuple<UnrolledModel, Matrix, Matrix>(Rng&)>;

// Worst matrix/scalar error over five seeds, one kink-free draw per seed.
bool gradient_family(const Draw& draw, double tol_scalar, std::string& detail, const char* name) {
  double wm = 0.0, ws = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    bool found = false;
    for (int attempt = 0; attempt < 500 && !found; ++attempt) {
      auto [model, input, target] = draw(rng);
      const auto r = gradcheck_model(model, input, target, LossKind::kMse, 0.0);
      if (r.kink_margin < 1e-3) continue;
      found = true;
      wm = std::max(wm, r.max_rel_err_matrix);
      ws = std::max(ws, r.max_rel_err_scalar);
    }
    if (!found) {
      detail += std::string(name) + " no kink-free point; ";
      return false;
    }
  }
  detail += std::string(name) + " " + fmt(wm) + "/" + fmt(ws) + "; ";
  return wm <= 1e-5 && ws <= tol_scalar;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = gradient_family(
      [](Rng& rng) {
        const Matrix w = gen_dictionary(8, 12, rng.next_u64());
        auto p = lista_init_analytic(w, safe_step_bound(w, 1), 0.1, 3, false);
        unpack(p, perturbed(pack(p), rng));
        return std::tuple{UnrolledModel(p), gaussian_matrix(8, 1, rng), gaussian_matrix(12, 1, rng)};
      },
      1e-5, detail, "LISTA-3");
  ok = gradient_family(
           [](Rng& rng) {
             const Matrix w = gen_dictionary(9, 16, rng.next_u64());
             auto p = lsparcom_init_analytic(w, safe_step_bound(w, 1), 0.05, 6.0, 3, false);
             unpack(p, perturbed(pack(p), rng));
             return std::tuple{UnrolledModel(p), gaussian_matrix(9, 1, rng), gaussian_matrix(16, 1, rng)};
           },
           1e-5, detail, "LSPARCOM-3") &&
       ok;
  ok = gradient_family(
           [](Rng& rng) {
             const Matrix w = gaussian_matrix(6, 10, rng);
             const std::vector<Matrix> ops{Matrix::identity(10), difference_operator(10)};
             auto p = uadmm_init(ops, {{0.1, 1.0, 1.0}, {0.05, 0.7, 0.9}}, 2, false, true);
             unpack(p, perturbed(pack(p), rng));
             return std::tuple{UnrolledModel(p, w), gaussian_matrix(6, 1, rng), gaussian_matrix(10, 1, rng)};
           },
           1e-4, detail, "ADMM-2") &&
       ok;
  const double secs = seconds_since(t0);
  return {ok && secs < 30.0, "matrix/scalar rel err " + detail + fmt(secs) + " s"};
}

Outcome ista_descent() {
  double worst_rise = -1e300;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const Problem p = random_problem(200 + s, 20, 40);
    IstaOptions o;
    o.max_iters = 200;
    o.tol = 0.0;
    const SolveTrace t = ista_solve(p.w, p.y, 0.1, p.mu, o);
    double prev = lasso_objective(p.w, p.y, Matrix(40, 1), 0.1);
    for (double f : t.objective) {
      worst_rise = std::max(worst_rise, f - prev);
      prev = f;
    }
  }
  return {worst_rise <= 1e-12, "largest step-to-step change " + fmt(worst_rise)};
}

// Minimiser of (α²/2)·[u ≠ 0] + ½(u − z)² over u ≥ 0, by scanning a 1e-4 grid.
double nonneg_l0_prox_scan(double z, double alpha) {
  const double hi = std::abs(z) + 1.0;
  double best_u = 0.0, best = 0.5 * z * z;
  for (double u = 1e-4; u <= hi; u += 1e-4) {
    const double f = 0.5 * alpha * alpha + 0.5 * (u - z) * (u - z);
    if (f < best) {
      best = f;
      best_u = u;
    }
  }
  return best_u;
}

Outcome prox_oracles() {
  const auto t0 = Clock::now();
  const Matrix z1 = oracle::random(5, 4, 11);
  const double soft = max_abs_diff(soft_threshold(z1, 0.3), prox_bruteforce_oracle(Penalty::kL1, z1, 0.3, 1e-4));
  const Matrix z2 = oracle::random(4, 3, 12);
  const double group =
      max_abs_diff(row_group_soft_threshold(z2, 0.5), prox_bruteforce_oracle(Penalty::kRowGroup, z2, 0.5, 1e-4));
  double svt = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Matrix z3 = oracle::random(2, 2, 13 + s);
    svt = std::max(svt, max_abs_diff(singular_value_threshold(z3, 0.7), prox_bruteforce_oracle(Penalty::kNuclear, z3, 0.7, 1e-4)));
  }
  // As β grows the sigmoid threshold tends to the prox of the nonnegative ℓ0 penalty.
  const double alpha = 0.6;
  double splus = 0.0;
  Rng rng(14);
  for (int i = 0; i < 40; ++i) {
    double z = 2.0 * rng.gaussian();
    if (std::abs(z - alpha) < 0.05) continue;
    splus = std::max(splus, std::abs(sigmoid_plus_scalar(z, alpha, 1e4) - nonneg_l0_prox_scan(z, alpha)));
  }
  const double secs = seconds_since(t0);
  const bool ok = soft <= 1e-4 && group <= 1e-4 && svt <= 1e-4 && splus <= 1e-4 && secs < 60.0;
  return {ok, "soft " + fmt(soft) + ", row-group " + fmt(group) + ", SVT " + fmt(svt) + ", S+ limit " + fmt(splus) +
                  ", " + fmt(secs) + " s"};
}

Outcome admm_ista_lasso() {
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const Problem p = random_problem(300 + s, 20, 40);
    IstaOptions o;
    o.max_iters = 200000;
    o.tol = 1e-13;
    const Matrix xi = ista_solve(p.w, p.y, 0.1, p.mu, o).x;
    const Matrix xa = admm_cs_solve(p.w, p.y, {Matrix::identity(40)}, {{0.1, 1.0, 1.0}}, 5000).x;
    worst = std::max(worst, frobenius_norm(sub(xa, xi)) / frobenius_norm(xi));
  }
  return {worst <= 1e-4, "max rel diff " + fmt(worst)};
}

// Shared between the training-efficacy and coupling checks.
struct StandardRun {
  Dataset data;
  UnrolledModel init;
  TrainReport report;
};

StandardRun standard_training() {
  const Config c = load_config("lista_standard.conf");
  Dataset d = generate_dataset(c);
  const SupervisedSplit s = supervised_split(d, "train");
  UnrolledModel init = analytic_model(c, d);
  TrainConfig tc = train_config(c);
  tc.threads = 1;
  TrainReport r = train(init, s.inputs, s.targets, s.planted, tc);
  return {std::move(d), std::move(init), std::move(r)};
}

Outcome training_efficacy(const StandardRun& run, double train_secs) {
  const Config c = load_config("lista_standard.conf");
  const SupervisedSplit s = supervised_split(run.data, "train");
  const TrainConfig tc = train_config(c);
  // Same validation columns as train() uses.
  Rng rng(tc.seed);
  const DataSplit split = split_indices(s.inputs.cols(), tc.validation_fraction, rng);
  const Matrix w = run.data.matrix("W");
  const double mu = dataset_step_bound(run.data), lambda = run.data.scalar("lambda_sup");
  IstaOptions o;
  o.max_iters = 100;
  o.tol = 0.0;
  Matrix ista(w.cols(), split.validation.size());
  for (std::size_t i = 0; i < split.validation.size(); ++i) {
    ista.set_col(i, ista_solve(w, s.inputs.col(split.validation[i]), lambda, mu, o).x);
  }
  const double ista100 = nmse(ista, select_columns(s.targets, split.validation));
  const double init = run.report.initial_val_nmse_target;
  const double trained = run.report.val_nmse_target.back();
  const bool vs_init = trained <= 0.5 * init;
  const bool vs_ista = trained <= 1.5 * ista100;
  return {vs_init && vs_ista && train_secs < 180.0,
          "trained " + fmt(trained) + " vs init " + fmt(init) + (vs_init ? " (ok)" : " (too high)") + ", vs 1.5 x ISTA-100 " +
              fmt(1.5 * ista100) + (vs_ista ? " (ok)" : " (too high)") + ", " + fmt(train_secs) + " s"};
}

Outcome rpca_separation() {
  const Config c = load_config("rpca.conf");
  const Dataset d = generate_dataset(c);
  const Matrix y = d.matrix("Y"), h1 = d.matrix("H1"), h2 = d.matrix("H2");
  const double mu = 1.01 * (power_iteration(h1, 200, 1) + power_iteration(h2, 200, 1));
  const RpcaResult r = rpca_ista_solve(y, h1, h2, c.get_real("lambda1"), c.get_real("lambda2"), mu, c.get_uint("iters", 500));
  const Matrix l = d.matrix("Lmat"), sp = d.matrix("Smat");
  const double el = frobenius_norm(sub(r.low_rank, l)) / frobenius_norm(l);
  const double es = frobenius_norm(sub(r.sparse, sp)) / frobenius_norm(sp);
  return {el <= 1e-2 && es <= 1e-2, "rel err L " + fmt(el) + ", S " + fmt(es) + " after " + std::to_string(r.trace.iterations) + " iterations"};
}

Outcome modl_consistency() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix w = oracle::random(15, 10, 700 + s), y = oracle::random(15, 1, 800 + s);
    const double lambda = 0.3;
    const Denoiser den = s % 2 == 0 ? soft_threshold_denoiser(0.05) : median3_denoiser();
    const SolveTrace t = modl_alternation(w, y, lambda, den, 5, 1e-12);
    const Matrix a = add(matmul_tn(w, w), scale(Matrix::identity(10), lambda));
    Matrix x(10, 1);
    for (const Matrix& xk : t.iterates) {
      const Matrix ref = oracle::solve(a, add(matmul_tn(w, y), scale(den(x), lambda)));
      worst = std::max(worst, frobenius_norm(sub(xk, ref)) / frobenius_norm(ref));
      x = xk;
    }
  }
  return {worst <= 1e-8, "max per-stage rel diff " + fmt(worst)};
}

Outcome determinism() {
  const Config c = load_config("quick_train.conf");
  const std::string d1 = serialize_container(generate_dataset(c));
  const std::string d2 = serialize_container(generate_dataset(c));
  const Dataset d = parse_container(d1);
  const SupervisedSplit s = supervised_split(d, "train");
  std::string ckpt[3], csv[3];
  for (int i = 0; i < 3; ++i) {
    TrainConfig tc = train_config(c);
    tc.threads = i == 2 ? 3 : 1;
    const TrainReport r = train(analytic_model(c, d), s.inputs, s.targets, s.planted, tc);
    ckpt[i] = serialize_container(checkpoint_to_container(r.model));
    csv[i] = metrics_csv(r, false);
  }
  const bool data_ok = d1 == d2, ckpt_ok = ckpt[0] == ckpt[1], csv_ok = csv[0] == csv[1];
  const bool threads_ok = ckpt[0] == ckpt[2] && csv[0] == csv[2];
  return {data_ok && ckpt_ok && csv_ok && threads_ok,
          std::string("dataset ") + (data_ok ? "identical" : "differs") + ", checkpoint " + (ckpt_ok ? "identical" : "differs") +
              ", metrics " + (csv_ok ? "identical" : "differs") + ", 3 workers " + (threads_ok ? "identical" : "differs")};
}

Outcome coupling(const StandardRun& run) {
  const Matrix w = run.data.matrix("W");
  const auto init = coupling_profile(run.init, w);
  const auto trained = coupling_profile(run.report.model, w);
  double worst = 0.0;
  for (double r : init) worst = std::max(worst, r);
  const char* path = "acceptance_coupling.csv";
  std::ofstream(path) << coupling_csv(init, trained);
  return {!init.empty() && worst <= 1e-12, "init max " + fmt(worst) + " over " + std::to_string(init.size()) +
                                               " layers, trained profile in " + path};
}

}  // namespace

int main() {
  const auto start = Clock::now();
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "lista-ista-equivalence", keystone_lista);
  report(2, "liht-iht-admm-equivalence", keystone_liht_admm);
  report(3, "gradient-suite", gradient_suite);
  report(4, "ista-descent", ista_descent);
  report(5, "prox-oracles", prox_oracles);
  report(6, "admm-ista-lasso", admm_ista_lasso);

  std::optional<StandardRun> run;
  double train_secs = 0.0;
  try {
    const auto t0 = Clock::now();
    run.emplace(standard_training());
    train_secs = seconds_since(t0);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "standard training failed: %s\n", e.what());
  }
  auto need_run = [&](auto f) {
    return [&, f]() -> Outcome {
      if (!run) return {false, "standard training did not complete"};
      return f();
    };
  };
  report(7, "training-efficacy", need_run([&] { return training_efficacy(*run, train_secs); }));
  report(8, "rpca-separation", rpca_separation);
  report(9, "modl-data-consistency", modl_consistency);
  report(10, "determinism", determinism);
  report(11, "weight-coupling", need_run([&] { return coupling(*run); }));

  const double total = seconds_since(start);
  report(12, "suite-runtime", [&] { return Outcome{total < 300.0, fmt(total) + " s"}; });
  std::printf("%d of 12 checks failed\n", failed);
  return failed == 0 ? 0 : 1;
}
