// unroll_cli: dataset generation, training, evaluation and classic solvers
// driven by key=value config files.
//
// Exit codes: 0 success, 1 usage/config error, 2 numeric or data error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "unroll/checkpoint.hpp"
#include "unroll/experiment.hpp"
#include "unroll/gradcheck.hpp"
#include "unroll/solvers.hpp"

using namespace unroll;

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;

Config read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config '" + path + "'", 0);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw FormatError("write to '" + path + "' failed");
}

// -o may be omitted when the config names an out_dir.
std::string output_path(const std::string& given, const Config& c, const char* fallback_name) {
  if (!given.empty()) return given;
  if (c.has("out_dir")) return c.text("out_dir") + "/" + fallback_name;
  throw ConfigError("no output path: pass -o or set out_dir", 0);
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& config_path, const std::string& out) {
  const Config c = read_config(config_path);
  const Dataset d = generate_dataset(c);
  const std::string path = output_path(out, c, "data.urk");
  save_container(path, d);
  std::cerr << "wrote " << path << " (" << d.size() << " arrays)\n";
  return 0;
}

struct TrainArgs {
  std::string config, data, out, metrics, coupling;
  bool wallclock = false;
};

int cmd_train(const TrainArgs& a) {
  const Config c = read_config(a.config);
  const Dataset d = load_container(a.data);
  const SupervisedSplit s = supervised_split(d, "train");
  const UnrolledModel init = analytic_model(c, d);
  const TrainConfig tc = train_config(c);
  const TrainReport r = train(init, s.inputs, s.targets, s.planted, tc);
  save_checkpoint(output_path(a.out, c, "model.urk"), r.model);
  if (!a.metrics.empty()) write_text(a.metrics, metrics_csv(r, a.wallclock));
  if (!a.coupling.empty()) {
    const Matrix w = d.matrix("W");
    write_text(a.coupling, coupling_csv(coupling_profile(init, w), coupling_profile(r.model, w)));
  }
  std::cerr << "trained " << model_name(r.model.kind()) << "-" << r.model.depth() << ": val NMSE "
            << format_number(r.initial_val_nmse_target) << " -> "
            << format_number(r.val_nmse_target.empty() ? r.initial_val_nmse_target : r.val_nmse_target.back())
            << " (config hash " << std::hex << r.config_hash << std::dec << ")\n";
  return 0;
}

struct EvalArgs {
  std::string data, checkpoint, analytic, report, split = "test";
  bool wallclock = false;
};

int cmd_eval(const EvalArgs& a) {
  const Dataset d = load_container(a.data);
  const UnrolledModel model = a.checkpoint.empty() ? analytic_model(read_config(a.analytic), d) : load_checkpoint(a.checkpoint);
  const SupervisedSplit s = supervised_split(d, a.split);
  const auto t0 = std::chrono::steady_clock::now();
  const EvalResult r = evaluate(model, s, env_threads());
  const double ms = a.wallclock ? ms_since(t0) : 0.0;
  write_text(a.report, std::string(kEvalHeader) + "\n" + eval_row(model, r, ms));
  return 0;
}

int cmd_solve(const std::string& solver, const std::string& config_path, const std::string& data_path,
              const std::string& report) {
  const Config c = read_config(config_path);
  const Dataset d = load_container(data_path);
  validate_dataset(d);
  std::string out;
  if (solver == "rpca") {
    if (dataset_generator(d) != GeneratorKind::kRpca) throw FormatError("rpca solver needs an RPCA dataset");
    const Matrix y = d.matrix("Y"), h1 = d.matrix("H1"), h2 = d.matrix("H2");
    const double mu = 1.01 * (power_iteration(h1, 200, 1) + power_iteration(h2, 200, 1));
    const RpcaResult r = rpca_ista_solve(y, h1, h2, c.get_real("lambda1", 3.0), c.get_real("lambda2", 2.0), mu,
                                         c.get_uint("iters", 500), c.get_real("tol", 0.0));
    const Matrix l = d.matrix("Lmat"), sp = d.matrix("Smat");
    out = "solver,iterations,rel_err_low_rank,rel_err_sparse,objective\n";
    out += "rpca," + std::to_string(r.trace.iterations) + ',' +
           format_number(frobenius_norm(sub(r.low_rank, l)) / frobenius_norm(l)) + ',' +
           format_number(frobenius_norm(sp) > 0.0 ? frobenius_norm(sub(r.sparse, sp)) / frobenius_norm(sp) : 0.0) +
           ',' + format_number(r.trace.objective.empty() ? 0.0 : r.trace.objective.back()) + '\n';
    write_text(report, out);
    return 0;
  }

  const SupervisedSplit s = supervised_split(d, "test");
  const Matrix w = d.matrix("W");
  const double mu = dataset_step_bound(d);
  const double lambda = c.get_real("lambda_sup", d.contains("lambda_sup") ? d.scalar("lambda_sup") : 0.1);
  Matrix est(w.cols(), s.inputs.cols());
  std::size_t iter_total = 0;
  for (std::size_t col = 0; col < s.inputs.cols(); ++col) {
    const Matrix y = s.inputs.col(col);
    SolveTrace t;
    if (solver == "ista") {
      IstaOptions o;
      o.max_iters = c.get_uint("iters", 1000);
      o.tol = c.get_real("tol", 1e-8);
      t = ista_solve(w, y, lambda, mu, o);
    } else if (solver == "iht") {
      const auto k = static_cast<std::size_t>(c.get_uint("k", d.contains("k") ? static_cast<std::uint64_t>(d.scalar("k")) : 1));
      t = iht_solve(w, y, k, mu, c.get_uint("iters", 100));
    } else if (solver == "admm") {
      t = admm_cs_solve(w, y, {Matrix::identity(w.cols())}, {{lambda, c.get_real("rho", 1.0), c.get_real("eta", 1.0)}},
                        c.get_uint("iters", 200));
    } else {  // modl
      const std::string dn = c.get_text("denoiser", "soft");
      const Denoiser den = dn == "identity" ? identity_denoiser()
                           : dn == "median3" ? median3_denoiser()
                                             : soft_threshold_denoiser(c.get_real("tau", 0.05));
      t = modl_alternation(w, y, c.get_real("rho", 1.0), den, c.get_uint("iters", 10), c.get_real("tol", 1e-10), false);
    }
    iter_total += t.iterations;
    est.set_col(col, t.x);
  }
  const double peak = max_abs(s.targets);
  out = "solver,mean_iterations,nmse_vs_target,nmse_vs_planted,psnr\n";
  out += solver + ',' + format_number(static_cast<double>(iter_total) / static_cast<double>(std::max<std::size_t>(1, est.cols()))) +
         ',' + format_number(nmse(est, s.targets)) + ',' +
         format_number(s.planted.empty() ? nmse(est, s.targets) : nmse(est, s.planted)) + ',' +
         format_number(psnr(est, s.targets, peak > 0.0 ? peak : 1.0)) + '\n';
  write_text(report, out);
  return 0;
}

// Gradient check of the configured network at five seeds, on a random
// dictionary of the configured size with perturbed analytic weights.
int cmd_gradcheck(const std::string& config_path) {
  const Config c = read_config(config_path);
  const ModelKind kind = parse_model_kind(c.get_text("model", "lista"));
  const std::size_t depth = c.get_uint("depth", 3);
  const std::uint64_t seed0 = c.get_uint("seed", 1);
  const LossKind loss = c.get_text("loss", "mse") == "masked" ? LossKind::kMasked : LossKind::kMse;
  const double tol_matrix = 1e-5;
  const double tol_scalar = kind == ModelKind::kUadmm ? 1e-4 : 1e-5;
  bool ok = true;
  std::cout << "seed,points_rejected,kink_margin,max_rel_err_matrix,max_rel_err_scalar,result\n";
  for (std::uint64_t seed = seed0; seed < seed0 + 5; ++seed) {
    Rng rng(seed);
    int rejected = 0;
    for (;; ++rejected) {
      if (rejected > 500) throw NumericError("gradcheck: no kink-free point found");
      Matrix w;
      if (kind == ModelKind::kLsparcom) {
        w = psf_dictionary(c.get_uint("grid_low", 2), c.get_uint("grid_high", 4));
      } else {
        w = gen_dictionary(c.get_uint("n", 8), c.get_uint("m", 12), rng.next_u64());
      }
      Config mc = c;
      mc.set("depth", std::to_string(depth));
      UnrolledModel model = analytic_model(mc, w, safe_step_bound(w, 1), 0.1, 2);
      auto p = model.pack();
      for (auto& v : p) v += 0.02 * rng.gaussian();
      model.unpack(p);
      const Matrix input = gaussian_matrix(w.rows(), 1, rng);
      Matrix target = gaussian_matrix(w.cols(), 1, rng);
      if (loss == LossKind::kMasked) {
        for (std::size_t i = 0; i < target.size(); i += 2) target[i] = 0.0;
      }
      const GradcheckResult g = gradcheck_model(model, input, target, loss, c.get_real("lambda_loss", 0.01));
      if (g.kink_margin < 1e-3) continue;
      const bool pass = g.max_rel_err_matrix <= tol_matrix && g.max_rel_err_scalar <= tol_scalar;
      ok = ok && pass;
      std::cout << seed << ',' << rejected << ',' << format_number(g.kink_margin) << ','
                << format_number(g.max_rel_err_matrix) << ',' << format_number(g.max_rel_err_scalar) << ','
                << (pass ? "PASS" : "FAIL") << '\n';
      break;
    }
  }
  return ok ? 0 : kDataError;
}

// Wall-clock comparison of the analytic network against truncated and
// converged ISTA on the test split.
int cmd_bench(const std::string& config_path, const std::string& data_path) {
  const Config c = read_config(config_path);
  const Dataset d = data_path.empty() ? generate_dataset(c) : load_container(data_path);
  const SupervisedSplit s = supervised_split(d, "test");
  const UnrolledModel model = analytic_model(c, d);
  const Matrix w = d.matrix("W");
  const double mu = dataset_step_bound(d);
  const double lambda = c.get_real("lambda_sup", d.contains("lambda_sup") ? d.scalar("lambda_sup") : 0.1);

  std::cout << "method,iterations,nmse_vs_target,wallclock_ms\n";
  auto t0 = std::chrono::steady_clock::now();
  const EvalResult net = evaluate(model, s);
  std::cout << model_name(model.kind()) << ',' << model.depth() << ',' << format_number(net.nmse) << ','
            << format_number(ms_since(t0)) << '\n';
  for (std::size_t iters : {model.depth(), static_cast<std::size_t>(c.get_uint("iters", 1000))}) {
    IstaOptions o;
    o.max_iters = iters;
    o.tol = iters == model.depth() ? 0.0 : 1e-10;
    Matrix est(w.cols(), s.inputs.cols());
    t0 = std::chrono::steady_clock::now();
    for (std::size_t col = 0; col < s.inputs.cols(); ++col) est.set_col(col, ista_solve(w, s.inputs.col(col), lambda, mu, o).x);
    const double ms = ms_since(t0);
    std::cout << "ista," << iters << ',' << format_number(nmse(est, s.targets)) << ',' << format_number(ms) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unrolled-optimization networks: data generation, training and evaluation"};
  app.require_subcommand(1);

  std::string gen_config, gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset from a config");
  gen->add_option("config", gen_config, "Config file")->required();
  gen->add_option("-o,--out", gen_out, "Output container (.urk)");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a network from its analytic initialization");
  tr->add_option("config", ta.config, "Config file")->required();
  tr->add_option("-d,--data", ta.data, "Dataset container")->required();
  tr->add_option("-o,--out", ta.out, "Checkpoint output (.urk)");
  tr->add_option("--metrics", ta.metrics, "Per-epoch metrics CSV");
  tr->add_option("--coupling", ta.coupling, "Per-layer weight-coupling residual CSV");
  tr->add_flag("--wallclock", ta.wallclock, "Record real epoch timings (breaks byte reproducibility)");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (or the analytic init) on a dataset split");
  ev->add_option("-d,--data", ea.data, "Dataset container")->required();
  auto* ck = ev->add_option("-c,--checkpoint", ea.checkpoint, "Checkpoint container");
  auto* an = ev->add_option("--analytic", ea.analytic, "Evaluate the analytic init described by this config instead");
  ck->excludes(an);
  ev->add_option("--report", ea.report, "Report CSV (default stdout)");
  ev->add_option("--split", ea.split, "Split to evaluate")->check(CLI::IsMember({"train", "test"}));
  ev->add_flag("--wallclock", ea.wallclock, "Record real evaluation time");

  std::string solver, solve_config, solve_data, solve_report;
  auto* so = app.add_subcommand("solve", "Run a classic iterative solver on a dataset");
  so->add_option("--solver", solver, "Solver")->required()->check(CLI::IsMember({"ista", "iht", "admm", "rpca", "modl"}));
  so->add_option("config", solve_config, "Config file")->required();
  so->add_option("-d,--data", solve_data, "Dataset container")->required();
  so->add_option("--report", solve_report, "Report CSV (default stdout)");

  std::string gc_config;
  auto* gc = app.add_subcommand("gradcheck", "Compare tape gradients with finite differences");
  gc->add_option("config", gc_config, "Config file")->required();

  std::string bench_config, bench_data;
  auto* be = app.add_subcommand("bench", "Time the analytic network against ISTA");
  be->add_option("config", bench_config, "Config file")->required();
  be->add_option("-d,--data", bench_data, "Dataset container (generated from the config when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gen_config, gen_out);
    if (*tr) return cmd_train(ta);
    if (*ev) {
      if (ea.checkpoint.empty() && ea.analytic.empty()) {
        std::cerr << "error: eval needs -c or --analytic\n\n" << ev->help();
        return kUsage;
      }
      return cmd_eval(ea);
    }
    if (*so) return cmd_solve(solver, solve_config, solve_data, solve_report);
    if (*gc) return cmd_gradcheck(gc_config);
    if (*be) return cmd_bench(bench_config, bench_data);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}
