#include "gradtd/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "gradtd/config.hpp"
#include "gradtd/harness.hpp"
#include "gradtd/oracles.hpp"
#include "gradtd/verify.hpp"

namespace gradtd::cli {

namespace {

namespace fs = std::filesystem;

/// Experiment flags shared by run, replicate and bellman. Each one is kept as
/// text and applied through the same key-value path as config files.
struct ExperimentFlags {
  std::string preset;
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> bound;  // (config key, flag name)
  std::map<std::string, std::string> values;
  bool crn = false;
  bool timing = false;
  int verbosity = 0;
};

void add_experiment_flags(CLI::App* app, ExperimentFlags& flags) {
  app->add_option("--preset", flags.preset, "Start from a named preset")
      ->check(CLI::IsMember(preset_names()));
  app->add_option("--config", flags.config_path, "Flat key = value file, or a summary.json to rerun")
      ->check(CLI::ExistingFile);
  const std::vector<std::tuple<std::string, std::string, std::string>> table = {
      {"--model", "model", "linear | speed_scaling_exponential | speed_scaling_geometric"},
      {"--algo", "algorithms", "Comma-separated algorithms, optionally name@lambda"},
      {"--beta", "beta", "Discount factor (1 for average cost)"},
      {"--lambda", "lambda", "Default trace parameter"},
      {"--epsilon", "epsilon", "Speed-scaling policy parameter"},
      {"--a", "a", "Linear model coefficient"},
      {"--noise-var", "noise_var", "Linear model noise variance"},
      {"--arrival-prob", "arrival_prob", "Geometric arrival parameter"},
      {"--lattice-step", "lattice_step", "Geometric arrival lattice step"},
      {"--features", "features", "auto | quadratic | speed_scaling"},
      {"--T", "iterations", "Estimator iterations per trial (accepts 1e6)"},
      {"--burn-in", "burn_in", "Discarded steps before estimation"},
      {"--reps", "replications", "Number of independent trials"},
      {"--seed", "seed", "Base seed (falls back to GRADTD_SEED)"},
      {"--threads", "threads", "Worker pool size (0 = machine parallelism)"},
      {"--out", "output_dir", "Output directory"},
      {"--bins", "bins", "Histogram bins"},
      {"--cadence", "cadence", "Path recording cadence for `run`"},
      {"--checkpoints", "checkpoints", "Comma-separated checkpoint iterations"},
      {"--x-max", "bellman_x_max", "Upper end of the Bellman error grid"},
  };
  for (const auto& [flag, key, help] : table) {
    app->add_option(flag, flags.values[key], help);
    flags.bound.emplace_back(key, flag);
  }
  app->add_flag("--crn", flags.crn, "Share one trajectory across algorithms");
  app->add_flag("--timing", flags.timing, "Record wall-clock times (outputs are no longer reproducible)");
  app->add_flag("-v,--verbose", flags.verbosity, "Verbose output");
}

ExperimentConfig resolve_config(CLI::App* app, const ExperimentFlags& flags) {
  ExperimentConfig config = flags.preset.empty() ? ExperimentConfig{} : preset(flags.preset);
  if (const char* env = std::getenv("GRADTD_SEED"); env != nullptr && *env != '\0') {
    apply_key_values(config, {{"seed", env}});
  }
  if (!flags.config_path.empty()) apply_key_values(config, read_config_file(flags.config_path));
  KeyValues overrides;
  for (const auto& [key, flag] : flags.bound) {
    if (app->count(flag) > 0) overrides.emplace_back(key, flags.values.at(key));
  }
  if (flags.crn) overrides.emplace_back("crn", "true");
  if (flags.timing) overrides.emplace_back("timing", "true");
  apply_key_values(config, overrides);
  config.validate();
  return config;
}

void print_estimate(std::ostream& out, const AlgorithmSpec& spec, const ThetaEstimate& est) {
  std::string theta;
  for (long j = 0; j < est.theta.size(); ++j) theta += fmt::format("{}{:.6g}", j ? ", " : "", est.theta[j]);
  fmt::print(out, "{:<24} theta=({})", spec.label(), theta);
  if (est.kappa != 0.0) fmt::print(out, " kappa={:.6g}", est.kappa);
  if (est.eta != 0.0) fmt::print(out, " eta={:.6g}", est.eta);
  if (est.rank_deficient) fmt::print(out, " [rank deficient]");
  fmt::print(out, "\n");
}

int do_run(const ExperimentConfig& config, long trial_index, std::ostream& out) {
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const auto trial = run_trial(config, trial_index, true);
  ReplicationResult result;
  result.trials = {trial};
  for (std::size_t i = 0; i < trial.algorithms.size(); ++i) {
    result.summaries.push_back(summarize(result.trials, i, config.histogram_bins));
  }
  write_summary_json((dir / "summary.json").string(), config, result);
  write_estimates_csv((dir / "estimates.csv").string(), config, result.trials);
  write_path_csv((dir / "path.csv").string(), trial);
  fmt::print(out, "trial {} (seed {})\n", trial.trial_index, trial.seed);
  for (const auto& alg : trial.algorithms) print_estimate(out, alg.spec, alg.final);
  fmt::print(out, "wrote {}\n", dir.string());
  return kSuccess;
}

void print_summaries(std::ostream& out, const ReplicationResult& result) {
  for (const auto& s : result.summaries) {
    std::string mean;
    std::string var;
    for (long j = 0; j < s.mean.size(); ++j) {
      mean += fmt::format("{}{:.6g}", j ? ", " : "", s.mean[j]);
      var += fmt::format("{}{:.4g}", j ? ", " : "", s.variance[j]);
    }
    fmt::print(out, "{:<24} mean=({}) var=({})", s.spec.label(), mean, var);
    if (s.kappa_mean != 0.0) fmt::print(out, " kappa={:.6g}", s.kappa_mean);
    fmt::print(out, "\n");
  }
}

int do_replicate(const ExperimentConfig& config, std::ostream& out, bool verbose) {
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const auto result = replicate(config);
  write_summary_json((dir / "summary.json").string(), config, result);
  write_estimates_csv((dir / "estimates.csv").string(), config, result.trials);
  if (!config.checkpoints.empty() && config.model.kind == ModelKind::speed_scaling_geometric) {
    write_bellman_csv((dir / "bellman.csv").string(), bellman_curves(config, result, config.checkpoints));
  }
  fmt::print(out, "{} replications of T={}\n", config.replications, config.iterations);
  print_summaries(out, result);
  if (verbose) fmt::print(out, "wall time {:.1f} ms\n", result.wall_ms);
  fmt::print(out, "wrote {}\n", dir.string());
  return kSuccess;
}

int do_bellman(const ExperimentConfig& config, std::ostream& out) {
  if (config.model.kind != ModelKind::speed_scaling_geometric) {
    throw std::invalid_argument("bellman requires the speed_scaling_geometric model");
  }
  if (config.checkpoints.empty()) throw std::invalid_argument("bellman requires --checkpoints");
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const auto result = replicate(config);
  const auto curves = bellman_curves(config, result, config.checkpoints);
  write_summary_json((dir / "summary.json").string(), config, result);
  write_estimates_csv((dir / "estimates.csv").string(), config, result.trials);
  write_bellman_csv((dir / "bellman.csv").string(), curves);
  for (const auto& rec : curves) {
    fmt::print(out, "{:<24} T={:<8} mean|E_B|={:.6g}\n", rec.spec.label(), rec.T, rec.curve.mean_abs());
  }
  fmt::print(out, "wrote {}\n", dir.string());
  return kSuccess;
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-based LSTD estimators for relative value functions"};
  app.name("gradtd");
  app.require_subcommand(1);

  ExperimentFlags run_flags;
  long trial_index = 0;
  auto* run = app.add_subcommand("run", "Run one trial and record its estimate path");
  add_experiment_flags(run, run_flags);
  run->add_option("--trial", trial_index, "Trial index (seed = base seed xor index)")->check(CLI::NonNegativeNumber);

  ExperimentFlags rep_flags;
  auto* rep = app.add_subcommand("replicate", "Run independent replications");
  add_experiment_flags(rep, rep_flags);

  ExperimentFlags bell_flags;
  auto* bell = app.add_subcommand("bellman", "Bellman error sweep on the geometric queue");
  add_experiment_flags(bell, bell_flags);

  auto* oracle_cmd = app.add_subcommand("oracle", "Print reference values");
  oracle_cmd->require_subcommand(1);
  double lin_a = 0.7;
  double lin_beta = 0.9;
  double lin_noise = 1.0;
  auto* lin = oracle_cmd->add_subcommand("linear", "Closed-form value function of the linear model");
  lin->add_option("--a", lin_a, "Autoregression coefficient");
  lin->add_option("--beta", lin_beta, "Discount factor");
  lin->add_option("--noise-var", lin_noise, "Noise variance");

  double fp_a = 0.7;
  double fp_beta = 0.9;
  double fp_lambda = 1.0;
  std::string fp_form = "gradient";
  std::string fp_samples = "200000";
  std::uint64_t fp_seed = 20240917;
  auto* fp = oracle_cmd->add_subcommand("fixed-point", "Monte-Carlo fixed point on the linear model");
  fp->add_option("--a", fp_a, "Autoregression coefficient");
  fp->add_option("--beta", fp_beta, "Discount factor");
  fp->add_option("--lambda", fp_lambda, "Trace parameter");
  fp->add_option("--form", fp_form, "gradient | standard")->check(CLI::IsMember({"gradient", "standard"}));
  fp->add_option("--samples", fp_samples, "Sample count (accepts 1e5)");
  fp->add_option("--seed", fp_seed, "Seed");

  std::string ex_model = "linear";
  std::string ex_func = "x";
  int ex_t = 1;
  double ex_x0 = 1.0;
  std::string ex_samples = "100000";
  std::uint64_t ex_seed = 7;
  auto* ex = oracle_cmd->add_subcommand("exchange", "Monte-Carlo check of d/dx E[f(X(t))] = E[S(t) f'(X(t))]");
  ex->add_option("--model", ex_model, "linear | speed_scaling_exponential");
  ex->add_option("--f", ex_func, "x | x2")->check(CLI::IsMember({"x", "x2"}));
  ex->add_option("--t", ex_t, "Horizon")->check(CLI::NonNegativeNumber);
  ex->add_option("--x0", ex_x0, "Initial state");
  ex->add_option("--samples", ex_samples, "Sample count");
  ex->add_option("--seed", ex_seed, "Seed");

  bool quick = false;
  std::string scratch = "verify_scratch";
  std::vector<int> only;
  std::uint64_t verify_seed = verify::SuiteOptions{}.seed;
  auto* ver = app.add_subcommand("verify", "Run the built-in acceptance suite");
  ver->add_flag("--quick", quick, "Skip the long queueing sweep");
  ver->add_option("--scratch", scratch, "Directory for determinism outputs");
  ver->add_option("--only", only, "Run only these criteria")->delimiter(',');
  ver->add_option("--seed", verify_seed, "Seed");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    // Subcommand help arrives as CallForHelp on the parent; other errors are usage errors.
    if (e.get_exit_code() == 0) {
      out << e.what() << "\n";
      return kSuccess;
    }
    fmt::print(err, "error: {}\n", e.what());
    fmt::print(err, "run with --help for usage\n");
    return kValidationError;
  }

  try {
    if (*run) return do_run(resolve_config(run, run_flags), trial_index, out);
    if (*rep) return do_replicate(resolve_config(rep, rep_flags), out, rep_flags.verbosity > 0);
    if (*bell) return do_bellman(resolve_config(bell, bell_flags), out);
    if (*lin) {
      const auto sol = oracle::analytic_linear_theta(lin_a, lin_beta, lin_noise);
      fmt::print(out, "theta*=({:.6g}, {:.6g})\n", sol.theta1, sol.theta2);
      fmt::print(out, "eta={:.6g}\n", sol.eta);
      return kSuccess;
    }
    if (*fp) {
      ModelSpec spec;
      spec.a = fp_a;
      const Model model(spec);
      oracle::FixedPointOptions o;
      o.form = fp_form == "gradient" ? oracle::FixedPointForm::gradient : oracle::FixedPointForm::standard;
      o.beta = fp_beta;
      o.lambda = fp_lambda;
      o.n_samples = parse_count(fp_samples);
      o.seed = fp_seed;
      const auto res = oracle::mc_fixed_point(model, FeatureMap::quadratic(), o);
      fmt::print(out, "theta=({:.6g}, {:.6g}) stderr=({:.3g}, {:.3g}) window={}{}\n", res.theta[0], res.theta[1],
                 res.theta_stderr[0], res.theta_stderr[1], res.window, res.singular ? " [singular]" : "");
      return kSuccess;
    }
    if (*ex) {
      ModelSpec spec;
      spec.kind = parse_model_kind(ex_model);
      const Model model(spec);
      oracle::ExchangeOptions o;
      o.horizon = ex_t;
      o.x0 = Vector::Constant(1, ex_x0);
      o.n_samples = parse_count(ex_samples);
      o.seed = ex_seed;
      const auto f = ex_func == "x" ? oracle::identity_function() : oracle::square_function();
      const auto res = oracle::gradient_exchange_check(model, f, o);
      fmt::print(out, "lhs={:.6g} (se {:.2g}) rhs={:.6g} (se {:.2g}) diff se {:.2g}: {}\n", res.lhs[0],
                 res.stderr_lhs[0], res.rhs[0], res.stderr_rhs[0], res.stderr_diff[0],
                 res.agrees(3.0) ? "agree" : "DISAGREE");
      return kSuccess;
    }
    if (*ver) {
      verify::SuiteOptions o;
      o.quick = quick;
      o.only = only;
      o.seed = verify_seed;
      o.scratch_dir = scratch;
      o.on_result = [&out](const verify::CriterionResult& r) { out << verify::format_result(r) << std::endl; };
      const auto results = verify::run_acceptance(o);
      const bool ok = verify::all_passed(results);
      long passed = 0;
      for (const auto& r : results) passed += r.passed ? 1 : 0;
      fmt::print(out, "{}/{} criteria passed\n", passed, results.size());
      return ok ? kSuccess : kAcceptanceFailure;
    }
  } catch (const std::invalid_argument& e) {
    fmt::print(err, "invalid configuration: {}\n", e.what());
    return kValidationError;
  } catch (const TrialError& e) {
    fmt::print(err, "trial {} failed: {}\n", e.trial_index(), e.what());
    return kValidationError;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kValidationError;
  }
  return kValidationError;
}

}  // namespace gradtd::cli
