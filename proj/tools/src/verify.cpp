#include "gradtd/verify.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gradtd/config.hpp"
#include "gradtd/estimators.hpp"
#include "gradtd/harness.hpp"
#include "gradtd/model.hpp"
#include "gradtd/oracles.hpp"

namespace gradtd::verify {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double rel_err(double value, double target) { return std::abs(value - target) / std::abs(target); }

ExperimentConfig linear_config(double beta, std::uint64_t seed) {
  ExperimentConfig c;
  c.model.kind = ModelKind::linear;
  c.model.a = 0.7;
  c.model.noise_var = 1.0;
  c.beta = beta;
  c.seed = seed;
  c.threads = 1;
  return c;
}

// 1, 2: single ∇LSTD trial on the linear model with κ recovery.
CriterionResult linear_consistency(int id, double beta, double theta1_tol, double theta2_tol,
                                   std::uint64_t seed) {
  const auto start = Clock::now();
  CriterionResult r{id, fmt::format("linear-model consistency (beta={})", beta), false, {}, 0.0};
  const auto exact = oracle::analytic_linear_theta(0.7, beta);
  auto c = linear_config(beta, seed);
  c.algorithms = {"grad_lstd"};
  c.iterations = 1000000;
  const auto trial = run_trial(c, 0);
  const auto& est = trial.algorithms.front().final;
  const double theta2 = est.theta[1];
  const double theta1 = est.theta[0] + est.kappa;
  r.seconds = seconds_since(start);
  const double e2 = rel_err(theta2, exact.theta2);
  const double e1 = rel_err(theta1, exact.theta1);
  r.passed = e2 <= theta2_tol && e1 <= theta1_tol && r.seconds < 10.0;
  r.detail = fmt::format("theta2={:.6g} (target {:.6g}, err {:.3g}% <= {}%), theta1=kappa={:.6g} (target {:.6g}, err {:.3g}% <= {}%), runtime < 10 s",
                         theta2, exact.theta2, 100 * e2, 100 * theta2_tol, theta1, exact.theta1, 100 * e1,
                         100 * theta1_tol);
  return r;
}

// Variance ratio var_LSTD(θ₂)/var_∇LSTD(θ₂) over 200 replications at T = 1e3.
double variance_ratio(double beta, std::uint64_t seed, double& var_lstd, double& var_grad) {
  auto c = linear_config(beta, seed);
  c.algorithms = {"lstd", "grad_lstd"};
  c.iterations = 1000;
  c.replications = 200;
  c.threads = 0;
  const auto result = replicate(c);
  var_lstd = result.summaries[0].variance[1];
  var_grad = result.summaries[1].variance[1];
  return var_lstd / var_grad;
}

CriterionResult criterion_variance(std::uint64_t seed, double& ratio_out) {
  const auto start = Clock::now();
  CriterionResult r{3, "variance reduction, beta=0.9 (200 reps, T=1e3)", false, {}, 0.0};
  double vl = 0.0;
  double vg = 0.0;
  ratio_out = variance_ratio(0.9, seed, vl, vg);
  r.seconds = seconds_since(start);
  r.passed = ratio_out >= 3.0 && r.seconds < 30.0;
  r.detail = fmt::format("var_LSTD={:.4g}, var_gradLSTD={:.4g}, ratio={:.3g} >= 3, runtime < 30 s", vl, vg,
                         ratio_out);
  return r;
}

CriterionResult criterion_beta_robust(std::uint64_t seed, double ratio_09) {
  const auto start = Clock::now();
  CriterionResult r{4, "variance reduction grows with beta (0.99 vs 0.9)", false, {}, 0.0};
  double vl = 0.0;
  double vg = 0.0;
  const double ratio = variance_ratio(0.99, seed, vl, vg);
  r.seconds = seconds_since(start);
  r.passed = ratio > ratio_09;
  r.detail = fmt::format("ratio(beta=0.99)={:.4g} > ratio(beta=0.9)={:.4g}", ratio, ratio_09);
  return r;
}

CriterionResult criterion_lambda_one(std::uint64_t seed) {
  const auto start = Clock::now();
  CriterionResult r{5, "gradLSTD(1) matches gradLSTD on a shared trajectory", false, {}, 0.0};
  auto c = linear_config(0.9, seed);
  c.algorithms = {"grad_lstd", "grad_lstd_lambda@1"};
  c.common_random_numbers = true;
  c.iterations = 1000000;
  const auto trial = run_trial(c, 0);
  const double a = trial.algorithms[0].final.theta[1];
  const double b = trial.algorithms[1].final.theta[1];
  const double e = rel_err(b, a);
  r.seconds = seconds_since(start);
  r.passed = e < 0.01;
  r.detail = fmt::format("theta2 gradLSTD={:.8g}, gradLSTD(1)={:.8g}, rel diff {:.3g}% < 1%", a, b, 100 * e);
  return r;
}

bool traces_identical(const ModelSpec& spec, Algorithm base, Algorithm lambda_form, double beta,
                      std::uint64_t seed, long steps) {
  const Model model(spec);
  const FeatureMap features = default_features(model);
  EstimatorOptions o1{base, beta, 1.0, 1e-3, {}};
  EstimatorOptions o2{lambda_form, beta, 1.0, 1e-3, {}};
  auto s1 = make_estimator(o1, model, features);
  auto s2 = make_estimator(o2, model, features);
  Trajectory path(model, features, RandomStream(seed, 0));
  path.advance(100);
  for (long t = 0; t < steps; ++t) {
    const Transition& tr = path.next();
    update(s1, tr);
    update(s2, tr);
    if (s1.trace.size() != s2.trace.size()) return false;
    for (long i = 0; i < s1.trace.size(); ++i) {
      if (s1.trace.data()[i] != s2.trace.data()[i]) return false;
    }
  }
  return true;
}

CriterionResult criterion_trace_equivalence(std::uint64_t seed) {
  const auto start = Clock::now();
  CriterionResult r{6, "lambda=1 trace equivalences (bit-identical, 1e4 steps)", false, {}, 0.0};
  ModelSpec linear;
  ModelSpec expo;
  expo.kind = ModelKind::speed_scaling_exponential;
  const bool lstd_lin = traces_identical(linear, Algorithm::lstd, Algorithm::lstd_lambda, 0.9, seed, 10000);
  const bool grad_lin =
      traces_identical(linear, Algorithm::grad_lstd, Algorithm::grad_lstd_lambda, 0.9, seed, 10000);
  const bool grad_expo =
      traces_identical(expo, Algorithm::grad_lstd, Algorithm::grad_lstd_lambda, 1.0, seed, 10000);
  r.seconds = seconds_since(start);
  r.passed = lstd_lin && grad_lin && grad_expo;
  r.detail = fmt::format("Alg3(1)==Alg1 linear: {}, Alg4(1)==Alg2 linear: {}, Alg4(1)==Alg2 exponential queue: {}",
                         lstd_lin, grad_lin, grad_expo);
  return r;
}

CriterionResult criterion_exchange(std::uint64_t seed) {
  const auto start = Clock::now();
  CriterionResult r{7, "gradient-exchange identity (1e5 samples)", false, {}, 0.0};
  const double a = 0.7;
  ModelSpec lin_spec;
  lin_spec.a = a;
  const Model linear(lin_spec);
  ModelSpec expo_spec;
  expo_spec.kind = ModelKind::speed_scaling_exponential;
  const Model expo(expo_spec);

  bool ok = true;
  std::ostringstream detail;
  auto check = [&](const Model& m, const oracle::TestFunction& f, int t, double x0, const char* tag) {
    oracle::ExchangeOptions o;
    o.horizon = t;
    o.x0 = Vector::Constant(1, x0);
    o.n_samples = 100000;
    o.seed = seed + static_cast<std::uint64_t>(t);
    auto res = oracle::gradient_exchange_check(m, f, o);
    const bool pass = res.agrees(3.0);
    ok = ok && pass;
    detail << fmt::format("{} f={} t={}: |lhs-rhs|={:.2g} vs 3se={:.2g} {}; ", tag, f.name, t,
                          std::abs(res.lhs[0] - res.rhs[0]), 3 * res.stderr_diff[0], pass ? "ok" : "FAIL");
    return res;
  };
  for (int t : {0, 1, 3, 10}) check(linear, oracle::identity_function(), t, 1.0, "linear");
  for (int t : {1, 3}) check(expo, oracle::identity_function(), t, 3.0, "expo");

  const auto cube = check(linear, oracle::identity_function(), 3, 1.0, "linear");
  const double a3 = a * a * a;
  const bool cube_ok = std::abs(cube.rhs[0] - a3) < 3 * cube.stderr_rhs[0] &&
                       std::abs(cube.lhs[0] - a3) < 3 * cube.stderr_lhs[0];
  const auto sq = check(linear, oracle::square_function(), 2, 1.0, "linear");
  const double a4 = 2 * a * a * a * a;
  const bool sq_ok = std::abs(sq.rhs[0] - a4) < 3 * sq.stderr_rhs[0] && std::abs(sq.lhs[0] - a4) < 3 * sq.stderr_lhs[0];
  detail << fmt::format("exact a^3: rhs={:.6g} ({}), exact 2a^4: rhs={:.6g} lhs={:.6g} se={:.2g} ({})", cube.rhs[0],
                        cube_ok ? "ok" : "FAIL", sq.rhs[0], sq.lhs[0], sq.stderr_rhs[0], sq_ok ? "ok" : "FAIL");
  r.seconds = seconds_since(start);
  r.passed = ok && cube_ok && sq_ok && r.seconds < 30.0;
  r.detail = detail.str() + "; runtime < 30 s";
  return r;
}

// Max |S(t) − (X_ε(t) − X(t))/ε| over t ≤ 20 and `paths` noise sequences.
double sensitivity_deviation(const Model& model, double x0, std::uint64_t seed, int paths) {
  const double eps = 1e-6;
  double worst = 0.0;
  for (int p = 0; p < paths; ++p) {
    RandomStream rng(seed, static_cast<std::uint64_t>(p));
    Vector x = Vector::Constant(1, x0);
    Vector xe = Vector::Constant(1, x0 + eps);
    Matrix S = Matrix::Identity(1, 1);
    for (int t = 1; t <= 20; ++t) {
      const Vector n = model.draw_noise(rng);
      S = model.sensitivity(x) * S;
      x = model.next_state(x, n);
      xe = model.next_state(xe, n);
      worst = std::max(worst, std::abs(S(0, 0) - (xe[0] - x[0]) / eps));
    }
  }
  return worst;
}

CriterionResult criterion_sensitivity(std::uint64_t seed) {
  const auto start = Clock::now();
  CriterionResult r{8, "sensitivity product vs finite difference (eps=1e-6, t<=20)", false, {}, 0.0};
  ModelSpec lin;
  ModelSpec expo;
  expo.kind = ModelKind::speed_scaling_exponential;
  double worst_lin = 0.0;
  double worst_expo = 0.0;
  for (double x0 : {-2.0, 0.0, 1.0, 5.0}) worst_lin = std::max(worst_lin, sensitivity_deviation(Model(lin), x0, seed, 200));
  for (double x0 : {0.5, 3.0, 10.0}) worst_expo = std::max(worst_expo, sensitivity_deviation(Model(expo), x0, seed, 200));
  r.seconds = seconds_since(start);
  r.passed = worst_lin < 1e-4 && worst_expo < 1e-4;
  r.detail = fmt::format("max deviation linear={:.3g}, exponential queue={:.3g} (< 1e-4)", worst_lin, worst_expo);
  return r;
}

CriterionResult criterion_geometric(std::uint64_t seed) {
  const auto start = Clock::now();
  CriterionResult r{9, "geometric speed scaling: variance and Bellman error (100 reps, T=1e5)", false, {}, 0.0};
  ExperimentConfig c = preset("fig4-bellman");
  c.algorithms = {"regen_lstd", "grad_lstd", "grad_lstd_lambda@0"};
  c.replications = 100;
  c.iterations = 100000;
  c.checkpoints = {1000, 100000};
  c.seed = seed;
  c.threads = 0;
  const auto result = replicate(c);
  const auto& regen = result.summaries[0];
  const auto& grad0 = result.summaries[2];
  bool spread_ok = true;
  std::string spread;
  for (long j = 0; j < regen.variance.size(); ++j) {
    const double s_regen = std::sqrt(regen.variance[j]);
    const double s_grad = std::sqrt(grad0.variance[j]);
    spread_ok = spread_ok && s_grad < s_regen;
    spread += fmt::format("std theta{}: gradLSTD(0)={:.3g} < regenLSTD={:.3g} ", j + 1, s_grad, s_regen);
  }
  const auto curves = bellman_curves(c, result, c.checkpoints);
  auto mean_abs = [&](const std::string& label, long T) {
    for (const auto& rec : curves) {
      if (rec.spec.label() == label && rec.T == T) return rec.curve.mean_abs();
    }
    throw std::logic_error("missing Bellman curve");
  };
  const double grad_early = mean_abs("grad_lstd", 1000);
  const double grad_late = mean_abs("grad_lstd", 100000);
  const double regen_early = mean_abs("regen_lstd", 1000);
  const bool converged = rel_err(grad_early, grad_late) <= 0.10;
  const bool better = grad_early < regen_early;
  r.seconds = seconds_since(start);
  r.passed = spread_ok && converged && better && r.seconds < 300.0;
  r.detail = fmt::format(
      "(a) {}{}; (b) mean|E_B| gradLSTD T=1e3 {:.4g} vs T=1e5 {:.4g}, change {:.3g}% <= 10%: {}; (c) mean|E_B| "
      "gradLSTD T=1e3 {:.4g} < regenLSTD T=1e3 {:.4g}: {}; runtime < 300 s",
      spread, spread_ok ? "ok" : "FAIL", grad_early, grad_late, 100 * rel_err(grad_early, grad_late),
      converged ? "ok" : "FAIL", grad_early, regen_early, better ? "ok" : "FAIL");
  return r;
}

CriterionResult criterion_oracles(std::uint64_t seed) {
  const auto start = Clock::now();
  CriterionResult r{10, "oracle self-consistency", false, {}, 0.0};
  bool ok = true;
  std::string detail;
  for (double beta : {0.9, 0.99}) {
    const auto exact = oracle::analytic_linear_theta(0.7, beta);
    const auto series = oracle::truncated_series_linear_theta(0.7, beta);
    const double e1 = rel_err(series.theta1, exact.theta1);
    const double e2 = rel_err(series.theta2, exact.theta2);
    ok = ok && e1 < 1e-10 && e2 < 1e-10;
    detail += fmt::format("beta={}: series rel err theta1 {:.2g}, theta2 {:.2g} (< 1e-10); ", beta, e1, e2);
  }
  const Model model(ModelSpec{});
  oracle::FixedPointOptions o;
  o.form = oracle::FixedPointForm::gradient;
  o.lambda = 1.0;
  o.beta = 0.9;
  o.n_samples = 200000;
  o.seed = seed;
  const auto fp = oracle::mc_fixed_point(model, FeatureMap::quadratic(), o);
  const double target = oracle::analytic_linear_theta(0.7, 0.9).theta2;
  const double dev = std::abs(fp.theta[1] - target);
  const bool mc_ok = !fp.singular && dev < 3 * fp.theta_stderr[1];
  ok = ok && mc_ok;
  detail += fmt::format("mc_fixed_point(lambda=1) theta2={:.6g}, |dev|={:.3g} < 3se={:.3g}", fp.theta[1], dev,
                        3 * fp.theta_stderr[1]);
  r.seconds = seconds_since(start);
  r.passed = ok;
  r.detail = detail;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CriterionResult criterion_determinism(const std::string& scratch) {
  const auto start = Clock::now();
  CriterionResult r{11, "determinism: preset reruns give bit-identical estimates.csv", false, {}, 0.0};
  namespace fs = std::filesystem;
  bool ok = true;
  std::string detail;
  for (const auto& name : preset_names()) {
    ExperimentConfig c = preset(name);
    c.replications = 3;
    c.iterations = 2000;
    if (!c.checkpoints.empty()) c.checkpoints = {1000, 2000};
    std::string files[3];
    for (int run = 0; run < 3; ++run) {
      c.threads = run == 2 ? 2 : 1;
      const fs::path dir = fs::path(scratch) / name / ("run" + std::to_string(run));
      fs::create_directories(dir);
      const auto result = replicate(c);
      write_estimates_csv((dir / "estimates.csv").string(), c, result.trials);
      files[run] = slurp(dir / "estimates.csv");
    }
    const bool same = !files[0].empty() && files[0] == files[1] && files[1] == files[2];
    ok = ok && same;
    detail += fmt::format("{}: {}; ", name, same ? "identical" : "DIFFERENT");
  }
  r.seconds = seconds_since(start);
  r.passed = ok;
  r.detail = detail + "(serial, serial, 2 threads)";
  return r;
}

}  // namespace

std::string format_result(const CriterionResult& result) {
  return fmt::format("[{}] {:>2} {}: {} ({:.1f} s)", result.passed ? "PASS" : "FAIL", result.id, result.name,
                     result.detail, result.seconds);
}

std::vector<CriterionResult> run_acceptance(const SuiteOptions& options) {
  std::vector<CriterionResult> results;
  auto wanted = [&](int id) {
    if (!options.only.empty()) return std::find(options.only.begin(), options.only.end(), id) != options.only.end();
    return !(options.quick && id == 9);
  };
  auto record = [&](CriterionResult r) {
    if (options.on_result) options.on_result(r);
    results.push_back(std::move(r));
  };
  auto guarded = [&](int id, const std::string& name, auto&& fn) {
    if (!wanted(id)) return;
    try {
      record(fn());
    } catch (const std::exception& e) {
      record(CriterionResult{id, name, false, std::string("error: ") + e.what(), 0.0});
    }
  };
  const auto seed = options.seed;
  guarded(1, "linear-model consistency (beta=0.9)", [&] { return linear_consistency(1, 0.9, 0.03, 0.02, seed); });
  guarded(2, "linear-model consistency (beta=0.99)", [&] { return linear_consistency(2, 0.99, 0.05, 0.02, seed); });
  double ratio_09 = 0.0;
  guarded(3, "variance reduction", [&] { return criterion_variance(seed, ratio_09); });
  guarded(4, "variance reduction grows with beta", [&] {
    if (ratio_09 == 0.0) {
      double vl = 0.0;
      double vg = 0.0;
      ratio_09 = variance_ratio(0.9, seed, vl, vg);
    }
    return criterion_beta_robust(seed, ratio_09);
  });
  guarded(5, "gradLSTD(1) == gradLSTD", [&] { return criterion_lambda_one(seed); });
  guarded(6, "lambda=1 trace equivalences", [&] { return criterion_trace_equivalence(seed); });
  guarded(7, "gradient-exchange identity", [&] { return criterion_exchange(seed); });
  guarded(8, "sensitivity finite difference", [&] { return criterion_sensitivity(seed); });
  guarded(9, "geometric speed scaling", [&] { return criterion_geometric(seed); });
  guarded(10, "oracle self-consistency", [&] { return criterion_oracles(seed); });
  guarded(11, "determinism", [&] { return criterion_determinism(options.scratch_dir); });
  return results;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return !results.empty();
}

}  // namespace gradtd::verify
