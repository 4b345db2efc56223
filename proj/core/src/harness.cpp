#include "gradtd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace gradtd {

TrialError::TrialError(long trial_index, const std::string& what)
    : std::runtime_error(fmt::format("trial {} failed: {}", trial_index, what)),
      trial_index_(trial_index) {}

std::uint64_t algorithm_stream(const ExperimentConfig& config, std::size_t position) {
  return config.common_random_numbers ? 0 : static_cast<std::uint64_t>(position) + 1;
}

AlgorithmTrial run_algorithm(const ExperimentConfig& config, const AlgorithmSpec& spec,
                             std::size_t position, long trial_index, bool record_path) {
  const auto start = std::chrono::steady_clock::now();
  const Model model(config.model);
  const FeatureMap features = config.feature_map(model);

  EstimatorOptions options;
  options.algorithm = spec.algorithm;
  options.beta = config.beta;
  options.lambda = spec.lambda;
  options.m0_scale = config.m0_scale;
  EstimatorState est = make_estimator(options, model, features);

  Trajectory path(model, features,
                  RandomStream(config.trial_seed(trial_index), algorithm_stream(config, position)));
  path.advance(config.burn_in);

  std::vector<long> checkpoints = config.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  auto next_checkpoint = checkpoints.begin();

  const bool recover = is_gradient(spec.algorithm) && config.beta < 1.0;
  const bool track_cost = !is_average_cost(spec.algorithm) && !recover;

  AlgorithmTrial out;
  out.spec = spec;
  Vector theta_current = Vector::Zero(features.dim());
  for (long t = 1; t <= config.iterations; ++t) {
    const Transition& tr = path.next();
    update(est, tr);
    if (recover) {
      constant_recovery_step(est, tr, theta_current);
    } else if (track_cost) {
      average_cost_step(est, tr);
    }

    const bool refresh = t == 1 || t % config.cadence == 0;
    while (next_checkpoint != checkpoints.end() && *next_checkpoint < t) ++next_checkpoint;
    const bool at_checkpoint = next_checkpoint != checkpoints.end() && *next_checkpoint == t;
    if (refresh || at_checkpoint) {
      ThetaEstimate now = finalize(est);
      theta_current = now.theta;
      if (record_path && refresh) out.path.push_back({t, now});
      if (at_checkpoint) out.checkpoints.push_back({t, std::move(now)});
    }
  }
  out.final = finalize(est);
  if (!out.final.theta.allFinite() || !std::isfinite(out.final.kappa) || !std::isfinite(out.final.eta)) {
    throw std::runtime_error(fmt::format("{} produced a non-finite estimate", spec.label()));
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

TrialResult run_trial(const ExperimentConfig& config, long trial_index, bool record_path) {
  config.validate();
  TrialResult out;
  out.trial_index = trial_index;
  out.seed = config.trial_seed(trial_index);
  const auto specs = config.algorithm_specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    out.algorithms.push_back(run_algorithm(config, specs[i], i, trial_index, record_path));
  }
  return out;
}

Histogram make_histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  if (values.empty()) {
    h.edges.assign(bins + 1, 0.0);
    return h;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double width = (hi - lo) / bins;
  h.edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = lo + width * i;
  h.edges[bins] = hi;
  for (double v : values) {
    int k = 0;
    if (width > 0.0) k = std::min(bins - 1, static_cast<int>(std::floor((v - lo) / width)));
    ++h.counts[std::max(k, 0)];
  }
  return h;
}

ReplicationSummary summarize(std::vector<TrialResult> trials, std::size_t position, int bins) {
  if (trials.empty()) throw std::invalid_argument("summarize: no trials");
  std::sort(trials.begin(), trials.end(),
            [](const TrialResult& a, const TrialResult& b) { return a.trial_index < b.trial_index; });

  ReplicationSummary s;
  s.spec = trials.front().algorithms.at(position).spec;
  for (const auto& trial : trials) {
    const auto& alg = trial.algorithms.at(position);
    s.trial_indices.push_back(trial.trial_index);
    s.estimates.push_back(alg.final);
    s.wall_ms_total += alg.wall_ms;
  }
  const long n = static_cast<long>(s.estimates.size());
  const long d = s.estimates.front().theta.size();
  s.mean = Vector::Zero(d);
  s.min = Vector::Constant(d, std::numeric_limits<double>::infinity());
  s.max = Vector::Constant(d, -std::numeric_limits<double>::infinity());
  for (const auto& e : s.estimates) {
    s.mean += e.theta;
    s.min = s.min.cwiseMin(e.theta);
    s.max = s.max.cwiseMax(e.theta);
    s.kappa_mean += e.kappa;
    s.eta_mean += e.eta;
  }
  s.mean /= static_cast<double>(n);
  s.kappa_mean /= static_cast<double>(n);
  s.eta_mean /= static_cast<double>(n);
  s.variance = Vector::Zero(d);
  if (n > 1) {
    for (const auto& e : s.estimates) {
      s.variance += (e.theta - s.mean).cwiseAbs2();
      s.kappa_variance += (e.kappa - s.kappa_mean) * (e.kappa - s.kappa_mean);
    }
    s.variance /= static_cast<double>(n - 1);
    s.kappa_variance /= static_cast<double>(n - 1);
  }
  for (long j = 0; j < d; ++j) {
    std::vector<double> column;
    column.reserve(n);
    for (const auto& e : s.estimates) column.push_back(e.theta[j]);
    s.histograms.push_back(make_histogram(column, bins));
  }
  s.wall_ms_mean = s.wall_ms_total / static_cast<double>(n);
  return s;
}

ReplicationResult replicate(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const long n = config.replications;
  int workers = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));

  std::vector<TrialResult> trials(n);
  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  long failed_index = std::numeric_limits<long>::max();
  std::string failed_what;

  auto work = [&] {
    while (!failed.load()) {
      const long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        trials[i] = run_trial(config, i);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (i < failed_index) {
          failed_index = i;
          failed_what = e.what();
        }
        failed.store(true);
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failed.load()) throw TrialError(failed_index, failed_what);

  ReplicationResult out;
  out.trials = std::move(trials);
  const std::size_t n_algorithms = out.trials.front().algorithms.size();
  for (std::size_t a = 0; a < n_algorithms; ++a) {
    out.summaries.push_back(summarize(out.trials, a, config.histogram_bins));
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<BellmanCurveRecord> bellman_curves(const ExperimentConfig& config,
                                               const ReplicationResult& result,
                                               std::vector<long> checkpoints) {
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  std::vector<BellmanCurveRecord> out;
  if (checkpoints.empty()) return out;

  const Model model(config.model);
  const FeatureMap features = config.feature_map(model);
  const auto grid = oracle::lattice_grid(model, config.bellman_x_max);
  const auto specs = config.algorithm_specs();
  const double n = static_cast<double>(result.trials.size());

  auto estimate_at = [](const AlgorithmTrial& alg, long T) -> const ThetaEstimate& {
    for (const auto& c : alg.checkpoints) {
      if (c.t == T) return c.estimate;
    }
    throw std::logic_error(fmt::format("no finalization recorded at T = {}", T));
  };

  for (std::size_t a = 0; a < specs.size(); ++a) {
    double eta = 0.0;
    for (const auto& trial : result.trials) eta += estimate_at(trial.algorithms[a], checkpoints.back()).eta;
    eta /= n;
    for (long T : checkpoints) {
      Vector theta_bar = Vector::Zero(features.dim());
      for (const auto& trial : result.trials) theta_bar += estimate_at(trial.algorithms[a], T).theta;
      theta_bar /= n;
      out.push_back({specs[a], T, oracle::bellman_error(model, features, theta_bar, eta, grid)});
    }
  }
  return out;
}

std::vector<BellmanCurveRecord> bellman_sweep(const ExperimentConfig& config, std::vector<long> checkpoints) {
  if (checkpoints.empty()) return {};
  if (config.model.kind != ModelKind::speed_scaling_geometric) {
    throw std::invalid_argument("the Bellman sweep needs the geometric speed-scaling model");
  }
  ExperimentConfig run = config;
  run.checkpoints = checkpoints;
  run.iterations = *std::max_element(checkpoints.begin(), checkpoints.end());
  const auto result = replicate(run);
  return bellman_curves(run, result, std::move(checkpoints));
}

namespace {

std::string g17(double v) { return fmt::format("{:.17g}", v); }

nlohmann::json to_json(const Vector& v) {
  auto arr = nlohmann::json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

void write_summary_json(const std::string& path, const ExperimentConfig& config,
                        const ReplicationResult& result) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json echo = nlohmann::ordered_json::object();
  for (const auto& [key, value] : to_key_values(config)) echo[key] = value;
  doc["config"] = echo;
  doc["replications"] = result.trials.size();
  auto algos = nlohmann::ordered_json::array();
  for (const auto& s : result.summaries) {
    nlohmann::ordered_json a;
    a["algorithm"] = s.spec.label();
    a["theta_mean"] = to_json(s.mean);
    a["theta_variance"] = to_json(s.variance);
    a["theta_min"] = to_json(s.min);
    a["theta_max"] = to_json(s.max);
    a["kappa_mean"] = s.kappa_mean;
    a["kappa_variance"] = s.kappa_variance;
    a["eta_mean"] = s.eta_mean;
    auto hists = nlohmann::ordered_json::array();
    for (const auto& h : s.histograms) hists.push_back({{"edges", h.edges}, {"counts", h.counts}});
    a["histograms"] = hists;
    if (config.record_timing) {
      a["wall_ms_total"] = s.wall_ms_total;
      a["wall_ms_mean"] = s.wall_ms_mean;
    }
    algos.push_back(a);
  }
  doc["algorithms"] = algos;
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_estimates_csv(const std::string& path, const ExperimentConfig& config,
                         const std::vector<TrialResult>& trials) {
  auto out = open_out(path);
  long d = 0;
  if (!trials.empty() && !trials.front().algorithms.empty()) {
    d = trials.front().algorithms.front().final.theta.size();
  }
  out << "algorithm,trial_index,seed";
  for (long j = 1; j <= d; ++j) out << ",theta_" << j;
  out << ",kappa,eta,wall_ms\n";
  for (const auto& trial : trials) {
    for (const auto& alg : trial.algorithms) {
      out << alg.spec.label() << ',' << trial.trial_index << ',' << trial.seed;
      for (long j = 0; j < d; ++j) out << ',' << g17(alg.final.theta[j]);
      out << ',' << g17(alg.final.kappa) << ',' << g17(alg.final.eta) << ','
          << g17(config.record_timing ? alg.wall_ms : 0.0) << '\n';
    }
  }
}

void write_bellman_csv(const std::string& path, const std::vector<BellmanCurveRecord>& curves) {
  auto out = open_out(path);
  out << "algorithm,T,x,E_B\n";
  for (const auto& rec : curves) {
    for (std::size_t i = 0; i < rec.curve.grid.size(); ++i) {
      out << rec.spec.label() << ',' << rec.T << ',' << g17(rec.curve.grid[i]) << ','
          << g17(rec.curve.values[i]) << '\n';
    }
  }
}

void write_path_csv(const std::string& path, const TrialResult& trial) {
  auto out = open_out(path);
  long d = 0;
  if (!trial.algorithms.empty()) d = trial.algorithms.front().final.theta.size();
  out << "algorithm,t";
  for (long j = 1; j <= d; ++j) out << ",theta_" << j;
  out << ",kappa,eta\n";
  for (const auto& alg : trial.algorithms) {
    for (const auto& p : alg.path) {
      out << alg.spec.label() << ',' << p.t;
      for (long j = 0; j < d; ++j) out << ',' << g17(p.estimate.theta[j]);
      out << ',' << g17(p.estimate.kappa) << ',' << g17(p.estimate.eta) << '\n';
    }
  }
}

}  // namespace gradtd
