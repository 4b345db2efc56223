#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradtd/config.hpp"
#include "gradtd/estimators.hpp"
#include "gradtd/oracles.hpp"

namespace gradtd {

struct CheckpointEstimate {
  long t = 0;
  ThetaEstimate estimate;
};

/// One algorithm's pass over one trajectory.
struct AlgorithmTrial {
  AlgorithmSpec spec;
  ThetaEstimate final;
  std::vector<CheckpointEstimate> path;         ///< finalizations at the cadence (when recorded)
  std::vector<CheckpointEstimate> checkpoints;  ///< finalizations at config.checkpoints
  double wall_ms = 0.0;
};

struct TrialResult {
  long trial_index = 0;
  std::uint64_t seed = 0;
  std::vector<AlgorithmTrial> algorithms;  ///< in config.algorithms order
};

class TrialError : public std::runtime_error {
 public:
  TrialError(long trial_index, const std::string& what);
  long trial_index() const { return trial_index_; }

 private:
  long trial_index_;
};

/// RNG stream id for the algorithm at `position`; all zero under common random numbers.
std::uint64_t algorithm_stream(const ExperimentConfig& config, std::size_t position);

/// Burn-in, then T estimator updates; deterministic in (config, trial_index).
AlgorithmTrial run_algorithm(const ExperimentConfig& config, const AlgorithmSpec& spec,
                             std::size_t position, long trial_index, bool record_path = false);
TrialResult run_trial(const ExperimentConfig& config, long trial_index, bool record_path = false);

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 equal-width edges over [min, max]
  std::vector<long> counts;
};

Histogram make_histogram(const std::vector<double>& values, int bins);

struct ReplicationSummary {
  AlgorithmSpec spec;
  std::vector<long> trial_indices;
  std::vector<ThetaEstimate> estimates;  ///< ordered by trial index
  Vector mean;
  Vector variance;  ///< sample variance (n − 1 denominator; 0 for a single trial)
  Vector min;
  Vector max;
  double kappa_mean = 0.0;
  double kappa_variance = 0.0;
  double eta_mean = 0.0;
  std::vector<Histogram> histograms;  ///< one per θ coordinate
  double wall_ms_total = 0.0;
  double wall_ms_mean = 0.0;
};

/// Aggregates trial results for the algorithm at `position`. The input order
/// does not matter: trials are sorted by index first.
ReplicationSummary summarize(std::vector<TrialResult> trials, std::size_t position, int bins);

struct ReplicationResult {
  std::vector<TrialResult> trials;  ///< ordered by trial index
  std::vector<ReplicationSummary> summaries;
  double wall_ms = 0.0;
};

/// Runs config.replications independent trials on a worker pool. A failing
/// trial aborts the run with a TrialError carrying its index.
ReplicationResult replicate(const ExperimentConfig& config);

struct BellmanCurveRecord {
  AlgorithmSpec spec;
  long T = 0;
  oracle::BellmanErrorCurve curve;
};

/// For each algorithm and checkpoint, averages θ over the replications and
/// evaluates the Bellman error on {0, Δ, …, bellman_x_max}. η_T is the
/// replication mean of η at the largest checkpoint.
std::vector<BellmanCurveRecord> bellman_sweep(const ExperimentConfig& config,
                                              std::vector<long> checkpoints);
std::vector<BellmanCurveRecord> bellman_curves(const ExperimentConfig& config,
                                               const ReplicationResult& result,
                                               std::vector<long> checkpoints);

// Outputs. Floating-point values are written with 17 significant digits.
void write_summary_json(const std::string& path, const ExperimentConfig& config,
                        const ReplicationResult& result);
void write_estimates_csv(const std::string& path, const ExperimentConfig& config,
                         const std::vector<TrialResult>& trials);
void write_bellman_csv(const std::string& path, const std::vector<BellmanCurveRecord>& curves);
void write_path_csv(const std::string& path, const TrialResult& trial);

}  // namespace gradtd
