#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gradtd/estimators.hpp"
#include "gradtd/model.hpp"

namespace gradtd {

/// An algorithm together with its trace parameter, written `name` or `name@λ`.
struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::lstd;
  double lambda = 1.0;

  std::string label() const;
};

AlgorithmSpec parse_algorithm_spec(std::string_view text, double default_lambda);

struct ExperimentConfig {
  ModelSpec model;
  std::vector<std::string> algorithms{"grad_lstd"};
  std::string features = "auto";  ///< auto | quadratic | speed_scaling
  double beta = 0.9;
  double lambda = 1.0;  ///< default λ for algorithms given without `@λ`
  long iterations = 1000;
  long burn_in = 1000;
  long replications = 1;
  std::uint64_t seed = 1;
  int threads = 0;  ///< 0 selects the machine's parallelism
  std::string output_dir = "out";
  int histogram_bins = 50;
  long cadence = 100;
  bool common_random_numbers = false;
  std::vector<long> checkpoints;
  bool record_timing = false;
  double m0_scale = 1e-3;
  double bellman_x_max = 20.0;

  std::vector<AlgorithmSpec> algorithm_specs() const;
  FeatureMap feature_map(const Model& model) const;
  /// base_seed ⊕ i
  std::uint64_t trial_seed(long trial_index) const {
    return seed ^ static_cast<std::uint64_t>(trial_index);
  }

  /// Throws std::invalid_argument on any invalid field or algorithm/model pairing.
  void validate() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Every field as lowercase snake_case key → text, in a fixed order.
KeyValues to_key_values(const ExperimentConfig& config);
/// Applies keys over `config`; unknown keys and malformed values throw.
void apply_key_values(ExperimentConfig& config, const KeyValues& values);

/// Flat `key = value` text; `#` starts a comment, values may be double-quoted.
KeyValues parse_config_text(std::string_view text);
std::string to_config_text(const ExperimentConfig& config);

/// Reads either a flat config file or a summary.json (its "config" echo).
KeyValues read_config_file(const std::string& path);

std::vector<std::string> preset_names();
ExperimentConfig preset(std::string_view name);

/// Integer parse that accepts exponent forms such as "1e6".
long parse_count(std::string_view text);

}  // namespace gradtd
