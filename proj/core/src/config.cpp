#include "gradtd/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace gradtd {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

double parse_double(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt::format("{}: '{}' is not a number", key, s));
  }
  if (used != s.size()) throw std::invalid_argument(fmt::format("{}: '{}' is not a number", key, s));
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument(fmt::format("{}: '{}' is not a boolean", key, s));
}

}  // namespace

long parse_count(std::string_view text) {
  const std::string s = trim(text);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  const double d = parse_double("count", s);
  if (!(std::abs(d) < 9.0e18) || d != std::floor(d)) {
    throw std::invalid_argument(fmt::format("'{}' is not an integer count", s));
  }
  return static_cast<long>(d);
}

std::string AlgorithmSpec::label() const {
  if (!uses_lambda(algorithm)) return std::string(to_string(algorithm));
  return fmt::format("{}@{}", to_string(algorithm), lambda);
}

AlgorithmSpec parse_algorithm_spec(std::string_view text, double default_lambda) {
  const std::string s = trim(text);
  const auto at = s.find('@');
  AlgorithmSpec spec;
  spec.algorithm = parse_algorithm(s.substr(0, at));
  spec.lambda = default_lambda;
  if (at != std::string::npos) {
    if (!uses_lambda(spec.algorithm)) {
      throw std::invalid_argument(fmt::format("algorithm '{}' takes no lambda", s.substr(0, at)));
    }
    spec.lambda = parse_double("lambda", s.substr(at + 1));
  }
  if (!uses_lambda(spec.algorithm)) spec.lambda = 1.0;
  return spec;
}

std::vector<AlgorithmSpec> ExperimentConfig::algorithm_specs() const {
  std::vector<AlgorithmSpec> out;
  for (const auto& a : algorithms) out.push_back(parse_algorithm_spec(a, lambda));
  return out;
}

FeatureMap ExperimentConfig::feature_map(const Model& model) const {
  if (features == "auto") return default_features(model);
  if (features == "quadratic") return FeatureMap::quadratic();
  if (features == "speed_scaling") return FeatureMap::speed_scaling();
  throw std::invalid_argument("unknown feature set '" + features + "'");
}

void ExperimentConfig::validate() const {
  const Model m(model);
  (void)feature_map(m);
  if (iterations < 1) throw std::invalid_argument("iterations (T) must be >= 1");
  if (burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  if (histogram_bins < 1) throw std::invalid_argument("histogram bins must be >= 1");
  if (cadence < 1) throw std::invalid_argument("cadence must be >= 1");
  if (!(m0_scale > 0.0)) throw std::invalid_argument("m0_scale must be > 0");
  if (!(bellman_x_max >= 0.0)) throw std::invalid_argument("bellman_x_max must be >= 0");
  for (long c : checkpoints) {
    if (c < 1) throw std::invalid_argument("checkpoints must be >= 1");
  }
  if (algorithms.empty()) throw std::invalid_argument("no algorithm selected");
  for (const auto& spec : algorithm_specs()) validate_pairing(spec.algorithm, beta, spec.lambda, m);
}

KeyValues to_key_values(const ExperimentConfig& c) {
  std::string algos;
  for (std::size_t i = 0; i < c.algorithms.size(); ++i) algos += (i ? "," : "") + c.algorithms[i];
  std::string checkpoints;
  for (std::size_t i = 0; i < c.checkpoints.size(); ++i) {
    checkpoints += (i ? "," : "") + std::to_string(c.checkpoints[i]);
  }
  return {
      {"model", std::string(to_string(c.model.kind))},
      {"a", fmt_double(c.model.a)},
      {"noise_var", fmt_double(c.model.noise_var)},
      {"epsilon", fmt_double(c.model.epsilon)},
      {"lattice_step", fmt_double(c.model.lattice_step)},
      {"arrival_prob", fmt_double(c.model.arrival_prob)},
      {"cost_scale", fmt_double(c.model.cost_scale)},
      {"algorithms", algos},
      {"features", c.features},
      {"beta", fmt_double(c.beta)},
      {"lambda", fmt_double(c.lambda)},
      {"iterations", std::to_string(c.iterations)},
      {"burn_in", std::to_string(c.burn_in)},
      {"replications", std::to_string(c.replications)},
      {"seed", std::to_string(c.seed)},
      {"threads", std::to_string(c.threads)},
      {"output_dir", c.output_dir},
      {"bins", std::to_string(c.histogram_bins)},
      {"cadence", std::to_string(c.cadence)},
      {"crn", c.common_random_numbers ? "true" : "false"},
      {"checkpoints", checkpoints},
      {"timing", c.record_timing ? "true" : "false"},
      {"m0_scale", fmt_double(c.m0_scale)},
      {"bellman_x_max", fmt_double(c.bellman_x_max)},
  };
}

void apply_key_values(ExperimentConfig& c, const KeyValues& values) {
  for (const auto& [key, value] : values) {
    if (key == "model") {
      c.model.kind = parse_model_kind(trim(value));
    } else if (key == "a") {
      c.model.a = parse_double(key, value);
    } else if (key == "noise_var") {
      c.model.noise_var = parse_double(key, value);
    } else if (key == "epsilon") {
      c.model.epsilon = parse_double(key, value);
    } else if (key == "lattice_step") {
      c.model.lattice_step = parse_double(key, value);
    } else if (key == "arrival_prob") {
      c.model.arrival_prob = parse_double(key, value);
    } else if (key == "cost_scale") {
      c.model.cost_scale = parse_double(key, value);
    } else if (key == "algorithms" || key == "algo") {
      c.algorithms = split_list(value);
    } else if (key == "features") {
      c.features = trim(value);
    } else if (key == "beta") {
      c.beta = parse_double(key, value);
    } else if (key == "lambda") {
      c.lambda = parse_double(key, value);
    } else if (key == "iterations") {
      c.iterations = parse_count(value);
    } else if (key == "burn_in") {
      c.burn_in = parse_count(value);
    } else if (key == "replications") {
      c.replications = parse_count(value);
    } else if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(parse_count(value));
    } else if (key == "threads") {
      c.threads = static_cast<int>(parse_count(value));
    } else if (key == "output_dir") {
      c.output_dir = trim(value);
    } else if (key == "bins") {
      c.histogram_bins = static_cast<int>(parse_count(value));
    } else if (key == "cadence") {
      c.cadence = parse_count(value);
    } else if (key == "crn") {
      c.common_random_numbers = parse_bool(key, value);
    } else if (key == "checkpoints") {
      c.checkpoints.clear();
      for (const auto& item : split_list(value)) c.checkpoints.push_back(parse_count(item));
    } else if (key == "timing") {
      c.record_timing = parse_bool(key, value);
    } else if (key == "m0_scale") {
      c.m0_scale = parse_double(key, value);
    } else if (key == "bellman_x_max") {
      c.bellman_x_max = parse_double(key, value);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
}

KeyValues parse_config_text(std::string_view text) {
  KeyValues out;
  std::stringstream ss{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(fmt::format("config line {}: expected key = value", lineno));
    }
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument(fmt::format("config line {}: empty key", lineno));
    for (char ch : key) {
      if (!(std::islower(static_cast<unsigned char>(ch)) || std::isdigit(static_cast<unsigned char>(ch)) ||
            ch == '_')) {
        throw std::invalid_argument(fmt::format("config line {}: key '{}' is not snake_case", lineno, key));
      }
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::string to_config_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [key, value] : to_key_values(config)) {
    out += fmt::format("{} = \"{}\"\n", key, value);
  }
  return out;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    const auto doc = nlohmann::json::parse(text);
    KeyValues out;
    for (const auto& [key, value] : doc.at("config").items()) {
      out.emplace_back(key, value.get<std::string>());
    }
    return out;
  }
  return parse_config_text(text);
}

std::vector<std::string> preset_names() {
  return {"fig1-beta0.9", "fig1-beta0.99", "fig2-expo", "fig3-geo", "fig4-bellman"};
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  // Not stated for the experiments and pinned here: burn-in 1e3 steps,
  // M(0) = 1e-3 I, 50 histogram bins, finalization cadence 100, seed 1.
  if (name == "fig1-beta0.9" || name == "fig1-beta0.99") {
    c.model.kind = ModelKind::linear;
    c.model.a = 0.7;
    c.model.noise_var = 1.0;
    c.beta = name == "fig1-beta0.9" ? 0.9 : 0.99;
    c.algorithms = {"lstd", "grad_lstd"};
    c.iterations = 1000000;
    c.checkpoints = {1000};
    c.replications = 1000;
    c.output_dir = std::string("out/") + std::string(name);
    return c;
  }
  if (name == "fig2-expo") {
    c.model.kind = ModelKind::speed_scaling_exponential;
    c.model.epsilon = 0.5;
    c.beta = 1.0;
    c.algorithms = {"grad_lstd", "lstd_lambda_avg@0", "grad_lstd_lambda@0", "grad_lstd_lambda@0.5"};
    c.iterations = 100000;
    c.replications = 1000;
    c.output_dir = "out/fig2-expo";
    return c;
  }
  if (name == "fig3-geo" || name == "fig4-bellman") {
    c.model.kind = ModelKind::speed_scaling_geometric;
    c.model.epsilon = 0.5;
    c.model.lattice_step = 1.0 / 24.0;
    c.model.arrival_prob = 0.04;
    c.beta = 1.0;
    c.algorithms = {"regen_lstd", "lstd_lambda_avg@0", "grad_lstd", "grad_lstd_lambda@0",
                    "grad_lstd_lambda@0.5"};
    c.iterations = 100000;
    c.replications = 1000;
    if (name == "fig4-bellman") c.checkpoints = {1000, 10000, 100000};
    c.output_dir = std::string("out/") + std::string(name);
    return c;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

}  // namespace gradtd
