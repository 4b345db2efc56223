#include "gradtd/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gradtd {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::lstd:
      return "lstd";
    case Algorithm::grad_lstd:
      return "grad_lstd";
    case Algorithm::lstd_lambda:
      return "lstd_lambda";
    case Algorithm::grad_lstd_lambda:
      return "grad_lstd_lambda";
    case Algorithm::lstd_lambda_avg:
      return "lstd_lambda_avg";
    case Algorithm::regen_lstd:
      return "regen_lstd";
    case Algorithm::regen_lstd_lambda:
      return "regen_lstd_lambda";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::lstd, Algorithm::grad_lstd, Algorithm::lstd_lambda,
                 Algorithm::grad_lstd_lambda, Algorithm::lstd_lambda_avg, Algorithm::regen_lstd,
                 Algorithm::regen_lstd_lambda}) {
    if (name == to_string(a)) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

bool is_gradient(Algorithm algorithm) {
  return algorithm == Algorithm::grad_lstd || algorithm == Algorithm::grad_lstd_lambda;
}

bool is_average_cost(Algorithm algorithm) {
  return algorithm == Algorithm::lstd_lambda_avg || algorithm == Algorithm::regen_lstd ||
         algorithm == Algorithm::regen_lstd_lambda;
}

bool requires_regeneration(Algorithm algorithm) {
  return algorithm == Algorithm::regen_lstd || algorithm == Algorithm::regen_lstd_lambda;
}

bool uses_lambda(Algorithm algorithm) {
  return algorithm == Algorithm::lstd_lambda || algorithm == Algorithm::grad_lstd_lambda ||
         algorithm == Algorithm::lstd_lambda_avg || algorithm == Algorithm::regen_lstd_lambda;
}

void validate_pairing(Algorithm algorithm, double beta, double lambda, const Model& model) {
  const std::string name(to_string(algorithm));
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
  if (uses_lambda(algorithm) && !(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("lambda must lie in [0, 1]");
  }
  if (is_average_cost(algorithm) && beta != 1.0) {
    throw std::invalid_argument(name + " is an average-cost algorithm and requires beta = 1");
  }
  if ((algorithm == Algorithm::lstd || algorithm == Algorithm::lstd_lambda) && beta >= 1.0) {
    throw std::invalid_argument(name + " requires beta < 1; use an average-cost algorithm for beta = 1");
  }
  if (requires_regeneration(algorithm) && !model.has_regeneration()) {
    throw std::invalid_argument(name + " needs a regeneration state; model '" +
                                std::string(to_string(model.kind())) + "' has none");
  }
}

EstimatorState make_estimator(const EstimatorOptions& options, const Model& model,
                              const FeatureMap& features) {
  validate_pairing(options.algorithm, options.beta, options.lambda, model);
  if (!(options.m0_scale > 0.0)) throw std::invalid_argument("M(0) scale must be positive");
  if (features.state_dim() != model.state_dim()) {
    throw std::invalid_argument("feature map state dimension does not match the model");
  }

  EstimatorState s;
  s.algorithm = options.algorithm;
  s.beta = options.beta;
  s.lambda = uses_lambda(options.algorithm) ? options.lambda : 1.0;
  s.feature_dim = features.dim();
  s.state_dim = model.state_dim();

  if (!options.basis.empty()) {
    s.basis = options.basis;
  } else if (is_gradient(options.algorithm)) {
    s.basis = features.varying_indices();
  } else {
    for (int j = 0; j < features.dim(); ++j) s.basis.push_back(j);
  }
  if (s.basis.empty()) throw std::invalid_argument("estimator basis is empty");
  std::vector<int> sorted = s.basis;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.front() < 0 ||
      sorted.back() >= features.dim()) {
    throw std::invalid_argument("estimator basis indices must be unique and in range");
  }

  const int d = s.dim();
  s.b = Vector::Zero(d);
  s.M = options.m0_scale * Matrix::Identity(d, d);
  if (is_gradient(s.algorithm)) {
    s.trace = Matrix::Zero(s.state_dim, d);
    s.carry = Matrix::Zero(s.state_dim, s.state_dim);
  } else {
    s.trace = Matrix::Zero(d, 1);
    s.carry = Matrix::Zero(1, 1);
  }
  s.eta_psi = Vector::Zero(d);
  return s;
}

namespace {

void check_dims(const EstimatorState& s, const Transition& tr, bool needs_next) {
  if (tr.psi.size() != s.feature_dim) throw std::invalid_argument("transition psi has the wrong dimension");
  if (needs_next && tr.psi_next.size() != s.feature_dim) {
    throw std::invalid_argument("transition psi_next has the wrong dimension");
  }
  if (!is_gradient(s.algorithm)) return;
  if (tr.grad_psi.rows() != s.state_dim || tr.grad_psi.cols() != s.feature_dim) {
    throw std::invalid_argument("transition grad_psi has the wrong shape");
  }
  if (tr.grad_c.size() != s.state_dim) throw std::invalid_argument("transition grad_c has the wrong dimension");
  if (tr.A.rows() != s.state_dim || tr.A.cols() != s.state_dim) {
    throw std::invalid_argument("transition A has the wrong shape");
  }
  if (needs_next && (tr.grad_psi_next.rows() != s.state_dim || tr.grad_psi_next.cols() != s.feature_dim)) {
    throw std::invalid_argument("transition grad_psi_next has the wrong shape");
  }
}

void check_algorithm(const EstimatorState& s, std::initializer_list<Algorithm> allowed) {
  for (auto a : allowed) {
    if (s.algorithm == a) return;
  }
  throw std::logic_error("estimator state was built for " + std::string(to_string(s.algorithm)));
}

double gain(long t) { return 1.0 / static_cast<double>(t); }

}  // namespace

void lstd_step(EstimatorState& s, const Transition& tr) {
  check_algorithm(s, {Algorithm::lstd});
  check_dims(s, tr, false);
  const Vector psi = tr.psi(s.basis);
  const double alpha = gain(++s.t);
  s.trace = s.beta * s.trace + psi;
  s.b = s.b + alpha * (s.trace * tr.c - s.b);
  s.M = s.M + alpha * (psi * psi.transpose() - s.M);
}

void grad_lstd_step(EstimatorState& s, const Transition& tr) {
  check_algorithm(s, {Algorithm::grad_lstd});
  check_dims(s, tr, false);
  const Matrix grad_psi = tr.grad_psi(Eigen::all, s.basis);
  const double alpha = gain(++s.t);
  s.trace = s.beta * (s.carry * s.trace) + grad_psi;
  s.b = s.b + alpha * (s.trace.transpose() * tr.grad_c - s.b);
  s.M = s.M + alpha * (grad_psi.transpose() * grad_psi - s.M);
  s.carry = tr.A;
}

void lstd_lambda_step(EstimatorState& s, const Transition& tr) {
  check_algorithm(s, {Algorithm::lstd_lambda});
  check_dims(s, tr, true);
  const Vector psi = tr.psi(s.basis);
  const Vector psi_next = tr.psi_next(s.basis);
  const double alpha = gain(++s.t);
  s.trace = (s.beta * s.lambda) * s.trace + psi;
  s.b = (1.0 - alpha) * s.b + alpha * s.trace * tr.c;
  s.M = (1.0 - alpha) * s.M + alpha * s.trace * (psi - s.beta * psi_next).transpose();
}

void grad_lstd_lambda_step(EstimatorState& s, const Transition& tr) {
  check_algorithm(s, {Algorithm::grad_lstd_lambda});
  check_dims(s, tr, true);
  const Matrix grad_psi = tr.grad_psi(Eigen::all, s.basis);
  const Matrix grad_psi_next = tr.grad_psi_next(Eigen::all, s.basis);
  const double alpha = gain(++s.t);
  s.trace = (s.beta * s.lambda) * (s.carry * s.trace) + grad_psi;
  s.b = (1.0 - alpha) * s.b + alpha * (s.trace.transpose() * tr.grad_c);
  // tr.A is the sensitivity of the step X(t) → X(t+1).
  const Matrix diff = grad_psi - s.beta * tr.A.transpose() * grad_psi_next;
  s.M = (1.0 - alpha) * s.M + alpha * (diff.transpose() * s.trace);
  s.carry = tr.A;
}

namespace {

// Lines 2-4 of the average-cost algorithms; returns ψ̃(X(t)).
Vector center(EstimatorState& s, const Transition& tr, double alpha) {
  const Vector psi = tr.psi(s.basis);
  s.eta = (1.0 - alpha) * s.eta + alpha * tr.c;
  s.eta_psi = (1.0 - alpha) * s.eta_psi + alpha * psi;
  return psi - s.eta_psi;
}

}  // namespace

void lstd_lambda_avg_step(EstimatorState& s, const Transition& tr) {
  check_algorithm(s, {Algorithm::lstd_lambda_avg});
  check_dims(s, tr, true);
  const double alpha = gain(++s.t);
  const Vector centered = center(s, tr, alpha);
  const Vector centered_next = tr.psi_next(s.basis) - s.eta_psi;
  s.trace = s.lambda * s.trace + centered;
  s.b = (1.0 - alpha) * s.b + alpha * s.trace * (tr.c - s.eta);
  s.M = (1.0 - alpha) * s.M + alpha * s.trace * (centered - centered_next).transpose();
}

void regen_lstd_step(EstimatorState& s, const Transition& tr) {
  check_algorithm(s, {Algorithm::regen_lstd, Algorithm::regen_lstd_lambda});
  const bool lambda_form = s.algorithm == Algorithm::regen_lstd_lambda;
  check_dims(s, tr, lambda_form);
  const double alpha = gain(++s.t);
  const Vector centered = center(s, tr, alpha);
  // carry holds 1{X(t−1) ≠ 0}.
  const double keep = s.carry(0, 0);
  if (lambda_form) {
    s.trace = keep * s.lambda * s.trace + centered;
  } else {
    s.trace = keep * s.trace + centered;
  }
  s.b = (1.0 - alpha) * s.b + alpha * s.trace * (tr.c - s.eta);
  if (lambda_form) {
    const Vector centered_next = tr.psi_next(s.basis) - s.eta_psi;
    s.M = (1.0 - alpha) * s.M + alpha * s.trace * (centered - centered_next).transpose();
  } else {
    s.M = (1.0 - alpha) * s.M + alpha * (centered * centered.transpose());
  }
  s.carry(0, 0) = tr.regen ? 0.0 : 1.0;
}

void update(EstimatorState& s, const Transition& tr) {
  switch (s.algorithm) {
    case Algorithm::lstd:
      return lstd_step(s, tr);
    case Algorithm::grad_lstd:
      return grad_lstd_step(s, tr);
    case Algorithm::lstd_lambda:
      return lstd_lambda_step(s, tr);
    case Algorithm::grad_lstd_lambda:
      return grad_lstd_lambda_step(s, tr);
    case Algorithm::lstd_lambda_avg:
      return lstd_lambda_avg_step(s, tr);
    case Algorithm::regen_lstd:
    case Algorithm::regen_lstd_lambda:
      return regen_lstd_step(s, tr);
  }
}

void constant_recovery_step(EstimatorState& s, const Transition& tr, const Vector& theta_current) {
  if (!(s.beta < 1.0)) throw std::invalid_argument("constant recovery requires beta < 1");
  if (theta_current.size() != s.feature_dim || tr.psi.size() != s.feature_dim) {
    throw std::invalid_argument("constant recovery: dimension mismatch");
  }
  const double alpha = gain(++s.recovery_t);
  s.h_bar = s.h_bar + alpha * (theta_current.dot(tr.psi) - s.h_bar);
  s.eta = s.eta + alpha * (tr.c - s.eta);
}

void average_cost_step(EstimatorState& s, const Transition& tr) {
  const double alpha = gain(++s.recovery_t);
  s.eta = s.eta + alpha * (tr.c - s.eta);
}

ThetaEstimate finalize(const EstimatorState& s) {
  if (s.t < 1) throw std::logic_error("finalize called before any update");
  const SolveResult solved = solve_system(s.M, s.b);
  ThetaEstimate out;
  out.theta = Vector::Zero(s.feature_dim);
  out.theta(s.basis) = solved.theta;
  out.rank_deficient = solved.rank_deficient;
  out.eta = s.eta;
  if (is_gradient(s.algorithm) && s.beta < 1.0 && s.recovery_t > 0) {
    out.kappa = -s.h_bar + s.eta / (1.0 - s.beta);
  }
  return out;
}

}  // namespace gradtd
