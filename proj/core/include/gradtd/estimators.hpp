#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gradtd/features.hpp"
#include "gradtd/model.hpp"
#include "gradtd/solve.hpp"

namespace gradtd {

/// The recursive policy-evaluation algorithms.
enum class Algorithm {
  lstd,               ///< standard LSTD, trace φ(t) = βφ(t−1) + ψ(X(t))
  grad_lstd,          ///< ∇LSTD, trace φ(t) = βA(t)φ(t−1) + ∇ψ(X(t))
  lstd_lambda,        ///< standard LSTD(λ)
  grad_lstd_lambda,   ///< ∇LSTD(λ)
  lstd_lambda_avg,    ///< average-cost LSTD(λ) on centered features
  regen_lstd,         ///< regenerative average-cost LSTD
  regen_lstd_lambda,  ///< regenerative average-cost LSTD(λ)
};

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

/// Operates on ∇ψ and the sensitivity factors.
bool is_gradient(Algorithm algorithm);
/// Requires β = 1 and centers cost and features.
bool is_average_cost(Algorithm algorithm);
bool requires_regeneration(Algorithm algorithm);
bool uses_lambda(Algorithm algorithm);

/// Rejects unsupported (algorithm, β, λ, model) combinations.
void validate_pairing(Algorithm algorithm, double beta, double lambda, const Model& model);

struct EstimatorOptions {
  Algorithm algorithm = Algorithm::lstd;
  double beta = 0.9;
  double lambda = 1.0;
  double m0_scale = 1e-3;  ///< M(0) = m0_scale · I
  /// Basis indices used by the estimator. Empty selects all functions, except
  /// for gradient algorithms, which drop the constant ones (their ∇ψ_j ≡ 0).
  std::vector<int> basis;
};

/// Recursive state shared by every algorithm. `trace` is ℓ×d for gradient
/// algorithms and d×1 otherwise. `carry` is the factor applied to the trace
/// on the next update: A(t) for gradient algorithms, 1{X(t−1) ≠ 0} for the
/// regenerative ones, 1 otherwise.
struct EstimatorState {
  Algorithm algorithm = Algorithm::lstd;
  double beta = 0.9;
  double lambda = 1.0;
  std::vector<int> basis;
  int feature_dim = 0;
  int state_dim = 1;

  long t = 0;
  Vector b;
  Matrix M;
  Matrix trace;
  Matrix carry;

  // Average-cost registers (line 2 and 3 of the average-cost algorithms).
  double eta = 0.0;
  Vector eta_psi;

  // Constant recovery registers, advanced by constant_recovery_step or
  // average_cost_step with their own counter.
  long recovery_t = 0;
  double h_bar = 0.0;

  int dim() const { return static_cast<int>(basis.size()); }
};

struct ThetaEstimate {
  Vector theta;  ///< full length d; coordinates outside the estimator basis are 0
  double kappa = 0.0;
  double eta = 0.0;
  bool rank_deficient = false;

  /// θᵀψ(x) + κ
  double value(const Vector& psi) const { return theta.dot(psi) + kappa; }
};

EstimatorState make_estimator(const EstimatorOptions& options, const Model& model,
                              const FeatureMap& features);

void lstd_step(EstimatorState& state, const Transition& tr);
void grad_lstd_step(EstimatorState& state, const Transition& tr);
void lstd_lambda_step(EstimatorState& state, const Transition& tr);
void grad_lstd_lambda_step(EstimatorState& state, const Transition& tr);
void lstd_lambda_avg_step(EstimatorState& state, const Transition& tr);
/// Regenerative LSTD or LSTD(λ), chosen by state.algorithm.
void regen_lstd_step(EstimatorState& state, const Transition& tr);

/// Dispatches on state.algorithm.
void update(EstimatorState& state, const Transition& tr);

/// Running means h̄_β and η for κ(θ) = −π(θᵀψ) + η/(1−β). β < 1 only.
void constant_recovery_step(EstimatorState& state, const Transition& tr, const Vector& theta_current);
/// Running mean η of the cost alone (any β).
void average_cost_step(EstimatorState& state, const Transition& tr);

/// θ = M⁻¹(T) b(T), pseudo-inverse on rank deficiency. κ is filled in when
/// constant recovery has run on a discounted gradient estimator.
ThetaEstimate finalize(const EstimatorState& state);

}  // namespace gradtd
