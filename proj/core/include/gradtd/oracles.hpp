#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gradtd/features.hpp"
#include "gradtd/model.hpp"

namespace gradtd::oracle {

/// Closed form of h_β(x) = θ₁ + θ₂x² for X(t+1) = aX(t) + N, c(x) = x².
struct AnalyticLinearSolution {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double pi_second_moment = 0.0;  ///< σ²/(1−a²)
  double eta = 0.0;               ///< average cost, equal to π(x²)
};

/// θ₂ = 1/(1−βa²), θ₁ = σ²/(1−a²)·[1/(1−β) − 1/(1−βa²)].
/// Cross-checks itself against truncated_series_linear_theta and throws
/// std::logic_error if they disagree beyond 1e-10 relative.
AnalyticLinearSolution analytic_linear_theta(double a, double beta, double noise_var = 1.0);

/// Same quantities from Σ_{t<T₀} βᵗ E[X(t)² | X(0)=x] at x = 0 and x = 1,
/// with T₀ the first horizon where β^{T₀} < tail.
AnalyticLinearSolution truncated_series_linear_theta(double a, double beta, double noise_var = 1.0,
                                                     double tail = 1e-12);

enum class FixedPointForm {
  standard,  ///< M = E[ζ(ψ(X(t)) − βψ(X(t+1)))ᵀ], b = E[ζ c(X(t))]
  gradient,  ///< M = E[(∇ψ(X(t)) − βAᵀ(t+1)∇ψ(X(t+1)))ᵀζ], b = E[ζᵀ∇c(X(t))]
};

struct FixedPointOptions {
  FixedPointForm form = FixedPointForm::gradient;
  double lambda = 1.0;
  double beta = 0.9;
  long n_samples = 100000;
  long burn_in = 1000;
  std::uint64_t seed = 20240917;
  int batches = 20;
  double truncation = 1e-12;  ///< eligibility sum stops once (βλ)^k falls below this
};

struct FixedPointResult {
  Vector theta;         ///< full length d, zeros outside `basis`
  Vector theta_stderr;  ///< batch-means standard error, same layout
  Matrix M;             ///< sample mean over the active basis
  Vector b;
  std::vector<int> basis;
  long window = 0;      ///< number of eligibility terms summed explicitly
  bool singular = false;
};

/// Brute-force stationary fixed point θ*(λ): the eligibility vector is the
/// explicit truncated sum Σ_k (βλ)^k [A(t)⋯A(t−k+1)] ∇ψ(X(t−k)) (or its ψ
/// analogue), accumulated with plain sample means. Shares no code with the
/// recursive estimators. A singular M is reported, not thrown.
FixedPointResult mc_fixed_point(const Model& model, const FeatureMap& features,
                                const FixedPointOptions& options);

struct TestFunction {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

TestFunction identity_function();  ///< f(x) = x₀
TestFunction square_function();    ///< f(x) = x₀²

struct ExchangeOptions {
  int horizon = 1;
  Vector x0;
  long n_samples = 100000;
  double fd_step = 1e-5;
  std::uint64_t seed = 7;
};

/// lhs: central difference in x of the Monte-Carlo mean of f(X(t)), common
/// random numbers across the ±h paths. rhs: Monte-Carlo mean of Sᵀ(t)∇f(X(t)).
/// Standard errors are floored at the finite-difference round-off resolution.
struct ExchangeResult {
  Vector lhs;
  Vector rhs;
  Vector stderr_diff;  ///< of the per-sample difference lhs − rhs
  Vector stderr_lhs;
  Vector stderr_rhs;

  /// |lhs − rhs| < k·stderr_diff in every coordinate.
  bool agrees(double k = 3.0) const;
};

ExchangeResult gradient_exchange_check(const Model& model, const TestFunction& f,
                                       const ExchangeOptions& options);

struct BellmanErrorCurve {
  std::vector<double> grid;
  std::vector<double> values;
  double eta_T = 0.0;
  Vector theta_used;
  long terms = 0;  ///< arrival-sum terms per grid point

  double mean_abs() const;
};

struct BellmanOptions {
  double tail_mass = 1e-12;  ///< stop the arrival sum when the remaining mass drops below this
  int horizon_scale = 1;     ///< multiplies the number of summed terms
};

/// E_B(x) = E[h(x − f(x) + N)] − h(x) + c(x) − η_T with h = θᵀψ, geometric N.
BellmanErrorCurve bellman_error(const Model& model, const FeatureMap& features, const Vector& theta,
                                double eta_T, const std::vector<double>& grid,
                                const BellmanOptions& options = {});

/// {0, Δ, 2Δ, …} up to x_max inclusive.
std::vector<double> lattice_grid(const Model& model, double x_max = 20.0);

/// Golden values for oracle-derived regression targets, JSON with full precision.
struct GoldenValue {
  std::string key;
  std::vector<double> values;
  std::string note;
};
std::vector<GoldenValue> load_golden(const std::filesystem::path& path);
void save_golden(const std::filesystem::path& path, const std::vector<GoldenValue>& values);
const GoldenValue* find_golden(const std::vector<GoldenValue>& values, const std::string& key);

}  // namespace gradtd::oracle
