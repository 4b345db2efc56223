#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "gradtd/features.hpp"
#include "gradtd/rng.hpp"

namespace gradtd {

enum class ModelKind {
  linear,                     ///< X(t+1) = a X(t) + N(t+1), N ~ N(0, σ²), c(x) = x²
  speed_scaling_exponential,  ///< X(t+1) = X(t) − f(X(t)) + N(t+1), N ~ Exp(1)
  speed_scaling_geometric,    ///< same queue, N geometric on {0, Δ, 2Δ, …}
};

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Parameters of one of the shipped scalar models. Only the fields relevant
/// to `kind` are read.
struct ModelSpec {
  ModelKind kind = ModelKind::linear;
  double a = 0.7;                     // linear gain, |a| < 1
  double noise_var = 1.0;             // linear noise variance
  double epsilon = 0.5;               // policy f(x) = min{x, 1 + ε√x}
  double lattice_step = 1.0 / 24.0;   // Δ, geometric arrivals
  double arrival_prob = 0.04;         // p_A, geometric arrivals
  double cost_scale = 1.0;            // multiplies c and ∇c

  int state_dim() const { return 1; }
  int noise_dim() const { return 1; }

  /// Throws std::invalid_argument on an invalid parameter set.
  void validate() const;
};

/// One step of the chain together with everything the estimators consume.
///
/// `A` is the Jacobian ∂x_next/∂x of the step taken from `x` (right derivative
/// at the queue boundary, Δ-difference quotient on the geometric model).
/// `A_next` is the same factor evaluated at `x_next`.
struct Transition {
  Vector x;
  Vector x_next;
  Matrix A;
  double c = 0.0;
  Vector grad_c;
  Vector psi;
  Matrix grad_psi;
  Vector psi_next;
  Matrix grad_psi_next;
  Matrix A_next;
  bool regen = false;  ///< x is the regeneration state (empty queue)
};

/// Which scalar map a finite-difference quotient is taken of.
enum class Quantity { service, cost, dynamics };

class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  ModelKind kind() const { return spec_.kind; }
  int state_dim() const { return spec_.state_dim(); }
  int noise_dim() const { return spec_.noise_dim(); }

  bool is_queue() const { return spec_.kind != ModelKind::linear; }
  /// Differentiable dynamics (sensitivity process defined).
  bool smooth() const { return spec_.kind != ModelKind::speed_scaling_geometric; }
  bool has_regeneration() const { return spec_.kind == ModelKind::speed_scaling_geometric; }
  /// Gradients are replaced by forward Δ-difference quotients.
  bool uses_difference_quotients() const { return !smooth(); }

  Vector initial_state() const { return Vector::Zero(state_dim()); }

  void draw_noise(RandomStream& rng, Vector& noise) const;
  Vector draw_noise(RandomStream& rng) const;

  Vector next_state(const Vector& x, const Vector& noise) const;

  /// Service policy f(x) = min{x, 1 + ε√x}. Queue models only.
  double service(double x) const;
  /// Right derivative of f (exponential) or its Δ-difference quotient (geometric).
  double service_slope(double x) const;
  /// x* = ε̄², the point where the two branches of f meet.
  double policy_threshold() const;

  double cost(const Vector& x) const;
  Vector cost_gradient(const Vector& x) const;
  /// ℓ×ℓ Jacobian of the dynamics at x (independent of the noise for the shipped models).
  Matrix sensitivity(const Vector& x) const;
  /// ∇ψ(x), analytic or Δ-difference quotient depending on the model.
  void feature_gradient(const FeatureMap& features, const Vector& x, Vector& psi, Matrix& grad_psi) const;

  bool is_regeneration(const Vector& x) const;

  /// Throws std::invalid_argument if x is outside the state space.
  void check_state(const Vector& x) const;

  void step(const FeatureMap& features, const Vector& x, const Vector& noise, Transition& out) const;
  Transition step(const FeatureMap& features, const Vector& x, const Vector& noise) const;

 private:
  double raw_cost(double x) const;

  ModelSpec spec_;
  double threshold_ = 0.0;
};

/// Forward difference quotient [g(x+h) − g(x)]/h of g ∈ {f, c, a(·, 0)}.
double finite_difference_gradient(const Model& model, Quantity quantity, double x, double h);

/// Default feature basis for a model: (1, x²) for linear, (x^{3/2}, x) for queues.
FeatureMap default_features(const Model& model);

/// Simulates one path and emits Transition records. Owns its RNG stream.
class Trajectory {
 public:
  Trajectory(Model model, FeatureMap features, RandomStream rng);
  Trajectory(Model model, FeatureMap features, RandomStream rng, Vector x0);

  /// Advance without producing records (burn-in).
  void advance(long steps);
  /// Transition from the current state; the path then moves to x_next.
  const Transition& next();

  const Vector& state() const { return x_; }
  long steps_taken() const { return steps_; }
  const Model& model() const { return model_; }
  const FeatureMap& features() const { return features_; }

 private:
  Model model_;
  FeatureMap features_;
  RandomStream rng_;
  Vector x_;
  Vector noise_;
  Transition tr_;
  long steps_ = 0;
};

}  // namespace gradtd
