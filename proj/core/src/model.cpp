#include "gradtd/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gradtd {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear:
      return "linear";
    case ModelKind::speed_scaling_exponential:
      return "speed_scaling_exponential";
    case ModelKind::speed_scaling_geometric:
      return "speed_scaling_geometric";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "speed_scaling_exponential" || name == "exponential" || name == "expo") {
    return ModelKind::speed_scaling_exponential;
  }
  if (name == "speed_scaling_geometric" || name == "geometric" || name == "geo") {
    return ModelKind::speed_scaling_geometric;
  }
  throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (!std::isfinite(cost_scale)) throw std::invalid_argument("cost_scale must be finite");
  switch (kind) {
    case ModelKind::linear:
      if (!(std::abs(a) < 1.0)) throw std::invalid_argument("linear model requires |a| < 1");
      if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
        throw std::invalid_argument("linear model requires noise_var > 0");
      }
      break;
    case ModelKind::speed_scaling_geometric:
      if (!(lattice_step > 0.0) || !std::isfinite(lattice_step)) {
        throw std::invalid_argument("geometric arrivals require lattice step > 0");
      }
      if (!(arrival_prob > 0.0 && arrival_prob < 1.0)) {
        throw std::invalid_argument("geometric arrivals require p_A in (0, 1)");
      }
      [[fallthrough]];
    case ModelKind::speed_scaling_exponential:
      if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw std::invalid_argument("speed scaling requires epsilon > 0");
      }
      break;
  }
}

Model::Model(ModelSpec spec) : spec_(spec) {
  spec_.validate();
  if (is_queue()) {
    const double e = spec_.epsilon;
    const double ebar = 0.5 * (e + std::sqrt(e * e + 4.0));
    threshold_ = ebar * ebar;
  }
}

void Model::check_state(const Vector& x) const {
  if (x.size() != state_dim()) throw std::invalid_argument("state dimension mismatch");
  if (!x.allFinite()) throw std::invalid_argument("non-finite state");
  if (is_queue() && x[0] < 0.0) throw std::invalid_argument("negative queue state");
}

void Model::draw_noise(RandomStream& rng, Vector& noise) const {
  noise.resize(noise_dim());
  switch (spec_.kind) {
    case ModelKind::linear:
      noise[0] = std::sqrt(spec_.noise_var) * rng.gaussian();
      break;
    case ModelKind::speed_scaling_exponential:
      noise[0] = rng.exponential();
      break;
    case ModelKind::speed_scaling_geometric:
      noise[0] = static_cast<double>(rng.geometric(spec_.arrival_prob)) * spec_.lattice_step;
      break;
  }
}

Vector Model::draw_noise(RandomStream& rng) const {
  Vector noise(noise_dim());
  draw_noise(rng, noise);
  return noise;
}

double Model::service(double x) const {
  if (!is_queue()) throw std::logic_error("service policy is defined for queue models only");
  return std::min(x, 1.0 + spec_.epsilon * std::sqrt(x));
}

double Model::policy_threshold() const {
  if (!is_queue()) throw std::logic_error("policy threshold is defined for queue models only");
  return threshold_;
}

double Model::service_slope(double x) const {
  if (!is_queue()) throw std::logic_error("service policy is defined for queue models only");
  if (uses_difference_quotients()) {
    const double h = spec_.lattice_step;
    return (service(x + h) - service(x)) / h;
  }
  // Right derivative: identity branch up to x*, square-root branch beyond.
  if (x <= threshold_) return 1.0;
  return 0.5 * spec_.epsilon / std::sqrt(x);
}

Vector Model::next_state(const Vector& x, const Vector& noise) const {
  check_state(x);
  if (noise.size() != noise_dim() || !noise.allFinite()) {
    throw std::invalid_argument("invalid noise vector");
  }
  Vector out(state_dim());
  if (spec_.kind == ModelKind::linear) {
    out[0] = spec_.a * x[0] + noise[0];
  } else {
    if (noise[0] < 0.0) throw std::invalid_argument("negative arrival");
    out[0] = x[0] - service(x[0]) + noise[0];
  }
  return out;
}

double Model::raw_cost(double x) const {
  if (spec_.kind == ModelKind::linear) return x * x;
  const double u = service(x);
  return x + 0.5 * u * u;
}

double Model::cost(const Vector& x) const {
  check_state(x);
  return spec_.cost_scale * raw_cost(x[0]);
}

Vector Model::cost_gradient(const Vector& x) const {
  check_state(x);
  Vector g(state_dim());
  const double xv = x[0];
  switch (spec_.kind) {
    case ModelKind::linear:
      g[0] = 2.0 * xv;
      break;
    case ModelKind::speed_scaling_exponential:
      g[0] = 1.0 + service(xv) * service_slope(xv);
      break;
    case ModelKind::speed_scaling_geometric: {
      const double h = spec_.lattice_step;
      g[0] = (raw_cost(xv + h) - raw_cost(xv)) / h;
      break;
    }
  }
  g *= spec_.cost_scale;
  return g;
}

Matrix Model::sensitivity(const Vector& x) const {
  check_state(x);
  Matrix A(state_dim(), state_dim());
  if (spec_.kind == ModelKind::linear) {
    A(0, 0) = spec_.a;
  } else {
    A(0, 0) = 1.0 - service_slope(x[0]);
  }
  return A;
}

void Model::feature_gradient(const FeatureMap& features, const Vector& x, Vector& psi,
                             Matrix& grad_psi) const {
  if (features.state_dim() != state_dim()) {
    throw std::invalid_argument("feature map state dimension does not match the model");
  }
  if (!uses_difference_quotients()) {
    features.evaluate(x, psi, grad_psi);
    return;
  }
  const double h = spec_.lattice_step;
  features.evaluate_value(x, psi);
  grad_psi.resize(state_dim(), features.dim());
  for (int i = 0; i < state_dim(); ++i) {
    Vector shifted = x;
    shifted[i] += h;
    const Vector up = features.value(shifted);
    grad_psi.row(i) = ((up - psi) / h).transpose();
  }
}

bool Model::is_regeneration(const Vector& x) const {
  return has_regeneration() && x[0] == 0.0;
}

void Model::step(const FeatureMap& features, const Vector& x, const Vector& noise,
                 Transition& out) const {
  out.x = x;
  out.x_next = next_state(x, noise);
  out.A = sensitivity(x);
  out.c = cost(x);
  out.grad_c = cost_gradient(x);
  feature_gradient(features, x, out.psi, out.grad_psi);
  feature_gradient(features, out.x_next, out.psi_next, out.grad_psi_next);
  out.A_next = sensitivity(out.x_next);
  out.regen = is_regeneration(x);
}

Transition Model::step(const FeatureMap& features, const Vector& x, const Vector& noise) const {
  Transition tr;
  step(features, x, noise, tr);
  return tr;
}

double finite_difference_gradient(const Model& model, Quantity quantity, double x, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("finite difference step must be > 0");
  if (!std::isfinite(x)) throw std::invalid_argument("finite difference at non-finite state");
  if (model.kind() == ModelKind::speed_scaling_geometric && h != model.spec().lattice_step) {
    throw std::invalid_argument("geometric model: finite difference step must equal the lattice step");
  }
  auto g = [&](double v) -> double {
    Vector s(1);
    s[0] = v;
    switch (quantity) {
      case Quantity::service:
        return model.service(v);
      case Quantity::cost:
        return model.cost(s);
      case Quantity::dynamics:
        return model.next_state(s, Vector::Zero(model.noise_dim()))[0];
    }
    return 0.0;
  };
  return (g(x + h) - g(x)) / h;
}

FeatureMap default_features(const Model& model) {
  return model.is_queue() ? FeatureMap::speed_scaling() : FeatureMap::quadratic();
}

Trajectory::Trajectory(Model model, FeatureMap features, RandomStream rng)
    : Trajectory(model, std::move(features), rng, model.initial_state()) {}

Trajectory::Trajectory(Model model, FeatureMap features, RandomStream rng, Vector x0)
    : model_(std::move(model)), features_(std::move(features)), rng_(rng), x_(std::move(x0)) {
  model_.check_state(x_);
  if (features_.state_dim() != model_.state_dim()) {
    throw std::invalid_argument("feature map state dimension does not match the model");
  }
}

void Trajectory::advance(long steps) {
  for (long i = 0; i < steps; ++i) {
    model_.draw_noise(rng_, noise_);
    x_ = model_.next_state(x_, noise_);
    ++steps_;
  }
}

const Transition& Trajectory::next() {
  model_.draw_noise(rng_, noise_);
  model_.step(features_, x_, noise_, tr_);
  x_ = tr_.x_next;
  ++steps_;
  return tr_;
}

}  // namespace gradtd
