#include "gradtd/features.hpp"

#include <cmath>
#include <stdexcept>

namespace gradtd {

namespace {

void check_finite(const Vector& x) {
  if (!x.allFinite()) throw std::invalid_argument("feature evaluation: non-finite state");
}

}  // namespace

FeatureMap::FeatureMap(int state_dim, std::vector<Monomial> terms, std::string name)
    : state_dim_(state_dim), terms_(std::move(terms)), name_(std::move(name)) {
  if (state_dim_ < 1) throw std::invalid_argument("FeatureMap: state dimension must be positive");
  if (terms_.empty()) throw std::invalid_argument("FeatureMap: empty basis");
  constant_mask_.reserve(terms_.size());
  for (const auto& term : terms_) {
    if (term.coordinate < 0 || term.coordinate >= state_dim_) {
      throw std::invalid_argument("FeatureMap: monomial coordinate out of range");
    }
    if (term.power < 0.0) throw std::invalid_argument("FeatureMap: negative power");
    constant_mask_.push_back(term.power == 0.0);
  }
}

FeatureMap FeatureMap::quadratic() { return FeatureMap(1, {{0, 0.0}, {0, 2.0}}, "quadratic"); }

FeatureMap FeatureMap::speed_scaling() {
  return FeatureMap(1, {{0, 1.5}, {0, 1.0}}, "speed_scaling");
}

std::vector<int> FeatureMap::varying_indices() const {
  std::vector<int> out;
  for (int j = 0; j < dim(); ++j) {
    if (!constant_mask_[j]) out.push_back(j);
  }
  return out;
}

Vector FeatureMap::value(const Vector& x) const {
  Vector psi(dim());
  evaluate_value(x, psi);
  return psi;
}

Matrix FeatureMap::gradient(const Vector& x) const {
  Vector psi(dim());
  Matrix grad(state_dim_, dim());
  evaluate(x, psi, grad);
  return grad;
}

void FeatureMap::evaluate_value(const Vector& x, Vector& psi) const {
  check_finite(x);
  if (x.size() != state_dim_) throw std::invalid_argument("feature evaluation: state dimension mismatch");
  psi.resize(dim());
  for (int j = 0; j < dim(); ++j) {
    const auto& term = terms_[j];
    const double xi = x[term.coordinate];
    if (term.power == 0.0) {
      psi[j] = 1.0;
    } else if (term.power == 1.0) {
      psi[j] = xi;
    } else if (term.power == 2.0) {
      psi[j] = xi * xi;
    } else {
      psi[j] = std::pow(xi, term.power);
    }
  }
}

void FeatureMap::evaluate(const Vector& x, Vector& psi, Matrix& grad_psi) const {
  evaluate_value(x, psi);
  grad_psi.setZero(state_dim_, dim());
  for (int j = 0; j < dim(); ++j) {
    const auto& term = terms_[j];
    const double xi = x[term.coordinate];
    double d = 0.0;
    if (term.power == 0.0) {
      d = 0.0;
    } else if (term.power == 1.0) {
      d = 1.0;
    } else if (term.power == 2.0) {
      d = 2.0 * xi;
    } else {
      d = term.power * std::pow(xi, term.power - 1.0);
    }
    grad_psi(term.coordinate, j) = d;
  }
  if (!psi.allFinite() || !grad_psi.allFinite()) {
    throw std::domain_error("feature evaluation: non-finite basis value");
  }
}

}  // namespace gradtd
