#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gradtd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One basis function ψ_j(x) = x_i^p acting on a single state coordinate.
/// p = 0 gives the constant function 1.
struct Monomial {
  int coordinate = 0;
  double power = 0.0;
};

/// Linear-in-parameters basis ψ: ℝ^ℓ → ℝ^d with its ℓ×d gradient
/// [∇ψ(x)]_{i,j} = ∂ψ_j/∂x_i.
class FeatureMap {
 public:
  FeatureMap(int state_dim, std::vector<Monomial> terms, std::string name = "custom");

  /// ψ(x) = (1, x²): exact basis for the scalar linear-Gaussian model.
  static FeatureMap quadratic();
  /// ψ(x) = (x^{3/2}, x): basis for the speed-scaling queue.
  static FeatureMap speed_scaling();

  int dim() const { return static_cast<int>(terms_.size()); }
  int state_dim() const { return state_dim_; }
  const std::string& name() const { return name_; }
  const std::vector<Monomial>& terms() const { return terms_; }

  /// true where ψ_j is constant (∇ψ_j ≡ 0).
  const std::vector<bool>& constant_mask() const { return constant_mask_; }
  /// Indices with constant_mask == false.
  std::vector<int> varying_indices() const;

  Vector value(const Vector& x) const;
  Matrix gradient(const Vector& x) const;

  /// Allocation-free evaluation into preallocated outputs. Throws on non-finite x.
  void evaluate(const Vector& x, Vector& psi, Matrix& grad_psi) const;
  void evaluate_value(const Vector& x, Vector& psi) const;

 private:
  int state_dim_;
  std::vector<Monomial> terms_;
  std::vector<bool> constant_mask_;
  std::string name_;
};

}  // namespace gradtd
