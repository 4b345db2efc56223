#pragma once

#include "gradtd/features.hpp"

namespace gradtd {

struct SolveResult {
  Vector theta;
  bool rank_deficient = false;
  double condition = 0.0;  ///< σ_max/σ_min of M (infinity when singular)
};

/// Condition numbers above this switch the solve to the truncated pseudo-inverse.
inline constexpr double kMaxCondition = 1e12;
/// Singular values below this fraction of σ_max are dropped by the pseudo-inverse.
inline constexpr double kSingularCutoff = 1e-10;

/// Solves Mθ = b for square M. Well-conditioned systems use LU; otherwise the
/// minimum-norm solution through an SVD truncated at kSingularCutoff·σ_max.
SolveResult solve_system(const Matrix& M, const Vector& b);

}  // namespace gradtd
