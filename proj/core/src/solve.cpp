#include "gradtd/solve.hpp"

#include <limits>
#include <stdexcept>

#include <Eigen/SVD>

namespace gradtd {

SolveResult solve_system(const Matrix& M, const Vector& b) {
  if (M.rows() != M.cols() || M.rows() != b.size()) {
    throw std::invalid_argument("solve_system: dimension mismatch");
  }
  SolveResult out;
  const long d = M.rows();
  if (d == 0) {
    out.theta = Vector(0);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double smax = sv[0];
  const double smin = sv[d - 1];
  out.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();

  if (smax > 0.0 && out.condition <= kMaxCondition) {
    out.theta = M.partialPivLu().solve(b);
    return out;
  }

  out.rank_deficient = true;
  out.theta = Vector::Zero(d);
  if (smax == 0.0) return out;
  const double cutoff = kSingularCutoff * smax;
  const Vector utb = svd.matrixU().transpose() * b;
  for (long k = 0; k < d; ++k) {
    if (sv[k] > cutoff) out.theta += svd.matrixV().col(k) * (utb[k] / sv[k]);
  }
  return out;
}

}  // namespace gradtd
