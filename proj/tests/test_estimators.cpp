#include <cmath>

#include <gtest/gtest.h>

#include "gradtd/estimators.hpp"
#include "gradtd/oracles.hpp"
#include "gradtd/solve.hpp"

using namespace gradtd;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Vector scalar(double x) { return Vector::Constant(1, x); }

EstimatorState make(Algorithm alg, const Model& m, double beta = 0.9, double lambda = 1.0) {
  return make_estimator(EstimatorOptions{alg, beta, lambda, 1e-3, {}}, m, default_features(m));
}

Model linear() { return Model(ModelSpec{}); }

Model queue(ModelKind kind, double cost_scale = 1.0) {
  ModelSpec s;
  s.kind = kind;
  s.cost_scale = cost_scale;
  return Model(s);
}

/// Runs `alg` for T steps after a burn-in and returns the finalized estimate.
ThetaEstimate run(Algorithm alg, const Model& m, double beta, double lambda, long T, std::uint64_t seed) {
  auto s = make(alg, m, beta, lambda);
  Trajectory path(m, default_features(m), RandomStream(seed, 0));
  path.advance(1000);
  for (long t = 0; t < T; ++t) update(s, path.next());
  return finalize(s);
}

}  // namespace

TEST(Solve, Examples) {
  auto r = solve_system(Matrix::Identity(2, 2), vec({1, 2}));
  EXPECT_EQ(r.theta, vec({1, 2}));
  EXPECT_FALSE(r.rank_deficient);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  r = solve_system(d, vec({1, 0}));
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_NEAR(r.theta[0], 1.0, 1e-15);
  EXPECT_NEAR(r.theta[1], 0.0, 1e-15);

  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 2.0;
  m(1, 1) = 4.0;
  r = solve_system(m, vec({2, 8}));
  EXPECT_DOUBLE_EQ(r.theta[0], 1.0);
  EXPECT_DOUBLE_EQ(r.theta[1], 2.0);

  Matrix ill = Matrix::Identity(2, 2);
  ill(1, 1) = 1e-14;
  EXPECT_TRUE(solve_system(ill, vec({1, 1})).rank_deficient);
}

TEST(Estimators, AlgorithmNames) {
  for (auto a : {Algorithm::lstd, Algorithm::grad_lstd, Algorithm::lstd_lambda, Algorithm::grad_lstd_lambda,
                 Algorithm::lstd_lambda_avg, Algorithm::regen_lstd, Algorithm::regen_lstd_lambda}) {
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  }
  EXPECT_THROW(parse_algorithm("td"), std::invalid_argument);
}

TEST(Estimators, PairingValidation) {
  const Model lin = linear();
  const Model expo = queue(ModelKind::speed_scaling_exponential);
  const Model geo = queue(ModelKind::speed_scaling_geometric);
  EXPECT_THROW(validate_pairing(Algorithm::regen_lstd, 1.0, 1.0, expo), std::invalid_argument);
  EXPECT_NO_THROW(validate_pairing(Algorithm::regen_lstd, 1.0, 1.0, geo));
  EXPECT_THROW(validate_pairing(Algorithm::lstd_lambda_avg, 0.9, 0.0, expo), std::invalid_argument);
  EXPECT_THROW(validate_pairing(Algorithm::lstd, 1.0, 1.0, lin), std::invalid_argument);
  EXPECT_THROW(validate_pairing(Algorithm::grad_lstd, 0.0, 1.0, lin), std::invalid_argument);
  EXPECT_THROW(validate_pairing(Algorithm::grad_lstd, 1.5, 1.0, lin), std::invalid_argument);
  EXPECT_THROW(validate_pairing(Algorithm::grad_lstd_lambda, 0.9, 1.5, lin), std::invalid_argument);
  EXPECT_NO_THROW(validate_pairing(Algorithm::grad_lstd, 1.0, 1.0, expo));
}

TEST(Estimators, LstdFirstStep) {
  const Model m = linear();
  auto s = make(Algorithm::lstd, m);
  // x = 2: ψ = (1, 4), c = 4.
  const Transition tr = m.step(FeatureMap::quadratic(), scalar(2.0), scalar(0.0));
  lstd_step(s, tr);
  EXPECT_EQ(Vector(s.trace.col(0)), vec({1, 4}));
  EXPECT_EQ(s.b, vec({4, 16}));
  EXPECT_EQ(s.t, 1);
}

TEST(Estimators, GradLstdTraceExample) {
  const Model m = linear();
  auto s = make(Algorithm::grad_lstd, m);
  ASSERT_EQ(s.basis, std::vector<int>{1});
  const auto f = FeatureMap::quadratic();
  grad_lstd_step(s, m.step(f, scalar(1.0), scalar(0.0)));
  EXPECT_DOUBLE_EQ(s.trace(0, 0), 2.0);
  grad_lstd_step(s, m.step(f, scalar(2.0), scalar(0.0)));
  EXPECT_NEAR(s.trace(0, 0), 0.63 * 2.0 + 4.0, 1e-15);
}

TEST(Estimators, DimensionMismatchThrows) {
  const Model m = linear();
  auto s = make(Algorithm::lstd, m);
  Transition tr = m.step(FeatureMap::quadratic(), scalar(1.0), scalar(0.0));
  tr.psi = vec({1, 2, 3});
  EXPECT_THROW(lstd_step(s, tr), std::invalid_argument);
  auto g = make(Algorithm::grad_lstd, m);
  EXPECT_THROW(lstd_step(g, m.step(FeatureMap::quadratic(), scalar(1.0), scalar(0.0))), std::logic_error);
}

TEST(Estimators, ZeroCostGivesZeroB) {
  ModelSpec spec;
  spec.cost_scale = 0.0;
  const Model m(spec);
  for (auto alg : {Algorithm::lstd, Algorithm::grad_lstd}) {
    auto s = make(alg, m);
    Trajectory path(m, default_features(m), RandomStream(1, 0));
    for (int t = 0; t < 500; ++t) update(s, path.next());
    EXPECT_EQ(s.b.norm(), 0.0);
    EXPECT_EQ(finalize(s).theta.norm(), 0.0);
  }
}

TEST(Estimators, GainTelescoping) {
  const Model m = linear();
  auto s = make(Algorithm::lstd, m);
  Trajectory path(m, default_features(m), RandomStream(4, 0));
  Vector b_sum = Vector::Zero(2);
  Matrix m_sum = Matrix::Zero(2, 2);
  Vector phi = Vector::Zero(2);
  for (int t = 1; t <= 100; ++t) {
    const Transition& tr = path.next();
    update(s, tr);
    phi = 0.9 * phi + tr.psi;
    b_sum += phi * tr.c;
    m_sum += tr.psi * tr.psi.transpose();
    // α₁ = 1 erases M(0) and b(0), so the registers are plain means.
    EXPECT_LT((s.b - b_sum / t).norm(), 1e-12 * (1.0 + b_sum.norm() / t));
    EXPECT_LT((s.M - m_sum / t).norm(), 1e-12 * (1.0 + m_sum.norm() / t));
  }
}

TEST(Estimators, LambdaOneMatchesBaseExactly) {
  for (const Model& m : {linear(), queue(ModelKind::speed_scaling_exponential)}) {
    const double beta = m.is_queue() ? 1.0 : 0.9;
    std::vector<std::pair<Algorithm, Algorithm>> pairs = {{Algorithm::grad_lstd, Algorithm::grad_lstd_lambda}};
    if (!m.is_queue()) pairs.emplace_back(Algorithm::lstd, Algorithm::lstd_lambda);
    for (auto [base, lam] : pairs) {
      auto a = make(base, m, beta, 1.0);
      auto b = make(lam, m, beta, 1.0);
      Trajectory path(m, default_features(m), RandomStream(8, 0));
      for (int t = 0; t < 10000; ++t) {
        const Transition& tr = path.next();
        update(a, tr);
        update(b, tr);
        ASSERT_TRUE((a.trace.array() == b.trace.array()).all()) << "step " << t;
      }
    }
  }
}

TEST(Estimators, LambdaZeroCollapsesTrace) {
  const Model m = linear();
  auto s = make(Algorithm::lstd_lambda, m, 0.9, 0.0);
  auto g = make(Algorithm::grad_lstd_lambda, m, 0.9, 0.0);
  Trajectory path(m, default_features(m), RandomStream(2, 0));
  for (int t = 0; t < 100; ++t) {
    const Transition& tr = path.next();
    update(s, tr);
    update(g, tr);
    ASSERT_EQ(Vector(s.trace.col(0)), tr.psi);
    ASSERT_EQ(g.trace(0, 0), tr.grad_psi(0, 1));
  }
}

TEST(Estimators, GradLstdMIsSymmetricPsd) {
  const Model m = queue(ModelKind::speed_scaling_exponential);
  auto s = make(Algorithm::grad_lstd, m, 1.0);
  Trajectory path(m, default_features(m), RandomStream(3, 0));
  for (int t = 0; t < 2000; ++t) {
    update(s, path.next());
    ASSERT_EQ((s.M - s.M.transpose()).norm(), 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.M);
    ASSERT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Estimators, ScaleEquivariance) {
  for (auto kind : {ModelKind::linear, ModelKind::speed_scaling_exponential}) {
    const Model one = queue(kind, 1.0);
    const Model two = queue(kind, 2.0);
    const double beta = kind == ModelKind::linear ? 0.9 : 1.0;
    for (auto alg : {Algorithm::grad_lstd, Algorithm::grad_lstd_lambda}) {
      const auto a = run(alg, one, beta, 0.5, 2000, 12);
      const auto b = run(alg, two, beta, 0.5, 2000, 12);
      for (long j = 0; j < a.theta.size(); ++j) EXPECT_EQ(2.0 * a.theta[j], b.theta[j]);
    }
  }
  const auto a = run(Algorithm::lstd, queue(ModelKind::linear, 1.0), 0.9, 1.0, 2000, 12);
  const auto b = run(Algorithm::lstd, queue(ModelKind::linear, 2.0), 0.9, 1.0, 2000, 12);
  for (long j = 0; j < a.theta.size(); ++j) EXPECT_EQ(2.0 * a.theta[j], b.theta[j]);
}

TEST(Estimators, AverageCostFirstStep) {
  const Model m = queue(ModelKind::speed_scaling_exponential);
  auto s = make(Algorithm::lstd_lambda_avg, m, 1.0, 0.0);
  // x = 1.5: f = 1.5 (boundary branch), c = 1.5 + 1.125.
  const Transition tr = m.step(FeatureMap::speed_scaling(), scalar(1.5), scalar(0.0));
  lstd_lambda_avg_step(s, tr);
  EXPECT_DOUBLE_EQ(s.eta, tr.c);
  EXPECT_EQ(s.eta_psi, tr.psi);
  // The first centered feature is zero.
  EXPECT_EQ(s.trace.norm(), 0.0);
}

TEST(Estimators, AverageCostConstantCostKillsB) {
  const Model m = queue(ModelKind::speed_scaling_exponential, 0.0);
  auto s = make(Algorithm::lstd_lambda_avg, m, 1.0, 0.5);
  Trajectory path(m, default_features(m), RandomStream(3, 0));
  for (int t = 0; t < 1000; ++t) update(s, path.next());
  EXPECT_EQ(s.b.norm(), 0.0);
  EXPECT_THROW(make(Algorithm::lstd_lambda_avg, m, 0.9, 0.5), std::invalid_argument);
}

TEST(Estimators, RegenerationResetsTrace) {
  const Model m = queue(ModelKind::speed_scaling_geometric);
  const auto f = FeatureMap::speed_scaling();
  auto s = make(Algorithm::regen_lstd, m, 1.0);
  update(s, m.step(f, scalar(2.0), scalar(0.0)));
  update(s, m.step(f, scalar(3.0), scalar(0.0)));
  ASSERT_GT(s.trace.norm(), 0.0);
  update(s, m.step(f, scalar(0.0), scalar(0.5)));  // X(t−1) = 0 for the next update
  const Transition tr = m.step(f, scalar(0.5), scalar(0.0));
  update(s, tr);
  EXPECT_LT((Vector(s.trace.col(0)) - (tr.psi - s.eta_psi)).norm(), 1e-15);
}

TEST(Estimators, RegenLambdaNeverEmptyMatchesAverageCost) {
  // A trajectory that never visits zero: drive the exponential queue with
  // geometric-model transitions that never regenerate.
  const Model geo = queue(ModelKind::speed_scaling_geometric);
  const auto f = FeatureMap::speed_scaling();
  auto regen = make(Algorithm::regen_lstd_lambda, geo, 1.0, 1.0);
  auto avg = make(Algorithm::lstd_lambda_avg, geo, 1.0, 1.0);
  auto plain = make(Algorithm::regen_lstd, geo, 1.0, 1.0);
  RandomStream rng(1, 0);
  Vector x = scalar(5.0);
  for (int t = 0; t < 500; ++t) {
    Vector n = geo.draw_noise(rng);
    n[0] += 2.0;  // keep the queue away from zero
    const Transition tr = geo.step(f, x, n);
    ASSERT_FALSE(tr.regen);
    update(regen, tr);
    update(avg, tr);
    update(plain, tr);
    ASSERT_TRUE((regen.trace.array() == avg.trace.array()).all());
    ASSERT_TRUE((regen.b.array() == avg.b.array()).all());
    ASSERT_TRUE((regen.M.array() == avg.M.array()).all());
    ASSERT_TRUE((plain.trace.array() == avg.trace.array()).all());
    ASSERT_TRUE((plain.b.array() == avg.b.array()).all());
    x = tr.x_next;
  }
}

TEST(Estimators, ConstantRecoveryZeroCase) {
  ModelSpec spec;
  spec.cost_scale = 0.0;
  const Model m(spec);
  auto s = make(Algorithm::grad_lstd, m);
  Trajectory path(m, default_features(m), RandomStream(1, 0));
  for (int t = 0; t < 100; ++t) {
    const Transition& tr = path.next();
    update(s, tr);
    constant_recovery_step(s, tr, Vector::Zero(2));
  }
  EXPECT_EQ(s.eta, 0.0);
  EXPECT_EQ(finalize(s).kappa, 0.0);

  auto avg = make(Algorithm::grad_lstd, queue(ModelKind::speed_scaling_exponential), 1.0);
  EXPECT_THROW(constant_recovery_step(avg, path.next(), Vector::Zero(2)), std::invalid_argument);
}

TEST(Estimators, ConstantRecoveryWithFixedTheta) {
  const Model m = linear();
  for (double beta : {0.9, 0.99}) {
    const auto exact = oracle::analytic_linear_theta(0.7, beta);
    auto s = make(Algorithm::grad_lstd, m, beta);
    Trajectory path(m, default_features(m), RandomStream(6, 0));
    path.advance(1000);
    const Vector theta = vec({0.0, exact.theta2});
    for (int t = 0; t < 1000000; ++t) {
      const Transition& tr = path.next();
      update(s, tr);
      constant_recovery_step(s, tr, theta);
    }
    const double kappa = -s.h_bar + s.eta / (1.0 - beta);
    EXPECT_NEAR(kappa, exact.theta1, (beta == 0.9 ? 0.02 : 0.05) * exact.theta1) << beta;
  }
}

TEST(Estimators, ConsistencyOnLinearModel) {
  const Model m = linear();
  const auto exact = oracle::analytic_linear_theta(0.7, 0.9);
  const auto lstd = run(Algorithm::lstd, m, 0.9, 1.0, 1000000, 31);
  EXPECT_NEAR(lstd.theta[1], exact.theta2, 0.02 * exact.theta2);
  const auto grad = run(Algorithm::grad_lstd, m, 0.99, 1.0, 1000000, 32);
  const double target = oracle::analytic_linear_theta(0.7, 0.99).theta2;
  EXPECT_NEAR(grad.theta[1], target, 0.02 * target);
  EXPECT_EQ(grad.theta[0], 0.0);
  EXPECT_FALSE(grad.rank_deficient);
}

TEST(Estimators, LambdaFixedPointsMatchOracle) {
  const Model m = linear();
  oracle::FixedPointOptions o;
  o.beta = 0.9;
  o.n_samples = 400000;
  o.seed = 77;

  o.form = oracle::FixedPointForm::gradient;
  o.lambda = 0.5;
  const auto fp_grad = oracle::mc_fixed_point(m, FeatureMap::quadratic(), o);
  const auto grad = run(Algorithm::grad_lstd_lambda, m, 0.9, 0.5, 1000000, 41);
  EXPECT_NEAR(grad.theta[1], fp_grad.theta[1], 0.05 * std::abs(fp_grad.theta[1]));

  o.form = oracle::FixedPointForm::standard;
  o.lambda = 0.0;
  const auto fp_std = oracle::mc_fixed_point(m, FeatureMap::quadratic(), o);
  const auto lstd0 = run(Algorithm::lstd_lambda, m, 0.9, 0.0, 1000000, 42);
  EXPECT_FALSE(lstd0.rank_deficient);
  ASSERT_TRUE(lstd0.theta.allFinite());
  EXPECT_NEAR(lstd0.theta[1], fp_std.theta[1], 0.05 * std::abs(fp_std.theta[1]));
}

TEST(Estimators, FinalizeBeforeUpdateThrows) {
  auto s = make(Algorithm::lstd, linear());
  EXPECT_THROW(finalize(s), std::logic_error);
}
