#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "stlcbf/controller.hpp"

using namespace stlcbf;

namespace {

ControllerParams defaults() { return ControllerParams{}; }

Plant linear(int n, int m) {
  return Plant(plant::LinearAffine{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n),
                                   Eigen::MatrixXd::Identity(n, m)});
}

}  // namespace

TEST(ReferenceModel, Examples) {
  const Plant uni;
  const Eigen::Vector3d x(0.5, -0.2, 0.0);
  EXPECT_TRUE(reference_model_deriv(x, x, Eigen::Vector2d::Zero(), uni, 10).isZero());
  const Eigen::Vector3d xh(0.4, -0.2, 0.0);
  const auto d = reference_model_deriv(x, xh, Eigen::Vector2d(1, 0), uni, 10);
  EXPECT_NEAR(d(0), 1.0 + 10 * 0.1, 1e-12);
  EXPECT_NEAR(d(1), 0.0, 1e-12);
  const Plant lin = linear(2, 2);
  EXPECT_TRUE(reference_model_deriv(Eigen::Vector2d(0.1, 0), Eigen::Vector2d::Zero(),
                                    Eigen::Vector2d::Zero(), lin, 10)
                  .isApprox(Eigen::Vector2d(1, 0)));
  EXPECT_THROW(reference_model_deriv(x, Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), uni, 10),
               DimensionError);
}

TEST(Differentiator, Examples) {
  const Plant lin = linear(2, 1);
  const Eigen::Vector2d x(0.3, 0.4);
  EXPECT_TRUE(differentiator_deriv(x, x, lin, 10).isZero());
  EXPECT_EQ(augmented_rate(differentiator_deriv(x, x, lin, 10)), Eigen::Vector3d(0, 0, 1));
  EXPECT_TRUE(differentiator_deriv(Eigen::Vector2d(0, 0.2), Eigen::Vector2d::Zero(), lin, 10)
                  .isApprox(Eigen::Vector2d(0, 2)));
}

TEST(Funnel, Values) {
  const auto p = defaults();
  EXPECT_DOUBLE_EQ(funnel(3.0, 3.0, p), 1.0);
  EXPECT_NEAR(funnel(1e3, 0.0, p), 0.2, 1e-15);
  EXPECT_NEAR(funnel(std::log(2.0), 0.0, p), 0.6, 1e-15);
}

TEST(AdaptiveLaws, CentredErrorLeavesOnlyDecayTerm) {
  const auto p = defaults();
  const double rho = 0.8, e = 0.4, t = 0.7, tau = 0.2;
  const Eigen::Vector4d grad(0.3, -0.4, 0.0, 1.2);
  const Eigen::Vector4d zbar(0.5, -1.0, 0.2, 1.0);
  const auto r = adaptive_derivs(e, rho, grad, zbar, 0.7, p, t, tau);
  EXPECT_NEAR(r.funnel.eps_error, 0.0, 1e-15);
  EXPECT_NEAR(r.eta_dot, -(p.varrho * e / rho) * (p.rho0 - p.rho_inf) * std::exp(-(t - tau)),
              1e-15);
  EXPECT_NEAR(r.r_hat_dot, -p.varsigma * 0.7, 1e-15);
}

TEST(AdaptiveLaws, ZeroEstimateGrowsNonNegative) {
  const auto p = defaults();
  for (double e : {0.05, 0.2, 0.5, 0.7, 0.95}) {
    const auto r = adaptive_derivs(e, 1.0, Eigen::Vector3d(0.1, 0.2, 0.3),
                                   Eigen::Vector3d(1, 0, 1), 0.0, p, 0.0, 0.0);
    EXPECT_GE(r.r_hat_dot, 0.0);
  }
}

TEST(AdaptiveLaws, MatchesIndependentEvaluation) {
  // Reference values from an extended-precision evaluation of the update laws.
  const auto p = defaults();
  const auto r = adaptive_derivs(0.3, 1.0, Eigen::Vector4d(0.3, -0.4, 0.0, 1.2),
                                 Eigen::Vector4d(0.5, -1.0, 0.2, 1.0), 0.7, p, 0.5, 0.0);
  EXPECT_NEAR(r.funnel.eps_error, -0.42364893019360180686, 1e-14);
  EXPECT_NEAR(r.funnel.chi, -2.837716125072494206, 1e-13);
  EXPECT_NEAR(r.eta_dot, 2.3264677840938826547, 1e-13);
  EXPECT_NEAR(r.r_hat_dot, -0.67162283874927505794, 1e-14);
  EXPECT_FALSE(r.clamped);
}

TEST(AdaptiveLaws, GuardClampsErrorOutsideFunnel) {
  const auto p = defaults();
  const Eigen::Vector2d g(1, 0), z(0, 1);
  for (double e : {-0.1, 0.0, 1.0, 1.3}) {
    const auto r = adaptive_derivs(e, 1.0, g, z, 0.1, p, 0, 0);
    EXPECT_TRUE(r.clamped);
    EXPECT_TRUE(std::isfinite(r.eta_dot));
    EXPECT_GT(r.e_used, 0.0);
    EXPECT_LT(r.e_used, 1.0);
  }
  EXPECT_THROW(adaptive_derivs(NAN, 1.0, g, z, 0.1, p, 0, 0), SpecError);
}

TEST(Qp, InactiveWhenRequirementNonPositive) {
  const auto r = solve_single_constraint(Eigen::Vector2d(1, 3), -0.5, Eigen::Matrix2d::Identity(),
                                         std::nullopt);
  EXPECT_EQ(r.status, QpStatus::Inactive);
  EXPECT_TRUE(r.u.isZero());
}

TEST(Qp, IdentityWeightClosedForm) {
  const auto r = solve_single_constraint(Eigen::Vector2d(1, 0), 2.0, Eigen::Matrix2d::Identity(),
                                         std::nullopt);
  EXPECT_EQ(r.status, QpStatus::Active);
  EXPECT_TRUE(r.u.isApprox(Eigen::Vector2d(2, 0)));
}

TEST(Qp, AngularChannelWeightedByOffsetSquared) {
  const double l = 0.036;
  const Eigen::Matrix2d W = Eigen::Vector2d(1, l * l).asDiagonal();
  const auto r = solve_single_constraint(Eigen::Vector2d(1, 1), 1.0, W, std::nullopt);
  // u_i proportional to c_i / w_i.
  EXPECT_NEAR(r.u(1) / r.u(0), 1.0 / (l * l), 1e-9);
  EXPECT_NEAR(r.slack, 0.0, 1e-12);
}

TEST(Qp, BoxConstrainedDiagonalIsOptimal) {
  const Eigen::Matrix2d W = Eigen::Vector2d(1, 0.01).asDiagonal();
  const Eigen::Vector2d c(1, 1), ub(2, 0.5);
  const auto r = solve_single_constraint(c, 1.5, W, ub);
  EXPECT_EQ(r.status, QpStatus::Saturated);
  EXPECT_NEAR(r.u(1), 0.5, 1e-12);
  EXPECT_NEAR(r.u(0), 1.0, 1e-12);
  const auto inf = solve_single_constraint(c, 5.0, W, ub);
  EXPECT_EQ(inf.status, QpStatus::Infeasible);
  EXPECT_TRUE(inf.u.isApprox(Eigen::Vector2d(2, 0.5)));
}

TEST(Qp, BoxConstrainedMatchesGridSearch) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1), w(0.05, 2), b(0.5, 2);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d c(u(rng), u(rng)), ub(b(rng), b(rng));
    const Eigen::Matrix2d W = Eigen::Vector2d(w(rng), w(rng)).asDiagonal();
    const double req = 0.9 * (c.cwiseAbs().dot(ub)) * std::abs(u(rng));
    const auto r = solve_single_constraint(c, req, W, ub);
    ASSERT_GE(r.slack, -1e-9);
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 400; ++a)
      for (int k = 0; k <= 400; ++k) {
        const Eigen::Vector2d v(ub(0) * (a / 200.0 - 1), ub(1) * (k / 200.0 - 1));
        if (c.dot(v) >= req) best = std::min(best, 0.5 * v.dot(W * v));
      }
    EXPECT_LE(0.5 * r.u.dot(W * r.u), best + 1e-9);
  }
}

TEST(Qp, DegenerateNormal) {
  const auto r = solve_single_constraint(Eigen::Vector2d::Zero(), 1.0, Eigen::Matrix2d::Identity(),
                                         std::nullopt);
  EXPECT_EQ(r.status, QpStatus::Degenerate);
  EXPECT_TRUE(r.u.isZero());
}

TEST(Qp, SafetyFilterRequirement) {
  const Plant lin = linear(2, 2);
  auto p = defaults();
  const Eigen::Vector2d x(0.1, 0), xh(0, 0), grad(1, 0);
  // b = -(grad . lambda (x - xh) - eta' + dh/dt + alpha h) = -(1 - 0.5 - 2 + 0.5)
  const auto r = qp_solve(grad, -2.0, 0.5, x, xh, lin, p, 1.0);
  EXPECT_NEAR(r.b_tilde, 1.0, 1e-12);
  EXPECT_TRUE(r.u.isApprox(Eigen::Vector2d(1, 0)));
  EXPECT_THROW(qp_solve(grad, NAN, 0.0, x, xh, lin, p, 1.0), SpecError);
}

TEST(ReleaseReset, KeepsConfiguredEtaWhenAdmissible) {
  auto p = defaults();
  ControllerState s;
  s.eta = 0.7;
  // x_hat = x: e = eta.
  const auto r = release_reset(s, 0.5, 0.5, p, 8.0);
  EXPECT_FALSE(r.fault);
  EXPECT_EQ(r.policy, 0);
  EXPECT_DOUBLE_EQ(r.state.eta, 0.1);
  EXPECT_DOUBLE_EQ(r.state.tau, 8.0);
}

TEST(ReleaseReset, FallsBackWhenConfiguredEtaIsInadmissible) {
  auto p = defaults();
  ControllerState s;
  // e = h_x - h_xhat + 0.1 = 0.25 >= rho_inf: re-centre e at 0.1.
  auto r = release_reset(s, 0.5, 0.65, p, 1.0);
  EXPECT_EQ(r.policy, 1);
  EXPECT_NEAR(0.65 - 0.5 + r.state.eta, 0.1, 1e-15);
  // Small certificate: h_hat would go negative after re-centring.
  r = release_reset(s, 0.02, 0.04, p, 1.0);
  EXPECT_EQ(r.policy, 2);
  EXPECT_FALSE(r.fault);
  EXPECT_NEAR(0.02 - r.state.eta, 0.02, 1e-15);
  // No admissible choice when h(x) is negative.
  r = release_reset(s, 0.3, -0.1, p, 1.0);
  EXPECT_TRUE(r.fault);
}

TEST(Params, Validation) {
  auto p = defaults();
  EXPECT_NO_THROW(p.validate(2));
  p.lambda = 0.4;
  EXPECT_THROW(p.validate(2), SpecError);
  p = defaults();
  p.W = Eigen::Matrix2d::Identity();
  p.W(0, 1) = 0.3;
  EXPECT_THROW(p.validate(2), SpecError);
  p.W = Eigen::Matrix3d::Identity();
  EXPECT_THROW(p.validate(2), DimensionError);
  p = defaults();
  p.input_bounds = Eigen::Vector2d(1, -1);
  EXPECT_THROW(p.validate(2), SpecError);
}
