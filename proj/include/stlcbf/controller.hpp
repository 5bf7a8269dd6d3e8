#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/error.hpp"
#include "stlcbf/plant.hpp"

namespace stlcbf {

struct ControllerParams {
  double lambda = 10.0;     ///< reference-model / differentiator gain, > 1/2
  double c = 0.01;
  double gamma = 0.01;
  double varsigma = 1.0;    ///< leakage on r_hat
  double varrho = 1.0;      ///< funnel decay rate
  double eps_smooth = 0.1;  ///< smoothing constant of the robust eta term
  double rho0 = 1.0;
  double rho_inf = 0.2;
  double alpha_gain = 0.5;  ///< alpha(y) = alpha_gain * y
  Eigen::MatrixXd W;        ///< input weight; identity when empty
  std::optional<Eigen::VectorXd> input_bounds;  ///< |u_i| <= bound_i
  std::optional<double> eta0;  ///< initial eta; nullopt selects h(x_hat) - h(x)/2
  double r_hat0 = 0.0;
  double eta_reset = 0.1;   ///< eta chosen at release times when admissible
  double e_guard = -1.0;    ///< clamp margin on e; negative selects 1e-6 * rho_inf

  double guard() const { return e_guard > 0.0 ? e_guard : 1e-6 * rho_inf; }
  double alpha(double y) const { return alpha_gain * y; }

  void validate(Eigen::Index m) const {
    STLCBF_THROW_UNLESS(lambda > 0.5, SpecError, "lambda must exceed 1/2");
    STLCBF_THROW_UNLESS(c > 0 && gamma > 0 && varsigma > 0 && varrho > 0 && eps_smooth > 0,
                        SpecError, "adaptive gains must be positive");
    STLCBF_THROW_UNLESS(rho0 > rho_inf && rho_inf > 0, SpecError,
                        "funnel bounds need rho0 > rho_inf > 0");
    STLCBF_THROW_UNLESS(alpha_gain > 0, SpecError, "alpha gain must be positive");
    STLCBF_THROW_UNLESS(r_hat0 >= 0, SpecError, "r_hat0 must be non-negative");
    if (W.size() != 0) {
      STLCBF_THROW_UNLESS(W.rows() == m && W.cols() == m, DimensionError,
                          "W must be m x m");
      STLCBF_THROW_UNLESS((W - W.transpose()).cwiseAbs().maxCoeff() <= 1e-12, SpecError,
                          "W must be symmetric");
      Eigen::LLT<Eigen::MatrixXd> llt(W);
      STLCBF_THROW_UNLESS(llt.info() == Eigen::Success, SpecError,
                          "W must be positive definite");
    }
    if (input_bounds) {
      STLCBF_THROW_UNLESS(input_bounds->size() == m, DimensionError,
                          "input bounds must have one entry per input");
      STLCBF_THROW_UNLESS((input_bounds->array() > 0).all(), SpecError,
                          "input bounds must be positive");
    }
  }

  Eigen::MatrixXd weight(Eigen::Index m) const {
    return W.size() == 0 ? Eigen::MatrixXd::Identity(m, m) : W;
  }
};

struct ControllerState {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd z;
  double eta = 0.0;
  double r_hat = 0.0;
  double tau = 0.0;  ///< last release time
};

/// x_hat' = f(x) + g(x) u + lambda (x - x_hat)
inline Eigen::VectorXd reference_model_deriv(const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& x_hat,
                                             const Eigen::VectorXd& u, const Plant& plant,
                                             double lambda) {
  if (x_hat.size() != x.size()) throw DimensionError("x_hat dimension mismatch");
  return plant.f(x) + plant.g(x) * u + lambda * (x - x_hat);
}

/// z' = f(x) + lambda (x - z); estimates x' without using u.
inline Eigen::VectorXd differentiator_deriv(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                            const Plant& plant, double lambda) {
  if (z.size() != x.size()) throw DimensionError("z dimension mismatch");
  return plant.f(x) + lambda * (x - z);
}

/// [z'; 1]
inline Eigen::VectorXd augmented_rate(const Eigen::VectorXd& z_dot) {
  Eigen::VectorXd out(z_dot.size() + 1);
  out << z_dot, 1.0;
  return out;
}

/// rho(t) = (rho0 - rho_inf) exp(-varrho (t - tau)) + rho_inf
inline double funnel(double t, double tau, const ControllerParams& p) {
  return (p.rho0 - p.rho_inf) * std::exp(-p.varrho * (t - tau)) + p.rho_inf;
}

struct FunnelState {
  double rho = 0.0;
  double eps_error = 0.0;  ///< 1/2 ln(e / (rho - e))
  double chi = 0.0;
};

struct AdaptiveRates {
  double eta_dot = 0.0;
  double r_hat_dot = 0.0;
  FunnelState funnel;
  double e_used = 0.0;   ///< e after the guard clamp
  bool clamped = false;  ///< e was outside [guard, rho - guard]
};

/// Update laws for eta and r_hat. `grad_hhat` is d h_hat / d(x_hat, t);
/// `zbar_dot` is [z'; 1]. e is clamped into [guard, rho - guard] first.
inline AdaptiveRates adaptive_derivs(double e, double rho, const Eigen::VectorXd& grad_hhat,
                                     const Eigen::VectorXd& zbar_dot, double r_hat,
                                     const ControllerParams& p, double t, double tau) {
  STLCBF_THROW_UNLESS(std::isfinite(e) && std::isfinite(rho) && std::isfinite(r_hat) &&
                          grad_hhat.allFinite() && zbar_dot.allFinite(),
                      SpecError, "non-finite input to adaptive laws");
  AdaptiveRates out;
  const double g = p.guard();
  const double ec = std::clamp(e, g, rho - g);
  out.clamped = ec != e;
  out.e_used = ec;
  const double gap = rho - ec;
  const double eps = 0.5 * std::log(ec / gap);
  const double norms = grad_hhat.norm() + zbar_dot.norm();
  const double barrier = rho / (2.0 * ec * gap);
  const double chi = eps * barrier * norms;
  out.funnel = {rho, eps, chi};

  const double decay = std::exp(-p.varrho * (t - tau));
  out.eta_dot = -p.c * (ec * gap / rho) * eps
                - (p.varrho * ec / rho) * (p.rho0 - p.rho_inf) * decay
                - rho * eps / (4.0 * ec * gap)
                - r_hat * r_hat * norms * chi /
                      std::sqrt(chi * chi * r_hat * r_hat + p.eps_smooth * p.eps_smooth);
  out.r_hat_dot = p.gamma * std::abs(eps) * barrier * norms - p.varsigma * r_hat;
  return out;
}

enum class QpStatus {
  Inactive,    ///< unconstrained optimum u = 0 is feasible
  Active,      ///< constraint active, bounds (if any) respected
  Saturated,   ///< constraint met with some channels at their bounds
  Infeasible,  ///< bounds prevent meeting the constraint; best effort returned
  Degenerate,  ///< zero constraint gradient with a positive requirement
};

struct QpResult {
  Eigen::VectorXd u;
  QpStatus status = QpStatus::Inactive;
  Eigen::VectorXd c;     ///< constraint normal: c^T u >= b_tilde
  double b_tilde = 0.0;
  double slack = 0.0;    ///< c^T u - b_tilde
};

/// min 1/2 u^T W u  s.t.  c^T u >= b, optionally |u_i| <= bound_i.
///
/// Without bounds the solution is closed form: u = 0 if b <= 0, otherwise
/// u = W^-1 c b / (c^T W^-1 c). With bounds and a diagonal W the box-
/// constrained problem is solved exactly by walking the piecewise-linear
/// multiplier path; a non-diagonal W falls back to clamping the unbounded
/// solution.
inline QpResult solve_single_constraint(const Eigen::VectorXd& c, double b,
                                        const Eigen::MatrixXd& W,
                                        const std::optional<Eigen::VectorXd>& bounds) {
  const auto m = c.size();
  QpResult r;
  r.c = c;
  r.b_tilde = b;
  r.u = Eigen::VectorXd::Zero(m);
  if (b <= 0.0) {
    r.status = QpStatus::Inactive;
    r.slack = -b;
    return r;
  }
  const double tiny = 1e-300;
  if (c.squaredNorm() <= tiny) {
    r.status = QpStatus::Degenerate;
    r.slack = -b;
    return r;
  }
  const Eigen::VectorXd winv_c = W.ldlt().solve(c);
  const double denom = c.dot(winv_c);
  r.u = winv_c * (b / denom);
  r.status = QpStatus::Active;
  if (bounds && (r.u.array().abs() > bounds->array()).any()) {
    const bool diagonal = (W - Eigen::MatrixXd(W.diagonal().asDiagonal())).isZero(0.0);
    if (diagonal) {
      const Eigen::VectorXd w = W.diagonal();
      const Eigen::VectorXd& ub = *bounds;
      const double reach = (c.array().abs() * ub.array()).sum();
      if (reach < b) {
        r.u = (c.array().sign() * ub.array()).matrix();
        r.status = QpStatus::Infeasible;
      } else {
        // u_i(mu) = clamp(mu c_i / w_i, -ub_i, ub_i); c^T u(mu) is piecewise
        // linear and non-decreasing in mu. Find mu with c^T u(mu) = b.
        std::vector<std::pair<double, Eigen::Index>> knees;
        for (Eigen::Index i = 0; i < m; ++i)
          if (c(i) != 0.0) knees.push_back({ub(i) * w(i) / std::abs(c(i)), i});
        std::sort(knees.begin(), knees.end());
        double saturated = 0.0;  // contribution of channels already at a bound
        double slope = 0.0;      // d(c^T u)/d mu from free channels
        for (Eigen::Index i = 0; i < m; ++i)
          if (c(i) != 0.0) slope += c(i) * c(i) / w(i);
        double mu = 0.0;
        for (const auto& [knee, i] : knees) {
          if (saturated + slope * knee >= b) break;
          saturated += std::abs(c(i)) * ub(i);
          slope -= c(i) * c(i) / w(i);
          mu = knee;
        }
        if (slope > 0.0) mu = (b - saturated) / slope;
        for (Eigen::Index i = 0; i < m; ++i)
          r.u(i) = std::clamp(mu * c(i) / w(i), -ub(i), ub(i));
        r.status = QpStatus::Saturated;
      }
    } else {
      r.u = r.u.cwiseMax(-*bounds).cwiseMin(*bounds);
      r.status = c.dot(r.u) >= b ? QpStatus::Saturated : QpStatus::Infeasible;
    }
  }
  r.slack = c.dot(r.u) - b;
  return r;
}

/// Safety filter on the reconstructed certificate:
///   min 1/2 u^T W u  s.t.
///   dhh/dx_hat (f(x) + g(x) u + lambda (x - x_hat)) - eta' + dhh/dt >= -alpha(hh)
inline QpResult qp_solve(const Eigen::VectorXd& grad_x, double grad_t, double eta_dot,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat,
                         const Plant& plant, const ControllerParams& p, double hhat) {
  STLCBF_THROW_UNLESS(std::isfinite(hhat) && grad_x.allFinite() && std::isfinite(grad_t),
                      SpecError, "certificate value and gradient must be finite");
  if (grad_x.size() != x.size()) throw DimensionError("gradient dimension mismatch");
  const Eigen::VectorXd c = plant.g(x).transpose() * grad_x;
  const double drift = grad_x.dot(plant.f(x) + p.lambda * (x - x_hat));
  const double b = -(drift - eta_dot + grad_t + p.alpha(hhat));
  return solve_single_constraint(c, b, p.weight(plant.input_dim()), p.input_bounds);
}

struct ResetOutcome {
  ControllerState state;
  bool fault = false;
  /// 0: eta_reset kept, 1: e re-centred at rho_inf / 2, 2: h(x)/2 split.
  int policy = 0;
};

/// Re-selects eta at a release time s so that 0 < e < rho_inf and
/// h_hat >= 0, with e = h_x - h_xhat + eta and h_hat = h_xhat - eta.
/// Tries eta_reset first, then centres e at rho_inf / 2, then splits h(x)
/// evenly between e and h_hat.
inline ResetOutcome release_reset(const ControllerState& state, double h_xhat, double h_x,
                                  const ControllerParams& p, double s) {
  ResetOutcome out{state, false, 0};
  out.state.tau = s;
  auto admissible = [&](double eta) {
    const double e = h_x - h_xhat + eta;
    return e > 0.0 && e < p.rho_inf && h_xhat - eta >= 0.0;
  };
  const double candidates[] = {p.eta_reset, h_xhat - h_x + 0.5 * p.rho_inf,
                               h_xhat - 0.5 * h_x};
  for (int k = 0; k < 3; ++k) {
    if (admissible(candidates[k])) {
      out.state.eta = candidates[k];
      out.policy = k;
      return out;
    }
  }
  out.state.eta = candidates[2];
  out.policy = 2;
  out.fault = true;
  return out;
}

}  // namespace stlcbf
