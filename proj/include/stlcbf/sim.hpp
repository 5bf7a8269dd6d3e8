#pragma once

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/cbf.hpp"
#include "stlcbf/controller.hpp"
#include "stlcbf/monitor.hpp"
#include "stlcbf/plant.hpp"

namespace stlcbf {

/// One classical fourth-order Runge-Kutta step of y' = f(t, y).
template <class F>
Eigen::VectorXd rk4_step(F&& f, double t, const Eigen::VectorXd& y, double dt) {
  const Eigen::VectorXd k1 = f(t, y);
  const Eigen::VectorXd k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = f(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Plant state together with the controller's internal states.
struct JointState {
  Eigen::VectorXd x;
  ControllerState ctl;

  Eigen::VectorXd pack() const {
    const auto n = x.size();
    Eigen::VectorXd y(3 * n + 2);
    y << x, ctl.x_hat, ctl.z, ctl.eta, ctl.r_hat;
    return y;
  }

  void unpack(const Eigen::VectorXd& y) {
    const auto n = x.size();
    x = y.segment(0, n);
    ctl.x_hat = y.segment(n, n);
    ctl.z = y.segment(2 * n, n);
    ctl.eta = y(3 * n);
    ctl.r_hat = y(3 * n + 1);
  }
};

namespace flag {
inline constexpr std::uint32_t guard_clamp = 1u << 0;    ///< e left [guard, rho - guard]
inline constexpr std::uint32_t qp_saturated = 1u << 1;   ///< an input bound is active
inline constexpr std::uint32_t qp_infeasible = 1u << 2;  ///< bounds prevent the constraint
inline constexpr std::uint32_t qp_degenerate = 1u << 3;  ///< zero constraint normal
inline constexpr std::uint32_t reset = 1u << 4;          ///< release reset applied here
inline constexpr std::uint32_t reset_fault = 1u << 5;    ///< no admissible eta at a reset
inline constexpr std::uint32_t expired = 1u << 6;        ///< every leaf released
inline constexpr std::uint32_t hhat_negative = 1u << 7;  ///< reconstructed CBF below zero
}  // namespace flag

/// Everything the controller computes at one instant.
struct ControlSample {
  Eigen::VectorXd u;
  double h = 0.0;     ///< h(x, t)
  double hhat = 0.0;  ///< h(x_hat, t) - eta
  double e = 0.0;
  double rho = 0.0;
  double eta_dot = 0.0;
  double r_hat_dot = 0.0;
  std::uint32_t flags = 0;
  double qp_slack = 0.0;
};

struct SimContext {
  const CbfSpec& spec;
  const Plant& plant;
  const Disturbance& disturbance;
  const ControllerParams& params;
};

inline ControlSample control_at(const SimContext& ctx, const JointState& s, double t, Side side) {
  const auto& p = ctx.params;
  ControlSample out;
  out.u = Eigen::VectorXd::Zero(ctx.plant.input_dim());
  out.rho = funnel(t, s.ctl.tau, p);
  const auto hx = eval_cbf(ctx.spec, s.x, t, side);
  const auto hxh = eval_cbf(ctx.spec, s.ctl.x_hat, t, side);
  if (hx.expired || hxh.expired) {
    const double inf = std::numeric_limits<double>::infinity();
    out.h = out.hhat = inf;
    out.e = std::numeric_limits<double>::quiet_NaN();
    out.r_hat_dot = -p.varsigma * s.ctl.r_hat;
    out.flags |= flag::expired;
    return out;
  }
  out.h = hx.value;
  out.hhat = hxh.value - s.ctl.eta;
  out.e = out.h - out.hhat;
  if (out.hhat < 0.0) out.flags |= flag::hhat_negative;

  Eigen::VectorXd grad(hxh.grad_x.size() + 1);
  grad << hxh.grad_x, hxh.grad_t;
  const auto zbar = augmented_rate(differentiator_deriv(s.x, s.ctl.z, ctx.plant, p.lambda));
  const auto rates = adaptive_derivs(out.e, out.rho, grad, zbar, s.ctl.r_hat, p, t, s.ctl.tau);
  out.eta_dot = rates.eta_dot;
  out.r_hat_dot = rates.r_hat_dot;
  if (rates.clamped) out.flags |= flag::guard_clamp;

  const auto qp = qp_solve(hxh.grad_x, hxh.grad_t, out.eta_dot, s.x, s.ctl.x_hat, ctx.plant, p,
                           out.hhat);
  out.u = qp.u;
  out.qp_slack = qp.slack;
  switch (qp.status) {
    case QpStatus::Saturated: out.flags |= flag::qp_saturated; break;
    case QpStatus::Infeasible: out.flags |= flag::qp_infeasible; break;
    case QpStatus::Degenerate: out.flags |= flag::qp_degenerate; break;
    default: break;
  }
  return out;
}

/// Advances the joint state from t to t + dt. u and eta' are held at their
/// values from `held`; r_hat' is re-evaluated at every stage. `end` is the
/// right end of the current switching interval: stages that reach it read
/// the certificate's left limit there.
inline JointState step(const SimContext& ctx, const JointState& s, const ControlSample& held,
                       double t, double dt, double end) {
  STLCBF_THROW_UNLESS(dt > 0.0, IntegrationError, "step size must be positive");
  const auto& p = ctx.params;
  const auto n = s.x.size();
  const bool expired = (held.flags & flag::expired) != 0;
  auto deriv = [&](double ts, const Eigen::VectorXd& y) {
    JointState js = s;
    js.unpack(y);
    const Eigen::VectorXd fx = ctx.plant.f(js.x);
    const Eigen::VectorXd gu = ctx.plant.g(js.x) * held.u;
    Eigen::VectorXd dy(y.size());
    dy.segment(0, n) = fx + gu + ctx.disturbance.at(ts, n);
    dy.segment(n, n) = fx + gu + p.lambda * (js.x - js.ctl.x_hat);
    dy.segment(2 * n, n) = fx + p.lambda * (js.x - js.ctl.z);
    dy(3 * n) = held.eta_dot;
    if (expired) {
      dy(3 * n + 1) = -p.varsigma * js.ctl.r_hat;
    } else {
      const Side side = ts >= end - 1e-12 ? Side::Left : Side::Right;
      const auto hx = eval_cbf(ctx.spec, js.x, ts, side);
      const auto hxh = eval_cbf(ctx.spec, js.ctl.x_hat, ts, side);
      Eigen::VectorXd grad(hxh.grad_x.size() + 1);
      grad << hxh.grad_x, hxh.grad_t;
      const double e = hx.value - hxh.value + js.ctl.eta;
      const auto zbar = augmented_rate(dy.segment(2 * n, n));
      dy(3 * n + 1) = adaptive_derivs(e, funnel(ts, js.ctl.tau, p), grad, zbar, js.ctl.r_hat, p,
                                      ts, js.ctl.tau)
                          .r_hat_dot;
    }
    return dy;
  };
  const Eigen::VectorXd y1 = rk4_step(deriv, t, s.pack(), dt);
  if (!y1.allFinite()) {
    std::ostringstream os;
    os << "non-finite state after step at t = " << t << " (dt = " << dt << ")";
    throw IntegrationError(os.str());
  }
  JointState out = s;
  out.unpack(y1);
  return out;
}

struct LogRow {
  double t = 0.0;
  Eigen::VectorXd x, x_hat, z, u;
  double h = 0.0, hhat = 0.0, e = 0.0, rho = 0.0, eta = 0.0, r_hat = 0.0;
  std::uint32_t flags = 0;
};

struct TrajectoryLog {
  std::vector<LogRow> rows;
  std::vector<double> switching;  ///< switching times inside [0, horizon]
  int resets = 0;

  std::size_t count(std::uint32_t f) const {
    std::size_t c = 0;
    for (const auto& r : rows)
      if (r.flags & f) ++c;
    return c;
  }

  SampledSignal signal() const {
    std::vector<double> ts;
    std::vector<Eigen::VectorXd> xs;
    for (const auto& r : rows) {
      ts.push_back(r.t);
      xs.push_back(r.x);
    }
    return {std::move(ts), std::move(xs)};
  }
};

struct SimOptions {
  double dt = 0.005;
  std::optional<double> horizon;  ///< defaults to the specification horizon
  Eigen::VectorXd x0;
  std::optional<Eigen::VectorXd> x_hat0;  ///< defaults to x0
  std::optional<Eigen::VectorXd> z0;      ///< defaults to x0
};

/// Grid over [0, horizon] that contains every switching time exactly; each
/// switching interval is split into equal steps no longer than dt.
inline std::vector<double> aligned_grid(const std::vector<SwitchTime>& switching, double horizon,
                                        double dt) {
  STLCBF_THROW_UNLESS(dt > 0.0 && horizon > 0.0, SpecError,
                      "dt and horizon must be positive");
  std::vector<double> knots{0.0};
  for (const auto& s : switching)
    if (s.t > knots.back() + 1e-9 && s.t < horizon - 1e-9) knots.push_back(s.t);
  knots.push_back(horizon);
  std::vector<double> grid{0.0};
  for (std::size_t j = 1; j < knots.size(); ++j) {
    const double a = knots[j - 1], b = knots[j];
    const auto steps = static_cast<long>(std::ceil((b - a) / dt - 1e-9));
    const double h = (b - a) / static_cast<double>(steps);
    for (long k = 1; k < steps; ++k) grid.push_back(a + static_cast<double>(k) * h);
    grid.push_back(b);
  }
  return grid;
}

inline LogRow make_row(double t, const JointState& s, const ControlSample& c) {
  return {t, s.x, s.ctl.x_hat, s.ctl.z, c.u, c.h, c.hhat, c.e, c.rho, s.ctl.eta, s.ctl.r_hat,
          c.flags};
}

/// Closed-loop run over [0, horizon]. Release resets are applied at tagged
/// switching times; the logged row at such a time shows the state after the
/// reset. The last row uses left limits at the horizon.
inline TrajectoryLog simulate(const CbfSpec& spec, const Plant& plant, const Disturbance& dist,
                              const ControllerParams& params, const SimOptions& opt) {
  const auto n = plant.state_dim();
  STLCBF_THROW_UNLESS(opt.x0.size() == n, DimensionError, "x0 must match the plant state");
  params.validate(plant.input_dim());
  const double horizon = opt.horizon.value_or(spec.timed.horizon);
  STLCBF_THROW_UNLESS(horizon > 0.0, SpecError, "simulation horizon must be positive");
  const SimContext ctx{spec, plant, dist, params};

  JointState s;
  s.x = opt.x0;
  s.ctl.x_hat = opt.x_hat0.value_or(opt.x0);
  s.ctl.z = opt.z0.value_or(opt.x0);
  STLCBF_THROW_UNLESS(s.ctl.x_hat.size() == n && s.ctl.z.size() == n, DimensionError,
                      "initial estimates must match the plant state");
  s.ctl.r_hat = params.r_hat0;
  s.ctl.tau = 0.0;
  if (params.eta0) {
    s.ctl.eta = *params.eta0;
  } else {
    const double hxh = eval_cbf(spec, s.ctl.x_hat, 0.0).value;
    const double hx = eval_cbf(spec, s.x, 0.0).value;
    s.ctl.eta = hxh - 0.5 * hx;
  }

  TrajectoryLog log;
  std::vector<double> releases;
  for (const auto& sw : spec.timed.switching) {
    if (sw.t <= horizon + 1e-9) log.switching.push_back(sw.t);
    if (sw.release && sw.t > 1e-9 && sw.t < horizon - 1e-9) releases.push_back(sw.t);
  }
  const auto grid = aligned_grid(spec.timed.switching, horizon, opt.dt);
  std::vector<double> knots;  // interval ends, for left limits
  for (double k : log.switching)
    if (k > 1e-9 && k < horizon - 1e-9) knots.push_back(k);
  knots.push_back(horizon);

  std::size_t next_knot = 0, next_release = 0;
  log.rows.reserve(grid.size());
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t = grid[i];
    while (next_knot < knots.size() && knots[next_knot] <= t + 1e-12) ++next_knot;
    std::uint32_t extra = 0;
    if (next_release < releases.size() && std::abs(releases[next_release] - t) <= 1e-9) {
      ++next_release;
      const auto hx = eval_cbf(spec, s.x, t, Side::Right);
      const auto hxh = eval_cbf(spec, s.ctl.x_hat, t, Side::Right);
      if (!hx.expired && !hxh.expired) {
        const auto r = release_reset(s.ctl, hxh.value, hx.value, params, t);
        s.ctl = r.state;
        ++log.resets;
        extra |= flag::reset;
        if (r.fault) extra |= flag::reset_fault;
      }
    }
    auto c = control_at(ctx, s, t, Side::Right);
    c.flags |= extra;
    log.rows.push_back(make_row(t, s, c));
    s = step(ctx, s, c, t, grid[i + 1] - t, knots[next_knot]);
  }
  const auto last = control_at(ctx, s, grid.back(), Side::Left);
  log.rows.push_back(make_row(grid.back(), s, last));
  return log;
}

}  // namespace stlcbf
