// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "stlcbf/generate.hpp"
#include "stlcbf/scenario.hpp"

#ifndef STLCBF_SOURCE_DIR
#define STLCBF_SOURCE_DIR "."
#endif

using namespace stlcbf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > budget_s) {
    o.pass = false;
    o.detail += " [over time budget " + std::to_string(budget_s) + " s]";
  }
  if (!o.pass) ++failures;
  std::printf("%s criterion %d: %s -- %s (%.3f s)\n", o.pass ? "PASS" : "FAIL", id, title,
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const std::string kScenario = std::string(STLCBF_SOURCE_DIR) + "/scenarios/paper_sec4.json";

PredicateTable coordinates(int n) {
  PredicateTable t;
  for (int k = 0; k < n; ++k)
    t.add(PredicateDef::affine("p" + std::to_string(k), Eigen::VectorXd::Unit(n, k), 0.0));
  return t;
}

SampledSignal integer_signal(const std::vector<Eigen::VectorXd>& xs) {
  std::vector<double> ts;
  for (std::size_t i = 0; i < xs.size(); ++i) ts.push_back(static_cast<double>(i));
  return {ts, xs};
}

bool integer_intervals(const Formula& f) {
  if (f.is(FormulaKind::Always) || f.is(FormulaKind::Eventually) || f.is(FormulaKind::Until)) {
    const auto& i = f.interval();
    if (i.lo != std::floor(i.lo) || i.hi != std::floor(i.hi)) return false;
  }
  for (const auto& c : f.children())
    if (!integer_intervals(c)) return false;
  return true;
}

Outcome slopes() {
  const auto p = build_pipeline(load_scenario(kScenario));
  const std::vector<double> exact{7.0 / 5, 7.0 / 10, 10.0 / 6, 22.0 / 13, 0, 24.0 / 24,
                                  2.0 / 1, 0, 0, 3.0 / 2};
  const std::vector<double> printed{1.4, 0.7, 1.67, 1.69, 0, 1, 2, 0, 0, 1.5};
  bool ok = true;
  std::ostringstream os;
  for (int k = 1; k <= 10; ++k) {
    const double a = p.spec.params[static_cast<std::size_t>(k)].slope;
    ok = ok && std::abs(a - exact[k - 1]) <= 1e-12 && std::abs(a - printed[k - 1]) <= 0.01;
    os << (k > 1 ? ", " : "a = (") << fmt("%.4f", a);
  }
  os << ")";
  return {ok, os.str()};
}

struct Sec4Run {
  RunResult result;
  double disturbance_bound = 0.0;
  double lambda = 0.0;
};

const Sec4Run& sec4() {
  static const Sec4Run run = [] {
    const auto cfg = load_scenario(kScenario);
    return Sec4Run{run_scenario(cfg), cfg.disturbance.bound(), cfg.controller.lambda};
  }();
  return run;
}

Outcome closed_loop() {
  const auto& r = sec4().result;
  std::size_t neg = 0, outside = 0;
  for (const auto& row : r.log.rows) {
    if (row.flags & flag::expired) continue;
    if (!(row.hhat >= 0.0)) ++neg;
    if (!(row.e > 0.0 && row.e < row.rho)) ++outside;
  }
  const auto clamps = r.log.count(flag::guard_clamp);
  const bool sat = r.report.verdict && r.report.verdict->satisfied;
  std::ostringstream os;
  os << "rows=" << r.log.rows.size() << " min hhat=" << fmt("%.4g", r.report.min_hhat)
     << " e/rho in [" << fmt("%.3f", r.report.min_e_ratio) << ", "
     << fmt("%.3f", r.report.max_e_ratio) << "] hhat<0 rows=" << neg
     << " e outside funnel rows=" << outside << " guard clamps=" << clamps
     << " verdict=" << (sat ? "satisfied" : "violated")
     << " robustness=" << fmt("%.4f", r.report.verdict ? r.report.verdict->robustness : NAN);
  return {neg == 0 && outside == 0 && clamps == 0 && sat, os.str()};
}

Outcome estimation_bound() {
  const auto& s = sec4();
  const double bound = 1.2 * s.disturbance_bound / std::sqrt(2.0 * s.lambda - 1.0);
  double worst = 0.0;
  for (const auto& row : s.result.log.rows)
    if (row.t >= 5.0) worst = std::max(worst, (row.x - row.x_hat).norm());
  return {worst <= bound, "max |x - x_hat| for t >= 5: " + fmt("%.4g", worst) +
                              " <= bound " + fmt("%.4g", bound)};
}

Outcome smooth_min_props() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> len(1, 8), pick(0, 2);
  std::uniform_real_distribution<double> val(-50.0, 50.0);
  const double kappas[] = {1.0, 10.0, 100.0};
  std::size_t bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const double kappa = kappas[pick(rng)];
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (auto& x : v) x = val(rng);
    const double m = *std::min_element(v.begin(), v.end());
    const double s = smooth_min(v, kappa).value;
    if (v.size() == 1 && s != v[0]) ++bad;
    if (!(s <= m)) ++bad;
    if (!(m - s <= std::log(static_cast<double>(v.size())) / kappa * (1 + 1e-12) + 1e-15)) ++bad;
  }
  return {bad == 0, "10000 vectors, violations=" + std::to_string(bad)};
}

Outcome gradients() {
  const auto p = build_pipeline(load_scenario(kScenario));
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> ux(-1.0, 3.5), uy(-2.5, 1.5), ut(0.0, 24.0);
  int checked = 0, bad = 0;
  double worst = 0.0;
  while (checked < 1000) {
    const double t = ut(rng);
    bool near = false;
    for (const auto& s : p.timed.switching) near = near || std::abs(s.t - t) < 1e-3;
    if (near) continue;
    const Eigen::Vector3d x(ux(rng), uy(rng), 0.0);
    const auto v = eval_cbf(p.spec, x, t);
    Eigen::Vector4d analytic, fd;
    analytic << v.grad_x, v.grad_t;
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d xp = x, xm = x;
      xp(i) += 1e-6;
      xm(i) -= 1e-6;
      fd(i) = (eval_cbf(p.spec, xp, t).value - eval_cbf(p.spec, xm, t).value) / 2e-6;
    }
    fd(3) = (eval_cbf(p.spec, x, t + 1e-7).value - eval_cbf(p.spec, x, t - 1e-7).value) / 2e-7;
    const double rel = (analytic - fd).norm() / fd.norm();
    worst = std::max(worst, rel);
    if (!(rel <= 1e-4)) ++bad;
    ++checked;
  }
  return {bad == 0, "1000 points, worst relative error " + fmt("%.3g", worst)};
}

Outcome monitor_equivalence() {
  std::mt19937_64 rng(606);
  const auto preds = coordinates(3);
  const std::vector<std::string> names{"p0", "p1", "p2"};
  FormulaShape shape;
  shape.max_depth = 3;
  shape.max_bound = 4;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int mismatches = 0, evaluations = 0;
  for (int c = 0; c < 500; ++c) {
    Formula f = random_formula(rng, names, shape);
    while (f.horizon() > 40) f = random_formula(rng, names, shape);
    const auto need = static_cast<int>(f.horizon()) + 1;
    const int n = std::uniform_int_distribution<int>(std::max(need, 2), 50)(rng);
    std::map<std::string, std::vector<double>> h;
    std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n), Eigen::VectorXd(3));
    for (int k = 0; k < 3; ++k) {
      std::vector<double> col(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        col[i] = std::round(u(rng) * 8.0) / 8.0;
        xs[static_cast<std::size_t>(i)](k) = col[i];
      }
      h[names[static_cast<std::size_t>(k)]] = col;
    }
    const auto s = integer_signal(xs);
    for (long i = 0; i + need <= n; i += 3) {
      ++evaluations;
      if (eval_boolean(f, preds, s, static_cast<double>(i)) != oracle::satisfied(f, h, i) ||
          eval_robustness(f, preds, s, static_cast<double>(i)) != oracle::robustness(f, h, i))
        ++mismatches;
    }
  }
  return {mismatches == 0, "500 formulas, " + std::to_string(evaluations) +
                               " evaluations, mismatches=" + std::to_string(mismatches)};
}

Outcome soundness() {
  std::mt19937_64 rng(707);
  const auto preds = coordinates(3);
  const std::vector<std::string> names{"p0", "p1", "p2"};
  FormulaShape shape;
  shape.max_depth = 3;
  shape.max_bound = 6;
  std::uniform_real_distribution<double> u(-0.4, 1.0);
  int counter = 0, transformed_sat = 0, cases = 0;
  while (cases < 200) {
    const auto f = random_formula(rng, names, shape);
    const auto r = to_desired_form(f, preds, {});
    if (!integer_intervals(r.formula)) continue;  // keep split deadlines on the sample grid
    ++cases;
    const int n = static_cast<int>(std::max({f.horizon(), r.formula.horizon(), 1.0})) + 1;
    std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n), Eigen::VectorXd(3));
    for (auto& x : xs)
      for (int k = 0; k < 3; ++k) x(k) = u(rng);
    const auto s = integer_signal(xs);
    const bool t_sat = eval_boolean(r.formula, r.predicates, s, 0.0);
    const bool o_sat = eval_boolean(f, preds, s, 0.0);
    transformed_sat += t_sat;
    if (t_sat && !o_sat) ++counter;
  }
  return {counter == 0, "200 pairs, transformed satisfied in " + std::to_string(transformed_sat) +
                            ", counterexamples=" + std::to_string(counter)};
}

Outcome deadlines() {
  const auto a = split_deadlines({0, 15}, {2, 5}, std::nullopt);
  const auto b = split_deadlines({0, 10}, {0, 5}, std::nullopt);
  const auto f = split_always_eventually(parse_formula_unchecked("G[0,15] F[2,5] mu1"), {});
  const auto expect_f = parse_formula_unchecked(
      "F[5,5] mu1 & F[8,8] mu1 & F[11,11] mu1 & F[14,14] mu1 & F[17,17] mu1");
  const bool ok = a == std::vector<double>{5, 8, 11, 14, 17} && b == std::vector<double>{5, 10} &&
                  f == expect_f;
  std::ostringstream os;
  os << "G[0,15]F[2,5] -> {";
  for (double w : a) os << w << (w == a.back() ? "" : ", ");
  os << "}, G[0,10]F[0,5] -> {";
  for (double w : b) os << w << (w == b.back() ? "" : ", ");
  os << "}";
  return {ok, os.str()};
}

Outcome qp() {
  std::mt19937_64 rng(909);
  std::uniform_int_distribution<int> dim(1, 4);
  std::normal_distribution<double> g(0.0, 1.0);
  int bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int m = dim(rng);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) L(r, c) = g(rng);
    const Eigen::MatrixXd W = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd c(m);
    for (int k = 0; k < m; ++k) c(k) = g(rng);
    const double b = g(rng);
    const auto r = solve_single_constraint(c, b, W, std::nullopt);
    if (r.slack < -1e-9) ++bad;
    if (b <= 0.0) {
      if (!r.u.isZero(0.0)) ++bad;
      continue;
    }
    const Eigen::VectorXd winv_c = W.llt().solve(c);
    const Eigen::VectorXd closed = winv_c * (b / c.dot(winv_c));
    const double err = (r.u - closed).norm() / std::max(1.0, closed.norm());
    worst = std::max(worst, err);
    if (err > 1e-9) ++bad;
    // Stationarity W u = mu c with mu >= 0, and the constraint active.
    const double mu = b / c.dot(winv_c);
    if (mu < 0 || (W * r.u - mu * c).norm() > 1e-9 * std::max(1.0, (mu * c).norm())) ++bad;
    if (std::abs(r.slack) > 1e-9 * std::max(1.0, std::abs(b))) ++bad;
  }
  return {bad == 0, "1000 instances, worst KKT deviation " + fmt("%.3g", worst) +
                        ", failures=" + std::to_string(bad)};
}

Outcome rk4_order() {
  auto err = [](double dt) {
    Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    for (int i = 0; i < steps; ++i)
      y = rk4_step([](double, const Eigen::VectorXd& v) { return -v; }, i * dt, y, dt);
    return std::abs(y(0) - std::exp(-1.0));
  };
  bool ok = true;
  std::ostringstream os;
  os << "ratios";
  for (double dt : {0.2, 0.1, 0.05, 0.025}) {
    const double ratio = err(dt) / err(dt / 2);
    ok = ok && ratio >= 8.0 && ratio <= 32.0;
    os << ' ' << fmt("%.2f", ratio);
  }
  return {ok, os.str()};
}

}  // namespace

int main() {
  run(1, "coefficient reproduction", 1.0, slopes);
  run(2, "closed-loop properties", 60.0, closed_loop);
  run(3, "estimation error bound", 60.0, estimation_bound);
  run(4, "smooth-min bounds", 5.0, smooth_min_props);
  run(5, "certificate gradients", 10.0, gradients);
  run(6, "monitor vs brute force", 30.0, monitor_equivalence);
  run(7, "transformation soundness", 30.0, soundness);
  run(8, "G/F split deadlines", 1.0, deadlines);
  run(9, "QP optimality", 2.0, qp);
  run(10, "integrator order", 1.0, rk4_order);
  std::printf("REPORT: acceptance failed=%d\n", failures);
  return failures == 0 ? 0 : 1;
}
