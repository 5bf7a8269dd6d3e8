#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stlcbf/generate.hpp"
#include "stlcbf/monitor.hpp"
#include "stlcbf/parser.hpp"

using namespace stlcbf;

namespace {

// Predicate k reads state component k: h_k(x) = x_k.
PredicateTable coordinates(int n) {
  PredicateTable t;
  for (int k = 0; k < n; ++k)
    t.add(PredicateDef::affine("p" + std::to_string(k), Eigen::VectorXd::Unit(n, k), 0.0));
  return t;
}

SampledSignal from_columns(const std::vector<std::vector<double>>& cols) {
  const auto n = cols.front().size();
  std::vector<double> ts;
  std::vector<Eigen::VectorXd> xs;
  for (std::size_t i = 0; i < n; ++i) {
    ts.push_back(static_cast<double>(i));
    Eigen::VectorXd x(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) x(static_cast<Eigen::Index>(k)) = cols[k][i];
    xs.push_back(x);
  }
  return {ts, xs};
}

}  // namespace

TEST(Monitor, ConstantSignal) {
  const auto preds = coordinates(2);
  const auto s = from_columns({std::vector<double>(8, 1.0), std::vector<double>(8, 3.0)});
  EXPECT_TRUE(eval_boolean(parse_formula("G[0,5] p0", preds), preds, s, 0));
  EXPECT_DOUBLE_EQ(eval_robustness(parse_formula("G[0,5] p0", preds), preds, s, 0), 1.0);
  EXPECT_DOUBLE_EQ(eval_robustness(parse_formula("p0 & p1", preds), preds, s, 0), 1.0);
}

TEST(Monitor, CrossingSignal) {
  const auto preds = coordinates(1);
  const SampledSignal s({0.0, 10.0}, {Eigen::VectorXd::Constant(1, -1.0),
                                      Eigen::VectorXd::Constant(1, 1.0)});
  EXPECT_TRUE(eval_boolean(parse_formula("F[0,10] p0", preds), preds, s, 0));
  EXPECT_FALSE(eval_boolean(parse_formula("G[0,10] p0", preds), preds, s, 0));
  // Interpolated window endpoint at t = 5 sits on h = 0.
  EXPECT_DOUBLE_EQ(eval_robustness(parse_formula("F[0,5] p0", preds), preds, s, 0), 0.0);
}

TEST(Monitor, UntilWithInterpolatedWitness) {
  // p0 (standing in for mu3) holds on [0, 1.5]; p1 (mu1) holds from 1.4 on.
  const auto preds = coordinates(2);
  std::vector<double> ts;
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i <= 30; ++i) {
    const double t = 0.1 * i;
    ts.push_back(t);
    xs.push_back(Eigen::Vector2d(t <= 1.5 + 1e-9 ? 1.0 : -1.0, t >= 1.4 - 1e-9 ? 1.0 : -1.0));
  }
  const SampledSignal s(ts, xs);
  EXPECT_TRUE(eval_boolean(parse_formula("p0 U[1,2] p1", preds), preds, s, 0));
  EXPECT_FALSE(eval_boolean(parse_formula("p0 U[1.6,2] p1", preds), preds, s, 0));
  EXPECT_GT(eval_robustness(parse_formula("p0 U[1,2] p1", preds), preds, s, 0), 0.0);
}

TEST(Monitor, DomainAndShapeErrors) {
  const auto preds = coordinates(1);
  const auto s = from_columns({std::vector<double>(5, 1.0)});
  EXPECT_THROW(eval_boolean(parse_formula("G[0,5] p0", preds), preds, s, 0), SpecError);
  EXPECT_THROW(SampledSignal({0.0}, {Eigen::VectorXd::Zero(1)}), SpecError);
  EXPECT_THROW(SampledSignal({0.0, 0.0}, {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)}),
               SpecError);
}

TEST(Monitor, MatchesBruteForceOnRandomCases) {
  std::mt19937_64 rng(21);
  const auto preds = coordinates(3);
  const std::vector<std::string> names{"p0", "p1", "p2"};
  FormulaShape shape;
  shape.max_depth = 2;
  shape.max_bound = 4;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int c = 0; c < 200; ++c) {
    const auto f = random_formula(rng, names, shape);
    const auto need = static_cast<std::size_t>(f.horizon()) + 1;
    const std::size_t n = std::max<std::size_t>(need, 20);
    std::map<std::string, std::vector<double>> h;
    std::vector<std::vector<double>> cols;
    for (const auto& name : names) {
      std::vector<double> col(n);
      for (auto& v : col) v = std::round(u(rng) * 8.0) / 8.0;  // ties exercise >= 0
      h[name] = col;
      cols.push_back(col);
    }
    const auto s = from_columns(cols);
    const long last = static_cast<long>(n - need);
    for (long i = 0; i <= last; ++i) {
      const double ti = static_cast<double>(i);
      EXPECT_EQ(eval_boolean(f, preds, s, ti), oracle::satisfied(f, h, i)) << format_formula(f);
      EXPECT_EQ(eval_robustness(f, preds, s, ti), oracle::robustness(f, h, i))
          << format_formula(f);
    }
  }
}

TEST(Monitor, RobustnessSignAgreesWithVerdict) {
  std::mt19937_64 rng(22);
  const auto preds = coordinates(3);
  const std::vector<std::string> names{"p0", "p1", "p2"};
  std::normal_distribution<double> g(0.0, 1.0);
  for (int c = 0; c < 200; ++c) {
    const auto f = random_formula(rng, names, FormulaShape{});
    const std::size_t n = static_cast<std::size_t>(f.horizon()) + 2;
    std::vector<std::vector<double>> cols(3, std::vector<double>(n));
    for (auto& col : cols)
      for (auto& v : col) v = g(rng);
    const auto v = monitor(f, preds, from_columns(cols));
    if (v.robustness > 0) {
      EXPECT_TRUE(v.satisfied) << format_formula(f);
    }
    if (v.robustness < 0) {
      EXPECT_FALSE(v.satisfied) << format_formula(f);
    }
  }
}
