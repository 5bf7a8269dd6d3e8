#pragma once

#include <map>
#include <string>

#include "stlcbf/cbf.hpp"
#include "stlcbf/parser.hpp"
#include "stlcbf/stlt.hpp"
#include "stlcbf/transform.hpp"

namespace fixture {

inline const char* kNestedTask =
    "G[0,10] F[0,5] mu3 & F[5,6] G[1,2] mu2 & F[12,13] (mu3 U[1,2] mu1) & G[0,24] !mu4 & "
    "F[0,24] mu5";

inline stlcbf::PredicateTable regions() {
  using stlcbf::PredicateDef;
  stlcbf::PredicateTable t;
  t.add(PredicateDef::ball("mu1", Eigen::Vector2d(1.4, 0.3), 0.6));
  t.add(PredicateDef::ball("mu2", Eigen::Vector2d(-0.2, 0.5), 0.6));
  t.add(PredicateDef::ball("mu3", Eigen::Vector2d(1.0, 0.0), 0.8));
  t.add(PredicateDef::ball("mu4", Eigen::Vector2d(2.3, -0.5), 0.4));
  t.add(PredicateDef::ball("mu5", Eigen::Vector2d(3.0, -1.5), 0.5));
  return t;
}

inline const std::map<int, double> kMargins{{1, 7}, {2, 7},  {3, 10}, {4, 22}, {5, 0},
                                            {6, 24}, {7, 2}, {8, 0},  {9, 0},  {10, 3}};

struct Nested {
  stlcbf::TransformResult transformed;
  stlcbf::TimedTree timed;
  stlcbf::CbfSpec spec;
};

inline Nested nested() {
  const auto preds = regions();
  Nested n;
  n.transformed = stlcbf::to_desired_form(stlcbf::parse_formula(kNestedTask, preds), preds, {});
  n.timed = stlcbf::assign_times(stlcbf::build_tree(n.transformed.formula));
  n.spec = stlcbf::synthesize(n.timed, n.transformed.predicates, kMargins);
  return n;
}

}  // namespace fixture
