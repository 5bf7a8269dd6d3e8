#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "stlcbf/formula.hpp"

namespace stlcbf {

struct FormulaShape {
  int max_depth = 3;        ///< temporal nesting depth
  int max_bound = 5;        ///< interval endpoints drawn from 0..max_bound
  int max_conjuncts = 3;
  bool allow_until = true;
  bool allow_negation = true;
};

/// Random formula with integer interval endpoints over `names`.
template <class Rng>
Formula random_formula(Rng& rng, const std::vector<std::string>& names, const FormulaShape& s,
                       int depth = 0) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto atom = [&]() {
    const auto& n = names[static_cast<std::size_t>(pick(0, static_cast<int>(names.size()) - 1))];
    return s.allow_negation && pick(0, 3) == 0 ? Formula::not_pred(n) : Formula::pred(n);
  };
  auto interval = [&]() {
    const int a = pick(0, s.max_bound);
    const int b = pick(a, s.max_bound);
    return Interval::make(a, b);
  };
  if (depth >= s.max_depth) return atom();
  const int choice = pick(0, s.allow_until ? 5 : 4);
  switch (choice) {
    case 0: return atom();
    case 1: {
      std::vector<Formula> parts;
      const int k = pick(2, std::max(2, s.max_conjuncts));
      for (int i = 0; i < k; ++i) parts.push_back(random_formula(rng, names, s, depth + 1));
      return make_and(parts);
    }
    case 2:
    case 3: return Formula::always(interval(), random_formula(rng, names, s, depth + 1));
    case 4: return Formula::eventually(interval(), random_formula(rng, names, s, depth + 1));
    default:
      return Formula::until(interval(), random_formula(rng, names, s, depth + 1),
                            random_formula(rng, names, s, depth + 1));
  }
}

}  // namespace stlcbf
