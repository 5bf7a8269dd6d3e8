#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stlcbf/formula.hpp"
#include "stlcbf/parser.hpp"
#include "stlcbf/predicate.hpp"

namespace stlcbf {

/// Explicit split of one G[a1,b1] F[a2,b2] occurrence into p_f point deadlines.
struct GfSplit {
  int p_f = 1;
  std::vector<double> deltas;
};

struct TransformConfig {
  /// Sharpness used for smooth conjunctions introduced by predicate folding.
  double kappa = 10.0;
  /// Overrides keyed by the formatted G∘F subformula. Occurrences without an
  /// entry use the auto policy (fewest deadlines, evenly spaced).
  std::map<std::string, GfSplit> gf_split;
};

struct TraceEntry {
  std::string rule;
  Formula source;
  Formula result;
};

using TransformTrace = std::vector<TraceEntry>;

namespace rule {
inline constexpr const char* kUntil = "until";          // U -> G & F
inline constexpr const char* kFold = "fold";            // !mu, mu1 & mu2 -> new predicate
inline constexpr const char* kDistribute = "distribute";// G(a & b) -> G a & G b
inline constexpr const char* kGroup = "group";          // G mu1 & G mu2 -> G (mu1 & mu2)
inline constexpr const char* kMerge = "merge";          // T T -> T with summed interval
inline constexpr const char* kSplit = "split";          // G F -> conjunction of point deadlines
inline constexpr const char* kFlatten = "flatten";      // (a & b) & c -> a & b & c
inline constexpr const char* kTrue = "true";            // drop constant-true operands
}  // namespace rule

namespace detail {

/// Applies `fn` to every node bottom-up. `fn` sees the node with its
/// children already rewritten and returns a replacement or nullopt.
inline Formula rewrite_bottom_up(const Formula& f, const char* rule_id, TransformTrace* trace,
                                 const std::function<std::optional<Formula>(const Formula&)>& fn) {
  Formula cur = f;
  if (!f.children().empty()) {
    std::vector<Formula> kids;
    bool changed = false;
    for (const auto& c : f.children()) {
      kids.push_back(rewrite_bottom_up(c, rule_id, trace, fn));
      changed = changed || !(kids.back() == c);
    }
    if (changed) cur = with_children(f, std::move(kids));
  }
  if (auto r = fn(cur)) {
    if (!(*r == cur)) {
      if (trace) trace->push_back({rule_id, cur, *r});
      return *r;
    }
  }
  return cur;
}

inline std::string fresh_name(const PredicateTable& table, const std::string& stem) {
  for (int n = 1;; ++n) {
    const auto name = stem + std::to_string(n);
    if (!table.contains(name)) return name;
  }
}

inline std::string register_negation(PredicateTable& table, const std::string& inner) {
  std::string name = "not_" + inner;
  if (table.contains(name)) {
    const auto& existing = table.at(name);
    if (auto* n = std::get_if<shape::Negated>(&existing.shape); n && n->inner->name == inner)
      return name;
    name = fresh_name(table, "not_" + inner + "_");
  }
  table.add(PredicateDef::negated(name, table.at(inner)));
  return name;
}

inline std::string register_conjunction(PredicateTable& table,
                                        const std::vector<std::string>& parts, double kappa) {
  for (const auto& name : table.names()) {
    const auto& def = table.at(name);
    const auto* s = std::get_if<shape::SmoothAnd>(&def.shape);
    if (!s || s->kappa != kappa || s->parts.size() != parts.size()) continue;
    bool same = true;
    for (std::size_t k = 0; k < parts.size() && same; ++k) same = s->parts[k]->name == parts[k];
    if (same) return name;
  }
  std::vector<PredicateDef> defs;
  for (const auto& p : parts) defs.push_back(table.at(p));
  auto name = fresh_name(table, "and_");
  table.add(PredicateDef::smooth_and(name, std::move(defs), kappa));
  return name;
}

inline bool all_predicates(std::span<const Formula> fs) {
  for (const auto& c : fs)
    if (!c.is(FormulaKind::Pred)) return false;
  return true;
}

inline bool is_always_of_pred(const Formula& f) {
  return f.is(FormulaKind::Always) && f.child().is(FormulaKind::Pred);
}

}  // namespace detail

/// Replaces every  a U[ta,tb] b  by  G[0,tb] a & F[ta,tb] b.
inline Formula rewrite_until(const Formula& f, TransformTrace* trace = nullptr) {
  return detail::rewrite_bottom_up(f, rule::kUntil, trace, [](const Formula& n) {
    if (!n.is(FormulaKind::Until)) return std::optional<Formula>{};
    const auto& i = n.interval();
    return std::optional<Formula>{Formula::conj({Formula::always({0.0, i.hi}, n.child(0)),
                                                 Formula::eventually(i, n.child(1))})};
  });
}

/// Folds logic applied directly to predicates into new predicates:
/// !mu becomes `not_mu` with h = -h_mu, and a conjunction of predicates
/// becomes `and_<n>` with h = smooth_min(h_1, ..., h_p | kappa). New
/// definitions are added to `table`.
inline Formula fold_predicates(const Formula& f, PredicateTable& table,
                               const TransformConfig& cfg, TransformTrace* trace = nullptr) {
  return detail::rewrite_bottom_up(f, rule::kFold, trace, [&](const Formula& n) {
    if (n.is(FormulaKind::NotPred))
      return std::optional<Formula>{Formula::pred(detail::register_negation(table, n.name()))};
    if (n.is(FormulaKind::And) && detail::all_predicates(n.children())) {
      std::vector<std::string> parts;
      for (const auto& c : n.children()) parts.push_back(c.name());
      return std::optional<Formula>{
          Formula::pred(detail::register_conjunction(table, parts, cfg.kappa))};
    }
    return std::optional<Formula>{};
  });
}

/// G[a,b](p1 & ... & pn) -> G[a,b] p1 & ... & G[a,b] pn, with every group of
/// plain predicates (under one G, or as sibling G[a,b] mu conjuncts with the
/// same interval) folded into a single smooth-conjunction predicate.
inline Formula distribute_always(const Formula& f, PredicateTable& table,
                                 const TransformConfig& cfg, TransformTrace* trace = nullptr) {
  auto fold_group = [&](const std::vector<Formula>& preds) {
    std::vector<std::string> parts;
    for (const auto& p : preds) parts.push_back(p.name());
    return Formula::pred(detail::register_conjunction(table, parts, cfg.kappa));
  };

  Formula out = detail::rewrite_bottom_up(f, rule::kDistribute, trace, [&](const Formula& n) {
    if (!n.is(FormulaKind::Always) || !n.child().is(FormulaKind::And))
      return std::optional<Formula>{};
    std::vector<Formula> preds, rest;
    for (const auto& c : n.child().children())
      (c.is(FormulaKind::Pred) ? preds : rest).push_back(c);
    std::vector<Formula> parts;
    if (preds.size() >= 2) parts.push_back(Formula::always(n.interval(), fold_group(preds)));
    else if (preds.size() == 1) parts.push_back(Formula::always(n.interval(), preds.front()));
    for (const auto& r : rest) parts.push_back(Formula::always(n.interval(), r));
    return std::optional<Formula>{make_and(parts)};
  });

  return detail::rewrite_bottom_up(out, rule::kGroup, trace, [&](const Formula& n) {
    if (!n.is(FormulaKind::And)) return std::optional<Formula>{};
    const auto kids = n.children();
    std::vector<bool> used(kids.size(), false);
    std::vector<Formula> parts;
    bool grouped = false;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      if (used[i]) continue;
      if (!detail::is_always_of_pred(kids[i])) {
        parts.push_back(kids[i]);
        continue;
      }
      std::vector<Formula> preds{kids[i].child()};
      for (std::size_t j = i + 1; j < kids.size(); ++j) {
        if (!used[j] && detail::is_always_of_pred(kids[j]) &&
            kids[j].interval() == kids[i].interval()) {
          preds.push_back(kids[j].child());
          used[j] = true;
        }
      }
      if (preds.size() >= 2) {
        parts.push_back(Formula::always(kids[i].interval(), fold_group(preds)));
        grouped = true;
      } else {
        parts.push_back(kids[i]);
      }
    }
    if (!grouped) return std::optional<Formula>{};
    return std::optional<Formula>{make_and(parts)};
  });
}

/// T[a1,b1] T[a2,b2] psi -> T[a1+a2, b1+b2] psi for identical T in {G, F}.
inline Formula merge_nested_identical(const Formula& f, TransformTrace* trace = nullptr) {
  return detail::rewrite_bottom_up(f, rule::kMerge, trace, [](const Formula& n) {
    if (!n.is_temporal() || n.child().kind() != n.kind()) return std::optional<Formula>{};
    const auto& o = n.interval();
    const auto& i = n.child().interval();
    const Interval sum{o.lo + i.lo, o.hi + i.hi};
    const auto& body = n.child().child();
    return std::optional<Formula>{n.is(FormulaKind::Always) ? Formula::always(sum, body)
                                                            : Formula::eventually(sum, body)};
  });
}

/// Splices nested conjunctions into their parent.
inline Formula flatten_conjunctions(const Formula& f, TransformTrace* trace = nullptr) {
  return detail::rewrite_bottom_up(f, rule::kFlatten, trace, [](const Formula& n) {
    if (!n.is(FormulaKind::And)) return std::optional<Formula>{};
    for (const auto& c : n.children())
      if (c.is(FormulaKind::And)) {
        std::vector<Formula> parts(n.children().begin(), n.children().end());
        return std::optional<Formula>{make_and(parts)};
      }
    return std::optional<Formula>{};
  });
}

/// Drops constant-true operands: T & a -> a, G T -> T, F T -> T.
inline Formula eliminate_true(const Formula& f, TransformTrace* trace = nullptr) {
  return detail::rewrite_bottom_up(f, rule::kTrue, trace, [](const Formula& n) {
    if (n.is_temporal() && n.child().is(FormulaKind::True))
      return std::optional<Formula>{Formula::top()};
    if (n.is(FormulaKind::And)) {
      std::vector<Formula> keep;
      for (const auto& c : n.children())
        if (!c.is(FormulaKind::True)) keep.push_back(c);
      if (keep.size() == n.children().size()) return std::optional<Formula>{};
      if (keep.empty()) return std::optional<Formula>{Formula::top()};
      return std::optional<Formula>{make_and(keep)};
    }
    return std::optional<Formula>{};
  });
}

/// Deadlines w_1..w_p of one G[a1,b1] F[a2,b2] split:
///   w_0 = a1 + a2,  w_i = w_{i-1} + delta_i (b2 - a2).
/// With no override, p_f = ceil((b1-a1)/(b2-a2)) (at least 1) and every
/// delta_i sits at its lower bound (b1-a1)/(p_f (b2-a2)).
inline std::vector<double> split_deadlines(const Interval& outer, const Interval& inner,
                                           const std::optional<GfSplit>& split) {
  STLCBF_THROW_UNLESS(!inner.degenerate(), SpecError,
                      "G/F split needs a non-degenerate inner interval");
  const double l1 = outer.length();
  const double l2 = inner.length();
  const int min_pf = std::max(1, static_cast<int>(std::ceil(l1 / l2 - 1e-12)));
  int p_f = min_pf;
  std::vector<double> deltas;
  if (split) {
    p_f = split->p_f;
    deltas = split->deltas;
    STLCBF_THROW_UNLESS(p_f >= min_pf, SpecError,
                        "p_f below admissible minimum " + std::to_string(min_pf));
    STLCBF_THROW_UNLESS(static_cast<int>(deltas.size()) == p_f, SpecError,
                        "need exactly p_f deltas");
  }
  const double lower = l1 / (p_f * l2);
  if (!split) deltas.assign(p_f, lower);
  for (double d : deltas) {
    if (d < lower - 1e-12) throw SpecError("delta below admissible range");
    if (d > 1.0 + 1e-12) throw SpecError("delta above admissible range");
  }
  std::vector<double> w;
  double acc = outer.lo + inner.lo;
  for (double d : deltas) {
    acc += d * l2;
    w.push_back(acc);
  }
  return w;
}

/// G[a1,b1] F[a2,b2] psi (a2 != b2) -> F[w1,w1] psi & ... & F[wp,wp] psi.
/// Occurrences with a degenerate inner interval are left unchanged and
/// reported in `warnings`.
inline Formula split_always_eventually(const Formula& f, const TransformConfig& cfg,
                                       TransformTrace* trace = nullptr,
                                       std::vector<std::string>* warnings = nullptr) {
  return detail::rewrite_bottom_up(f, rule::kSplit, trace, [&](const Formula& n) {
    if (!n.is(FormulaKind::Always) || !n.child().is(FormulaKind::Eventually))
      return std::optional<Formula>{};
    const auto& inner = n.child().interval();
    if (inner.degenerate()) {
      if (warnings) warnings->push_back("split not applicable to " + format_formula(n));
      return std::optional<Formula>{};
    }
    std::optional<GfSplit> split;
    if (auto it = cfg.gf_split.find(format_formula(n)); it != cfg.gf_split.end())
      split = it->second;
    const auto w = split_deadlines(n.interval(), inner, split);
    std::vector<Formula> parts;
    for (double wi : w) parts.push_back(Formula::eventually({wi, wi}, n.child().child()));
    return std::optional<Formula>{make_and(parts)};
  });
}

enum class ViolationKind { Until, LogicOnPredicates, DistributableAlways, IdenticalNesting };

struct Violation {
  ViolationKind kind;
  std::string subformula;
};

/// Lists every place where `f` departs from the desired form.
inline std::vector<Violation> check_desired_form(const Formula& f) {
  std::vector<Violation> out;
  std::function<void(const Formula&)> visit = [&](const Formula& n) {
    switch (n.kind()) {
      case FormulaKind::Until: out.push_back({ViolationKind::Until, format_formula(n)}); break;
      case FormulaKind::NotPred:
        out.push_back({ViolationKind::LogicOnPredicates, format_formula(n)});
        break;
      case FormulaKind::And: {
        if (detail::all_predicates(n.children()))
          out.push_back({ViolationKind::LogicOnPredicates, format_formula(n)});
        const auto kids = n.children();
        for (std::size_t i = 0; i < kids.size(); ++i)
          for (std::size_t j = i + 1; j < kids.size(); ++j)
            if (detail::is_always_of_pred(kids[i]) && detail::is_always_of_pred(kids[j]) &&
                kids[i].interval() == kids[j].interval())
              out.push_back({ViolationKind::DistributableAlways,
                             format_formula(kids[i]) + " & " + format_formula(kids[j])});
        break;
      }
      case FormulaKind::Always:
        if (n.child().is(FormulaKind::And))
          out.push_back({ViolationKind::DistributableAlways, format_formula(n)});
        [[fallthrough]];
      case FormulaKind::Eventually:
        if (n.child().kind() == n.kind())
          out.push_back({ViolationKind::IdenticalNesting, format_formula(n)});
        break;
      default: break;
    }
    for (const auto& c : n.children()) visit(c);
  };
  visit(f);
  return out;
}

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::Until: return "until operator present";
    case ViolationKind::LogicOnPredicates: return "logic applied directly to predicates";
    case ViolationKind::DistributableAlways: return "distributable always-conjunction";
    case ViolationKind::IdenticalNesting: return "identical consecutive temporal operators";
  }
  return "?";
}

struct TransformResult {
  Formula formula;
  PredicateTable predicates;
  TransformTrace trace;
  std::vector<std::string> warnings;
};

/// Rewrites `f` into the desired form: until-elimination, predicate folding,
/// always-distribution and identical-operator merging to a fixpoint, then the
/// G∘F split, repeated until nothing changes. Every step is recorded.
inline TransformResult to_desired_form(const Formula& f, const PredicateTable& predicates,
                                       const TransformConfig& cfg) {
  TransformResult r{f, predicates, {}, {}};
  auto* tr = &r.trace;
  for (int outer = 0; outer < 64; ++outer) {
    for (int inner = 0; inner < 256; ++inner) {
      Formula g = eliminate_true(r.formula, tr);
      g = rewrite_until(g, tr);
      g = eliminate_true(g, tr);
      g = fold_predicates(g, r.predicates, cfg, tr);
      g = flatten_conjunctions(g, tr);
      g = distribute_always(g, r.predicates, cfg, tr);
      g = merge_nested_identical(g, tr);
      g = flatten_conjunctions(g, tr);
      const bool done = g == r.formula;
      r.formula = g;
      if (done) break;
    }
    Formula s = split_always_eventually(r.formula, cfg, tr, &r.warnings);
    s = flatten_conjunctions(s, tr);
    if (s == r.formula) return r;
    r.formula = s;
  }
  throw SpecError("desired-form rewriting did not reach a fixpoint");
}

/// Re-applies a trace to its input: each entry replaces every occurrence of
/// its source subformula by its result.
inline Formula replay_trace(const Formula& input, const TransformTrace& trace) {
  std::function<Formula(const Formula&, const TraceEntry&)> sub = [&](const Formula& n,
                                                                      const TraceEntry& e) {
    if (n == e.source) return e.result;
    if (n.children().empty()) return n;
    std::vector<Formula> kids;
    for (const auto& c : n.children()) kids.push_back(sub(c, e));
    return with_children(n, std::move(kids));
  };
  Formula cur = input;
  for (const auto& e : trace) cur = sub(cur, e);
  return cur;
}

}  // namespace stlcbf
