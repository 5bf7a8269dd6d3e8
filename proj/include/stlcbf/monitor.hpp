#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/formula.hpp"
#include "stlcbf/predicate.hpp"

namespace stlcbf {

/// Piecewise-linear signal through (times[i], states[i]).
class SampledSignal {
 public:
  SampledSignal(std::vector<double> times, std::vector<Eigen::VectorXd> states)
      : times_(std::move(times)), states_(std::move(states)) {
    STLCBF_THROW_UNLESS(times_.size() >= 2, SpecError, "signal needs at least two samples");
    STLCBF_THROW_UNLESS(times_.size() == states_.size(), SpecError,
                        "signal times and states differ in length");
    for (std::size_t i = 1; i < times_.size(); ++i) {
      STLCBF_THROW_UNLESS(times_[i] > times_[i - 1], SpecError,
                          "signal times must be strictly increasing");
      STLCBF_THROW_UNLESS(states_[i].size() == states_[0].size(), DimensionError,
                          "signal states differ in dimension");
    }
  }

  double begin() const { return times_.front(); }
  double end() const { return times_.back(); }
  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Eigen::VectorXd>& states() const { return states_; }

  Eigen::VectorXd at(double t) const {
    t = clamp_time(t);
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return states_.front();
    if (it == times_.end()) return states_.back();
    const auto i = static_cast<std::size_t>(it - times_.begin());
    const double t0 = times_[i - 1], t1 = times_[i];
    if (t == t0) return states_[i - 1];
    const double w = (t - t0) / (t1 - t0);
    return (1.0 - w) * states_[i - 1] + w * states_[i];
  }

  /// Samples inside [lo, hi] plus both endpoints, sorted and de-duplicated.
  std::vector<double> window(double lo, double hi) const {
    lo = clamp_time(lo);
    hi = clamp_time(hi);
    std::vector<double> out{lo};
    auto first = std::lower_bound(times_.begin(), times_.end(), lo);
    for (auto it = first; it != times_.end() && *it <= hi; ++it)
      if (*it != out.back()) out.push_back(*it);
    if (hi != out.back()) out.push_back(hi);
    return out;
  }

  /// Absorbs round-off at the signal boundary.
  double clamp_time(double t) const {
    constexpr double tol = 1e-9;
    if (t < begin() && t >= begin() - tol) return begin();
    if (t > end() && t <= end() + tol) return end();
    return t;
  }

 private:
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> states_;
};

struct Verdict {
  bool satisfied = false;
  double robustness = 0.0;
};

namespace detail {

struct BooleanSemantics {
  using Value = bool;
  static Value pred(double h) { return h >= 0.0; }
  static Value not_pred(double h) { return h < 0.0; }
  static Value top() { return true; }
  static Value bottom() { return false; }
  static Value meet(Value a, Value b) { return a && b; }
  static Value join(Value a, Value b) { return a || b; }
};

struct RobustSemantics {
  using Value = double;
  static Value pred(double h) { return h; }
  static Value not_pred(double h) { return -h; }
  static Value top() { return std::numeric_limits<double>::infinity(); }
  static Value bottom() { return -std::numeric_limits<double>::infinity(); }
  static Value meet(Value a, Value b) { return std::min(a, b); }
  static Value join(Value a, Value b) { return std::max(a, b); }
};

/// Recursive evaluation over the samples of a signal plus interpolated
/// window endpoints.
template <class Sem>
class Evaluator {
 public:
  using V = typename Sem::Value;

  Evaluator(const PredicateTable& preds, const SampledSignal& s) : preds_(preds), s_(s) {}

  V eval(const Formula& f, double t) {
    switch (f.kind()) {
      case FormulaKind::True: return Sem::top();
      case FormulaKind::Pred: return Sem::pred(h(f.name(), t));
      case FormulaKind::NotPred: return Sem::not_pred(h(f.name(), t));
      case FormulaKind::And: {
        V v = Sem::top();
        for (const auto& c : f.children()) v = Sem::meet(v, eval(c, t));
        return v;
      }
      case FormulaKind::Always: {
        V v = Sem::top();
        for (double t1 : s_.window(t + f.interval().lo, t + f.interval().hi))
          v = Sem::meet(v, eval(f.child(), t1));
        return v;
      }
      case FormulaKind::Eventually: {
        V v = Sem::bottom();
        for (double t1 : s_.window(t + f.interval().lo, t + f.interval().hi))
          v = Sem::join(v, eval(f.child(), t1));
        return v;
      }
      case FormulaKind::Until: return until(f, t);
    }
    return Sem::bottom();
  }

 private:
  // exists t1 in W(t+a, t+b): rhs(t1) and forall t2 in W(t, t1): lhs(t2),
  // where W(lo, hi) is the samples in [lo, hi] plus lo and hi.
  V until(const Formula& f, double t) {
    const auto& lhs = f.child(0);
    const auto& rhs = f.child(1);
    const double lo = t + f.interval().lo;
    const double hi = t + f.interval().hi;
    const auto all = s_.window(t, hi);  // every sample a W(t, t1) can contain
    std::vector<V> lhs_vals;
    lhs_vals.reserve(all.size());
    for (double t2 : all) lhs_vals.push_back(eval(lhs, t2));
    const auto& times = s_.times();
    auto is_sample = [&](double x) { return std::binary_search(times.begin(), times.end(), x); };

    V best = Sem::bottom();
    const V at_start = lhs_vals.front();
    V prefix = Sem::top();
    std::size_t j = 0;
    for (double t1 : s_.window(lo, hi)) {
      // fold in lhs over samples in [t, t1]
      while (j < all.size() && all[j] <= t1) {
        if (is_sample(all[j])) prefix = Sem::meet(prefix, lhs_vals[j]);
        ++j;
      }
      V guard = Sem::meet(at_start, prefix);
      guard = Sem::meet(guard, eval(lhs, t1));
      best = Sem::join(best, Sem::meet(eval(rhs, t1), guard));
    }
    return best;
  }

  double h(const std::string& name, double t) {
    auto it = cache_.find(name);
    if (it == cache_.end()) it = cache_.emplace(name, preds_.shared(name)).first;
    return eval_on_state(*it->second, s_.at(t));
  }

  const PredicateTable& preds_;
  const SampledSignal& s_;
  std::map<std::string, std::shared_ptr<const PredicateDef>> cache_;
};

inline void check_domain(const Formula& f, const SampledSignal& s, double t) {
  constexpr double tol = 1e-9;
  if (t < s.begin() - tol || t + f.horizon() > s.end() + tol)
    throw SpecError("formula window exceeds signal domain");
}

}  // namespace detail

/// Boolean satisfaction (x, t) |= f on the discretised signal.
inline bool eval_boolean(const Formula& f, const PredicateTable& preds, const SampledSignal& s,
                         double t) {
  detail::check_domain(f, s, t);
  return detail::Evaluator<detail::BooleanSemantics>(preds, s).eval(f, t);
}

/// Quantitative robustness with min/max semantics on the same sample set.
inline double eval_robustness(const Formula& f, const PredicateTable& preds,
                              const SampledSignal& s, double t) {
  detail::check_domain(f, s, t);
  return detail::Evaluator<detail::RobustSemantics>(preds, s).eval(f, t);
}

inline Verdict monitor(const Formula& f, const PredicateTable& preds, const SampledSignal& s,
                       double t = 0.0) {
  return {eval_boolean(f, preds, s, t), eval_robustness(f, preds, s, t)};
}

}  // namespace stlcbf
