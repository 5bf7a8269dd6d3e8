#pragma once

#include <limits>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/predicate.hpp"
#include "stlcbf/smooth_min.hpp"
#include "stlcbf/stlt.hpp"

namespace stlcbf {

/// Which one-sided limit to take at a switching instant. Intervals between
/// switching times are right-open, so `Right` is the value at t itself.
enum class Side { Right, Left };

/// Clamped elapsed time of node k:
///   0 before the active time, t - active inside the window, and the window
///   length after the terminal time. `rate` receives d sigma / dt.
inline double sliding_window(const NodeTiming& k, double t, Side side = Side::Right,
                             double* rate = nullptr) {
  const bool before = side == Side::Right ? t < k.active : t <= k.active;
  const bool inside = side == Side::Right ? t < k.terminal : t <= k.terminal;
  double s = 0.0, r = 0.0;
  if (before) {
    s = 0.0;
  } else if (inside) {
    s = t - k.active;
    r = 1.0;
  } else {
    s = k.terminal - k.active;
  }
  if (k.terminal <= k.active) r = 0.0;
  if (rate) *rate = r;
  return s;
}

/// Linear margin xi = -slope * sigma + offset of one temporal node.
struct NodeParams {
  double slope = 0.0;
  double offset = 0.0;
};

/// Executable certificate h(x, t) over a timed specification tree.
struct CbfSpec {
  TimedTree timed;
  std::vector<NodeParams> params;  ///< indexed by node; zero for non-temporal nodes
  std::vector<double> kappa;       ///< indexed by node; used by conjunction nodes
  std::vector<std::shared_ptr<const PredicateDef>> leaf_predicate;  ///< null for non-leaves

  const SpecTree& tree() const { return timed.tree; }
};

/// Derives slopes from margins so each node's margin reaches zero at its
/// terminal time: slope = offset / (terminal - active). Zero-duration nodes
/// take slope = offset = 0.
inline CbfSpec synthesize(const TimedTree& timed, const PredicateTable& predicates,
                          const std::map<int, double>& margins, double kappa = 10.0) {
  STLCBF_THROW_UNLESS(kappa > 0.0, SpecError, "kappa must be positive");
  const auto& tree = timed.tree;
  CbfSpec spec;
  spec.timed = timed;
  spec.params.resize(tree.size());
  spec.kappa.assign(tree.size(), kappa);
  spec.leaf_predicate.resize(tree.size());
  for (const auto& [k, b] : margins) {
    if (k < 0 || static_cast<std::size_t>(k) >= tree.size())
      throw SpecError("margin given for unknown node " + std::to_string(k));
    if (!tree.node(k).is_temporal() && b != 0.0)
      throw SpecError("margin given for node " + std::to_string(k) +
                      ", which is not a temporal node; only 0 is accepted there");
  }
  for (const auto& n : tree.nodes) {
    const auto k = static_cast<std::size_t>(n.index);
    if (n.kind == NodeKind::Predicate) spec.leaf_predicate[k] = predicates.shared(n.formula.name());
    if (!n.is_temporal()) continue;
    const auto& t = timed.timing[k];
    const double duration = t.terminal - t.active;
    auto it = margins.find(n.index);
    if (duration <= 0.0) {
      if (it != margins.end() && it->second != 0.0)
        throw SpecError("node " + std::to_string(n.index) +
                        " has a zero-length window; its margin must be 0");
      continue;
    }
    if (it == margins.end())
      throw SpecError("missing margin for node " + std::to_string(n.index));
    const double b = it->second;
    if (!(b >= 0.0)) throw SpecError("margin of node " + std::to_string(n.index) + " is negative");
    spec.params[k] = {b / duration, b};
  }
  return spec;
}

struct CbfValue {
  double value = 0.0;
  Eigen::VectorXd grad_x;
  double grad_t = 0.0;
  /// Per node index: true for leaves whose predicate is still enforced.
  std::vector<bool> leaf_active;
  /// Every leaf has been released; value is +inf and gradients are zero.
  bool expired = false;
};

namespace detail {

struct PartialValue {
  bool pruned = true;
  double v = 0.0;
  Eigen::VectorXd gx;
  double gt = 0.0;
};

inline PartialValue eval_node(const CbfSpec& spec, int k, const Eigen::VectorXd& x, double t,
                              Side side, std::vector<bool>& active) {
  const auto& n = spec.tree().node(k);
  const auto& timing = spec.timed.at(k);
  const auto ku = static_cast<std::size_t>(k);
  PartialValue out;
  if (n.is_leaf()) {
    const double rel = timing.release.value_or(0.0);
    const bool released = side == Side::Right ? t >= rel : t > rel;
    if (n.kind == NodeKind::True || released) return out;
    active[ku] = true;
    const auto& p = *spec.leaf_predicate[ku];
    const auto d = p.dimension();
    if (x.size() < d) throw DimensionError("state too short for predicate '" + p.name + "'");
    Eigen::VectorXd g;
    out.v = eval_predicate(p, x.head(d), g);
    out.gx = Eigen::VectorXd::Zero(x.size());
    out.gx.head(d) = g;
    out.pruned = false;
    return out;
  }
  if (n.is_temporal()) {
    out = eval_node(spec, n.children.front(), x, t, side, active);
    if (out.pruned) return out;
    double rate = 0.0;
    const double sigma = sliding_window(timing, t, side, &rate);
    const auto& par = spec.params[ku];
    out.v += -par.slope * sigma + par.offset;
    out.gt += -par.slope * rate;
    return out;
  }
  // Conjunction: smooth minimum over the children that are still live.
  std::vector<PartialValue> live;
  for (int c : n.children) {
    auto pv = eval_node(spec, c, x, t, side, active);
    if (!pv.pruned) live.push_back(std::move(pv));
  }
  if (live.empty()) return out;
  std::vector<double> vals;
  for (const auto& pv : live) vals.push_back(pv.v);
  const auto sm = smooth_min(vals, spec.kappa[ku]);
  out.pruned = false;
  out.v = sm.value;
  out.gx = Eigen::VectorXd::Zero(x.size());
  for (std::size_t i = 0; i < live.size(); ++i) {
    out.gx += sm.weights[i] * live[i].gx;
    out.gt += sm.weights[i] * live[i].gt;
  }
  return out;
}

}  // namespace detail

/// Evaluates h(x, t) bottom-up with exact gradients in x and t. Leaves past
/// their release time drop out of the enclosing smooth minimum; once every
/// leaf is released the certificate is expired (+inf).
inline CbfValue eval_cbf(const CbfSpec& spec, const Eigen::VectorXd& x, double t,
                         Side side = Side::Right) {
  STLCBF_THROW_UNLESS(t >= 0.0, SpecError, "certificate evaluated at negative time");
  CbfValue out;
  out.leaf_active.assign(spec.tree().size(), false);
  auto pv = detail::eval_node(spec, 0, x, t, side, out.leaf_active);
  if (pv.pruned) {
    out.expired = true;
    out.value = std::numeric_limits<double>::infinity();
    out.grad_x = Eigen::VectorXd::Zero(x.size());
    return out;
  }
  out.value = pv.v;
  out.grad_x = std::move(pv.gx);
  out.grad_t = pv.gt;
  return out;
}

}  // namespace stlcbf
