#pragma once

#include <algorithm>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stlcbf/error.hpp"

namespace stlcbf {

/// Closed time interval [lo, hi] with 0 <= lo <= hi.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  static Interval make(double lo, double hi) {
    STLCBF_THROW_UNLESS(lo >= 0.0 && hi >= 0.0, SpecError,
                        "interval endpoints must be non-negative");
    STLCBF_THROW_UNLESS(lo <= hi, SpecError, "interval endpoints out of order");
    return Interval{lo, hi};
  }

  double length() const { return hi - lo; }
  bool degenerate() const { return lo == hi; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class FormulaKind { True, Pred, NotPred, And, Always, Eventually, Until };

/// Immutable STL abstract syntax tree. Copies share structure.
///
/// Children layout by kind:
///   And        -> conjuncts (at least two)
///   Always     -> { body }
///   Eventually -> { body }
///   Until      -> { lhs, rhs }
class Formula {
 public:
  static Formula top() { return Formula(make_node(FormulaKind::True, {}, {}, {})); }

  static Formula pred(std::string name) {
    return Formula(make_node(FormulaKind::Pred, std::move(name), {}, {}));
  }

  static Formula not_pred(std::string name) {
    return Formula(make_node(FormulaKind::NotPred, std::move(name), {}, {}));
  }

  static Formula conj(std::vector<Formula> parts) {
    STLCBF_THROW_UNLESS(parts.size() >= 2, SpecError,
                        "conjunction needs at least two conjuncts");
    return Formula(make_node(FormulaKind::And, {}, {}, std::move(parts)));
  }

  static Formula always(Interval i, Formula body) {
    return Formula(make_node(FormulaKind::Always, {}, i, {std::move(body)}));
  }

  static Formula eventually(Interval i, Formula body) {
    return Formula(make_node(FormulaKind::Eventually, {}, i, {std::move(body)}));
  }

  static Formula until(Interval i, Formula lhs, Formula rhs) {
    return Formula(make_node(FormulaKind::Until, {}, i, {std::move(lhs), std::move(rhs)}));
  }

  /// The constant `true`.
  Formula();

  FormulaKind kind() const;
  const std::string& name() const;
  const Interval& interval() const;
  std::span<const Formula> children() const;
  const Formula& child(std::size_t i = 0) const;

  bool is(FormulaKind k) const { return kind() == k; }
  bool is_temporal() const {
    return kind() == FormulaKind::Always || kind() == FormulaKind::Eventually;
  }

  /// Structural equality.
  friend bool operator==(const Formula& a, const Formula& b) {
    if (a.node_ == b.node_) return true;
    if (a.kind() != b.kind() || a.name() != b.name() || !(a.interval() == b.interval()))
      return false;
    const auto ca = a.children();
    const auto cb = b.children();
    if (ca.size() != cb.size()) return false;
    for (std::size_t i = 0; i < ca.size(); ++i)
      if (!(ca[i] == cb[i])) return false;
    return true;
  }

  /// Number of nodes in the syntax tree.
  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& c : children()) n += c.size();
    return n;
  }

  /// Sum of interval upper bounds along the deepest path; the time span past
  /// the evaluation instant that a monitor needs to see.
  double horizon() const {
    double h = 0.0;
    for (const auto& c : children()) h = std::max(h, c.horizon());
    if (kind() == FormulaKind::Always || kind() == FormulaKind::Eventually ||
        kind() == FormulaKind::Until)
      h += interval().hi;
    return h;
  }

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static std::shared_ptr<const Node> make_node(FormulaKind k, std::string name, Interval i,
                                               std::vector<Formula> children);

  std::shared_ptr<const Node> node_;
};

struct Formula::Node {
  FormulaKind kind;
  std::string name;
  Interval interval;
  std::vector<Formula> children;
};

inline std::shared_ptr<const Formula::Node> Formula::make_node(FormulaKind k, std::string name,
                                                               Interval i,
                                                               std::vector<Formula> children) {
  return std::make_shared<const Node>(Node{k, std::move(name), i, std::move(children)});
}

inline Formula::Formula() : Formula(make_node(FormulaKind::True, {}, {}, {})) {}
inline FormulaKind Formula::kind() const { return node_->kind; }
inline const std::string& Formula::name() const { return node_->name; }
inline const Interval& Formula::interval() const { return node_->interval; }
inline std::span<const Formula> Formula::children() const { return node_->children; }
inline const Formula& Formula::child(std::size_t i) const { return node_->children.at(i); }

/// Builds a conjunction, splicing nested conjunctions and collapsing a
/// single conjunct to itself.
inline Formula make_and(const std::vector<Formula>& parts) {
  std::vector<Formula> flat;
  for (const auto& p : parts) {
    if (p.is(FormulaKind::And))
      flat.insert(flat.end(), p.children().begin(), p.children().end());
    else
      flat.push_back(p);
  }
  STLCBF_THROW_UNLESS(!flat.empty(), SpecError, "empty conjunction");
  if (flat.size() == 1) return flat.front();
  return Formula::conj(std::move(flat));
}

/// Rebuilds `f` with new children, keeping kind, name and interval.
inline Formula with_children(const Formula& f, std::vector<Formula> children) {
  switch (f.kind()) {
    case FormulaKind::And: return Formula::conj(std::move(children));
    case FormulaKind::Always: return Formula::always(f.interval(), std::move(children.at(0)));
    case FormulaKind::Eventually:
      return Formula::eventually(f.interval(), std::move(children.at(0)));
    case FormulaKind::Until:
      return Formula::until(f.interval(), std::move(children.at(0)), std::move(children.at(1)));
    default: return f;
  }
}

/// Collects every predicate name referenced by `f`, in first-seen order.
inline void collect_predicates(const Formula& f, std::vector<std::string>& out) {
  if (f.is(FormulaKind::Pred) || f.is(FormulaKind::NotPred)) {
    for (const auto& n : out)
      if (n == f.name()) return;
    out.push_back(f.name());
    return;
  }
  for (const auto& c : f.children()) collect_predicates(c, out);
}

}  // namespace stlcbf
