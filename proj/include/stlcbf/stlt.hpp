#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stlcbf/formula.hpp"
#include "stlcbf/transform.hpp"

namespace stlcbf {

enum class NodeKind { Conjunction, Always, Eventually, Predicate, True };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Conjunction: return "and";
    case NodeKind::Always: return "G";
    case NodeKind::Eventually: return "F";
    case NodeKind::Predicate: return "pred";
    case NodeKind::True: return "true";
  }
  return "?";
}

/// One formula node of the specification tree. The edge to each child is
/// labelled by this node's operator (conjunction, or G/F with `interval`).
struct TreeNode {
  int index = 0;
  Formula formula = Formula::top();
  NodeKind kind = NodeKind::True;
  Interval interval;
  std::optional<int> parent;
  std::vector<int> children;

  bool is_leaf() const { return kind == NodeKind::Predicate || kind == NodeKind::True; }
  bool is_temporal() const { return kind == NodeKind::Always || kind == NodeKind::Eventually; }
};

/// Specification tree: in-degree at most one, leaves are predicates.
///
/// Indices follow level order: the root is 0, the remaining operator nodes
/// are numbered 1..M breadth-first, and leaves follow as M+1..M+N, also
/// breadth-first. Identical input yields identical numbering.
struct SpecTree {
  std::vector<TreeNode> nodes;

  const TreeNode& root() const { return nodes.front(); }
  const TreeNode& node(int k) const { return nodes.at(static_cast<std::size_t>(k)); }
  std::size_t size() const { return nodes.size(); }
};

inline SpecTree build_tree(const Formula& f) {
  const auto violations = check_desired_form(f);
  if (!violations.empty())
    throw SpecError("formula not in desired form: " + std::string(to_string(violations[0].kind)) +
                    " in " + violations[0].subformula);

  // Expand into a scratch tree, then renumber.
  struct Scratch {
    Formula formula;
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;
  };
  std::vector<Scratch> scratch{{f, std::nullopt, {}}};
  std::deque<std::size_t> queue{0};
  std::vector<std::size_t> bfs;
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    bfs.push_back(s);
    const Formula cur = scratch[s].formula;
    std::vector<Formula> kids;
    if (cur.is(FormulaKind::And)) kids.assign(cur.children().begin(), cur.children().end());
    else if (cur.is_temporal()) kids.push_back(cur.child());
    for (auto& k : kids) {
      scratch.push_back({k, s, {}});
      scratch[s].children.push_back(scratch.size() - 1);
      queue.push_back(scratch.size() - 1);
    }
  }

  auto leaf = [](const Formula& g) {
    return g.is(FormulaKind::Pred) || g.is(FormulaKind::True);
  };
  std::vector<int> index(scratch.size(), -1);
  int next = 0;
  index[0] = next++;
  for (std::size_t s : bfs)
    if (s != 0 && !leaf(scratch[s].formula)) index[s] = next++;
  for (std::size_t s : bfs)
    if (s != 0 && leaf(scratch[s].formula)) index[s] = next++;

  SpecTree tree;
  tree.nodes.resize(scratch.size());
  for (std::size_t s = 0; s < scratch.size(); ++s) {
    auto& n = tree.nodes[static_cast<std::size_t>(index[s])];
    const auto& g = scratch[s].formula;
    n.index = index[s];
    n.formula = g;
    switch (g.kind()) {
      case FormulaKind::And: n.kind = NodeKind::Conjunction; break;
      case FormulaKind::Always: n.kind = NodeKind::Always; n.interval = g.interval(); break;
      case FormulaKind::Eventually:
        n.kind = NodeKind::Eventually;
        n.interval = g.interval();
        break;
      case FormulaKind::Pred: n.kind = NodeKind::Predicate; break;
      case FormulaKind::True: n.kind = NodeKind::True; break;
      default: throw SpecError("unexpected operator in desired-form formula");
    }
    if (scratch[s].parent) n.parent = index[*scratch[s].parent];
    for (auto c : scratch[s].children) n.children.push_back(index[c]);
  }
  return tree;
}

struct NodeTiming {
  double active = 0.0;    ///< time the node's certificate starts tightening
  double terminal = 0.0;  ///< time its margin reaches zero
  std::optional<double> t_star;   ///< temporal nodes
  std::optional<double> release;  ///< leaves
};

struct SwitchTime {
  double t = 0.0;
  bool release = false;
};

struct TimedTree {
  SpecTree tree;
  std::vector<NodeTiming> timing;
  double horizon = 0.0;
  std::vector<SwitchTime> switching;

  const NodeTiming& at(int k) const { return timing.at(static_cast<std::size_t>(k)); }
};

/// Per-node choice of t* for Eventually nodes; absent nodes use t* = t_b.
using TStarPolicy = std::map<int, double>;

/// Sum of t_b over the temporal operators on each root-to-leaf path.
inline std::map<int, double> release_times(const SpecTree& tree) {
  std::map<int, double> out;
  for (const auto& n : tree.nodes) {
    if (!n.is_leaf()) continue;
    double sum = 0.0;
    for (auto p = n.parent; p; p = tree.node(*p).parent) {
      const auto& pn = tree.node(*p);
      if (pn.is_temporal()) sum += pn.interval.hi;
    }
    out[n.index] = sum;
  }
  return out;
}

/// Sorted, de-duplicated union of 0, every active and terminal time and every
/// release time; entries that coincide with a release are tagged.
inline std::vector<SwitchTime> switching_sequence(const TimedTree& timed) {
  std::vector<SwitchTime> raw{{0.0, false}};
  for (const auto& t : timed.timing) {
    raw.push_back({t.active, false});
    raw.push_back({t.terminal, false});
    if (t.release) raw.push_back({*t.release, true});
  }
  std::sort(raw.begin(), raw.end(), [](auto& a, auto& b) { return a.t < b.t; });
  std::vector<SwitchTime> out;
  for (const auto& s : raw) {
    if (!out.empty() && std::abs(out.back().t - s.t) <= 1e-9) {
      out.back().release = out.back().release || s.release;
      continue;
    }
    out.push_back(s);
  }
  return out;
}

/// Assigns active/terminal times top-down from a root active time of 0:
/// G nodes use t* = t_a, F nodes t* from `policy` (default t_b), conjunctions
/// are instantaneous, leaves inherit their parent's terminal time.
inline TimedTree assign_times(const SpecTree& tree, const TStarPolicy& policy = {}) {
  TimedTree out;
  out.tree = tree;
  out.timing.resize(tree.size());
  for (const auto& [k, ts] : policy) {
    if (k < 0 || static_cast<std::size_t>(k) >= tree.size())
      throw SpecError("t* override for unknown node " + std::to_string(k));
    const auto& n = tree.node(k);
    if (n.kind != NodeKind::Eventually)
      throw SpecError("t* override only applies to eventually nodes (node " +
                      std::to_string(k) + ")");
    if (ts < n.interval.lo || ts > n.interval.hi)
      throw SpecError("t* outside [t_a, t_b] for node " + std::to_string(k));
  }

  // Parents have smaller indices than their children except for leaves,
  // which are numbered last, so a single pass in index order suffices.
  for (const auto& n : tree.nodes) {
    auto& t = out.timing[static_cast<std::size_t>(n.index)];
    t.active = n.parent ? out.timing[static_cast<std::size_t>(*n.parent)].terminal : 0.0;
    switch (n.kind) {
      case NodeKind::Always:
        t.t_star = n.interval.lo;
        break;
      case NodeKind::Eventually: {
        auto it = policy.find(n.index);
        t.t_star = it != policy.end() ? it->second : n.interval.hi;
        break;
      }
      default: break;
    }
    t.terminal = t.active + t.t_star.value_or(0.0);
  }
  for (const auto& [k, r] : release_times(tree)) {
    out.timing[static_cast<std::size_t>(k)].release = r;
    out.horizon = std::max(out.horizon, r);
  }
  out.switching = switching_sequence(out);
  return out;
}

}  // namespace stlcbf
