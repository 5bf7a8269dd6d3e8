#pragma once

#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/error.hpp"
#include "stlcbf/smooth_min.hpp"

namespace stlcbf {

struct PredicateDef;

namespace shape {

/// h(x) = a^T x + b
struct Affine {
  Eigen::VectorXd a;
  double b = 0.0;
};

/// h(x) = r^2 - |x - c|^2
struct Ball {
  Eigen::VectorXd center;
  double radius = 1.0;
};

/// h(x) = -h_inner(x)
struct Negated {
  std::shared_ptr<const PredicateDef> inner;
};

/// h(x) = smooth_min(h_1(x), ..., h_p(x) | kappa)
struct SmoothAnd {
  std::vector<std::shared_ptr<const PredicateDef>> parts;
  double kappa = 10.0;
};

}  // namespace shape

using PredicateShape = std::variant<shape::Affine, shape::Ball, shape::Negated, shape::SmoothAnd>;

/// A named predicate function h_mu with a continuously differentiable,
/// globally Lipschitz gradient. Predicates act on the leading `dimension()`
/// components of a state vector.
struct PredicateDef {
  std::string name;
  PredicateShape shape;

  static PredicateDef affine(std::string name, Eigen::VectorXd a, double b) {
    STLCBF_THROW_UNLESS(a.size() > 0, SpecError, "affine predicate needs a non-empty normal");
    return {std::move(name), shape::Affine{std::move(a), b}};
  }

  static PredicateDef ball(std::string name, Eigen::VectorXd center, double radius) {
    STLCBF_THROW_UNLESS(center.size() > 0, SpecError, "ball predicate needs a center");
    STLCBF_THROW_UNLESS(radius > 0.0, SpecError, "ball radius must be positive");
    return {std::move(name), shape::Ball{std::move(center), radius}};
  }

  static PredicateDef negated(std::string name, PredicateDef inner) {
    return {std::move(name),
            shape::Negated{std::make_shared<const PredicateDef>(std::move(inner))}};
  }

  static PredicateDef smooth_and(std::string name, std::vector<PredicateDef> parts,
                                 double kappa) {
    STLCBF_THROW_UNLESS(parts.size() >= 2, SpecError, "smooth conjunction needs two parts");
    STLCBF_THROW_UNLESS(kappa > 0.0, SpecError, "smooth conjunction kappa must be positive");
    shape::SmoothAnd s;
    s.kappa = kappa;
    for (auto& p : parts) s.parts.push_back(std::make_shared<const PredicateDef>(std::move(p)));
    const auto d = s.parts.front()->dimension();
    for (const auto& p : s.parts)
      STLCBF_THROW_UNLESS(p->dimension() == d, DimensionError,
                          "smooth conjunction parts differ in dimension");
    return {std::move(name), std::move(s)};
  }

  Eigen::Index dimension() const {
    return std::visit(
        [](const auto& s) -> Eigen::Index {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, shape::Affine>) return s.a.size();
          else if constexpr (std::is_same_v<S, shape::Ball>) return s.center.size();
          else if constexpr (std::is_same_v<S, shape::Negated>) return s.inner->dimension();
          else return s.parts.front()->dimension();
        },
        shape);
  }
};

namespace detail {

inline void check_dim(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != p.dimension())
    throw DimensionError("predicate '" + p.name + "' expects dimension " +
                         std::to_string(p.dimension()) + ", got " + std::to_string(x.size()));
}

inline double eval_unchecked(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x,
                             Eigen::VectorXd* grad) {
  return std::visit(
      [&](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, shape::Affine>) {
          if (grad) *grad = s.a;
          return s.a.dot(x) + s.b;
        } else if constexpr (std::is_same_v<S, shape::Ball>) {
          const Eigen::VectorXd d = x - s.center;
          if (grad) *grad = -2.0 * d;
          return s.radius * s.radius - d.squaredNorm();
        } else if constexpr (std::is_same_v<S, shape::Negated>) {
          const double v = eval_unchecked(*s.inner, x, grad);
          if (grad) *grad = -*grad;
          return -v;
        } else {
          std::vector<double> vals(s.parts.size());
          std::vector<Eigen::VectorXd> grads(grad ? s.parts.size() : 0);
          for (std::size_t k = 0; k < s.parts.size(); ++k)
            vals[k] = eval_unchecked(*s.parts[k], x, grad ? &grads[k] : nullptr);
          const auto sm = smooth_min(vals, s.kappa);
          if (grad) {
            grad->setZero(x.size());
            for (std::size_t k = 0; k < grads.size(); ++k) *grad += sm.weights[k] * grads[k];
          }
          return sm.value;
        }
      },
      p.shape);
}

}  // namespace detail

/// h_mu(x). Throws DimensionError if x does not match the predicate.
inline double eval_predicate(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  detail::check_dim(p, x);
  return detail::eval_unchecked(p, x, nullptr);
}

/// Exact gradient of eval_predicate.
inline Eigen::VectorXd grad_predicate(const PredicateDef& p,
                                      const Eigen::Ref<const Eigen::VectorXd>& x) {
  detail::check_dim(p, x);
  Eigen::VectorXd g;
  detail::eval_unchecked(p, x, &g);
  return g;
}

/// Value and gradient in one pass.
inline double eval_predicate(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x,
                             Eigen::VectorXd& grad) {
  detail::check_dim(p, x);
  return detail::eval_unchecked(p, x, &grad);
}

/// Evaluates p on the leading components of a (possibly larger) state.
inline double eval_on_state(const PredicateDef& p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto k = p.dimension();
  if (x.size() < k)
    throw DimensionError("predicate '" + p.name + "' needs " + std::to_string(k) +
                         " state components, state has " + std::to_string(x.size()));
  return detail::eval_unchecked(p, x.head(k), nullptr);
}

/// Name -> definition lookup shared by the parser, rewrites and evaluators.
class PredicateTable {
 public:
  PredicateTable() = default;

  void add(PredicateDef p) {
    STLCBF_THROW_UNLESS(!p.name.empty(), SpecError, "predicate needs a name");
    const auto name = p.name;
    defs_.insert_or_assign(name, std::make_shared<const PredicateDef>(std::move(p)));
  }

  bool contains(const std::string& name) const { return defs_.count(name) > 0; }

  const PredicateDef& at(const std::string& name) const {
    auto it = defs_.find(name);
    if (it == defs_.end()) throw SpecError("unknown predicate '" + name + "'");
    return *it->second;
  }

  std::shared_ptr<const PredicateDef> shared(const std::string& name) const {
    auto it = defs_.find(name);
    if (it == defs_.end()) throw SpecError("unknown predicate '" + name + "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : defs_) out.push_back(k);
    return out;
  }

  std::size_t size() const { return defs_.size(); }

 private:
  std::map<std::string, std::shared_ptr<const PredicateDef>> defs_;
};

}  // namespace stlcbf
