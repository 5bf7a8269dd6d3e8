#pragma once

#include <cmath>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/error.hpp"

namespace stlcbf {

namespace plant {

/// Offset-point unicycle, state (p_x, p_y, theta), input (v, omega):
///   p' = [cos th, -l sin th; sin th, l cos th] u,   th' = omega.
struct Unicycle {
  double l = 0.036;
};

/// x' = A x + f0 + B u.
struct LinearAffine {
  Eigen::MatrixXd A;
  Eigen::VectorXd f0;
  Eigen::MatrixXd B;
};

}  // namespace plant

/// Control-affine dynamics x' = f(x) + g(x) u (+ d, added by the simulator).
class Plant {
 public:
  using Model = std::variant<plant::Unicycle, plant::LinearAffine>;

  Plant() : model_(plant::Unicycle{}) {}
  explicit Plant(Model m) : model_(std::move(m)) {
    if (auto* lin = std::get_if<plant::LinearAffine>(&model_)) {
      const auto n = lin->A.rows();
      STLCBF_THROW_UNLESS(n > 0 && lin->A.cols() == n, DimensionError, "A must be square");
      if (lin->f0.size() == 0) lin->f0 = Eigen::VectorXd::Zero(n);
      STLCBF_THROW_UNLESS(lin->f0.size() == n, DimensionError, "f0 must match A");
      STLCBF_THROW_UNLESS(lin->B.rows() == n && lin->B.cols() > 0, DimensionError,
                          "B must have one row per state");
    }
  }

  const Model& model() const { return model_; }

  Eigen::Index state_dim() const {
    if (auto* lin = std::get_if<plant::LinearAffine>(&model_)) return lin->A.rows();
    return 3;
  }

  Eigen::Index input_dim() const {
    if (auto* lin = std::get_if<plant::LinearAffine>(&model_)) return lin->B.cols();
    return 2;
  }

  Eigen::VectorXd f(const Eigen::VectorXd& x) const {
    check_state(x);
    if (auto* lin = std::get_if<plant::LinearAffine>(&model_)) return lin->A * x + lin->f0;
    return Eigen::VectorXd::Zero(3);
  }

  Eigen::MatrixXd g(const Eigen::VectorXd& x) const {
    check_state(x);
    if (auto* lin = std::get_if<plant::LinearAffine>(&model_)) return lin->B;
    const double l = std::get<plant::Unicycle>(model_).l;
    const double c = std::cos(x(2)), s = std::sin(x(2));
    Eigen::MatrixXd G(3, 2);
    G << c, -l * s,
         s, l * c,
         0.0, 1.0;
    return G;
  }

 private:
  void check_state(const Eigen::VectorXd& x) const {
    if (x.size() != state_dim())
      throw DimensionError("plant expects state dimension " + std::to_string(state_dim()) +
                           ", got " + std::to_string(x.size()));
  }

  Model model_;
};

/// One additive disturbance component.
struct DisturbanceTerm {
  enum class Kind { Constant, Sinusoid };
  Kind kind = Kind::Constant;
  double value = 0.0;  ///< constant value, or sinusoid amplitude
  double frequency = 0.0;
  double phase = 0.0;

  static DisturbanceTerm constant(double v) { return {Kind::Constant, v, 0.0, 0.0}; }
  /// amplitude * cos(frequency * t + phase)
  static DisturbanceTerm sinusoid(double amplitude, double frequency, double phase = 0.0) {
    return {Kind::Sinusoid, amplitude, frequency, phase};
  }

  double at(double t) const {
    return kind == Kind::Constant ? value : value * std::cos(frequency * t + phase);
  }
  double bound() const { return std::abs(value); }
};

/// Bounded exogenous input, one sum of terms per state channel. Empty
/// channels are zero. Only the simulator sees this; the controller does not.
struct Disturbance {
  std::vector<std::vector<DisturbanceTerm>> channels;

  Eigen::VectorXd at(double t, Eigen::Index n) const {
    STLCBF_THROW_UNLESS(static_cast<Eigen::Index>(channels.size()) <= n, DimensionError,
                        "disturbance has more channels than the state");
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < channels.size(); ++i)
      for (const auto& term : channels[i]) d(static_cast<Eigen::Index>(i)) += term.at(t);
    return d;
  }

  /// Euclidean norm of the per-channel amplitude sums; sup_t |d(t)| <= bound().
  double bound() const {
    double s = 0.0;
    for (const auto& ch : channels) {
      double c = 0.0;
      for (const auto& term : ch) c += term.bound();
      s += c * c;
    }
    return std::sqrt(s);
  }
};

/// f(x) + g(x) u + d
inline Eigen::VectorXd plant_deriv(const Plant& p, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, const Eigen::VectorXd& d) {
  if (u.size() != p.input_dim()) throw DimensionError("input dimension mismatch");
  if (d.size() != p.state_dim()) throw DimensionError("disturbance dimension mismatch");
  return p.f(x) + p.g(x) * u + d;
}

}  // namespace stlcbf
