#pragma once

// Angle-consistency losses (snap/rotate/flip), the combined angle loss,
// classification/center-ness losses, total objective assembly, and the
// forward-mode differentiation engine with a finite-difference checker.

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "abbspo/dual.hpp"
#include "abbspo/geom.hpp"

namespace abbspo::losses {

struct LossWeights {
  double lambda_r = 1.0;
  double lambda_f = 0.05;
  double beta = 0.6;
  double gamma = 0.05;
  double lambda_ang = 1.0;
  double lambda_reg = 1.0;
  double lambda_cn = 1.0;
  double lambda_cls = 1.0;
  double alpha = 0.01;
};

template <typename T>
T smooth_l1(T x, double delta = 1.0) {
  if (!(delta > 0.0)) throw std::invalid_argument("smooth_l1: delta <= 0");
  using std::abs;
  const T a = abs(x);
  if (value_of(a) < delta) return x * x * (0.5 / delta);
  return a - 0.5 * delta;
}

// Wraps into (-period/2, period/2]. The wrap is a derivative-1 rewrite of
// the primal value; the reduction itself is exact (IEEE remainder).
template <typename T>
T wrap_periodic(T x, double period) {
  const double half = 0.5 * period;
  double r = std::remainder(value_of(x), period);  // [-period/2, period/2]
  if (r <= -half) r = half;
  return with_value(x, r);
}

// Smooth-L1 loss against the nearest period-equivalent of the target:
// snap(x, t) = smooth_l1(wrap(x - t)).
template <typename T>
T snap_loss(T x, T target, double period = geom::kHalfPi,
            double delta = 1.0) {
  return smooth_l1(wrap_periodic(x - target, period), delta);
}

// L_rot = l_s(theta_rot - theta, R)
template <typename T>
T rot_loss(T theta, T theta_rot, double rotation,
           double period = geom::kHalfPi, double delta = 1.0) {
  return snap_loss(theta_rot - theta, T(rotation), period, delta);
}

// L_flp = l_s(theta_flp + theta, 0)
template <typename T>
T flp_loss(T theta, T theta_flp, double period = geom::kHalfPi,
           double delta = 1.0) {
  return snap_loss(theta_flp + theta, T(0.0), period, delta);
}

// L_ang = beta (lambda_r L_rot + lambda_f L_flp) + gamma L_SPA
template <typename T>
T angle_loss(T l_rot, T l_flp, T l_spa, const LossWeights& w) {
  return w.beta * (w.lambda_r * l_rot + w.lambda_f * l_flp) + w.gamma * l_spa;
}

// L_total = lambda_ang L_ang + lambda_reg L_reg + lambda_cn L_cn
//         + lambda_cls L_cls
template <typename T>
T total_loss(T l_ang, T l_reg, T l_cn, T l_cls, const LossWeights& w) {
  return w.lambda_ang * l_ang + w.lambda_reg * l_reg + w.lambda_cn * l_cn +
         w.lambda_cls * l_cls;
}

double focal_loss(double p, int target, double gamma_f = 2.0,
                  double alpha_f = 0.25);
double centerness_loss(double pred, double target);

// Raised when a forward pass produces a non-finite value or tangent.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::size_t index, const std::string& what)
      : std::runtime_error(what), param_index(index) {}
  std::size_t param_index;
};

using Objective = std::function<Dual(std::span<const Dual>)>;

// Gradient by one forward pass per parameter.
std::vector<double> grad(const Objective& f, std::span<const double> params);

double eval_value(const Objective& f, std::span<const double> params);

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::vector<std::size_t> kink_coords;  // excluded: branch change in stencil
  std::vector<double> fd;                // central differences (0 at kinks)
  std::vector<double> ad;
};

// Compares grad() against central finite differences. Coordinates whose
// one-sided slopes disagree (a kink inside the epsilon stencil) are excluded
// and reported instead of polluting the error bound.
FiniteDiffReport finite_diff_check(const Objective& f,
                                   std::span<const double> params,
                                   double epsilon = 1e-5);

}  // namespace abbspo::losses
