#include "abbspo/losses.hpp"

#include <algorithm>
#include <cmath>

namespace abbspo::losses {

double focal_loss(double p, int target, double gamma_f, double alpha_f) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("focal_loss: p outside (0, 1)");
  }
  const double p_t = target != 0 ? p : 1.0 - p;
  const double a_t = target != 0 ? alpha_f : 1.0 - alpha_f;
  return -a_t * std::pow(1.0 - p_t, gamma_f) * std::log(p_t);
}

double centerness_loss(double pred, double target) {
  if (!(pred > 0.0 && pred < 1.0)) {
    throw std::invalid_argument("centerness_loss: pred outside (0, 1)");
  }
  if (!(target >= 0.0 && target <= 1.0)) {
    throw std::invalid_argument("centerness_loss: target outside [0, 1]");
  }
  return -(target * std::log(pred) + (1.0 - target) * std::log(1.0 - pred));
}

std::vector<double> grad(const Objective& f, std::span<const double> params) {
  std::vector<Dual> xs(params.begin(), params.end());
  std::vector<double> g(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    xs[i].dot = 1.0;
    const Dual y = f(xs);
    xs[i].dot = 0.0;
    if (!std::isfinite(y.val) || !std::isfinite(y.dot)) {
      throw NumericError(i, "grad: non-finite result seeding parameter " +
                                std::to_string(i));
    }
    g[i] = y.dot;
  }
  return g;
}

double eval_value(const Objective& f, std::span<const double> params) {
  std::vector<Dual> xs(params.begin(), params.end());
  return f(xs).val;
}

FiniteDiffReport finite_diff_check(const Objective& f,
                                   std::span<const double> params,
                                   double epsilon) {
  FiniteDiffReport report;
  report.ad = grad(f, params);
  report.fd.assign(params.size(), 0.0);
  std::vector<double> x(params.begin(), params.end());
  const double f0 = eval_value(f, x);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double fp = eval_value(f, x);
    x[i] = saved - epsilon;
    const double fm = eval_value(f, x);
    x[i] = saved;
    const double fwd = (fp - f0) / epsilon;
    const double bwd = (f0 - fm) / epsilon;
    // Smooth objectives give |fwd - bwd| = O(epsilon |f''|); an O(1) slope
    // jump means the stencil straddles a branch boundary.
    if (std::abs(fwd - bwd) >
        0.05 * std::max({1.0, std::abs(fwd), std::abs(bwd)})) {
      report.kink_coords.push_back(i);
      continue;
    }
    const double central = (fp - fm) / (2.0 * epsilon);
    report.fd[i] = central;
    const double rel = std::abs(central - report.ad[i]) /
                       std::max(1e-8, std::abs(central) + std::abs(report.ad[i]));
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  return report;
}

}  // namespace abbspo::losses
