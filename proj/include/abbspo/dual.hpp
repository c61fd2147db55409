#pragma once

// First-order dual numbers for forward-mode differentiation. One seeded
// tangent per pass; branch decisions (min/max/abs/comparisons) are taken on
// the primal value, giving the subgradient of the selected branch.

#include <cmath>

namespace abbspo {

struct Dual {
  double val = 0.0;
  double dot = 0.0;

  Dual() = default;
  Dual(double v) : val(v) {}  // NOLINT: constants lift implicitly
  Dual(double v, double d) : val(v), dot(d) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.val + b.val, a.dot + b.dot}; }
inline Dual operator-(Dual a, Dual b) { return {a.val - b.val, a.dot - b.dot}; }
inline Dual operator-(Dual a) { return {-a.val, -a.dot}; }
inline Dual operator*(Dual a, Dual b) {
  return {a.val * b.val, a.dot * b.val + a.val * b.dot};
}
inline Dual operator/(Dual a, Dual b) {
  const double inv = 1.0 / b.val;
  return {a.val * inv, (a.dot - a.val * inv * b.dot) * inv};
}

inline Dual& operator+=(Dual& a, Dual b) { return a = a + b; }
inline Dual& operator-=(Dual& a, Dual b) { return a = a - b; }
inline Dual& operator*=(Dual& a, Dual b) { return a = a * b; }
inline Dual& operator/=(Dual& a, Dual b) { return a = a / b; }

inline bool operator<(Dual a, Dual b) { return a.val < b.val; }
inline bool operator>(Dual a, Dual b) { return a.val > b.val; }
inline bool operator<=(Dual a, Dual b) { return a.val <= b.val; }
inline bool operator>=(Dual a, Dual b) { return a.val >= b.val; }

inline Dual sin(Dual a) { return {std::sin(a.val), std::cos(a.val) * a.dot}; }
inline Dual cos(Dual a) { return {std::cos(a.val), -std::sin(a.val) * a.dot}; }
inline Dual sqrt(Dual a) {
  const double r = std::sqrt(a.val);
  return {r, a.dot / (2.0 * r)};
}
inline Dual exp(Dual a) {
  const double e = std::exp(a.val);
  return {e, e * a.dot};
}
inline Dual log(Dual a) { return {std::log(a.val), a.dot / a.val}; }
// abs/min/max take the midpoint subgradient on exact ties so that symmetric
// kink minima (e.g. perfect IoU overlap) report a zero gradient.
inline Dual abs(Dual a) {
  if (a.val == 0.0) return {0.0, 0.0};
  return a.val < 0.0 ? -a : a;
}
inline Dual floor(Dual a) { return {std::floor(a.val), 0.0}; }

inline Dual min(Dual a, Dual b) {
  if (a.val == b.val) return {a.val, 0.5 * (a.dot + b.dot)};
  return b.val < a.val ? b : a;
}
inline Dual max(Dual a, Dual b) {
  if (a.val == b.val) return {a.val, 0.5 * (a.dot + b.dot)};
  return b.val > a.val ? b : a;
}

// Primal value, usable from code templated over double/Dual.
inline double value_of(double x) { return x; }
inline double value_of(Dual x) { return x.val; }

// Drops the tangent; the result is treated as a constant downstream.
inline double detach(double x) { return x; }
inline Dual detach(Dual x) { return {x.val, 0.0}; }

// Replaces the primal value, keeping the tangent (derivative-1 rewrites
// such as periodic wrapping).
inline double with_value(double, double v) { return v; }
inline Dual with_value(Dual x, double v) { return {v, x.dot}; }

}  // namespace abbspo
