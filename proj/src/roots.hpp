#pragma once

#include <cmath>
#include <limits>

#include "potts/critical.hpp"
#include "potts/errors.hpp"

namespace potts::detail {

struct RootResult {
  double x = 0.0;
  RootBracket bracket;
};

inline bool same_sign(double a, double b) { return (a > 0.0) == (b > 0.0); }

inline double ulp_of(double x) {
  return std::nextafter(std::abs(x), std::numeric_limits<double>::infinity()) - std::abs(x);
}

// Newton iteration kept inside a sign-change bracket [a, b]; falls back to
// bisection whenever the Newton step leaves the bracket.
template <class F, class DF>
RootResult newton_in_bracket(F f, DF df, double a, double b, double ftol) {
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return {a, {a, a, true}};
  if (fb == 0.0) return {b, {b, b, true}};
  if (same_sign(fa, fb)) throw InvariantError("root bracket without sign change");

  double x = 0.5 * (a + b);
  for (int it = 0; it < 400; ++it) {
    const double fx = f(x);
    if (fx == 0.0) return {x, {x, x, true}};
    if (same_sign(fx, fa)) {
      a = x;
      fa = fx;
    } else {
      b = x;
      fb = fx;
    }
    if (std::abs(fx) <= ftol) break;
    if (b - a <= 4.0 * ulp_of(std::max(std::abs(a), std::abs(b)))) {
      x = 0.5 * (a + b);
      break;
    }
    const double d = df(x);
    double xn = x - fx / d;
    if (!std::isfinite(xn) || !(xn > a && xn < b)) xn = 0.5 * (a + b);
    x = xn;
  }

  // Shrink the reported bracket around x while keeping a verified sign change.
  const double fx = f(x);
  if (fx == 0.0) return {x, {x, x, true}};
  double step = 4.0 * ulp_of(x);
  for (int k = 0; k < 200; ++k) {
    const double lo = std::max(a, x - step);
    const double hi = std::min(b, x + step);
    const double flo = f(lo);
    const double fhi = f(hi);
    if (!same_sign(flo, fhi) || flo == 0.0 || fhi == 0.0) return {x, {lo, hi, true}};
    if (lo == a && hi == b) break;
    step *= 4.0;
  }
  return {x, {a, b, !same_sign(fa, fb)}};
}

}  // namespace potts::detail
