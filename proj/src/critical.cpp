#include "potts/critical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "potts/errors.hpp"
#include "roots.hpp"

namespace potts {

namespace {

void check_domain(int i, int q, double t) {
  if (q < 3) throw DomainError("q must be at least 3");
  if (i < 1 || i > q - 1) throw DomainError("family index out of range");
  if (!(t > 0.0) || !(t < 1.0 / (q - i))) throw DomainError("t outside (0, 1/(q-i))");
}

void check_index(int i, int q) {
  if (q < 3) throw DomainError("q must be at least 3");
  if (i < 1 || 2 * i > q) throw DomainError("family index must satisfy 1 <= i <= q/2");
}

// y = (1 - q t) / (i t), so that (1 - j t) / (i t) = 1 + y.
double ratio_minus_one(int i, int q, double t) { return std::fma(-static_cast<double>(q), t, 1.0) / (i * t); }

// log(1 + y) / y and its derivative, by power series near y = 0.
double log1p_over(double y) {
  if (std::abs(y) < 0.1) {
    double term = 1.0, sum = 0.0;
    for (int n = 0; n < 40; ++n) {
      const double add = term / (n + 1);
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
      term *= -y;
    }
    return sum;
  }
  return std::log1p(y) / y;
}

double log1p_over_prime(double y) {
  if (std::abs(y) < 0.1) {
    double pw = 1.0, sum = 0.0;
    for (int n = 1; n < 40; ++n) {
      const double add = (n % 2 ? -1.0 : 1.0) * n * pw / (n + 1);
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
      pw *= y;
    }
    return sum;
  }
  return (y / (1.0 + y) - std::log1p(y)) / (y * y);
}

bool near_double_root(double beta, double beta_min) {
  return std::abs(beta - beta_min) <= 1e-12 * std::max(1.0, beta);
}

std::uint64_t binomial_saturating(int n, int k) {
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int m = 1; m <= k; ++m) {
    r = r * static_cast<unsigned>(n - k + m) / static_cast<unsigned>(m);
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

}  // namespace

double g(int i, int q, double t) {
  check_domain(i, q, t);
  const double y = ratio_minus_one(i, q, t);
  if (y == 0.0) return static_cast<double>(q);
  return log1p_over(y) / t;
}

double g_prime(int i, int q, double t) {
  check_domain(i, q, t);
  const double y = ratio_minus_one(i, q, t);
  return -(log1p_over(y) + log1p_over_prime(y) / (i * t)) / (t * t);
}

double h_aux(int i, int q, double t) {
  check_domain(i, q, t);
  const int j = q - i;
  const double y = ratio_minus_one(i, q, t);
  return std::log1p(y) + (q * t - 1.0) / (q * t * (1.0 - j * t));
}

double h_aux_prime(int i, int q, double t) {
  check_domain(i, q, t);
  const int j = q - i;
  const double w = 1.0 - j * t;
  return (q * t - 1.0) * (2.0 * j * t - 1.0) / (q * w * w * t * t);
}

double k_aux(int i, int q, double t) {
  check_domain(i, q, t);
  const int j = q - i;
  const double y = ratio_minus_one(i, q, t);
  return (1.0 - j * t) * std::log1p(y) + std::log(t);
}

Minimizer find_m(int i, int q) {
  check_index(i, q);
  if (2 * i == q) {
    const double m = 1.0 / q;
    return {m, {m, m, true}};
  }
  const int j = q - i;
  // h_i < 0 on (0, m_i), > 0 on (m_i, 1/q) and maximal at 1/(2j).
  double hi = 1.0 / (2.0 * j);
  if (!(h_aux(i, q, hi) > 0.0)) throw InvariantError("h_aux not positive at 1/(2j)");
  double lo = hi;
  do {
    lo *= 0.5;
  } while (h_aux(i, q, lo) >= 0.0 && lo > 1e-300);
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (h_aux(i, q, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const bool cert = h_aux(i, q, lo) < 0.0 && h_aux(i, q, hi) >= 0.0;
  return {0.5 * (lo + hi), {lo, hi, cert}};
}

SpinodalTemperature beta_s(int i, int q) {
  const Minimizer mn = find_m(i, q);
  if (2 * i == q) return {static_cast<double>(q), {static_cast<double>(q), static_cast<double>(q), true}};
  const double val = g(i, q, mn.m);
  // g is convex near its minimum, so |g(m*) - g(m)| <= max |g'| on the bracket times its width.
  const double slope = std::max(std::abs(g_prime(i, q, mn.bracket.lo)), std::abs(g_prime(i, q, mn.bracket.hi)));
  const double slack = 8.0 * std::numeric_limits<double>::epsilon() * val;
  return {val, {val - slope * mn.bracket.width() - slack, val + slack, mn.bracket.certified}};
}

FamilyRoots solve_uv(int i, int q, double beta) {
  check_index(i, q);
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive and finite");
  const int j = q - i;
  const Minimizer mn = find_m(i, q);
  const SpinodalTemperature bs = beta_s(i, q);
  if (beta < bs.value && !near_double_root(beta, bs.value))
    throw NoSolutionError("beta below the minimum of g_i: no family points");
  if (near_double_root(beta, bs.value)) return {mn.m, mn.m, mn.bracket, mn.bracket};

  const double ftol = 2e-15 * std::max(1.0, beta);
  FamilyRoots out;

  // u branch, solved in log t because u becomes exponentially small in beta.
  {
    double lo = mn.m;
    int guard = 0;
    do {
      lo *= 0.5;
      if (++guard > 1100 || lo == 0.0) throw NoSolutionError("u root below double precision range");
    } while (g(i, q, lo) <= beta);
    auto f = [&](double s) { return g(i, q, std::exp(s)) - beta; };
    auto df = [&](double s) {
      const double t = std::exp(s);
      return t * g_prime(i, q, t);
    };
    const double top = 2 * i == q ? std::min(mn.m, std::nextafter(1.0 / q, 0.0)) : mn.m;
    const auto r = detail::newton_in_bracket(f, df, std::log(lo), std::log(top), ftol);
    out.u = std::exp(r.x);
    out.u_bracket = {std::exp(r.bracket.lo), std::exp(r.bracket.hi), r.bracket.certified};
    out.u = std::min(out.u, mn.m);
  }
  // v branch on [m, 1/j).
  {
    const double end = 1.0 / j;
    double hi = mn.m;
    double gap = end - mn.m;
    int guard = 0;
    do {
      gap *= 0.5;
      hi = end - gap;
      if (++guard > 1100 || !(hi < end)) throw NoSolutionError("v root beyond double precision range");
    } while (g(i, q, hi) <= beta);
    auto f = [&](double t) { return g(i, q, t) - beta; };
    auto df = [&](double t) { return g_prime(i, q, t); };
    const double bottom = 2 * i == q ? std::nextafter(1.0 / q, 1.0) : mn.m;
    const auto r = detail::newton_in_bracket(f, df, bottom, hi, ftol);
    out.v = std::max(r.x, mn.m);
    out.v_bracket = r.bracket;
  }
  return out;
}

double beta_c(int q) {
  if (q < 3) throw DomainError("q must be at least 3");
  return 2.0 * (q - 1) / (q - 2) * std::log(static_cast<double>(q - 1));
}

double family_potential(int i, int q, double beta, double t) {
  check_domain(i, q, t);
  const int j = q - i;
  return (static_cast<double>(q) * j * t * t - 2.0 * q * t + 1.0) / (2.0 * i) + std::log(t) / beta;
}

double free_energy_family_value(int i, int q, double beta, Branch branch) {
  const FamilyRoots r = solve_uv(i, q, beta);
  return family_potential(i, q, beta, branch == Branch::U ? r.u : r.v);
}

double saddle_gap(int q, double beta) {
  return free_energy_family_value(2, q, beta, Branch::U) - free_energy_family_value(1, q, beta, Branch::V);
}

CrossingTemperature beta_m(int q) {
  if (q < 3) throw DomainError("q must be at least 3");
  if (q <= 4) return {static_cast<double>(q), {static_cast<double>(q), static_cast<double>(q), true}};
  const double eps = 1e-8;
  double lo = beta_s(2, q).value + eps;
  double hi = q - eps;
  double dlo = saddle_gap(q, lo);
  double dhi = saddle_gap(q, hi);
  if (!(dlo > 0.0 && dhi < 0.0)) throw InvariantError("saddle gap has no sign change on (beta_s2, q)");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double dm = saddle_gap(q, mid);
    if (dm == 0.0) return {mid, {mid, mid, true}};
    if (dm > 0.0) {
      lo = mid;
      dlo = dm;
    } else {
      hi = mid;
      dhi = dm;
    }
  }
  const double mid = 0.5 * (lo + hi);
  return {mid, {lo, hi, dlo > 0.0 && dhi < 0.0}};
}

TemperatureProfile temperature_profile(int q) {
  if (q < 3) throw DomainError("q must be at least 3");
  TemperatureProfile p;
  p.q = q;
  for (int i = 1; 2 * i <= q; ++i) p.beta_s[i] = beta_s(i, q);
  p.beta_c = beta_c(q);
  p.beta_m = beta_m(q);
  p.beta1 = p.beta_s.at(1).value;
  p.beta2 = p.beta_c;
  p.beta3 = p.beta_m.value;
  p.beta4 = static_cast<double>(q);
  return p;
}

std::string to_string(Family f) {
  switch (f) {
    case Family::P: return "p";
    case Family::U: return "u";
    case Family::V: return "v";
  }
  return "?";
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::OnlyMinimum: return "only minimum";
    case Classification::LocalMinimum: return "local minimum";
    case Classification::Saddle: return "saddle";
    case Classification::HigherIndex: return "index >= 2";
    case Classification::LocalMaximum: return "local maximum";
    case Classification::Degenerate: return "degenerate";
  }
  return "?";
}

std::string CriticalPoint::name() const {
  if (family == Family::P) return "p";
  return to_string(family) + std::to_string(i);
}

namespace {

Classification classify(const HessianSpectrum& s, int q) {
  if (s.degenerate) return Classification::Degenerate;
  if (s.index == 0) return Classification::LocalMinimum;
  if (s.index == q - 1) return Classification::LocalMaximum;
  if (s.index == 1) return Classification::Saddle;
  return Classification::HigherIndex;
}

}  // namespace

std::vector<CriticalPoint> enumerate_critical_points(int q, double beta) {
  if (q < 3) throw DomainError("q must be at least 3");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive and finite");
  std::vector<CriticalPoint> out;
  const bool at_q = std::abs(beta - q) <= 1e-12 * q;

  CriticalPoint p;
  p.family = Family::P;
  p.i = 0;
  p.t = 1.0 / q;
  p.location = SimplexPoint::uniform(q);
  p.spectrum = spectrum_at_p(q, beta);
  p.orbit_size = 1;
  const double bs1 = beta_s(1, q).value;
  p.label = (beta < bs1 || near_double_root(beta, bs1)) ? Classification::OnlyMinimum : classify(p.spectrum, q);
  out.push_back(p);

  for (int i = 1; 2 * i <= q; ++i) {
    const double bs = beta_s(i, q).value;
    if (beta < bs && !near_double_root(beta, bs)) continue;
    const FamilyRoots r = solve_uv(i, q, beta);
    const std::uint64_t orbit = binomial_saturating(q, i);
    auto make = [&](Family fam, double t) {
      CriticalPoint c;
      c.family = fam;
      c.i = i;
      c.t = t;
      c.location = family_point(q, i, t);
      c.spectrum = spectrum_at_family_point(q, i, t, beta);
      c.orbit_size = orbit;
      c.label = classify(c.spectrum, q);
      return c;
    };
    if (r.u == r.v) {
      CriticalPoint c = make(Family::U, r.u);
      c.spectrum.degenerate = true;
      c.label = Classification::Degenerate;
      out.push_back(c);
      // u_i = v_i: the same point is listed under both families.
      if (2 * i != q) {
        c.family = Family::V;
        out.push_back(c);
      }
      continue;
    }
    out.push_back(make(Family::U, r.u));
    // For 2i = q the V family is a relabelling of U.
    if (2 * i == q) continue;
    if (at_q) {
      // v_i = 1/q: the family point is p itself.
      CriticalPoint c = make(Family::V, 1.0 / q);
      c.location = SimplexPoint::uniform(q);
      c.spectrum = spectrum_at_p(q, beta);
      c.spectrum.degenerate = true;
      c.label = Classification::Degenerate;
      out.push_back(c);
    } else {
      out.push_back(make(Family::V, r.v));
    }
  }
  return out;
}

}  // namespace potts
