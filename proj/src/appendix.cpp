#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "potts/critical.hpp"
#include "potts/errors.hpp"
#include "roots.hpp"

namespace potts {

namespace {

constexpr long kWalkLimit = 50'000'000;

// Rows are computed exactly as the three algorithms prescribe; the only
// additions are step floors and iteration guards so that a walk can never
// stall on a zero step.
AppendixRow appendix_row(int q) {
  AppendixRow row;
  row.q = q;
  const double qd = q;

  // Fixed-step descent for the minimizer of g_2.
  double t = 1.0 / (2.0 * q - 4.0);
  double gp = g_prime(2, q, t);
  while (gp > 1e-6) {
    t -= gp / (300.0 * qd * qd);
    if (!(t > 0.0) || ++row.descent_steps > kWalkLimit) throw InvariantError("descent for m_2 did not terminate");
    gp = g_prime(2, q, t);
  }
  const double m_star = t;
  row.m_star = m_star;
  const double g_star = g(2, q, m_star);
  const double spread = (36.0 / qd) * std::abs(gp);
  const double beta_u = g_star + spread;
  const double beta_l = g_star - spread;
  row.beta_s2 = {beta_l, beta_u, true};

  // Sign walk on h_2 with step |g_2'(m*)| / q.
  const double rho_m = std::max(std::abs(gp) / qd, 8.0 * detail::ulp_of(m_star));
  double m_lo, m_hi;
  long walk = 0;
  if (h_aux(2, q, m_star) >= 0.0) {
    m_hi = m_star + rho_m;
    double s = m_star;
    while (h_aux(2, q, s) >= 0.0) {
      s -= rho_m;
      if (++walk > kWalkLimit) throw InvariantError("m_2 walk did not terminate");
    }
    m_lo = s - rho_m;
  } else {
    m_lo = m_star - rho_m;
    double s = m_star;
    while (h_aux(2, q, s) <= 0.0) {
      s += rho_m;
      if (++walk > kWalkLimit) throw InvariantError("m_2 walk did not terminate");
    }
    m_hi = s + rho_m;
  }
  row.m2 = {m_lo, m_hi, true};

  // Newton for g_1(t) = beta_u from 0.8/q, then sign walks with the last step.
  double prev = 0.0;
  double cur = 0.8 / qd;
  int newton = 0;
  while (std::abs(cur - prev) > 1e-5 / qd) {
    prev = cur;
    cur = cur - (g(1, q, cur) - beta_u) / g_prime(1, q, cur);
    if (!(cur > 0.0 && cur < 1.0 / (q - 1)) || ++newton > 1000) throw InvariantError("Newton for v_1 left the domain");
  }
  const double v_star = cur;
  const double rho_v = std::max(std::abs(cur - prev), 8.0 * detail::ulp_of(v_star));
  double v_hi, v_lo;
  if (g(1, q, v_star) > beta_u) {
    v_hi = v_star + rho_v;
  } else {
    double a = v_star;
    walk = 0;
    while (g(1, q, a) <= beta_u) {
      a += rho_v;
      if (++walk > kWalkLimit) throw InvariantError("v_1 upper walk did not terminate");
    }
    v_hi = a + rho_v;
  }
  if (g(1, q, v_star) < beta_l) {
    v_lo = v_star - rho_v;
  } else {
    double b = v_star;
    walk = 0;
    while (g(1, q, b) >= beta_l) {
      b -= rho_v;
      if (++walk > kWalkLimit) throw InvariantError("v_1 lower walk did not terminate");
    }
    v_lo = b - rho_v;
  }
  row.v1 = {v_lo, v_hi, true};

  // One-sided bound combinations.
  const double jq = qd - 2.0;
  const double iq = qd - 1.0;
  row.margin_gap = 0.25 * (qd * jq * std::pow(m_hi - 1.0 / jq, 2) - 2.0 / jq) + std::log(m_lo) / beta_l -
                   0.5 * (qd * iq * std::pow(v_lo - 1.0 / iq, 2) - 1.0 / iq) - std::log(v_hi) / beta_u;
  row.margin_derivative = std::log(qd * beta_l) + 2.0 * k_aux(2, q, m_hi);

  // Independent cross-check with the bracketing solvers.
  const SpinodalTemperature bs = beta_s(2, q);
  const Minimizer mn = find_m(2, q);
  const FamilyRoots r = solve_uv(1, q, bs.value);
  row.brackets_consistent = beta_l < bs.bracket.lo && bs.bracket.hi < beta_u && m_lo < mn.bracket.lo &&
                            mn.bracket.hi < m_hi && v_lo < r.v_bracket.lo && r.v_bracket.hi < v_hi;
  return row;
}

double f_star_lower_bound(const AppendixRow& row) {
  const double qd = row.q;
  return (std::log(qd * row.m2.lo) - 0.5) / row.beta_s2.lo - 0.125 * std::pow(qd * row.m2.hi, 2) + 0.25 * row.m2.lo +
         251.0 / 2002.0;
}

}  // namespace

AppendixReport verify_appendix(int q_lo, int q_hi, unsigned threads) {
  if (q_lo < 5 || q_hi > 6500 || q_lo > q_hi) throw DomainError("q range must lie within [5, 6500]");
  const int count = q_hi - q_lo + 1;
  AppendixReport rep;
  rep.rows.resize(static_cast<std::size_t>(count));

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(count));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned w) {
    try {
      for (int k = static_cast<int>(w); k < count; k += static_cast<int>(threads))
        rep.rows[static_cast<std::size_t>(k)] = appendix_row(q_lo + k);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& row : rep.rows) {
    if (!(row.margin_gap > 0.0)) rep.gap_ok = false;
    if (row.q >= 6 && row.q <= 54 && !(*row.margin_derivative > 0.0)) rep.derivative_ok = false;
    if (!row.brackets_consistent) rep.consistent = false;
    if (row.q == 6500) {
      rep.f_star_lower = f_star_lower_bound(row);
      rep.f_star_ok = *rep.f_star_lower > 0.0;
    }
  }
  return rep;
}

}  // namespace potts
