#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "potts/critical.hpp"
#include "potts/errors.hpp"

using namespace potts;

namespace {

double g_direct(int i, int q, double t) {
  const long double j = q - i;
  const long double tt = t;
  return static_cast<double>(i / (1.0L - q * tt) * std::log((1.0L - j * tt) / (i * tt)));
}

double k_direct(int i, int q, double t) {
  const double j = q - i;
  return (1.0 - j * t) * std::log((1.0 - j * t) / (i * t)) + std::log(t);
}

const CriticalPoint* find(const std::vector<CriticalPoint>& cps, Family f, int i) {
  for (const auto& c : cps)
    if (c.family == f && c.i == i) return &c;
  return nullptr;
}

// Reference roots of g_i(t) = beta by plain bisection on each monotone branch.
std::pair<double, double> oracle_roots(int i, int q, double beta) {
  const double m = oracle::brute_argmin([&](double t) { return g_direct(i, q, t); }, 1e-9, 1.0 / q);
  auto f = [&](double t) { return g_direct(i, q, t) - beta; };
  double lo = m;
  while (f(lo) < 0.0) lo *= 0.5;
  double hi = m, gap = 1.0 / (q - i) - m;
  while (f(hi) < 0.0) {
    gap *= 0.5;
    hi = 1.0 / (q - i) - gap;
  }
  return {oracle::bisect(f, lo, m), oracle::bisect(f, m, hi)};
}

}  // namespace

TEST_CASE("g agrees with the defining formula and its removable singularity") {
  std::mt19937_64 rng(5);
  for (int q = 3; q <= 12; ++q)
    for (int i = 1; i < q; ++i) {
      const int j = q - i;
      for (int k = 0; k < 20; ++k) {
        const double t = std::uniform_real_distribution<double>(0.001, 0.999)(rng) / j;
        if (std::abs(1.0 - q * t) < 1e-3) continue;
        CHECK(g(i, q, t) == doctest::Approx(g_direct(i, q, t)).epsilon(1e-12));
      }
      CHECK(g(i, q, 1.0 / q) == doctest::Approx(static_cast<double>(q)).epsilon(1e-14));
      // Across the singular window the function stays smooth.
      for (double s : {1e-12, 1e-10, 1e-8, 1e-7}) {
        const double left = g(i, q, 1.0 / q - s / q), right = g(i, q, 1.0 / q + s / q);
        CHECK(std::abs(left - q) < 1e-5);
        CHECK(std::abs(right - q) < 1e-5);
      }
    }
  CHECK_THROWS_AS(g(1, 3, 0.0), DomainError);
  CHECK_THROWS_AS(g(1, 3, 0.5), DomainError);
}

TEST_CASE("g is symmetric about 1/4 when q = 4, i = 2") {
  for (double s : {0.01, 0.05, 0.1, 0.2, 0.24})
    CHECK(g(2, 4, 0.25 - s) == doctest::Approx(g(2, 4, 0.25 + s)).epsilon(1e-13));
}

TEST_CASE("derivative relations") {
  std::mt19937_64 rng(6);
  for (int q = 3; q <= 10; ++q)
    for (int i = 1; 2 * i <= q; ++i) {
      const int j = q - i;
      for (int k = 0; k < 15; ++k) {
        const double t = std::uniform_real_distribution<double>(0.02, 0.98)(rng) / j;
        const double step = 1e-6 * t;
        const double fd_g = (g(i, q, t + step) - g(i, q, t - step)) / (2 * step);
        CHECK(g_prime(i, q, t) == doctest::Approx(fd_g).epsilon(1e-6).scale(1.0));
        if (std::abs(1.0 - q * t) > 1e-2) {
          const double via_h = q * i / std::pow(1.0 - q * t, 2) * h_aux(i, q, t);
          CHECK(g_prime(i, q, t) == doctest::Approx(via_h).epsilon(1e-10).scale(1.0));
        }
        const double fd_h = (h_aux(i, q, t + step) - h_aux(i, q, t - step)) / (2 * step);
        CHECK(h_aux_prime(i, q, t) == doctest::Approx(fd_h).epsilon(1e-6).scale(1.0));
        const double fd_k = (k_aux(i, q, t + step) - k_aux(i, q, t - step)) / (2 * step);
        CHECK(fd_k == doctest::Approx(-j * std::log((1.0 - j * t) / (i * t))).epsilon(1e-6).scale(1.0));
        CHECK(k_aux(i, q, t) == doctest::Approx(k_direct(i, q, t)).epsilon(1e-13));
      }
    }
}

TEST_CASE("k at 1/q and monotonicity below 1/q") {
  for (int q = 3; q <= 12; ++q) {
    CHECK(k_aux(1, q, 1.0 / q) == doctest::Approx(-std::log(static_cast<double>(q))).epsilon(1e-14));
    for (int i = 1; 2 * i <= q; ++i)
      for (int k = 1; k < 50; ++k) {
        const double t1 = k * (1.0 / q) / 51.0, t2 = (k + 1) * (1.0 / q) / 51.0;
        CHECK(k_aux(i, q, t1) > k_aux(i, q, t2));
      }
  }
}

TEST_CASE("minimiser of g") {
  for (int q = 3; q <= 20; ++q)
    for (int i = 1; 2 * i <= q; ++i) {
      const auto mn = find_m(i, q);
      if (2 * i == q) {
        CHECK(mn.m == 1.0 / q);
        CHECK(mn.bracket.width() == 0.0);
        continue;
      }
      CHECK(mn.bracket.certified);
      CHECK(std::abs(h_aux(i, q, mn.m)) < 1e-10);
      CHECK(h_aux(i, q, mn.bracket.lo) < 0.0);
      CHECK(h_aux(i, q, mn.bracket.hi) >= 0.0);
      const double ref = oracle::brute_argmin([&](double t) { return g_direct(i, q, t); }, 1e-6 / q, 1.0 / q);
      CHECK(mn.m == doctest::Approx(ref).epsilon(1e-6));
    }
  for (int q : {3000, 6500, 10000}) {
    const double m = find_m(2, q).m;
    const double lq = std::log(static_cast<double>(q));
    CHECK(1.0 / (2.0 * q * lq) < m);
    CHECK(m < 1.0 / (q * lq));
  }
  CHECK_THROWS_AS(find_m(3, 5), DomainError);
}

TEST_CASE("spinodal temperatures increase with the family index") {
  for (int q = 3; q <= 20; ++q) {
    double prev = 0.0;
    for (int i = 1; 2 * i <= q; ++i) {
      const auto bs = beta_s(i, q);
      CHECK(bs.bracket.certified);
      CHECK(bs.bracket.lo <= bs.value);
      CHECK(bs.value <= bs.bracket.hi);
      CHECK(bs.bracket.width() <= 1e-9 * std::max(1.0, bs.value));
      CHECK(bs.value > prev);
      if (2 * i == q)
        CHECK(bs.value == static_cast<double>(q));
      else
        CHECK(bs.value < q);
      prev = bs.value;
    }
  }
}

TEST_CASE("family roots") {
  SUBCASE("residuals and bracket containment") {
    std::mt19937_64 rng(8);
    for (int q = 3; q <= 10; ++q)
      for (int i = 1; 2 * i <= q; ++i) {
        const double bs = beta_s(i, q).value;
        for (double extra : {1e-6, 1e-3, 0.1, 1.0, 5.0, 20.0}) {
          const double beta = bs + extra;
          const auto r = solve_uv(i, q, beta);
          CHECK(std::abs(g(i, q, r.u) - beta) <= 1e-11 * beta);
          CHECK(std::abs(g(i, q, r.v) - beta) <= 1e-11 * beta);
          CHECK(r.u <= find_m(i, q).m);
          CHECK(r.v >= find_m(i, q).m);
          CHECK(r.u_bracket.contains(r.u));
          CHECK(r.v_bracket.contains(r.v));
          CHECK(r.u_bracket.certified);
          CHECK(r.v_bracket.certified);
        }
      }
  }
  SUBCASE("agreement with plain bisection") {
    for (int q : {3, 4, 5, 7})
      for (double beta : {4.0, 6.0, 9.0}) {
        if (beta <= beta_s(1, q).value) continue;
        const auto r = solve_uv(1, q, beta);
        const auto ref = oracle_roots(1, q, beta);
        CHECK(r.u == doctest::Approx(ref.first).epsilon(1e-11));
        CHECK(r.v == doctest::Approx(ref.second).epsilon(1e-11));
      }
  }
  SUBCASE("closed-form points at the transition temperature") {
    for (int q = 3; q <= 10; ++q) {
      const auto r = solve_uv(1, q, beta_c(q));
      CHECK(r.u == doctest::Approx(1.0 / (q * (q - 1.0))).epsilon(1e-12));
      CHECK(r.v == doctest::Approx(1.0 / (2.0 * (q - 1.0))).epsilon(1e-12));
    }
  }
  SUBCASE("q = 4 second family is symmetric") {
    for (double beta : {4.2, 5.0, 8.0}) {
      const auto r = solve_uv(2, 4, beta);
      CHECK(r.v == doctest::Approx(0.5 - r.u).epsilon(1e-12));
    }
  }
  SUBCASE("double root at the spinodal temperature") {
    for (int q = 3; q <= 9; ++q) {
      const auto r = solve_uv(1, q, beta_s(1, q).value);
      CHECK(r.u == r.v);
      CHECK(r.u == find_m(1, q).m);
    }
    CHECK_THROWS_AS(solve_uv(1, 3, 2.0), NoSolutionError);
  }
  SUBCASE("u decreases and v increases with beta") {
    for (int q : {3, 5, 8})
      for (int i = 1; 2 * i <= q; ++i) {
        double pu = 1.0, pv = 0.0;
        const double bs = beta_s(i, q).value;
        for (int k = 1; k <= 30; ++k) {
          const auto r = solve_uv(i, q, bs + 0.2 * k);
          CHECK(r.u < pu);
          CHECK(r.v > pv);
          pu = r.u;
          pv = r.v;
        }
      }
  }
}

TEST_CASE("closed-form transition temperature") {
  CHECK(std::abs(beta_c(3) - 4.0 * std::log(2.0)) < 1e-12);
  CHECK(std::abs(beta_c(4) - 3.0 * std::log(3.0)) < 1e-12);
  CHECK(beta_c(3) == doctest::Approx(2.7725887).epsilon(1e-7));
  CHECK(beta_c(4) == doctest::Approx(3.2958369).epsilon(1e-7));
  for (int q = 4; q <= 50; ++q) {
    CHECK(beta_s(1, q).value < beta_c(q));
    CHECK(beta_c(q) < beta_s(2, q).value);
  }
  CHECK(beta_s(1, 3).value < beta_c(3));
  for (int q = 3; q <= 12; ++q) {
    CHECK(g(1, q, 1.0 / (q * (q - 1.0))) == doctest::Approx(beta_c(q)).epsilon(1e-13));
    CHECK(g(1, q, 1.0 / (2.0 * (q - 1.0))) == doctest::Approx(beta_c(q)).epsilon(1e-13));
  }
}

TEST_CASE("crossing temperature of the two saddle families") {
  CHECK(beta_m(3).value == 3.0);
  CHECK(beta_m(4).value == 4.0);
  for (int q = 5; q <= 12; ++q) {
    const auto bm = beta_m(q);
    CHECK(bm.bracket.certified);
    CHECK(bm.bracket.width() <= 1e-9 * bm.value);
    CHECK(beta_s(2, q).value < bm.value);
    CHECK(bm.value < q);
    CHECK(std::abs(saddle_gap(q, bm.value)) < 1e-10);
    // Independent route: potentials at reconstructed points, roots from bisection.
    auto gap = [&](double beta) {
      const double u2 = oracle_roots(2, q, beta).first;
      const double v1 = oracle_roots(1, q, beta).second;
      return potential(family_point(q, 2, u2), beta).f - potential(family_point(q, 1, v1), beta).f;
    };
    const double ref = oracle::bisect(gap, beta_s(2, q).value + 1e-6, q - 1e-6);
    CHECK(bm.value == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("scaled derivative of the saddle gap decreases") {
  for (int q = 5; q <= 12; ++q) {
    const double lo = beta_s(2, q).value, hi = static_cast<double>(q);
    double prev = INFINITY;
    for (int k = 1; k <= 50; ++k) {
      const double beta = lo + (hi - lo) * k / 51.0;
      const auto r1 = solve_uv(1, q, beta);
      const auto r2 = solve_uv(2, q, beta);
      const double closed = k_aux(1, q, r1.v) - k_aux(2, q, r2.u);
      const double h = 1e-5;
      const double fd = beta * beta * (saddle_gap(q, beta + h) - saddle_gap(q, beta - h)) / (2 * h);
      CHECK(closed == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
      CHECK(closed < prev);
      prev = closed;
    }
  }
}

TEST_CASE("temperature profile ordering") {
  for (int q = 3; q <= 20; ++q) {
    const auto p = temperature_profile(q);
    CHECK(p.beta1 < p.beta2);
    CHECK(p.beta2 < p.beta3);
    CHECK(p.beta3 <= p.beta4);
    CHECK(p.beta4 == static_cast<double>(q));
    if (q <= 4)
      CHECK(p.beta3 == static_cast<double>(q));
    else
      CHECK(p.beta3 < q);
    if (q >= 4) CHECK(p.beta2 < p.beta_s.at(2).value);
  }
}

TEST_CASE("family potential") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const int q = std::uniform_int_distribution<int>(3, 9)(rng);
    const int i = std::uniform_int_distribution<int>(1, q / 2)(rng);
    const double beta = beta_s(i, q).value + std::uniform_real_distribution<double>(0.01, 6.0)(rng);
    const auto r = solve_uv(i, q, beta);
    for (auto [t, br] : {std::pair{r.u, Branch::U}, std::pair{r.v, Branch::V}}) {
      const double reduced = free_energy_family_value(i, q, beta, br);
      const double full = potential(family_point(q, i, t), beta).f;
      CHECK(std::abs(reduced - full) < 1e-12);
    }
  }
  for (int q = 3; q <= 10; ++q)
    for (int i = 1; 2 * i <= q; ++i) {
      const double bs = beta_s(i, q).value;
      CHECK(free_energy_family_value(i, q, bs, Branch::U) ==
            doctest::Approx(-std::log(q * std::exp(1.0) * bs) / (2.0 * bs)).epsilon(1e-10));
    }
  for (int q : {3, 5, 7})
    for (double beta : {5.0, 8.0}) {
      const double h = 1e-5;
      for (auto br : {Branch::U, Branch::V}) {
        const double fd = (free_energy_family_value(1, q, beta + h, br) - free_energy_family_value(1, q, beta - h, br)) / (2 * h);
        const auto r = solve_uv(1, q, beta);
        const double t = br == Branch::U ? r.u : r.v;
        CHECK(fd == doctest::Approx(-k_aux(1, q, t) / (beta * beta)).epsilon(1e-5));
      }
    }
}

TEST_CASE("heights of p and the saddles across the transition") {
  for (int q = 3; q <= 8; ++q) {
    const auto prof = temperature_profile(q);
    for (int k = 1; k < 20; ++k) {
      const double beta = prof.beta1 + (q - prof.beta1) * k / 20.0;
      const double fv = free_energy_family_value(1, q, beta, Branch::V);
      CHECK(fv > potential(SimplexPoint::uniform(q), beta).f);
    }
    const double above = q + 0.5;
    CHECK(free_energy_family_value(1, q, above, Branch::V) < potential(SimplexPoint::uniform(q), above).f);
    auto diff = [&](double beta) {
      return potential(SimplexPoint::uniform(q), beta).f - free_energy_family_value(1, q, beta, Branch::U);
    };
    const double root = oracle::bisect(diff, prof.beta1 + 1e-6, q - 1e-6);
    CHECK(std::abs(root - beta_c(q)) < 1e-9);
    CHECK(diff(beta_c(q) - 1e-3) < 0.0);
    CHECK(diff(beta_c(q) + 1e-3) > 0.0);
  }
}

TEST_CASE("critical point tables") {
  using C = Classification;
  SUBCASE("q = 3") {
    const int q = 3;
    const double bs1 = beta_s(1, q).value;
    auto low = enumerate_critical_points(q, 0.5 * bs1);
    CHECK(low.size() == 1);
    CHECK(low[0].label == C::OnlyMinimum);
    auto at = enumerate_critical_points(q, bs1);
    CHECK(find(at, Family::P, 0)->label == C::OnlyMinimum);
    CHECK(find(at, Family::U, 1)->label == C::Degenerate);
    CHECK(find(at, Family::V, 1)->label == C::Degenerate);
    auto mid = enumerate_critical_points(q, 2.9);
    CHECK(find(mid, Family::P, 0)->label == C::LocalMinimum);
    CHECK(find(mid, Family::U, 1)->label == C::LocalMinimum);
    CHECK(find(mid, Family::V, 1)->label == C::Saddle);
    auto atq = enumerate_critical_points(q, 3.0);
    CHECK(find(atq, Family::P, 0)->label == C::Degenerate);
    CHECK(find(atq, Family::U, 1)->label == C::LocalMinimum);
    CHECK(find(atq, Family::V, 1)->label == C::Degenerate);
    auto high = enumerate_critical_points(q, 4.0);
    CHECK(find(high, Family::P, 0)->label == C::LocalMaximum);
    CHECK(find(high, Family::U, 1)->label == C::LocalMinimum);
    CHECK(find(high, Family::V, 1)->label == C::Saddle);
    CHECK(find(high, Family::U, 1)->orbit_size == 3);
  }
  SUBCASE("q = 4") {
    const int q = 4;
    const double bs1 = beta_s(1, q).value;
    CHECK(enumerate_critical_points(q, 0.9 * bs1).size() == 1);
    auto mid = enumerate_critical_points(q, 3.6);
    CHECK(find(mid, Family::P, 0)->label == C::LocalMinimum);
    CHECK(find(mid, Family::U, 1)->label == C::LocalMinimum);
    CHECK(find(mid, Family::V, 1)->label == C::Saddle);
    CHECK(find(mid, Family::U, 2) == nullptr);
    auto atq = enumerate_critical_points(q, 4.0);
    CHECK(find(atq, Family::P, 0)->label == C::Degenerate);
    CHECK(find(atq, Family::U, 1)->label == C::LocalMinimum);
    CHECK(find(atq, Family::V, 1)->label == C::Degenerate);
    CHECK(find(atq, Family::U, 2)->label == C::Degenerate);
    auto high = enumerate_critical_points(q, 5.0);
    CHECK(find(high, Family::P, 0)->label == C::LocalMaximum);
    CHECK(find(high, Family::U, 1)->label == C::LocalMinimum);
    CHECK(find(high, Family::V, 1)->label == C::HigherIndex);
    CHECK(find(high, Family::U, 2)->label == C::Saddle);
    CHECK(find(high, Family::V, 2) == nullptr);
    CHECK(find(high, Family::U, 2)->orbit_size == 6);
  }
  SUBCASE("q = 5") {
    const int q = 5;
    const double bs2 = beta_s(2, q).value;
    auto below = enumerate_critical_points(q, 0.5 * (beta_s(1, q).value + bs2));
    CHECK(find(below, Family::P, 0)->label == C::LocalMinimum);
    CHECK(find(below, Family::U, 1)->label == C::LocalMinimum);
    CHECK(find(below, Family::V, 1)->label == C::Saddle);
    CHECK(find(below, Family::U, 2) == nullptr);
    auto at = enumerate_critical_points(q, bs2);
    CHECK(find(at, Family::V, 1)->label == C::Saddle);
    CHECK(find(at, Family::U, 2)->label == C::Degenerate);
    auto mid = enumerate_critical_points(q, 4.95);
    CHECK(find(mid, Family::P, 0)->label == C::LocalMinimum);
    CHECK(find(mid, Family::V, 1)->label == C::Saddle);
    CHECK(find(mid, Family::U, 2)->label == C::Saddle);
    CHECK(find(mid, Family::V, 2)->spectrum.index >= 2);
    CHECK(find(mid, Family::U, 2)->orbit_size == 10);
    auto atq = enumerate_critical_points(q, 5.0);
    CHECK(find(atq, Family::P, 0)->label == C::Degenerate);
    CHECK(find(atq, Family::V, 1)->label == C::Degenerate);
    CHECK(find(atq, Family::V, 2)->label == C::Degenerate);
    // The second family is an ordinary saddle here: beta = 5 exceeds its
    // spinodal temperature and its spectrum has exactly one negative value.
    CHECK(find(atq, Family::U, 2)->label == C::Saddle);
    auto high = enumerate_critical_points(q, 6.0);
    CHECK(find(high, Family::P, 0)->label == C::LocalMaximum);
    CHECK(find(high, Family::U, 1)->label == C::LocalMinimum);
    CHECK(find(high, Family::V, 1)->label == C::HigherIndex);
    CHECK(find(high, Family::U, 2)->label == C::Saddle);
  }
  SUBCASE("higher families carry index at least two") {
    for (int q = 6; q <= 10; ++q) {
      const double beta = q + 1.0;
      const auto cps = enumerate_critical_points(q, beta);
      for (const auto& c : cps) {
        if (c.family == Family::U && c.i >= 3) CHECK(c.spectrum.index >= 2);
        if (c.family == Family::V && c.i >= 2) CHECK(c.spectrum.index >= 2);
      }
    }
  }
  SUBCASE("every reported point is critical") {
    for (int q = 3; q <= 7; ++q)
      for (double beta : {3.0, 4.5, 6.0, 9.0}) {
        for (const auto& c : enumerate_critical_points(q, beta)) {
          if (!c.location.interior()) continue;
          CHECK(gradient(c.location, beta).cwiseAbs().maxCoeff() < 1e-9);
        }
      }
  }
}

TEST_CASE("appendix verification on a small range") {
  const auto rep = verify_appendix(5, 60, 1);
  CHECK(rep.gap_ok);
  CHECK(rep.derivative_ok);
  CHECK(rep.consistent);
  CHECK_FALSE(rep.f_star_lower.has_value());
  CHECK(rep.rows.front().margin_gap > 0.0);
  CHECK(*rep.rows.front().margin_derivative > 0.0);
  for (const auto& row : rep.rows) {
    CHECK(row.beta_s2.lo < row.beta_s2.hi);
    CHECK(row.m2.lo < row.m2.hi);
    CHECK(row.v1.lo < row.v1.hi);
  }
  CHECK_THROWS_AS(verify_appendix(4, 10), DomainError);
  CHECK_THROWS_AS(verify_appendix(5, 6501), DomainError);
}
