#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "potts/chain.hpp"
#include "potts/critical.hpp"
#include "potts/errors.hpp"
#include "potts/landscape.hpp"
#include "potts/metastable.hpp"

using namespace potts;

namespace {

// Rate of a one-spin move from the energy difference, written out directly.
double rate_from_energy(const std::vector<int>& n, int i, int j, int N, double beta) {
  auto H = [&](const std::vector<int>& c) {
    double s = 0.0;
    for (int v : c) s += static_cast<double>(v) * v / (static_cast<double>(N) * N);
    return -0.5 * s;
  };
  auto m = n;
  --m[static_cast<std::size_t>(i)];
  ++m[static_cast<std::size_t>(j)];
  return static_cast<double>(n[static_cast<std::size_t>(i)]) / N * std::exp(-0.5 * N * beta * (H(m) - H(n)));
}

// Stationary law as the normalised left null vector of the dense generator.
std::vector<double> null_vector(const MagnetizationChain& chain) {
  const Eigen::MatrixXd Q = Eigen::MatrixXd(chain.generator());
  const auto n = Q.rows();
  Eigen::MatrixXd A = Q.transpose();
  A.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b[n - 1] = 1.0;
  const Eigen::VectorXd p = A.fullPivLu().solve(b);
  return std::vector<double>(p.data(), p.data() + n);
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

std::vector<double> pi_of(const MagnetizationChain& chain) {
  std::vector<double> p(chain.size());
  for (std::uint32_t s = 0; s < chain.size(); ++s) p[s] = std::exp(chain.log_pi()[s]);
  return p;
}

struct Stats {
  double mean = 0.0;
  double se = 0.0;
};
Stats stats(const std::vector<double>& v) {
  Stats s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return s;
}

std::vector<char> set_union(const std::vector<char>& a, const std::vector<char>& b) {
  std::vector<char> m(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) m[k] = a[k] || b[k];
  return m;
}

}  // namespace

TEST_CASE("single site chain") {
  const MagnetizationChain ch(3, 1, 2.7);
  REQUIRE(ch.size() == 3);
  for (std::uint32_t s = 0; s < 3; ++s) {
    CHECK(std::exp(ch.log_pi()[s]) == doctest::Approx(1.0 / 3).epsilon(1e-14));
    const auto c = ch.counts(s);
    const int i = static_cast<int>(std::find(c.begin(), c.end(), 1) - c.begin());
    for (int j = 0; j < 3; ++j)
      if (j != i) CHECK(ch.rate(s, i, j) == doctest::Approx(1.0).epsilon(1e-15));
  }
  // From a corner, the jump goes to the target or to the third corner at equal
  // rates 1; by symmetry the third corner has the same mean time T, so
  // T = 1/2 + T/2.
  const auto start = ch.state_of({1, 0, 0});
  const auto target = state_mask(ch, {ch.state_of({0, 1, 0})});
  CHECK(exact_mean_hitting_time(ch, start, target) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(exact_mean_hitting_time(ch, ch.state_of({0, 1, 0}), target) == 0.0);
}

TEST_CASE("rates match the energy difference") {
  for (auto [q, N, beta] : {std::tuple{3, 9, 2.5}, std::tuple{4, 7, 3.3}, std::tuple{5, 4, 1.0}}) {
    const MagnetizationChain ch(q, N, beta);
    for (std::uint32_t s = 0; s < ch.size(); ++s) {
      const auto c = ch.counts(s);
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
          if (i == j) continue;
          const double r = ch.rate(s, i, j);
          if (c[static_cast<std::size_t>(i)] == 0) {
            CHECK(r == 0.0);
            continue;
          }
          CHECK(r > 0.0);
          CHECK(r == doctest::Approx(rate_from_energy(c, i, j, N, beta)).epsilon(1e-13));
          auto m = c;
          --m[static_cast<std::size_t>(i)];
          ++m[static_cast<std::size_t>(j)];
          CHECK(ch.neighbor(s, i, j) == ch.state_of(m));
        }
    }
  }
}

TEST_CASE("detailed balance and stationarity") {
  for (auto [q, N] : {std::pair{3, 8}, std::pair{3, 12}, std::pair{3, 16}, std::pair{4, 8}}) {
    for (double beta : {2.0, 3.5}) {
      const MagnetizationChain ch(q, N, beta);
      const auto pi = pi_of(ch);
      CHECK(std::accumulate(pi.begin(), pi.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      double worst = 0.0;
      for (std::uint32_t s = 0; s < ch.size(); ++s) {
        const auto* c = ch.counts_ptr(s);
        for (int i = 0; i < q; ++i) {
          if (c[i] == 0) continue;
          for (int j = 0; j < q; ++j) {
            if (i == j) continue;
            const auto y = ch.neighbor(s, i, j);
            const double lhs = pi[s] * ch.rate(s, i, j), rhs = pi[y] * ch.rate(y, j, i);
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(lhs, rhs));
          }
        }
      }
      CHECK(worst < 1e-12);
      const auto Q = ch.generator();
      Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(pi.data(), static_cast<Eigen::Index>(pi.size()));
      const Eigen::VectorXd flow = Q.transpose() * p;
      CHECK(flow.cwiseAbs().maxCoeff() < 1e-10);
      Eigen::VectorXd rowsum = Q * Eigen::VectorXd::Ones(Q.cols());
      CHECK(rowsum.cwiseAbs().maxCoeff() < 1e-12);
      if (N <= 12) CHECK(total_variation(null_vector(ch), pi) < 1e-10);
    }
  }
}

TEST_CASE("spin Gibbs marginal by enumeration") {
  for (int N = 1; N <= 8; ++N) {
    for (double beta : {0.7, 2.0, 3.5}) {
      const MagnetizationChain ch(3, N, beta);
      CHECK(total_variation(spin_marginal_exhaustive(3, N, beta), pi_of(ch)) < 1e-12);
    }
  }
  const MagnetizationChain ch4(4, 6, 3.0);
  CHECK(total_variation(spin_marginal_exhaustive(4, 6, 3.0), pi_of(ch4)) < 1e-12);
}

TEST_CASE("spin level dynamics project to the chain rates") {
  const int q = 3, N = 8;
  const double beta = 2.0;
  const MagnetizationChain ch(q, N, beta);
  const auto tab = spin_level_oracle(q, N, beta, 6.0e4, 11);
  REQUIRE(tab.jumps >= 100000);
  int tested = 0;
  double worst = 0.0;
  for (std::uint32_t s = 0; s < ch.size(); ++s) {
    const auto* c = ch.counts_ptr(s);
    for (int i = 0; i < q; ++i) {
      if (c[i] == 0) continue;
      for (int j = 0; j < q; ++j) {
        if (i == j) continue;
        const double expect = ch.rate(s, i, j) * tab.occupation[s];
        if (expect < 10.0) continue;
        const double seen = static_cast<double>(tab.moves[s * q * q + static_cast<std::size_t>(i * q + j)]);
        worst = std::max(worst, std::abs(seen - expect) / std::sqrt(expect));
        ++tested;
      }
    }
  }
  CHECK(tested > 200);
  CHECK(worst < 5.0);

  // One site: every move happens at rate 1.
  const auto one = spin_level_oracle(3, 1, 1.3, 2.0e4, 5);
  for (std::uint32_t s = 0; s < 3; ++s)
    for (int k = 0; k < 9; ++k) {
      const auto m = one.moves[s * 9 + static_cast<std::size_t>(k)];
      if (m == 0) continue;
      CHECK(std::abs(static_cast<double>(m) - one.occupation[s]) < 5.0 * std::sqrt(one.occupation[s]));
    }
  CHECK_THROWS_AS(spin_level_oracle(3, 17, 1.0, 1.0, 1), DomainError);
}

TEST_CASE("cyclic decomposition of the generator") {
  for (double beta : {1.0, 3.5}) {
    CHECK(cyclic_decomposition_check(MagnetizationChain(3, 10, beta), 20, 3) < 1e-10);
    CHECK(cyclic_decomposition_check(MagnetizationChain(4, 6, beta), 20, 4) < 1e-10);
  }
  const MagnetizationChain ch(3, 10, 2.0);
  CHECK(cyclic_decomposition_residual(ch, std::vector<double>(ch.size(), 4.2)) == 0.0);
}

TEST_CASE("simulation") {
  const MagnetizationChain ch(3, 8, 2.0);
  const auto start = ch.state_of({3, 3, 2});
  StopRule rule;
  rule.horizon = 6.0e5;
  const auto tr = simulate(ch, start, rule, 99);
  REQUIRE(tr.states.size() > 1'000'000);
  CHECK_FALSE(tr.hit);
  CHECK(tr.end_time == rule.horizon);
  std::vector<double> occ(ch.size(), 0.0);
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    const double until = k + 1 < tr.states.size() ? tr.times[k + 1] : tr.end_time;
    occ[tr.states[k]] += until - tr.times[k];
  }
  for (double& o : occ) o /= tr.end_time;
  CHECK(total_variation(occ, pi_of(ch)) < 0.02);

  // Consecutive states differ by one exchange; holding times are positive.
  bool steps_ok = true;
  for (std::size_t k = 1; k < 20000; ++k) {
    const auto a = ch.counts(tr.states[k - 1]), b = ch.counts(tr.states[k]);
    int l1 = 0;
    for (int v = 0; v < 3; ++v) l1 += std::abs(a[static_cast<std::size_t>(v)] - b[static_cast<std::size_t>(v)]);
    steps_ok = steps_ok && l1 == 2 && tr.times[k] > tr.times[k - 1];
  }
  CHECK(steps_ok);

  StopRule short_rule;
  short_rule.horizon = 50.0;
  const auto t1 = simulate(ch, start, short_rule, 7), t2 = simulate(ch, start, short_rule, 7);
  CHECK(t1.states == t2.states);
  CHECK(t1.times == t2.times);
  CHECK(simulate(ch, start, short_rule, 8).states != t1.states);

  StopRule hit_rule;
  hit_rule.target = state_mask(ch, {ch.state_of({8, 0, 0})});
  const auto th = simulate(ch, start, hit_rule, 3);
  CHECK(th.hit);
  CHECK(th.states.back() == ch.state_of({8, 0, 0}));
  CHECK_THROWS_AS(simulate(ch, start, StopRule{}, 1), DomainError);
}

TEST_CASE("Monte Carlo hitting times agree with the linear solve") {
  struct Case {
    int q, N;
    double beta;
    std::vector<int> from, to;
  };
  const std::vector<Case> cases = {
      {3, 6, 1.0, {6, 0, 0}, {0, 6, 0}},
      {3, 10, 2.5, {4, 3, 3}, {10, 0, 0}},
      {4, 5, 3.0, {5, 0, 0, 0}, {0, 0, 0, 5}},
      {3, 12, 3.5, {9, 2, 1}, {2, 9, 1}},
  };
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    const MagnetizationChain ch(c.q, c.N, c.beta);
    const auto target = state_mask(ch, {ch.state_of(c.to)});
    const double exact = exact_mean_hitting_time(ch, ch.state_of(c.from), target);
    const auto st = stats(sample_hitting_times(ch, ch.state_of(c.from), target, 4000, ++seed, 1));
    CHECK(std::abs(st.mean - exact) < 3.0 * st.se);
  }

  // The prescribed case: wells of u_1 at q = 3, beta = 3.5, N = 12.
  const MagnetizationChain ch(3, 12, 3.5);
  const auto sets = metastable_sets(ch);
  const double u = solve_uv(1, 3, 3.5).u;
  const auto start = ch.nearest(family_image(3, u, {0}));
  REQUIRE(sets.label[start] == 1);
  const auto target = sets.mask_except(1);
  const double exact = exact_mean_hitting_time(ch, start, target);
  const auto samples = sample_hitting_times(ch, start, target, 10000, 2024);
  const auto st = stats(samples);
  CHECK(std::abs(st.mean - exact) < 3.0 * st.se);
  // Thread count does not change the samples.
  CHECK(sample_hitting_times(ch, start, target, 64, 7, 1) == sample_hitting_times(ch, start, target, 64, 7, 3));
}

TEST_CASE("hitting-time solver") {
  const MagnetizationChain ch(3, 12, 3.0);
  const auto target = state_mask(ch, {ch.state_of({12, 0, 0}), ch.state_of({0, 12, 0})});
  const auto h = mean_hitting_times(ch, target);
  // First-step identity: sum_y R(x, y) (h(y) - h(x)) = -1 off the target.
  const auto Q = ch.generator();
  Eigen::VectorXd hv = Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
  const Eigen::VectorXd Lh = Q * hv;
  for (std::uint32_t s = 0; s < ch.size(); ++s) {
    if (target[s])
      CHECK(h[s] == 0.0);
    else
      CHECK(Lh[s] == doctest::Approx(-1.0).epsilon(1e-9));
  }
  const auto a = state_mask(ch, {ch.state_of({12, 0, 0})}), b = state_mask(ch, {ch.state_of({0, 12, 0})});
  const auto p = hit_before(ch, a, b);
  CHECK(p[ch.state_of({6, 6, 0})] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[ch.state_of({4, 4, 4})] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[ch.state_of({12, 0, 0})] == 1.0);
  CHECK_THROWS_AS(exact_mean_hitting_time(ch, 0, std::vector<char>(ch.size(), 0)), DomainError);
  CHECK_THROWS_AS(hit_before(ch, a, a), DomainError);
}

TEST_CASE("permutation equivariance") {
  const MagnetizationChain ch(4, 7, 3.1);
  const std::vector<int> perm{2, 0, 3, 1};
  for (std::uint32_t s = 0; s < ch.size(); ++s) {
    const auto c = ch.counts(s);
    std::vector<int> pc(4);
    for (int k = 0; k < 4; ++k) pc[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = c[static_cast<std::size_t>(k)];
    const auto t = ch.state_of(pc);
    CHECK(ch.log_pi()[t] == doctest::Approx(ch.log_pi()[s]).epsilon(1e-13));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j) CHECK(ch.rate(t, perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) == ch.rate(s, i, j));
  }
}

TEST_CASE("invariant measure concentrates at the global minima") {
  // Distance from the mode of the invariant law to the nearest point of
  // `centres`, in the sup norm.
  auto mode_distance = [](int N, double beta, const std::vector<std::vector<double>>& centres) {
    const MagnetizationChain ch(3, N, beta);
    const auto top = static_cast<std::uint32_t>(std::max_element(ch.log_pi().begin(), ch.log_pi().end()) - ch.log_pi().begin());
    const auto x = ch.point(top);
    double best = 1.0;
    for (const auto& m : centres) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d = std::max(d, std::abs(x[k] - m[static_cast<std::size_t>(k)]));
      best = std::min(best, d);
    }
    return best;
  };
  for (double beta : {1.0, 2.0, 2.5}) CHECK(mode_distance(60, beta, {SimplexPoint::uniform(3).coords()}) <= 1.0 / 60);

  // Above the transition the finite-N potential carries log(x_1 ... x_q) / (2 beta N),
  // which moves the mode away from u_1 by -(1/N) hess(F)^-1 grad(log(x_1 x_2 x_3) / (2 beta)).
  for (double beta : {3.0, 3.5, 4.0}) {
    const double u = solve_uv(1, 3, beta).u;
    for (int N : {60, 120, 240}) {
      std::vector<std::vector<double>> plain, shifted;
      for (int k = 0; k < 3; ++k) {
        const auto m = family_image(3, u, {k});
        Eigen::Vector2d grad_g;
        for (int a = 0; a < 2; ++a) grad_g[a] = (1.0 / m[a] - 1.0 / m[2]) / (2.0 * beta);
        const Eigen::Vector2d step = -hessian(m, beta).lu().solve(grad_g) / N;
        plain.push_back(m.coords());
        shifted.push_back({m[0] + step[0], m[1] + step[1], m[2] - step[0] - step[1]});
      }
      CHECK(mode_distance(N, beta, shifted) <= 1.0 / N);
      CHECK(mode_distance(N, beta, plain) <= 3.0 / N);
    }
  }
}

TEST_CASE("chain errors") {
  CHECK_THROWS_AS(MagnetizationChain(5, 200, 1.0), SizeError);
  CHECK_THROWS_AS(MagnetizationChain(3, 100, 1.0, 5000), SizeError);
  CHECK_NOTHROW(MagnetizationChain(3, 100, 1.0, 5151));
  CHECK_THROWS_AS(MagnetizationChain(3, 0, 1.0), DomainError);
  CHECK_THROWS_AS(MagnetizationChain(3, 5, -1.0), DomainError);
  const MagnetizationChain ch(3, 5, 1.0);
  CHECK_THROWS_AS(ch.state_of({1, 1, 1}), DomainError);
  CHECK(ch.nearest(SimplexPoint({0.5, 0.3, 0.2})) == ch.state_of({3, 1, 1}));
}

TEST_CASE("order process") {
  const double beta = 3.5;
  const MagnetizationChain ch(3, 12, beta);
  const auto sets = metastable_sets(ch);
  CHECK(sets.wells_present == std::vector<int>{1, 2, 3});
  CHECK(sets.delta == doctest::Approx(0.5 * depths(3, beta).theta_1));

  // Confined to a well: a short run from its bottom never leaves the set.
  const double u = solve_uv(1, 3, beta).u;
  const auto start = ch.nearest(family_image(3, u, {0}));
  StopRule brief;
  brief.horizon = 0.05;
  const auto rec0 = order_process(simulate(ch, start, brief, 1), sets);
  CHECK(std::all_of(rec0.labels.begin(), rec0.labels.end(), [](int l) { return l == 1; }));
  CHECK(rec0.changes.empty());

  // Above q the wells of u_1 are connected pairwise through saddles of the same
  // height: the observed jump graph is complete on the three wells.
  StopRule rule;
  rule.horizon = 3.0e4;
  const auto tr = simulate(ch, start, rule, 2);
  const auto rec = order_process(tr, sets);
  std::set<std::pair<int, int>> edges;
  for (const auto& c : rec.changes) {
    CHECK(c.from != c.to);
    CHECK(c.from != kWellOfP);
    CHECK(c.to != kWellOfP);
    edges.insert({std::min(c.from, c.to), std::max(c.from, c.to)});
  }
  CHECK(edges == std::set<std::pair<int, int>>{{1, 2}, {1, 3}, {2, 3}});
  CHECK(rec.changes.size() > 50);
}

TEST_CASE("order process below the transition leaves u_1 wells through p") {
  const auto prof = temperature_profile(3);
  // The wells of u_1 are thinner than 1/8 over the whole window (beta_1, beta_2).
  for (double beta = prof.beta1 + 1e-3; beta < prof.beta2; beta += 1e-3) {
    const auto s8 = metastable_sets(MagnetizationChain(3, 8, beta));
    CHECK(std::none_of(s8.label.begin(), s8.label.end(), [](int l) { return l >= 1; }));
  }

  const double beta = 2.76;
  REQUIRE(beta > prof.beta1);
  REQUIRE(beta < prof.beta2);
  const double u = solve_uv(1, 3, beta).u;
  double prev = 0.0;
  std::uint64_t seed = 40;
  for (int N : {12, 16, 24}) {
    const MagnetizationChain ch(3, N, beta);
    const auto sets = metastable_sets(ch);
    const auto start = ch.nearest(family_image(3, u, {0}));
    REQUIRE(sets.label[start] == 1);
    const auto others = set_union(sets.mask(2), sets.mask(3));
    const auto to_p = sets.mask(kWellOfP);
    REQUIRE(std::any_of(to_p.begin(), to_p.end(), [](char c) { return c != 0; }));

    StopRule rule;
    rule.target = set_union(to_p, others);
    const int runs = 2000;
    int via_p = 0;
    for (int r = 0; r < runs; ++r) {
      const auto tr = simulate(ch, start, rule, ++seed);
      const auto rec = order_process(tr, sets);
      REQUIRE(rec.changes.size() == 1);
      via_p += rec.changes.front().to == kWellOfP;
    }
    const double freq = static_cast<double>(via_p) / runs;
    const double exact = hit_before(ch, to_p, others)[start];
    CHECK(std::abs(freq - exact) < 4.0 * std::sqrt(exact * (1.0 - exact) / runs));
    CHECK(freq > prev);
    prev = freq;
  }
  CHECK(prev > 0.8);
  CHECK_THROWS_AS(metastable_sets(MagnetizationChain(3, 10, 2.0)), RegimeError);
}

TEST_CASE("ill-conditioned hitting systems never return a negative time") {
  // Exit times near exp(54) exhaust double precision in the elimination.
  const MagnetizationChain ch(3, 400, 3.5);
  const double u = solve_uv(1, 3, 3.5).u;
  const auto start = ch.nearest(family_image(3, u, {0}));
  const auto target = state_mask(ch, {ch.nearest(family_image(3, u, {1})), ch.nearest(family_image(3, u, {2}))});
  double h = 1.0;
  try {
    h = exact_mean_hitting_time(ch, start, target);
  } catch (const InvariantError&) {
  }
  CHECK(h > 0.0);
}
