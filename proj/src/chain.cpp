#include "potts/chain.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <thread>

#include "potts/errors.hpp"

namespace potts {

namespace {

constexpr std::uint32_t kDenseLimit = 5000;
constexpr std::uint32_t kSparseDirectLimit = 400000;

double log_multinomial(const std::uint16_t* n, int q, int N) {
  double s = std::lgamma(N + 1.0);
  for (int k = 0; k < q; ++k) s -= std::lgamma(n[k] + 1.0);
  return s;
}

double energy_of_counts(const std::uint16_t* n, int q, int N) {
  double s = 0.0;
  for (int k = 0; k < q; ++k) {
    const double x = static_cast<double>(n[k]) / N;
    s += x * x;
  }
  return -0.5 * s;
}

}  // namespace

MagnetizationChain::MagnetizationChain(int q, int N, double beta, std::uint64_t cap)
    : q_(q), N_(N), beta_(beta), index_(q < 2 ? 2 : q, N < 1 ? 1 : N) {
  if (q < 2) throw DomainError("q must be at least 2");
  if (q > 64) throw DomainError("q must be at most 64");
  if (N < 1) throw DomainError("N must be at least 1");
  if (N > 65535) throw DomainError("N must fit in 16 bits");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("beta must be finite and nonnegative");
  const std::uint64_t states = composition_count(q, N);
  if (states > cap) throw SizeError("state space has " + std::to_string(states) + " states, above the cap");

  const std::uint32_t n = size();
  counts_.resize(static_cast<std::size_t>(n) * q);
  std::vector<int> c(static_cast<std::size_t>(q));
  for (std::uint32_t s = 0; s < n; ++s) {
    index_.unrank(s, c.data());
    for (int k = 0; k < q; ++k) counts_[static_cast<std::size_t>(s) * q + k] = static_cast<std::uint16_t>(c[k]);
  }

  log_pi_.resize(n);
  double top = -INFINITY;
  for (std::uint32_t s = 0; s < n; ++s) {
    const auto* p = counts_ptr(s);
    log_pi_[s] = log_multinomial(p, q, N) - beta * N * energy_of_counts(p, q, N);
    top = std::max(top, log_pi_[s]);
  }
  double z = 0.0;
  for (double v : log_pi_) z += std::exp(v - top);
  const double lz = top + std::log(z);
  for (double& v : log_pi_) v -= lz;

  rate_table_.resize(static_cast<std::size_t>(2 * N + 1));
  for (int d = -N + 1; d <= N + 1; ++d) rate_table_[static_cast<std::size_t>(d + N - 1)] = std::exp(beta * d / (2.0 * N));
}

std::vector<int> MagnetizationChain::counts(std::uint32_t state) const {
  const auto* p = counts_ptr(state);
  return std::vector<int>(p, p + q_);
}

std::uint32_t MagnetizationChain::state_of(const std::vector<int>& c) const {
  if (static_cast<int>(c.size()) != q_) throw DomainError("count vector has the wrong length");
  int s = 0;
  for (int v : c) {
    if (v < 0) throw DomainError("counts must be nonnegative");
    s += v;
  }
  if (s != N_) throw DomainError("counts must sum to N");
  return static_cast<std::uint32_t>(index_.rank(c));
}

std::uint32_t MagnetizationChain::nearest(const SimplexPoint& x) const {
  if (x.q() != q_) throw DomainError("point has the wrong dimension");
  return state_of(nearest_counts(x.coords(), N_));
}

SimplexPoint MagnetizationChain::point(std::uint32_t state) const {
  const auto* p = counts_ptr(state);
  std::vector<double> x(static_cast<std::size_t>(q_));
  for (int k = 0; k < q_; ++k) x[static_cast<std::size_t>(k)] = static_cast<double>(p[k]) / N_;
  return SimplexPoint(std::move(x));
}

double MagnetizationChain::rate(std::uint32_t state, int i, int j) const {
  if (i < 0 || j < 0 || i >= q_ || j >= q_ || i == j) throw DomainError("invalid move");
  const auto* p = counts_ptr(state);
  if (p[i] == 0) return 0.0;
  const int d = p[j] - p[i] + 1;
  return static_cast<double>(p[i]) / N_ * rate_table_[static_cast<std::size_t>(d + N_ - 1)];
}

double MagnetizationChain::exit_rate(std::uint32_t state) const {
  double s = 0.0;
  for (int i = 0; i < q_; ++i)
    for (int j = 0; j < q_; ++j)
      if (i != j) s += rate(state, i, j);
  return s;
}

std::uint32_t MagnetizationChain::neighbor(std::uint32_t state, int i, int j) const {
  const auto* p = counts_ptr(state);
  if (p[i] == 0) throw DomainError("move from an empty spin value");
  int c[64];
  for (int k = 0; k < q_; ++k) c[k] = p[k];
  return static_cast<std::uint32_t>(index_.moved(c, i, j));
}

double MagnetizationChain::finite_potential(std::uint32_t state) const {
  const auto* p = counts_ptr(state);
  const double lm = log_multinomial(p, q_, N_) + 0.5 * (q_ - 1) * std::log(2.0 * M_PI * N_);
  return energy_of_counts(p, q_, N_) - lm / (beta_ * N_);
}

Eigen::SparseMatrix<double, Eigen::RowMajor> MagnetizationChain::generator() const {
  const std::uint32_t n = size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * (q_ * (q_ - 1) + 1));
  for (std::uint32_t s = 0; s < n; ++s) {
    double out = 0.0;
    for (int i = 0; i < q_; ++i) {
      if (counts_ptr(s)[i] == 0) continue;
      for (int j = 0; j < q_; ++j) {
        if (j == i) continue;
        const double r = rate(s, i, j);
        trip.emplace_back(s, neighbor(s, i, j), r);
        out += r;
      }
    }
    trip.emplace_back(s, s, -out);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> Q(n, n);
  Q.setFromTriplets(trip.begin(), trip.end());
  return Q;
}

std::vector<char> state_mask(const MagnetizationChain& chain, const std::vector<std::uint32_t>& states) {
  std::vector<char> m(chain.size(), 0);
  for (auto s : states) {
    if (s >= chain.size()) throw DomainError("state out of range");
    m[s] = 1;
  }
  return m;
}

namespace {

// Solves sum_y Q(x, y) u(y) = rhs(x) for free states x, with u fixed by
// `fixed_value` off the free set. Returns u on all states.
std::vector<double> solve_free(const MagnetizationChain& chain, const std::vector<char>& free,
                               const std::vector<double>& rhs, const std::vector<double>& fixed_value, double lower,
                               double upper) {
  const std::uint32_t n = chain.size();
  std::vector<std::int64_t> slot(n, -1);
  std::vector<std::uint32_t> members;
  for (std::uint32_t s = 0; s < n; ++s)
    if (free[s]) {
      slot[s] = static_cast<std::int64_t>(members.size());
      members.push_back(s);
    }
  std::vector<double> u = fixed_value;
  if (members.empty()) return u;

  // Moves are reversible, so a free state reaches the fixed set iff a search
  // from the fixed set reaches it.
  {
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> stack;
    for (std::uint32_t s = 0; s < n; ++s)
      if (!free[s]) {
        seen[s] = 1;
        stack.push_back(s);
      }
    while (!stack.empty()) {
      const std::uint32_t s = stack.back();
      stack.pop_back();
      const auto* c = chain.counts_ptr(s);
      for (int i = 0; i < chain.q(); ++i) {
        if (c[i] == 0) continue;
        for (int j = 0; j < chain.q(); ++j) {
          if (j == i || chain.rate(s, i, j) <= 0.0) continue;
          const std::uint32_t y = chain.neighbor(s, i, j);
          if (!seen[y]) {
            seen[y] = 1;
            stack.push_back(y);
          }
        }
      }
    }
    for (std::uint32_t s = 0; s < n; ++s)
      if (!seen[s]) throw StructuralError("restricted generator is singular; the target is unreachable");
  }

  const auto m = static_cast<Eigen::Index>(members.size());
  const auto Q = chain.generator();
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const std::uint32_t s = members[static_cast<std::size_t>(r)];
    double br = rhs[s];
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Q, s); it; ++it) {
      const auto y = static_cast<std::uint32_t>(it.col());
      if (slot[y] >= 0)
        trip.emplace_back(r, slot[y], it.value());
      else
        br -= it.value() * fixed_value[y];
    }
    b[r] = br;
  }

  Eigen::VectorXd sol;
  if (members.size() < kDenseLimit) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    for (const auto& t : trip) A(t.row(), t.col()) += t.value();
    sol = Eigen::FullPivLU<Eigen::MatrixXd>(A).solve(b);
  } else {
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    // Elimination on this diagonally dominant M-matrix is stable, while Krylov
    // iterations stall once metastability makes it badly conditioned.
    if (members.size() <= kSparseDirectLimit) {
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.analyzePattern(A);
      lu.factorize(A);
      if (lu.info() != Eigen::Success) throw StructuralError("restricted generator is singular; the target is unreachable");
      sol = lu.solve(b);
    } else {
      Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::DiagonalPreconditioner<double>> it;
      it.setTolerance(1e-12);
      it.setMaxIterations(20 * static_cast<int>(std::min<Eigen::Index>(m, 50000)));
      it.compute(A);
      sol = it.solve(b);
      if (it.info() != Eigen::Success) throw StructuralError("iterative hitting-time solve did not converge");
    }
  }
  if (!sol.allFinite()) throw StructuralError("hitting system produced non-finite values");
  // Maximum principle: the solution lies between the extreme boundary data
  // (and is nonnegative for mean times).
  const double scale = std::max(1.0, sol.cwiseAbs().maxCoeff());
  if (sol.minCoeff() < lower - 1e-9 * scale || sol.maxCoeff() > upper + 1e-9 * scale)
    throw InvariantError("hitting system solution violates the maximum principle; the system is too ill-conditioned");
  for (Eigen::Index r = 0; r < m; ++r) u[members[static_cast<std::size_t>(r)]] = sol[r];
  return u;
}

void check_mask(const MagnetizationChain& chain, const std::vector<char>& mask, const char* what) {
  if (mask.size() != chain.size()) throw DomainError(std::string(what) + " mask has the wrong size");
  if (std::none_of(mask.begin(), mask.end(), [](char c) { return c != 0; }))
    throw DomainError(std::string(what) + " set is empty");
}

}  // namespace

std::vector<double> mean_hitting_times(const MagnetizationChain& chain, const std::vector<char>& target) {
  check_mask(chain, target, "target");
  const std::uint32_t n = chain.size();
  std::vector<char> free(n);
  for (std::uint32_t s = 0; s < n; ++s) free[s] = !target[s];
  return solve_free(chain, free, std::vector<double>(n, -1.0), std::vector<double>(n, 0.0), 0.0, INFINITY);
}

double exact_mean_hitting_time(const MagnetizationChain& chain, std::uint32_t start, const std::vector<char>& target) {
  if (start >= chain.size()) throw DomainError("start state out of range");
  check_mask(chain, target, "target");
  if (target[start]) return 0.0;
  return mean_hitting_times(chain, target)[start];
}

std::vector<double> hit_before(const MagnetizationChain& chain, const std::vector<char>& a, const std::vector<char>& b) {
  check_mask(chain, a, "first");
  check_mask(chain, b, "second");
  const std::uint32_t n = chain.size();
  std::vector<char> free(n);
  std::vector<double> fixed(n, 0.0);
  for (std::uint32_t s = 0; s < n; ++s) {
    if (a[s] && b[s]) throw DomainError("the two sets overlap");
    free[s] = !a[s] && !b[s];
    if (a[s]) fixed[s] = 1.0;
  }
  return solve_free(chain, free, std::vector<double>(n, 0.0), fixed, 0.0, 1.0);
}

namespace {

// One jump: returns the next state and advances t by an exponential holding time.
std::uint32_t step(const MagnetizationChain& chain, std::uint32_t s, std::mt19937_64& rng, double& t) {
  const int q = chain.q();
  double rates[64 * 64];
  int moves[64 * 64][2];
  int m = 0;
  double total = 0.0;
  const auto* c = chain.counts_ptr(s);
  for (int i = 0; i < q; ++i) {
    if (c[i] == 0) continue;
    for (int j = 0; j < q; ++j) {
      if (j == i) continue;
      rates[m] = chain.rate(s, i, j);
      moves[m][0] = i;
      moves[m][1] = j;
      total += rates[m];
      ++m;
    }
  }
  std::exponential_distribution<double> hold(total);
  t += hold(rng);
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  int k = 0;
  for (; k < m - 1; ++k) {
    if (u < rates[k]) break;
    u -= rates[k];
  }
  return chain.neighbor(s, moves[k][0], moves[k][1]);
}

std::mt19937_64 run_stream(std::uint64_t seed, std::uint64_t run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Trajectory simulate(const MagnetizationChain& chain, std::uint32_t start, const StopRule& stop, std::uint64_t seed) {
  if (start >= chain.size()) throw DomainError("start state out of range");
  const bool use_target = !stop.target.empty();
  if (use_target) check_mask(chain, stop.target, "target");
  if (!use_target && !std::isfinite(stop.horizon)) throw DomainError("stop rule needs a target or a finite horizon");
  if (!(stop.horizon >= 0.0)) throw DomainError("horizon must be nonnegative");

  Trajectory tr;
  tr.seed = seed;
  std::mt19937_64 rng(seed);
  std::uint32_t s = start;
  double t = 0.0;
  tr.times.push_back(0.0);
  tr.states.push_back(s);
  while (true) {
    if (use_target && stop.target[s]) {
      tr.hit = true;
      tr.end_time = t;
      return tr;
    }
    double next_t = t;
    const std::uint32_t next = step(chain, s, rng, next_t);
    if (next_t > stop.horizon) {
      tr.end_time = stop.horizon;
      return tr;
    }
    s = next;
    t = next_t;
    tr.times.push_back(t);
    tr.states.push_back(s);
  }
}

std::vector<double> sample_hitting_times(const MagnetizationChain& chain, std::uint32_t start,
                                         const std::vector<char>& target, int runs, std::uint64_t seed,
                                         unsigned threads) {
  if (start >= chain.size()) throw DomainError("start state out of range");
  check_mask(chain, target, "target");
  if (runs < 0) throw DomainError("runs must be nonnegative");
  std::vector<double> out(static_cast<std::size_t>(runs), 0.0);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(runs, 1)));

  auto work = [&](unsigned w) {
    for (int r = static_cast<int>(w); r < runs; r += static_cast<int>(threads)) {
      auto rng = run_stream(seed, static_cast<std::uint64_t>(r));
      std::uint32_t s = start;
      double t = 0.0;
      while (!target[s]) s = step(chain, s, rng, t);
      out[static_cast<std::size_t>(r)] = t;
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  return out;
}

namespace {

// Hamiltonian of a spin configuration: -(1/(2N)) sum over ordered pairs (u, v)
// of 1{sigma_u = sigma_v}, including u = v.
double spin_hamiltonian(const std::vector<int>& sigma) {
  const auto N = sigma.size();
  long same = 0;
  for (std::size_t u = 0; u < N; ++u)
    for (std::size_t v = 0; v < N; ++v) same += sigma[u] == sigma[v];
  return -static_cast<double>(same) / (2.0 * static_cast<double>(N));
}

}  // namespace

SpinRateTable spin_level_oracle(int q, int N, double beta, double horizon, std::uint64_t seed) {
  if (q < 2 || q > 64) throw DomainError("q out of range");
  if (N < 1 || N > 16) throw DomainError("spin-level simulation supports 1 <= N <= 16");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be positive and finite");
  const CompositionIndex index(q, N);

  SpinRateTable tab;
  tab.q = q;
  tab.N = N;
  tab.horizon = horizon;
  tab.occupation.assign(index.size(), 0.0);
  tab.moves.assign(index.size() * static_cast<std::size_t>(q * q), 0);

  std::mt19937_64 rng(seed);
  std::vector<int> sigma(static_cast<std::size_t>(N), 0);
  std::vector<int> n(static_cast<std::size_t>(q), 0);
  n[0] = N;
  std::vector<double> rates(static_cast<std::size_t>(N * q));
  double t = 0.0;
  while (true) {
    const double h = spin_hamiltonian(sigma);
    double total = 0.0;
    for (int v = 0; v < N; ++v) {
      const int old = sigma[static_cast<std::size_t>(v)];
      for (int k = 0; k < q; ++k) {
        double r = 0.0;
        if (k != old) {
          sigma[static_cast<std::size_t>(v)] = k;
          r = std::exp(-0.5 * beta * (spin_hamiltonian(sigma) - h)) / N;
          sigma[static_cast<std::size_t>(v)] = old;
        }
        rates[static_cast<std::size_t>(v * q + k)] = r;
        total += r;
      }
    }
    const double dt = std::exponential_distribution<double>(total)(rng);
    const std::uint64_t x = index.rank(n);
    if (t + dt >= horizon) {
      tab.occupation[x] += horizon - t;
      return tab;
    }
    tab.occupation[x] += dt;
    t += dt;
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t pick = 0;
    for (; pick + 1 < rates.size(); ++pick) {
      if (u < rates[pick]) break;
      u -= rates[pick];
    }
    while (rates[pick] == 0.0) --pick;  // guard against rounding past the last positive rate
    const int v = static_cast<int>(pick) / q, k = static_cast<int>(pick) % q;
    const int i = sigma[static_cast<std::size_t>(v)];
    tab.moves[x * static_cast<std::size_t>(q * q) + static_cast<std::size_t>(i * q + k)] += 1;
    ++tab.jumps;
    sigma[static_cast<std::size_t>(v)] = k;
    --n[static_cast<std::size_t>(i)];
    ++n[static_cast<std::size_t>(k)];
  }
}

std::vector<double> spin_marginal_exhaustive(int q, int N, double beta) {
  if (q < 2 || N < 1) throw DomainError("q >= 2 and N >= 1 required");
  double configs = std::pow(static_cast<double>(q), N);
  if (configs > 5e7) throw SizeError("too many spin configurations to enumerate");
  const CompositionIndex index(q, N);
  std::vector<double> logw;
  std::vector<std::uint64_t> where;
  logw.reserve(static_cast<std::size_t>(configs));
  where.reserve(static_cast<std::size_t>(configs));
  std::vector<int> sigma(static_cast<std::size_t>(N), 0);
  std::vector<int> n(static_cast<std::size_t>(q));
  while (true) {
    std::fill(n.begin(), n.end(), 0);
    for (int s : sigma) ++n[static_cast<std::size_t>(s)];
    logw.push_back(-beta * spin_hamiltonian(sigma));
    where.push_back(index.rank(n));
    int pos = 0;
    while (pos < N && ++sigma[static_cast<std::size_t>(pos)] == q) sigma[static_cast<std::size_t>(pos++)] = 0;
    if (pos == N) break;
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> law(index.size(), 0.0);
  double z = 0.0;
  for (std::size_t c = 0; c < logw.size(); ++c) {
    const double w = std::exp(logw[c] - top);
    law[where[c]] += w;
    z += w;
  }
  for (double& v : law) v /= z;
  return law;
}

double cyclic_decomposition_residual(const MagnetizationChain& chain, const std::vector<double>& f) {
  if (f.size() != chain.size()) throw DomainError("test function has the wrong size");
  const int q = chain.q();
  const int N = chain.N();
  const double beta = chain.beta();
  std::vector<double> FN(chain.size());
  for (std::uint32_t s = 0; s < chain.size(); ++s) FN[s] = chain.finite_potential(s);

  double worst = 0.0;
  for (std::uint32_t s = 0; s < chain.size(); ++s) {
    const auto* c = chain.counts_ptr(s);
    double direct = 0.0;
    for (int i = 0; i < q; ++i) {
      if (c[i] == 0) continue;
      for (int j = 0; j < q; ++j)
        if (j != i) direct += chain.rate(s, i, j) * (f[chain.neighbor(s, i, j)] - f[s]);
    }
    double cycles = 0.0;
    for (int i = 0; i < q; ++i) {
      for (int j = i + 1; j < q; ++j) {
        // Cycle through x and x + e_j - e_i, weighted at x.
        if (c[i] >= 1) {
          const std::uint32_t x1 = chain.neighbor(s, i, j);
          const double w = std::sqrt(static_cast<double>(c[i]) / N * (static_cast<double>(c[j]) + 1.0) / N);
          const double r0 = std::exp(-0.5 * N * beta * (FN[x1] - FN[s]));
          cycles += w * r0 * (f[x1] - f[s]);
        }
        // Cycle through y = x + e_i - e_j and x, weighted at y.
        if (c[j] >= 1) {
          const std::uint32_t y = chain.neighbor(s, j, i);
          const auto* cy = chain.counts_ptr(y);
          const double w = std::sqrt(static_cast<double>(cy[i]) / N * (static_cast<double>(cy[j]) + 1.0) / N);
          const double r1 = std::exp(-0.5 * N * beta * (FN[y] - FN[s]));
          cycles += w * r1 * (f[y] - f[s]);
        }
      }
    }
    worst = std::max(worst, std::abs(direct - cycles));
  }
  return worst;
}

double cyclic_decomposition_check(const MagnetizationChain& chain, int trials, std::uint64_t seed) {
  if (trials < 0) throw DomainError("trials must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  std::vector<double> f(chain.size());
  for (int k = 0; k < trials; ++k) {
    for (double& v : f) v = unif(rng);
    worst = std::max(worst, cyclic_decomposition_residual(chain, f));
  }
  return worst;
}

}  // namespace potts
