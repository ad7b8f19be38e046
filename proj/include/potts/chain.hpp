#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <limits>
#include <vector>

#include "potts/lattice.hpp"
#include "potts/potential.hpp"

namespace potts {

// Continuous-time chain of spin proportions n / N. Moving one spin from value
// i to value j happens at rate (n_i / N) exp(beta (n_j - n_i + 1) / (2 N)).
class MagnetizationChain {
 public:
  static constexpr std::uint64_t kDefaultCap = 2'000'000;

  MagnetizationChain(int q, int N, double beta, std::uint64_t cap = kDefaultCap);

  int q() const { return q_; }
  int N() const { return N_; }
  double beta() const { return beta_; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(index_.size()); }
  const CompositionIndex& index() const { return index_; }

  std::vector<int> counts(std::uint32_t state) const;
  const std::uint16_t* counts_ptr(std::uint32_t state) const { return &counts_[static_cast<std::size_t>(state) * q_]; }
  std::uint32_t state_of(const std::vector<int>& counts) const;
  // The state [x]_N nearest to a point of the simplex.
  std::uint32_t nearest(const SimplexPoint& x) const;
  SimplexPoint point(std::uint32_t state) const;

  double rate(std::uint32_t state, int i, int j) const;
  double exit_rate(std::uint32_t state) const;
  // State reached by moving one spin from i to j; requires counts[i] > 0.
  std::uint32_t neighbor(std::uint32_t state, int i, int j) const;

  // Normalised log invariant measure.
  const std::vector<double>& log_pi() const { return log_pi_; }
  // Finite-N potential: exp(-beta N F_N(x)) = (2 pi N)^((q-1)/2) C(N; n) exp(-beta N H(x)).
  double finite_potential(std::uint32_t state) const;

  // Generator with Q(x, y) = rate and rows summing to zero.
  Eigen::SparseMatrix<double, Eigen::RowMajor> generator() const;

 private:
  int q_;
  int N_;
  double beta_;
  CompositionIndex index_;
  std::vector<std::uint16_t> counts_;
  std::vector<double> log_pi_;
  std::vector<double> rate_table_;  // exp(beta d / (2N)) for d = n_j - n_i + 1 in [-N+1, N+1]
};

std::vector<char> state_mask(const MagnetizationChain& chain, const std::vector<std::uint32_t>& states);

// Mean time to reach the target from start, by solving the first-step
// equations restricted to non-target states.
double exact_mean_hitting_time(const MagnetizationChain& chain, std::uint32_t start, const std::vector<char>& target);
// Mean hitting time from every state (zero on the target).
std::vector<double> mean_hitting_times(const MagnetizationChain& chain, const std::vector<char>& target);
// Probability of reaching a before b, from every state.
std::vector<double> hit_before(const MagnetizationChain& chain, const std::vector<char>& a, const std::vector<char>& b);

struct StopRule {
  std::vector<char> target;  // empty when only the horizon applies
  double horizon = std::numeric_limits<double>::infinity();
};

struct Trajectory {
  std::vector<double> times;  // times[k] is when states[k] was entered
  std::vector<std::uint32_t> states;
  std::uint64_t seed = 0;
  bool hit = false;
  double end_time = 0.0;
};

Trajectory simulate(const MagnetizationChain& chain, std::uint32_t start, const StopRule& stop, std::uint64_t seed);

// Independent hitting-time samples; run r uses a stream derived from (seed, r)
// so results do not depend on the thread count.
std::vector<double> sample_hitting_times(const MagnetizationChain& chain, std::uint32_t start,
                                         const std::vector<char>& target, int runs, std::uint64_t seed,
                                         unsigned threads = 0);

// Full N-site heat-bath dynamics projected to proportions. rate(x, i, j) is
// estimated as jumps(x, i->j) / time spent in x.
struct SpinRateTable {
  int q = 0;
  int N = 0;
  double horizon = 0.0;
  std::uint64_t jumps = 0;
  std::vector<double> occupation;  // per chain state
  std::vector<std::uint64_t> moves;  // [state * q * q + i * q + j]
};
SpinRateTable spin_level_oracle(int q, int N, double beta, double horizon, std::uint64_t seed);

// Law of the proportions under the spin Gibbs measure, by enumerating all q^N
// configurations. Indexed like MagnetizationChain states.
std::vector<double> spin_marginal_exhaustive(int q, int N, double beta);

// Largest |L f - sum over cycles| over random test functions.
double cyclic_decomposition_check(const MagnetizationChain& chain, int trials, std::uint64_t seed);
// Same identity for one given function.
double cyclic_decomposition_residual(const MagnetizationChain& chain, const std::vector<double>& f);

}  // namespace potts
