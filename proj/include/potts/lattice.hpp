#pragma once

#include <cstdint>
#include <vector>

namespace potts {

// Compositions of `total` into q nonnegative parts, ranked colexicographically.
// With bars b_k = n_1 + ... + n_k + k - 1 the rank is sum_k C(b_k, k), which
// is a bijection onto [0, C(total + q - 1, q - 1)).
class CompositionIndex {
 public:
  CompositionIndex(int q, int total);

  int q() const { return q_; }
  int total() const { return total_; }
  std::uint64_t size() const { return size_; }

  std::uint64_t rank(const int* counts) const;
  std::uint64_t rank(const std::vector<int>& counts) const { return rank(counts.data()); }
  void unrank(std::uint64_t r, int* counts) const;
  std::vector<int> unrank(std::uint64_t r) const;

  // Rank after moving one unit from part i to part j. Requires counts[i] > 0.
  std::uint64_t moved(const int* counts, int i, int j) const;

 private:
  std::uint64_t binom(int n, int k) const { return table_[static_cast<std::size_t>(n) * (q_ + 1) + k]; }

  int q_;
  int total_;
  std::uint64_t size_;
  std::vector<std::uint64_t> table_;
};

// Number of compositions, saturating at UINT64_MAX.
std::uint64_t composition_count(int q, int total);

// Lattice point of spacing 1/total closest to x: floor(total * x) and then the
// largest fractional remainders are rounded up, ties to the lowest index.
std::vector<int> nearest_counts(const std::vector<double>& x, int total);

}  // namespace potts
