#include "potts/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "potts/errors.hpp"

namespace potts {

std::uint64_t composition_count(int q, int total) {
  // C(total + q - 1, q - 1) by the multiplicative formula; each partial
  // product is itself a binomial coefficient so the division is exact.
  const int n = total + q - 1;
  const int k = q - 1;
  unsigned __int128 c = 1;
  for (int r = 1; r <= k; ++r) {
    c = c * static_cast<unsigned>(n - k + r) / static_cast<unsigned>(r);
    if (c > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(c);
}

CompositionIndex::CompositionIndex(int q, int total) : q_(q), total_(total) {
  if (q < 1 || total < 0) throw DomainError("composition index needs q >= 1 and total >= 0");
  size_ = composition_count(q, total);
  if (size_ == std::numeric_limits<std::uint64_t>::max()) throw SizeError("composition count overflows");
  const int rows = total + q;
  table_.assign(static_cast<std::size_t>(rows) * (q + 1), 0);
  for (int n = 0; n < rows; ++n) {
    table_[static_cast<std::size_t>(n) * (q + 1)] = 1;
    for (int k = 1; k <= std::min(n, q); ++k) {
      const std::uint64_t above = n > 0 ? binom(n - 1, k - 1) : 0;
      const std::uint64_t left = n > 0 && k <= n - 1 ? binom(n - 1, k) : 0;
      table_[static_cast<std::size_t>(n) * (q + 1) + k] = above + left;
    }
  }
}

std::uint64_t CompositionIndex::rank(const int* counts) const {
  std::uint64_t r = 0;
  int bar = -1;
  for (int k = 1; k < q_; ++k) {
    bar += counts[k - 1] + 1;
    r += binom(bar, k);
  }
  return r;
}

void CompositionIndex::unrank(std::uint64_t r, int* counts) const {
  // Greedy decoding of the combinatorial number system from the top bar down.
  int upper = total_ + q_ - 1;
  int prev_bar = total_ + q_ - 1;
  for (int k = q_ - 1; k >= 1; --k) {
    int b = k - 1;
    int lo = k - 1, hi = upper - 1;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (binom(mid, k) <= r)
        lo = mid;
      else
        hi = mid - 1;
    }
    b = lo;
    r -= binom(b, k);
    counts[k] = prev_bar - b - 1;
    prev_bar = b;
    upper = b;
  }
  counts[0] = prev_bar;
}

std::vector<int> CompositionIndex::unrank(std::uint64_t r) const {
  std::vector<int> c(static_cast<std::size_t>(q_));
  unrank(r, c.data());
  return c;
}

std::uint64_t CompositionIndex::moved(const int* counts, int i, int j) const {
  // Bars with index in [min(i,j)+1, max(i,j)] shift by one.
  std::uint64_t r = rank(counts);
  int bar = -1;
  for (int k = 1; k < q_; ++k) {
    bar += counts[k - 1] + 1;
    if (i < j && k > i && k <= j) r = r - binom(bar, k) + binom(bar - 1, k);
    if (j < i && k > j && k <= i) r = r - binom(bar, k) + binom(bar + 1, k);
  }
  return r;
}

std::vector<int> nearest_counts(const std::vector<double>& x, int total) {
  const std::size_t q = x.size();
  std::vector<int> n(q);
  std::vector<double> rem(q);
  int used = 0;
  for (std::size_t k = 0; k < q; ++k) {
    const double s = total * x[k];
    n[k] = static_cast<int>(std::floor(s));
    rem[k] = s - n[k];
    used += n[k];
  }
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; used < total && k < q; ++k, ++used) ++n[order[k]];
  return n;
}

}  // namespace potts
