#pragma once

#include <cstdint>
#include <vector>

#include "potts/chain.hpp"

namespace potts {

inline constexpr int kTransient = -1;

// Metastable sets of the chain: a state belongs to the set of well k when it
// lies in the sublevel well of k and F is at least delta / beta below the top
// of that well (the saddle height for u_1 wells, F(v_1) for the well of p).
// delta is half of the smallest available depth.
struct MetastableSets {
  int q = 0;
  int N = 0;
  double beta = 0.0;
  double delta = 0.0;
  int grid_resolution = 0;
  std::vector<int> wells_present;  // labels with a nonempty set, ascending
  std::vector<int> label;          // per chain state, kTransient outside every set

  std::vector<char> mask(int well) const;
  std::vector<char> mask_except(int well) const;  // union of all other sets
};

// Supported for 3 <= q <= 5 and beta above beta_1. A negative delta selects
// the default; delta = 0 keeps every lattice point of the open wells.
MetastableSets metastable_sets(const MagnetizationChain& chain, double delta = -1.0);

struct WellChange {
  double time = 0.0;  // entry time into the new set
  int from = 0;
  int to = 0;
};

struct OrderRecord {
  std::vector<int> labels;  // per trajectory state
  std::vector<WellChange> changes;
};

// Projects a trajectory onto well labels. Transient stretches are skipped, so
// the changes list consecutive distinct sets visited.
OrderRecord order_process(const Trajectory& trajectory, const MetastableSets& sets);

}  // namespace potts
