#include "potts/metastable.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "potts/critical.hpp"
#include "potts/errors.hpp"
#include "potts/landscape.hpp"

namespace potts {

std::vector<char> MetastableSets::mask(int well) const {
  std::vector<char> m(label.size(), 0);
  for (std::size_t s = 0; s < label.size(); ++s) m[s] = label[s] == well;
  return m;
}

std::vector<char> MetastableSets::mask_except(int well) const {
  std::vector<char> m(label.size(), 0);
  for (std::size_t s = 0; s < label.size(); ++s) m[s] = label[s] != kTransient && label[s] != well;
  return m;
}

namespace {

int base_resolution(int q) {
  switch (q) {
    case 3:
      return 200;
    case 4:
      return 120;
    default:
      return 60;
  }
}

}  // namespace

MetastableSets metastable_sets(const MagnetizationChain& chain, double delta) {
  const int q = chain.q();
  const int N = chain.N();
  const double beta = chain.beta();
  if (q < 3 || q > 5) throw DomainError("metastable sets are supported for 3 <= q <= 5");
  if (!(beta > temperature_profile(q).beta1)) throw RegimeError("no metastable wells at or below beta_1");

  const auto d = depths(q, beta);
  MetastableSets out;
  out.q = q;
  out.N = N;
  out.beta = beta;
  out.delta = delta >= 0.0 ? delta : 0.5 * (d.theta_o ? std::min(d.theta_1, *d.theta_o) : d.theta_1);

  // Grid with N | M so that every chain state is a grid node.
  const int base = base_resolution(q);
  // A finer grid is tried when the wells are too thin for the base one.
  int M = N * ((std::max(base, 20) + N - 1) / N);
  std::optional<WellDecomposition> found;
  while (!found) {
    try {
      found = wells(q, beta, M);
    } catch (const ResolutionError&) {
      if (composition_count(q, 2 * M) > SimplexGrid::kMaxNodes) throw;
      M *= 2;
    }
  }
  const auto& w = *found;
  out.grid_resolution = M;
  const int scale = M / N;

  std::vector<int> comp_of(w.grid->size(), -1);
  for (std::size_t c = 0; c < w.components.size(); ++c)
    for (auto x : w.components[c]) comp_of[x] = static_cast<int>(c);

  const double H = w.saddle_height;
  const double top_p = beta < q ? free_energy_family_value(1, q, beta, Branch::V) : NAN;
  const double shift = out.delta / beta;

  out.label.assign(chain.size(), kTransient);
  std::vector<int> grid_counts(static_cast<std::size_t>(q));
  for (std::uint32_t s = 0; s < chain.size(); ++s) {
    const auto* c = chain.counts_ptr(s);
    for (int k = 0; k < q; ++k) grid_counts[static_cast<std::size_t>(k)] = c[k] * scale;
    const auto node = static_cast<std::uint32_t>(w.grid->index().rank(grid_counts));
    const int comp = comp_of[node];
    if (comp < 0) continue;
    const auto& labs = w.labels[static_cast<std::size_t>(comp)];
    if (labs.size() != 1) continue;
    const int lab = labs.front();
    const double cut = (lab == kWellOfP ? top_p : H) - shift;
    if (w.values[node] < cut) out.label[s] = lab;
  }
  for (int lab = 0; lab <= q; ++lab)
    if (std::find(out.label.begin(), out.label.end(), lab) != out.label.end()) out.wells_present.push_back(lab);
  return out;
}

OrderRecord order_process(const Trajectory& trajectory, const MetastableSets& sets) {
  OrderRecord rec;
  rec.labels.reserve(trajectory.states.size());
  int last = kTransient;
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    const auto s = trajectory.states[k];
    if (s >= sets.label.size()) throw DomainError("trajectory state outside the labelled chain");
    const int lab = sets.label[s];
    rec.labels.push_back(lab);
    if (lab == kTransient) continue;
    if (last != kTransient && lab != last) rec.changes.push_back({trajectory.times[k], last, lab});
    last = lab;
  }
  return rec;
}

}  // namespace potts
