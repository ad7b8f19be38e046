#include "potts/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "potts/critical.hpp"
#include "potts/errors.hpp"

namespace potts {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Entry = std::pair<double, std::uint32_t>;
using MinQueue = std::priority_queue<Entry, std::vector<Entry>, std::greater<>>;

void check_q(int q) {
  if (q < 3) throw DomainError("q must be at least 3");
}

// Along a grid edge the energy part is a concave quadratic in the edge
// parameter with second derivative -2/M^2 and the entropy part is convex, so
// F on the segment exceeds the larger endpoint by at most 1/(4 M^2). Cutting
// the grid at level - trim therefore never joins two continuum components.
double trim(int M) { return 0.25 / (static_cast<double>(M) * M); }

}  // namespace

SimplexGrid::SimplexGrid(int q, int M) : index_(q, M) {
  check_q(q);
  if (q > 64) throw DomainError("grid supports q <= 64");
  if (M < 1) throw DomainError("grid resolution must be positive");
  if (M > std::numeric_limits<std::uint16_t>::max()) throw SizeError("grid resolution too large");
  if (index_.size() > kMaxNodes) throw SizeError("grid has too many nodes");
  const std::uint32_t n = size();
  counts_.resize(static_cast<std::size_t>(n) * q);
  std::vector<int> c(static_cast<std::size_t>(q));
  for (std::uint32_t r = 0; r < n; ++r) {
    index_.unrank(r, c.data());
    for (int k = 0; k < q; ++k) counts_[static_cast<std::size_t>(r) * q + k] = static_cast<std::uint16_t>(c[k]);
  }
}

std::vector<int> SimplexGrid::counts(std::uint32_t node) const {
  const int qq = q();
  std::vector<int> c(static_cast<std::size_t>(qq));
  for (int k = 0; k < qq; ++k) c[k] = counts_[static_cast<std::size_t>(node) * qq + k];
  return c;
}

std::vector<double> SimplexGrid::coords(std::uint32_t node) const {
  // Every coordinate is divided independently so that F is exactly invariant
  // under permutations of the grid.
  const int qq = q();
  const double M = resolution();
  std::vector<double> x(static_cast<std::size_t>(qq));
  for (int k = 0; k < qq; ++k) x[k] = counts_[static_cast<std::size_t>(node) * qq + k] / M;
  return x;
}

std::uint32_t SimplexGrid::nearest(const SimplexPoint& x) const {
  if (x.q() != q()) throw DomainError("point dimension does not match the grid");
  return static_cast<std::uint32_t>(index_.rank(nearest_counts(x.coords(), resolution())));
}

void SimplexGrid::neighbors(std::uint32_t node, std::vector<std::uint32_t>& out) const {
  out.clear();
  const int qq = q();
  int c[64];
  for (int k = 0; k < qq; ++k) c[k] = counts_[static_cast<std::size_t>(node) * qq + k];
  for (int i = 0; i < qq; ++i) {
    if (c[i] == 0) continue;
    for (int j = 0; j < qq; ++j)
      if (j != i) out.push_back(static_cast<std::uint32_t>(index_.moved(c, i, j)));
  }
}

std::vector<double> grid_potential(const SimplexGrid& grid, double beta) {
  std::vector<double> f(grid.size());
  for (std::uint32_t r = 0; r < grid.size(); ++r) f[r] = potential(grid.point(r), beta).f;
  return f;
}

SimplexPoint family_image(int q, double t, const std::vector<int>& odd) {
  check_q(q);
  const int i = static_cast<int>(odd.size());
  if (i < 1 || i >= q) throw DomainError("family image needs 1 <= i < q odd positions");
  const int j = q - i;
  std::vector<double> x(static_cast<std::size_t>(q), t);
  const double big = (1.0 - j * t) / i;
  for (int k : odd) {
    if (k < 0 || k >= q) throw DomainError("family image position out of range");
    x[static_cast<std::size_t>(k)] = big;
  }
  // Absorb rounding in one odd coordinate so the sum is exactly representable.
  double s = 0.0;
  for (int k = 0; k < q; ++k)
    if (k != odd.back()) s += x[static_cast<std::size_t>(k)];
  x[static_cast<std::size_t>(odd.back())] = 1.0 - s;
  return SimplexPoint(std::move(x));
}

std::vector<LabeledPoint> labeled_minima(int q, double beta) {
  check_q(q);
  std::vector<LabeledPoint> out;
  if (beta < q) out.push_back({kWellOfP, SimplexPoint::uniform(q)});
  if (beta >= beta_s(1, q).value) {
    const double u = solve_uv(1, q, beta).u;
    for (int k = 0; k < q; ++k) out.push_back({k + 1, family_image(q, u, {k})});
  }
  return out;
}

double saddle_height(int q, double beta) {
  check_q(q);
  const auto prof = temperature_profile(q);
  if (!(beta > prof.beta1)) throw RegimeError("no saddle between wells for beta <= beta_1");
  if (q >= 4 && beta >= prof.beta3) return free_energy_family_value(2, q, beta, Branch::U);
  return free_energy_family_value(1, q, beta, Branch::V);
}

Depths depths(int q, double beta) {
  const double H = saddle_height(q, beta);
  Depths d;
  d.theta_1 = beta * (H - free_energy_family_value(1, q, beta, Branch::U));
  if (beta < q)
    d.theta_o = beta * (free_energy_family_value(1, q, beta, Branch::V) - potential(SimplexPoint::uniform(q), beta).f);
  return d;
}

int WellDecomposition::component_of(int label) const {
  for (std::size_t c = 0; c < labels.size(); ++c)
    if (std::find(labels[c].begin(), labels[c].end(), label) != labels[c].end()) return static_cast<int>(c);
  return -1;
}

WellDecomposition wells(int q, double beta, int M) {
  check_q(q);
  if (q > 5) throw DomainError("well decomposition is supported for q <= 5 only");
  if (M < 20) throw DomainError("well decomposition needs M >= 20");
  if (!(beta > 0.0)) throw DomainError("beta must be positive");

  WellDecomposition w;
  w.q = q;
  w.resolution = M;
  w.beta = beta;
  auto grid = std::make_shared<SimplexGrid>(q, M);
  w.grid = grid;
  w.values = grid_potential(*grid, beta);
  const auto& F = w.values;
  const std::uint32_t n = grid->size();

  const auto prof = temperature_profile(q);
  if (!(beta > prof.beta1)) {
    w.saddle_height = kNaN;
    w.level = std::numeric_limits<double>::infinity();
    w.level_p = std::numeric_limits<double>::infinity();
    w.gate_cap = kNaN;
    std::vector<std::uint32_t> all(n);
    for (std::uint32_t r = 0; r < n; ++r) all[r] = r;
    w.components.push_back(std::move(all));
    w.labels.push_back({kWellOfP});
    return w;
  }

  const double H = saddle_height(q, beta);
  const double tau = trim(M);
  w.saddle_height = H;
  w.level = H - tau;
  const bool has_p = beta < q;
  w.level_p = has_p ? free_energy_family_value(1, q, beta, Branch::V) - tau : kNaN;

  // Connected components of {F < level}.
  std::vector<std::int32_t> comp(n, -1);
  std::vector<std::uint32_t> nb, stack;
  auto flood = [&](std::uint32_t seed, double level, std::int32_t id, std::vector<std::uint32_t>& members) {
    comp[seed] = id;
    stack.assign(1, seed);
    while (!stack.empty()) {
      const std::uint32_t x = stack.back();
      stack.pop_back();
      members.push_back(x);
      grid->neighbors(x, nb);
      for (std::uint32_t y : nb)
        if (comp[y] != id && F[y] < level) {
          if (comp[y] >= 0 && comp[y] != id) throw InvariantError("sublevel components overlap");
          comp[y] = id;
          stack.push_back(y);
        }
    }
  };
  for (std::uint32_t r = 0; r < n; ++r) {
    if (comp[r] >= 0 || !(F[r] < w.level)) continue;
    const auto id = static_cast<std::int32_t>(w.components.size());
    w.components.emplace_back();
    flood(r, w.level, id, w.components.back());
    std::sort(w.components.back().begin(), w.components.back().end());
  }
  w.labels.assign(w.components.size(), {});

  const auto minima = labeled_minima(q, beta);
  std::map<int, std::uint32_t> min_node;
  for (const auto& m : minima) {
    const std::uint32_t node = grid->nearest(m.point);
    min_node[m.label] = node;
    if (m.label == kWellOfP) {
      // Close to beta = q the well of p can be shallower than the trim. It is
      // then cut at F(v_1) itself; a false merge would show up as a component
      // carrying several labels.
      if (!(F[node] < w.level_p)) {
        w.level_p += tau;
        w.p_cut_trimmed = false;
        if (!(F[node] < w.level_p))
          throw ResolutionError("grid node nearest to p is not below F(v_1); increase M");
      }
      const auto id = static_cast<std::int32_t>(w.components.size());
      std::vector<std::int32_t> absorbed;
      std::vector<std::uint32_t> region{node};
      if (comp[node] >= 0) absorbed.push_back(comp[node]);
      comp[node] = -2;
      stack.assign(1, node);
      while (!stack.empty()) {
        const std::uint32_t x = stack.back();
        stack.pop_back();
        grid->neighbors(x, nb);
        for (std::uint32_t y : nb)
          if (comp[y] != -2 && F[y] < w.level_p) {
            if (comp[y] >= 0) absorbed.push_back(comp[y]);
            comp[y] = -2;
            stack.push_back(y);
            region.push_back(y);
          }
      }
      std::sort(absorbed.begin(), absorbed.end());
      absorbed.erase(std::unique(absorbed.begin(), absorbed.end()), absorbed.end());
      for (std::uint32_t x : region) comp[x] = id;
      std::sort(region.begin(), region.end());
      for (auto c : absorbed) w.components[static_cast<std::size_t>(c)].clear();
      w.components.push_back(std::move(region));
      w.labels.emplace_back();
    } else if (!(F[node] < w.level)) {
      throw ResolutionError("grid node nearest to a minimum is not below the cut; increase M");
    }
    w.labels[static_cast<std::size_t>(comp[node])].push_back(m.label);
  }
  // Drop components emptied by the well of p and renumber.
  {
    std::vector<std::vector<std::uint32_t>> kept;
    std::vector<std::vector<int>> kept_labels;
    for (std::size_t c = 0; c < w.components.size(); ++c) {
      if (w.components[c].empty()) continue;
      for (std::uint32_t x : w.components[c]) comp[x] = static_cast<std::int32_t>(kept.size());
      kept.push_back(std::move(w.components[c]));
      std::sort(w.labels[c].begin(), w.labels[c].end());
      kept_labels.push_back(std::move(w.labels[c]));
    }
    w.components = std::move(kept);
    w.labels = std::move(kept_labels);
  }

  // Basins are flooded up to the grid minimax height between two wells that
  // the lowest saddle joins: p and u_1^1 when that saddle is v_1 below q,
  // otherwise two of the u_1 wells.
  const bool joins_p = has_p && !(q >= 4 && beta >= prof.beta3);
  w.gate_cap = minimax_height(*grid, F, min_node.at(joins_p ? kWellOfP : 1), min_node.at(joins_p ? 1 : 2));
  w.gate_cap += 4.0 * std::numeric_limits<double>::epsilon() * std::abs(w.gate_cap);

  // Flood from the labelled wells in order of F; basins meet at gate nodes.
  std::vector<std::int8_t> basin(n, -1);
  MinQueue pq;
  for (std::size_t c = 0; c < w.components.size(); ++c) {
    if (w.labels[c].empty()) continue;
    const auto lab = static_cast<std::int8_t>(w.labels[c].front());
    for (std::uint32_t x : w.components[c]) {
      basin[x] = lab;
      pq.push({F[x], x});
    }
  }
  std::map<std::pair<int, int>, std::set<std::uint32_t>> gate_sets;
  while (!pq.empty()) {
    const std::uint32_t x = pq.top().second;
    pq.pop();
    grid->neighbors(x, nb);
    for (std::uint32_t y : nb) {
      if (basin[y] < 0) {
        if (F[y] <= w.gate_cap) {
          basin[y] = basin[x];
          pq.push({F[y], y});
        }
      } else if (basin[y] != basin[x]) {
        const int a = std::min<int>(basin[x], basin[y]), b = std::max<int>(basin[x], basin[y]);
        auto& gs = gate_sets[{a, b}];
        gs.insert(x);
        gs.insert(y);
      }
    }
  }
  for (auto& [key, nodes] : gate_sets) w.gates[key].assign(nodes.begin(), nodes.end());
  return w;
}

double minimax_height(const SimplexGrid& grid, const std::vector<double>& values, std::uint32_t a, std::uint32_t b) {
  const std::uint32_t n = grid.size();
  if (a >= n || b >= n || values.size() != n) throw DomainError("node out of range");
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<char> done(n, 0);
  MinQueue pq;
  best[a] = values[a];
  pq.push({best[a], a});
  std::vector<std::uint32_t> nb;
  while (!pq.empty()) {
    const auto [h, x] = pq.top();
    pq.pop();
    if (done[x]) continue;
    if (x == b) return h;
    done[x] = 1;
    grid.neighbors(x, nb);
    for (std::uint32_t y : nb) {
      const double cand = std::max(h, values[y]);
      if (cand < best[y]) {
        best[y] = cand;
        pq.push({cand, y});
      }
    }
  }
  throw StructuralError("grid graph is disconnected");
}

double minimax_height(int q, double beta, const SimplexPoint& a, const SimplexPoint& b, int M) {
  check_q(q);
  if (q > 5) throw DomainError("minimax height is supported for q <= 5 only");
  if (!a.interior() || !b.interior()) throw DomainError("minimax endpoints must be interior");
  const SimplexGrid grid(q, M);
  const auto values = grid_potential(grid, beta);
  return minimax_height(grid, values, grid.nearest(a), grid.nearest(b));
}

double free_energy(int q, double beta) {
  check_q(q);
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  double psi = potential(SimplexPoint::uniform(q), beta).f;
  if (beta >= beta_s(1, q).value) psi = std::min(psi, family_potential(1, q, beta, solve_uv(1, q, beta).u));
  return psi;
}

double grid_free_energy(int q, double beta, int M) {
  const SimplexGrid grid(q, M);
  const auto values = grid_potential(grid, beta);
  return *std::min_element(values.begin(), values.end());
}

FreeEnergyCurve free_energy_curve(int q, const std::vector<double>& betas) {
  check_q(q);
  FreeEnergyCurve c;
  c.betas = betas;
  c.psi.reserve(betas.size());
  for (double b : betas) c.psi.push_back(free_energy(q, b));

  const double b2 = beta_c(q);
  c.transition = b2;
  const SimplexPoint p = SimplexPoint::uniform(q);
  const double u = solve_uv(1, q, b2).u;
  const SimplexPoint u1 = family_image(q, u, {0});
  c.gap = std::abs(potential(p, b2).f - potential(u1, b2).f);

  // Symmetric differences centred just off the transition on each side.
  const double offset = 1e-6, h = 5e-7;
  auto central = [&](double at) { return (free_energy(q, at + h) - free_energy(q, at - h)) / (2.0 * h); };
  c.slope_left = central(b2 - offset);
  c.slope_right = central(b2 + offset);
  c.jump_numeric = c.slope_left - c.slope_right;
  c.jump_analytic = (entropy(u1) - entropy(p)) / (b2 * b2);
  return c;
}

}  // namespace potts
