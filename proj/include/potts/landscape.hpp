#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "potts/lattice.hpp"
#include "potts/potential.hpp"

namespace potts {

// Lattice points of spacing 1/M on the simplex, adjacent when they differ by
// moving 1/M of mass between two coordinates.
class SimplexGrid {
 public:
  static constexpr std::uint64_t kMaxNodes = 5'000'000;

  SimplexGrid(int q, int M);

  int q() const { return index_.q(); }
  int resolution() const { return index_.total(); }
  std::uint32_t size() const { return static_cast<std::uint32_t>(index_.size()); }
  const CompositionIndex& index() const { return index_; }

  std::vector<int> counts(std::uint32_t node) const;
  std::vector<double> coords(std::uint32_t node) const;
  SimplexPoint point(std::uint32_t node) const { return SimplexPoint(coords(node)); }
  std::uint32_t nearest(const SimplexPoint& x) const;

  // Appends the neighbours of node to out (cleared first).
  void neighbors(std::uint32_t node, std::vector<std::uint32_t>& out) const;

 private:
  CompositionIndex index_;
  std::vector<std::uint16_t> counts_;
};

// F at every grid node.
std::vector<double> grid_potential(const SimplexGrid& grid, double beta);

// Labels of the wells: 0 is the well of p, k in 1..q the well of u_1^k.
inline constexpr int kWellOfP = 0;

// Image of the family point with coordinate t placed everywhere except the
// positions listed in `odd`, which carry (1 - (q - i) t) / i with i = odd.size().
SimplexPoint family_image(int q, double t, const std::vector<int>& odd);

// Local minima of F: p when beta < q, then u_1^1 .. u_1^q when they exist.
struct LabeledPoint {
  int label = 0;
  SimplexPoint point = SimplexPoint::uniform(3);
};
std::vector<LabeledPoint> labeled_minima(int q, double beta);

// Height of the lowest saddles connecting the wells of u_1. RegimeError for
// beta <= beta_1.
double saddle_height(int q, double beta);

struct Depths {
  double theta_1 = 0.0;
  std::optional<double> theta_o;  // only for beta < q
};
Depths depths(int q, double beta);

struct WellDecomposition {
  int q = 0;
  int resolution = 0;
  double beta = 0.0;
  double saddle_height = 0.0;  // NaN when beta <= beta_1
  double level = 0.0;          // cut for the wells of u_1; +inf when beta <= beta_1
  double level_p = 0.0;        // cut for the well of p; NaN when p is not a minimum
  bool p_cut_trimmed = true;   // false when the well of p is too shallow for the trim
  double gate_cap = 0.0;       // grid minimax height across the lowest saddle
  std::vector<std::vector<std::uint32_t>> components;
  std::vector<std::vector<int>> labels;  // per component, sorted
  // Keyed by label pairs (a, b) with a < b. Each entry lists the grid nodes
  // where the flooded basins of a and b touch.
  std::map<std::pair<int, int>, std::vector<std::uint32_t>> gates;
  std::shared_ptr<const SimplexGrid> grid;
  std::vector<double> values;

  // Component carrying the label, or -1.
  int component_of(int label) const;
};

// Supported for 3 <= q <= 5. ResolutionError when a known minimum has no grid
// node below the cut.
WellDecomposition wells(int q, double beta, int M);

// Smallest possible maximum of F along grid paths between two nodes.
double minimax_height(const SimplexGrid& grid, const std::vector<double>& values, std::uint32_t a, std::uint32_t b);
double minimax_height(int q, double beta, const SimplexPoint& a, const SimplexPoint& b, int M);

// Minimum of F over the enumerated local minima.
double free_energy(int q, double beta);
// Minimum of F over the grid nodes.
double grid_free_energy(int q, double beta, int M);

struct FreeEnergyCurve {
  std::vector<double> betas;
  std::vector<double> psi;
  double transition = 0.0;       // beta_2
  double gap = 0.0;              // |F(p) - F(u_1)| at the transition
  double slope_left = 0.0;       // numerical derivative just below the transition
  double slope_right = 0.0;      // numerical derivative just above
  double jump_numeric = 0.0;     // slope_left - slope_right
  double jump_analytic = 0.0;    // (S(u_1) - S(p)) / beta_2^2
};
FreeEnergyCurve free_energy_curve(int q, const std::vector<double>& betas);

}  // namespace potts
