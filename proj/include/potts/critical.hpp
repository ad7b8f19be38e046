#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "potts/potential.hpp"

namespace potts {

struct RootBracket {
  double lo = 0.0;
  double hi = 0.0;
  bool certified = false;
  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

// Root equation of the family i: a family point with small coordinate t is
// critical exactly at beta = g(i, q, t). Defined on 0 < t < 1/(q - i).
double g(int i, int q, double t);
double g_prime(int i, int q, double t);
// g' = q i / (1 - q t)^2 * h_aux
double h_aux(int i, int q, double t);
double h_aux_prime(int i, int q, double t);
// Entropy along the family, with k' = -j log((1 - j t)/(i t)).
double k_aux(int i, int q, double t);

struct Minimizer {
  double m = 0.0;
  RootBracket bracket;
};

// Unique minimizer of g_i on (0, 1/(q-i)), 1 <= i <= q/2.
Minimizer find_m(int i, int q);

struct SpinodalTemperature {
  double value = 0.0;
  RootBracket bracket;
};

// Minimum value of g_i, the temperature at which the family appears.
SpinodalTemperature beta_s(int i, int q);

struct FamilyRoots {
  double u = 0.0;
  double v = 0.0;
  RootBracket u_bracket;
  RootBracket v_bracket;
};

// Both solutions u <= m_i <= v of g_i(t) = beta. Throws NoSolutionError for
// beta below the minimum of g_i.
FamilyRoots solve_uv(int i, int q, double beta);

double beta_c(int q);

struct CrossingTemperature {
  double value = 0.0;
  RootBracket bracket;
};

// Temperature where the two lowest saddle families exchange height; equals q
// for q <= 4.
CrossingTemperature beta_m(int q);

struct TemperatureProfile {
  int q = 0;
  std::map<int, SpinodalTemperature> beta_s;
  double beta_c = 0.0;
  CrossingTemperature beta_m;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  double beta4 = 0.0;
};

TemperatureProfile temperature_profile(int q);

enum class Branch { U, V };

// Potential at the representative family point, through the one-dimensional
// reduction valid when beta = g_i(t).
double family_potential(int i, int q, double beta, double t);
double free_energy_family_value(int i, int q, double beta, Branch branch);

// Difference between the lowest U_2 and V_1 saddle levels.
double saddle_gap(int q, double beta);

enum class Family { P, U, V };

enum class Classification { OnlyMinimum, LocalMinimum, Saddle, HigherIndex, LocalMaximum, Degenerate };

std::string to_string(Family f);
std::string to_string(Classification c);

struct CriticalPoint {
  Family family = Family::P;
  int i = 0;
  double t = 0.0;
  SimplexPoint location = SimplexPoint::uniform(3);
  HessianSpectrum spectrum;
  std::uint64_t orbit_size = 1;
  Classification label = Classification::OnlyMinimum;
  std::string name() const;
};

std::vector<CriticalPoint> enumerate_critical_points(int q, double beta);

// Fixed-step bracket construction for the second family and the one-sided
// bound combinations built on the brackets.
struct AppendixRow {
  int q = 0;
  double m_star = 0.0;
  RootBracket beta_s2;
  RootBracket m2;
  RootBracket v1;
  double margin_gap = 0.0;                  // lower bound of F(u_2) - F(v_1) at beta_s2
  std::optional<double> margin_derivative;  // lower bound of log(q beta) + 2 k_2(m_2)
  bool brackets_consistent = false;         // brackets contain independently computed values
  int descent_steps = 0;
};

struct AppendixReport {
  std::vector<AppendixRow> rows;
  std::optional<double> f_star_lower;  // present when q = 6500 is in range
  bool gap_ok = true;
  bool derivative_ok = true;           // over q in [6, 54] only
  bool f_star_ok = true;
  bool consistent = true;
  bool passed() const { return gap_ok && derivative_ok && f_star_ok && consistent; }
};

AppendixReport verify_appendix(int q_lo, int q_hi, unsigned threads = 0);

}  // namespace potts
