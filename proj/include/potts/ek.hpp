#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "potts/potential.hpp"

namespace potts {

// Mobility matrix sum_{i<j} sqrt(x_i x_j) (e_j - e_i)(e_j - e_i)^T in the chart
// that drops the last coordinate (e_q = 0).
Eigen::MatrixXd matrix_A(const SimplexPoint& x);
// Single pair term (e_j - e_i)(e_j - e_i)^T, 0-based spin values.
Eigen::MatrixXd pair_matrix(int q, int i, int j);

enum class SaddleKind { U2, V1 };

// Representative saddle: u_2 with odd coordinates last, or v_1 with the odd
// coordinate last. RegimeError when the point does not exist or is not a
// nondegenerate saddle at this temperature.
SimplexPoint saddle_point(int q, double beta, SaddleKind kind);

struct ProductSpectrum {
  std::vector<double> real;      // ascending
  double max_imag = 0.0;
  int negative = 0;
};
// Eigenvalues of hess(F)(x) A(x)^T by a general dense eigensolve after balancing.
ProductSpectrum product_spectrum(const SimplexPoint& x, double beta);

// mu > 0 with -mu the unique negative eigenvalue of hess(F)(s) A(s)^T.
double negative_eigenvalue(int q, double beta, SaddleKind at);
double negative_eigenvalue_at(const SimplexPoint& s, double beta);

struct EkConstants {
  int q = 0;
  double beta = 0.0;
  std::optional<double> mu_1;     // at u_2
  std::optional<double> mu_o;     // at v_1
  std::optional<double> omega_1;
  std::optional<double> omega_o;
  double nu_1 = 0.0;
  std::optional<double> nu_o;
  double theta_1 = 0.0;
  std::optional<double> theta_o;
};

// Requires beta > beta_1 and 3 <= q. Entries are absent when the defining
// point is absent or not a saddle (resp. minimum) at this temperature.
EkConstants ek_constants(int q, double beta);

// omega at an arbitrary saddle point and nu at an arbitrary minimum.
double omega_at(const SimplexPoint& s, double beta);
double nu_at(const SimplexPoint& m, double beta);

enum class Regime { Below2, At2, Between23, At3, Above3, AtQUnsupported };

struct RegimeInfo {
  Regime regime = Regime::Below2;
  std::string name;  // "(1,2)", "(2)", "(2,3)", "(3)", "(3,inf)"
};
// Boundaries beta_2 and beta_3 are matched within `tol`. For q <= 4 beta_3 = q
// and the boundary itself is unsupported.
RegimeInfo classify_regime(int q, double beta, double tol = 0.0);

// Limit chain on well labels. States are named "o" (well of p), "1".."q", or
// "S" for the merged wells of u_1.
struct ReducedChain {
  std::string name;
  std::vector<std::string> states;
  Eigen::MatrixXd rates;  // zero diagonal
  std::string depth_name; // time scale 2 pi N exp(N theta), theta = theta_1 or theta_o
  double depth = 0.0;
};

struct ReducedDynamics {
  RegimeInfo regime;
  ReducedChain first;
  std::optional<ReducedChain> second;  // slower scale when beta_2 < beta < q
};

ReducedDynamics reduced_chain(int q, double beta, double tol = 0.0);

enum class Transition {
  WellToP = 1,       // u_1 -> p, beta in (beta_1, beta_2]
  PToWells = 2,      // p -> U_1, beta in [beta_2, q)
  WellToWells = 3,   // u_1 -> U_1 \ {u_1}, beta > beta_3
};

struct Prediction {
  double prefactor = 0.0;   // multiplies 2 pi N exp(N theta)
  double depth = 0.0;       // theta
  double mean_time = 0.0;
};

Prediction ek_prediction(int q, double beta, int N, Transition transition);

// Largest |L_N f - sum_{i<j} w(s) (L^{ij})^s f| over the box around s,
// divided by the largest |sum ...|. The box has half-width N^(-2/5) along the
// unstable direction and scaled widths along the others. The test function is
// fixed and smooth.
struct FrozenWeightCheck {
  int N = 0;
  int points = 0;
  double discrepancy = 0.0;
};
FrozenWeightCheck frozen_weight_check(const SimplexPoint& s, double beta, int N);

}  // namespace potts
