#pragma once

#include <Eigen/Dense>
#include <vector>

namespace potts {

// Eigenvalues closer to zero than this are treated as zero when classifying.
inline constexpr double kTolZero = 1e-8;

class SimplexPoint {
 public:
  // Throws DomainError unless q >= 3, all coordinates >= 0 and they sum to 1
  // within 1e-12.
  explicit SimplexPoint(std::vector<double> coords);

  static SimplexPoint uniform(int q);

  int q() const { return static_cast<int>(x_.size()); }
  const std::vector<double>& coords() const { return x_; }
  double operator[](int k) const { return x_[static_cast<std::size_t>(k)]; }
  bool interior() const;

  // Coordinates reordered by perm: result[k] = x[perm[k]].
  SimplexPoint permuted(const std::vector<int>& perm) const;

 private:
  std::vector<double> x_;
};

struct PotentialValue {
  double f = 0.0;
  double h_part = 0.0;
  double s_part = 0.0;
  // log(x_1 ... x_q) / (2 beta); NaN on the boundary where it is undefined.
  double g_part = 0.0;
  bool g_finite = false;
};

double energy(const SimplexPoint& x, const std::vector<double>& field = {});
double entropy(const SimplexPoint& x);
PotentialValue potential(const SimplexPoint& x, double beta);

// Derivatives in the chart that drops the last coordinate.
Eigen::VectorXd gradient(const SimplexPoint& x, double beta);
Eigen::MatrixXd hessian(const SimplexPoint& x, double beta);

struct Eigenvalue {
  double value = 0.0;
  int multiplicity = 0;
};

struct HessianSpectrum {
  double a = 0.0;
  double b = 0.0;
  std::vector<Eigenvalue> eigenvalues;
  int index = 0;
  bool degenerate = false;

  // Sorted ascending with multiplicities expanded.
  std::vector<double> expanded() const;
  double determinant() const;
};

// Point with j = q - i coordinates equal to t followed by i coordinates equal
// to (1 - j t) / i.
SimplexPoint family_point(int q, int i, double t);

HessianSpectrum spectrum_at_p(int q, double beta);
// Uses beta = g_i(t), the temperature at which the family point is critical.
HessianSpectrum spectrum_at_family_point(int q, int i, double t);
HessianSpectrum spectrum_at_family_point(int q, int i, double t, double beta);

struct SignTable {
  int a = 0;
  int b = 0;
  int mixed = 0;    // sign of i a + j b
  int product = 0;  // sign of b (i a + j b)
};

SignTable sign_table(int q, int i, double t);

}  // namespace potts
