#include "potts/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "potts/critical.hpp"
#include "potts/errors.hpp"

namespace potts {

namespace {

// Sum in ascending order of the coordinates so that the result does not
// depend on the labelling of the spins.
template <class Term>
double symmetric_sum(const std::vector<double>& x, Term term) {
  std::vector<double> s(x);
  std::sort(s.begin(), s.end());
  double acc = 0.0;
  for (double v : s) acc += term(v);
  return acc;
}

void require_interior(const SimplexPoint& x, const char* what) {
  if (!x.interior())
    throw DomainError(std::string(what) + ": point is on the simplex boundary");
}

void require_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw DomainError("beta must be positive and finite");
}

int sign_with_tol(double v, double scale) {
  const double tol = 1e-10 * std::max(1.0, scale);
  if (v > tol) return 1;
  if (v < -tol) return -1;
  return 0;
}

}  // namespace

SimplexPoint::SimplexPoint(std::vector<double> coords) : x_(std::move(coords)) {
  if (x_.size() < 3) throw DomainError("simplex point needs q >= 3 coordinates");
  double total = 0.0;
  for (double v : x_) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("simplex coordinates must be finite and nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("simplex coordinates must sum to 1");
}

SimplexPoint SimplexPoint::uniform(int q) {
  if (q < 3) throw DomainError("q must be at least 3");
  return SimplexPoint(std::vector<double>(static_cast<std::size_t>(q), 1.0 / q));
}

bool SimplexPoint::interior() const {
  return std::all_of(x_.begin(), x_.end(), [](double v) { return v > 0.0; });
}

SimplexPoint SimplexPoint::permuted(const std::vector<int>& perm) const {
  if (perm.size() != x_.size()) throw DomainError("permutation size mismatch");
  std::vector<double> y(x_.size());
  for (std::size_t k = 0; k < x_.size(); ++k) y[k] = x_.at(static_cast<std::size_t>(perm[k]));
  return SimplexPoint(std::move(y));
}

double energy(const SimplexPoint& x, const std::vector<double>& field) {
  double e = -0.5 * symmetric_sum(x.coords(), [](double v) { return v * v; });
  if (!field.empty()) {
    if (static_cast<int>(field.size()) != x.q()) throw DomainError("field length must equal q");
    for (int k = 0; k < x.q(); ++k) e -= field[static_cast<std::size_t>(k)] * x[k];
  }
  return e;
}

double entropy(const SimplexPoint& x) {
  return symmetric_sum(x.coords(), [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; });
}

PotentialValue potential(const SimplexPoint& x, double beta) {
  require_beta(beta);
  PotentialValue out;
  out.h_part = energy(x);
  out.s_part = entropy(x);
  out.f = out.h_part + out.s_part / beta;
  if (x.interior()) {
    out.g_part = symmetric_sum(x.coords(), [](double v) { return std::log(v); }) / (2.0 * beta);
    out.g_finite = true;
  } else {
    out.g_part = std::numeric_limits<double>::quiet_NaN();
    out.g_finite = false;
  }
  return out;
}

Eigen::VectorXd gradient(const SimplexPoint& x, double beta) {
  require_beta(beta);
  require_interior(x, "gradient");
  const int n = x.q() - 1;
  const double xq = x[n];
  const double lq = std::log(xq);
  Eigen::VectorXd g(n);
  for (int k = 0; k < n; ++k) g(k) = -(x[k] - xq) + (std::log(x[k]) - lq) / beta;
  return g;
}

Eigen::MatrixXd hessian(const SimplexPoint& x, double beta) {
  require_beta(beta);
  require_interior(x, "hessian");
  const int n = x.q() - 1;
  const double off = -1.0 + 1.0 / (beta * x[n]);
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(n, n, off);
  for (int k = 0; k < n; ++k) h(k, k) += -1.0 + 1.0 / (beta * x[k]);
  return h;
}

std::vector<double> HessianSpectrum::expanded() const {
  std::vector<double> out;
  for (const auto& e : eigenvalues)
    for (int m = 0; m < e.multiplicity; ++m) out.push_back(e.value);
  std::sort(out.begin(), out.end());
  return out;
}

double HessianSpectrum::determinant() const {
  double d = 1.0;
  for (const auto& e : eigenvalues) d *= std::pow(e.value, e.multiplicity);
  return d;
}

namespace {

HessianSpectrum finish(HessianSpectrum s) {
  s.index = 0;
  s.degenerate = false;
  std::vector<Eigenvalue> kept;
  for (const auto& e : s.eigenvalues) {
    if (e.multiplicity <= 0) continue;
    if (e.value < -kTolZero) s.index += e.multiplicity;
    if (std::abs(e.value) <= kTolZero) s.degenerate = true;
    kept.push_back(e);
  }
  s.eigenvalues = std::move(kept);
  return s;
}

void check_family_args(int q, int i, double t) {
  if (q < 3) throw DomainError("q must be at least 3");
  if (i < 1 || i > q - 1) throw DomainError("family index out of range");
  const int j = q - i;
  if (!(t > 0.0) || !(t < 1.0 / j)) throw DomainError("t outside (0, 1/(q-i))");
}

}  // namespace

SimplexPoint family_point(int q, int i, double t) {
  check_family_args(q, i, t);
  const int j = q - i;
  std::vector<double> x(static_cast<std::size_t>(q));
  const double large = (1.0 - j * t) / i;
  for (int k = 0; k < j; ++k) x[static_cast<std::size_t>(k)] = t;
  for (int k = j; k < q; ++k) x[static_cast<std::size_t>(k)] = large;
  // Absorb the rounding of the sum into the last coordinate.
  double s = 0.0;
  for (int k = 0; k < q - 1; ++k) s += x[static_cast<std::size_t>(k)];
  x.back() = 1.0 - s;
  return SimplexPoint(std::move(x));
}

HessianSpectrum spectrum_at_p(int q, double beta) {
  require_beta(beta);
  if (q < 3) throw DomainError("q must be at least 3");
  HessianSpectrum s;
  const double lam = (q - beta) / beta;
  s.a = -1.0 + q / beta;
  s.b = s.a;
  s.eigenvalues = {{lam, q - 2}, {q * lam, 1}};
  return finish(s);
}

HessianSpectrum spectrum_at_family_point(int q, int i, double t) {
  check_family_args(q, i, t);
  return spectrum_at_family_point(q, i, t, g(i, q, t));
}

HessianSpectrum spectrum_at_family_point(int q, int i, double t, double beta) {
  check_family_args(q, i, t);
  require_beta(beta);
  const int j = q - i;
  HessianSpectrum s;
  s.a = -1.0 + 1.0 / (beta * t);
  s.b = -1.0 + i / (beta * (1.0 - j * t));
  if (i == 1) {
    s.eigenvalues = {{s.a, q - 2}, {s.a + (q - 1) * s.b, 1}};
    return finish(s);
  }
  // Remaining two eigenvalues are the roots of l^2 - (a + q b) l + b (i a + j b).
  const double tr = s.a + q * s.b;
  const double c = s.b * (i * s.a + j * s.b);
  const double disc = std::max(0.0, tr * tr - 4.0 * c);
  double r1, r2;
  if (tr == 0.0 && c == 0.0) {
    r1 = r2 = 0.0;
  } else {
    const double big = 0.5 * (tr + std::copysign(std::sqrt(disc), tr == 0.0 ? 1.0 : tr));
    r1 = big;
    r2 = big != 0.0 ? c / big : 0.0;
  }
  s.eigenvalues = {{s.a, j - 1}, {s.b, i - 2}, {r1, 1}, {r2, 1}};
  return finish(s);
}

SignTable sign_table(int q, int i, double t) {
  check_family_args(q, i, t);
  const int j = q - i;
  const double beta = g(i, q, t);
  const double a = -1.0 + 1.0 / (beta * t);
  const double b = -1.0 + i / (beta * (1.0 - j * t));
  const double mixed = i * a + j * b;
  SignTable out;
  out.a = sign_with_tol(a, 1.0);
  out.b = sign_with_tol(b, 1.0);
  out.mixed = sign_with_tol(mixed, std::max(std::abs(i * a), std::abs(j * b)));
  out.product = out.b * out.mixed;
  return out;
}

}  // namespace potts
