#include "potts/ek.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "potts/critical.hpp"
#include "potts/errors.hpp"
#include "potts/landscape.hpp"

namespace potts {

namespace {

constexpr double kImagTol = 1e-10;

Eigen::VectorXd chart_direction(int q, int i, int j) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(q - 1);
  if (j < q - 1) v[j] += 1.0;
  if (i < q - 1) v[i] -= 1.0;
  return v;
}

// Parlett-Reinsch balancing: a diagonal similarity with powers of two that
// evens out row and column norms.
Eigen::MatrixXd balance(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  constexpr double radix = 2.0;
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index k = 0; k < n; ++k) {
      double c = 0.0, r = 0.0;
      for (Eigen::Index l = 0; l < n; ++l)
        if (l != k) {
          c += std::abs(a(l, k));
          r += std::abs(a(k, l));
        }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix, f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(k) /= f;
        a.col(k) *= f;
      }
    }
  }
  return a;
}

double neg_exp_beta_g(const SimplexPoint& x) {
  double lp = 0.0;
  for (double v : x.coords()) lp += std::log(v);
  return std::exp(-0.5 * lp);
}

void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive and finite");
}

}  // namespace

Eigen::MatrixXd pair_matrix(int q, int i, int j) {
  if (q < 2 || i < 0 || j < 0 || i >= q || j >= q || i == j) throw DomainError("invalid spin pair");
  const Eigen::VectorXd v = chart_direction(q, i, j);
  return v * v.transpose();
}

Eigen::MatrixXd matrix_A(const SimplexPoint& x) {
  if (!x.interior()) throw DomainError("the mobility matrix needs an interior point");
  const int q = x.q();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q - 1, q - 1);
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) A += std::sqrt(x[i] * x[j]) * pair_matrix(q, i, j);
  return A;
}

SimplexPoint saddle_point(int q, double beta, SaddleKind kind) {
  check_beta(beta);
  if (q < 3) throw DomainError("q must be at least 3");
  const int i = kind == SaddleKind::U2 ? 2 : 1;
  if (2 * i > q) throw RegimeError("u_2 is not a separate family for q = 3");
  FamilyRoots roots;
  try {
    roots = solve_uv(i, q, beta);
  } catch (const NoSolutionError&) {
    throw RegimeError("the saddle family does not exist at this temperature");
  }
  const double t = kind == SaddleKind::U2 ? roots.u : roots.v;
  const auto spec = spectrum_at_family_point(q, i, t, beta);
  if (spec.degenerate || spec.index != 1) throw RegimeError("the point is not a nondegenerate saddle at this temperature");
  return family_point(q, i, t);
}

ProductSpectrum product_spectrum(const SimplexPoint& x, double beta) {
  check_beta(beta);
  const Eigen::MatrixXd M = hessian(x, beta) * matrix_A(x).transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(balance(M), false);
  if (es.info() != Eigen::Success) throw InvariantError("eigensolver did not converge");
  ProductSpectrum out;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const auto ev = es.eigenvalues()[k];
    out.max_imag = std::max(out.max_imag, std::abs(ev.imag()) / scale);
    out.real.push_back(ev.real());
    if (ev.real() < 0.0) ++out.negative;
  }
  std::sort(out.real.begin(), out.real.end());
  return out;
}

double negative_eigenvalue_at(const SimplexPoint& s, double beta) {
  const auto spec = product_spectrum(s, beta);
  if (spec.max_imag > kImagTol) throw InvariantError("product spectrum has complex eigenvalues");
  if (spec.negative != 1) throw InvariantError("product spectrum does not have exactly one negative eigenvalue");
  return -spec.real.front();
}

double negative_eigenvalue(int q, double beta, SaddleKind at) {
  return negative_eigenvalue_at(saddle_point(q, beta, at), beta);
}

double omega_at(const SimplexPoint& s, double beta) {
  const double det = hessian(s, beta).determinant();
  if (!(det < 0.0)) throw RegimeError("omega needs a saddle with one negative Hessian eigenvalue");
  return negative_eigenvalue_at(s, beta) * neg_exp_beta_g(s) / std::sqrt(-det);
}

double nu_at(const SimplexPoint& m, double beta) {
  const double det = hessian(m, beta).determinant();
  if (!(det > 0.0)) throw RegimeError("nu needs a local minimum");
  return neg_exp_beta_g(m) / std::sqrt(beta * beta * det);
}

EkConstants ek_constants(int q, double beta) {
  check_beta(beta);
  if (q < 3) throw DomainError("q must be at least 3");
  const auto prof = temperature_profile(q);
  if (!(beta > prof.beta1)) throw RegimeError("no metastability for beta <= beta_1");

  EkConstants c;
  c.q = q;
  c.beta = beta;

  const double u = solve_uv(1, q, beta).u;
  const auto u1 = family_point(q, 1, u);
  const double det_u1 = spectrum_at_family_point(q, 1, u, beta).determinant();
  if (!(det_u1 > 0.0)) throw InvariantError("u_1 is not a nondegenerate minimum");
  c.nu_1 = neg_exp_beta_g(u1) / std::sqrt(beta * beta * det_u1);

  if (beta < q) {
    const double det_p = spectrum_at_p(q, beta).determinant();
    c.nu_o = neg_exp_beta_g(SimplexPoint::uniform(q)) / std::sqrt(beta * beta * det_p);
  }

  auto saddle = [&](int i, bool u_branch, std::optional<double>& mu, std::optional<double>& omega) {
    if (2 * i > q) return;
    FamilyRoots r;
    try {
      r = solve_uv(i, q, beta);
    } catch (const NoSolutionError&) {
      return;
    }
    const double t = u_branch ? r.u : r.v;
    const auto spec = spectrum_at_family_point(q, i, t, beta);
    if (spec.degenerate || spec.index != 1) return;
    const auto s = family_point(q, i, t);
    mu = negative_eigenvalue_at(s, beta);
    omega = *mu * neg_exp_beta_g(s) / std::sqrt(-spec.determinant());
  };
  saddle(1, false, c.mu_o, c.omega_o);
  saddle(2, true, c.mu_1, c.omega_1);

  const auto d = depths(q, beta);
  c.theta_1 = d.theta_1;
  c.theta_o = d.theta_o;
  return c;
}

RegimeInfo classify_regime(int q, double beta, double tol) {
  check_beta(beta);
  if (q < 3) throw DomainError("q must be at least 3");
  const auto prof = temperature_profile(q);
  if (!(beta > prof.beta1)) throw RegimeError("no metastability for beta <= beta_1");
  const double b2 = prof.beta2, b3 = prof.beta3;
  if (std::abs(beta - b2) <= tol) return {Regime::At2, "(2)"};
  if (beta < b2) return {Regime::Below2, "(1,2)"};
  if (q <= 4) {
    if (std::abs(beta - q) <= tol) return {Regime::AtQUnsupported, "q"};
    if (beta < q) return {Regime::Between23, "(2,3)"};
    return {Regime::Above3, "(3,inf)"};
  }
  if (std::abs(beta - b3) <= tol) return {Regime::At3, "(3)"};
  if (beta < b3) return {Regime::Between23, "(2,3)"};
  return {Regime::Above3, "(3,inf)"};
}

namespace {

std::vector<std::string> well_names(int q, bool with_p) {
  std::vector<std::string> s;
  if (with_p) s.push_back("o");
  for (int k = 1; k <= q; ++k) s.push_back(std::to_string(k));
  return s;
}

double need(const std::optional<double>& v, const char* what) {
  if (!v) throw RegimeError(std::string(what) + " is not defined at this temperature");
  return *v;
}

}  // namespace

ReducedDynamics reduced_chain(int q, double beta, double tol) {
  ReducedDynamics out;
  out.regime = classify_regime(q, beta, tol);
  if (out.regime.regime == Regime::AtQUnsupported)
    throw RegimeError("beta = beta_3 = q is not covered for q <= 4: p is a degenerate saddle");
  const auto c = ek_constants(q, beta);

  auto on_hat_s = [&](const std::string& name) {
    ReducedChain r;
    r.name = name;
    r.states = well_names(q, true);
    r.rates = Eigen::MatrixXd::Zero(q + 1, q + 1);
    return r;
  };
  auto on_s = [&](const std::string& name, double rate) {
    ReducedChain r;
    r.name = name;
    r.states = well_names(q, false);
    r.rates = Eigen::MatrixXd::Constant(q, q, rate);
    r.rates.diagonal().setZero();
    r.depth_name = "theta_1";
    r.depth = c.theta_1;
    return r;
  };
  // Second time scale from p: Y^(4) to every well, or Y^(5) to the merged set.
  auto from_p = [&](bool merged) {
    const double wo = need(c.omega_o, "omega_o"), no = need(c.nu_o, "nu_o");
    ReducedChain r;
    if (merged) {
      r.name = "(5)";
      r.states = {"o", "S"};
      r.rates = Eigen::MatrixXd::Zero(2, 2);
      r.rates(0, 1) = q * wo / no;
    } else {
      r = on_hat_s("(4)");
      for (int l = 1; l <= q; ++l) r.rates(0, l) = wo / no;
    }
    r.depth_name = "theta_o";
    r.depth = need(c.theta_o, "theta_o");
    return r;
  };

  switch (out.regime.regime) {
    case Regime::Below2:
    case Regime::At2: {
      const double wo = need(c.omega_o, "omega_o");
      auto r = on_hat_s(out.regime.regime == Regime::Below2 ? "(1,2)" : "(2)");
      for (int k = 1; k <= q; ++k) r.rates(k, 0) = wo / c.nu_1;
      if (out.regime.regime == Regime::At2) {
        const double no = need(c.nu_o, "nu_o");
        for (int l = 1; l <= q; ++l) r.rates(0, l) = wo / no;
      }
      r.depth_name = "theta_1";
      r.depth = c.theta_1;
      out.first = r;
      break;
    }
    case Regime::Between23:
      out.first = on_s("(2,3)", need(c.omega_o, "omega_o") / (q * c.nu_1));
      out.second = from_p(false);
      break;
    case Regime::At3:
      out.first = on_s("(3)", (need(c.omega_o, "omega_o") / q + need(c.omega_1, "omega_1")) / c.nu_1);
      out.second = from_p(false);
      break;
    case Regime::Above3: {
      const double w = q == 3 ? need(c.omega_o, "omega_o") : need(c.omega_1, "omega_1");
      out.first = on_s("(3,inf)", w / c.nu_1);
      if (q >= 5 && beta < q) out.second = from_p(true);
      break;
    }
    case Regime::AtQUnsupported:
      break;
  }
  return out;
}

Prediction ek_prediction(int q, double beta, int N, Transition transition) {
  if (N < 1) throw DomainError("N must be positive");
  const auto prof = temperature_profile(q);
  if (!(beta > prof.beta1)) throw RegimeError("no metastability for beta <= beta_1");
  Prediction p;
  switch (transition) {
    case Transition::WellToP: {
      if (beta > prof.beta2) throw RegimeError("u_1 -> p needs beta in (beta_1, beta_2]");
      const auto c = ek_constants(q, beta);
      p.prefactor = c.nu_1 / need(c.omega_o, "omega_o");
      p.depth = c.theta_1;
      break;
    }
    case Transition::PToWells: {
      if (beta < prof.beta2 || beta >= q) throw RegimeError("p -> U_1 needs beta in [beta_2, q)");
      const auto c = ek_constants(q, beta);
      p.prefactor = need(c.nu_o, "nu_o") / (q * need(c.omega_o, "omega_o"));
      p.depth = need(c.theta_o, "theta_o");
      break;
    }
    case Transition::WellToWells: {
      if (!(beta > prof.beta3)) throw RegimeError("u_1 -> U_1 needs beta > beta_3");
      const auto c = ek_constants(q, beta);
      const double w = q == 3 ? need(c.omega_o, "omega_o") : need(c.omega_1, "omega_1");
      p.prefactor = c.nu_1 / ((q - 1) * w);
      p.depth = c.theta_1;
      break;
    }
    default:
      throw DomainError("unknown transition");
  }
  p.mean_time = p.prefactor * 2.0 * M_PI * N * std::exp(N * p.depth);
  return p;
}

FrozenWeightCheck frozen_weight_check(const SimplexPoint& s, double beta, int N) {
  check_beta(beta);
  if (N < 2) throw DomainError("N must be at least 2");
  const int q = s.q();
  const int d = q - 1;
  const Eigen::MatrixXd Hs = hessian(s, beta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs);
  const Eigen::VectorXd lam = es.eigenvalues();
  if (!(lam[0] < 0.0) || (d > 1 && !(lam[1] > 0.0))) throw RegimeError("the point is not a nondegenerate saddle");
  const double eps = std::pow(static_cast<double>(N), -0.4);
  Eigen::VectorXd half(d);
  half[0] = eps;
  for (int k = 1; k < d; ++k) half[k] = std::sqrt(2.0 * -lam[0] / lam[k]) * eps;

  Eigen::VectorXd sc(d);
  for (int k = 0; k < d; ++k) sc[k] = s[k];

  // f(y) = exp(a.y) + (b.y)^2 on the chart.
  Eigen::VectorXd a(d), b(d);
  for (int k = 0; k < d; ++k) {
    a[k] = 0.7 - 0.45 * k;
    b[k] = 0.5 + 0.3 * ((k % 2) ? -k : k);
  }
  auto f = [&](const Eigen::VectorXd& y) {
    const double t = b.dot(y);
    return std::exp(a.dot(y)) + t * t;
  };

  std::vector<Eigen::MatrixXd> pairs;
  std::vector<Eigen::VectorXd> dirs;
  std::vector<double> w;
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) {
      dirs.push_back(chart_direction(q, i, j));
      pairs.push_back(pair_matrix(q, i, j));
      w.push_back(std::sqrt(s[i] * s[j]));
    }

  // Sup-norm radius of the box in the chart, then a scan of the lattice
  // points within it.
  Eigen::VectorXd radius = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < d; ++k) radius += half[k] * es.eigenvectors().col(k).cwiseAbs();
  std::vector<int> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    lo[static_cast<std::size_t>(k)] = std::max(1, static_cast<int>(std::floor(N * (sc[k] - radius[k]))));
    hi[static_cast<std::size_t>(k)] = std::min(N - 1, static_cast<int>(std::ceil(N * (sc[k] + radius[k]))));
  }

  FrozenWeightCheck out;
  out.N = N;
  double worst = 0.0, scale = 0.0;
  std::vector<int> n(static_cast<std::size_t>(q));
  Eigen::VectorXd y(d);
  auto visit = [&]() {
    int used = 0;
    for (int k = 0; k < d; ++k) used += n[static_cast<std::size_t>(k)];
    n[static_cast<std::size_t>(d)] = N - used;
    if (n[static_cast<std::size_t>(d)] < 1) return;
    for (int k = 0; k < d; ++k) y[k] = static_cast<double>(n[static_cast<std::size_t>(k)]) / N;
    const Eigen::VectorXd coord = es.eigenvectors().transpose() * (y - sc);
    for (int k = 0; k < d; ++k)
      if (std::abs(coord[k]) > half[k]) return;
    ++out.points;

    const double fx = f(y);
    double direct = 0.0;
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) {
        if (i == j) continue;
        const double rate = static_cast<double>(n[static_cast<std::size_t>(i)]) / N *
                            std::exp(beta * (n[static_cast<std::size_t>(j)] - n[static_cast<std::size_t>(i)] + 1) / (2.0 * N));
        direct += rate * (f(y + chart_direction(q, i, j) / N) - fx);
      }

    const double ea = std::exp(a.dot(y));
    const Eigen::VectorXd grad = ea * a + 2.0 * b.dot(y) * b;
    const Eigen::MatrixXd hess = ea * a * a.transpose() + 2.0 * b * b.transpose();
    const Eigen::VectorXd drift = Hs * (y - sc);
    double frozen = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const double diffusion = dirs[p].dot(hess * dirs[p]) / (static_cast<double>(N) * N);
      const double transport = beta / N * (pairs[p] * drift).dot(grad);
      frozen += w[p] * (diffusion - transport);
    }
    worst = std::max(worst, std::abs(direct - frozen));
    scale = std::max(scale, std::abs(frozen));
  };
  // Odometer over the first d counts.
  for (int k = 0; k < d; ++k) n[static_cast<std::size_t>(k)] = lo[static_cast<std::size_t>(k)];
  while (true) {
    visit();
    int k = 0;
    while (k < d && ++n[static_cast<std::size_t>(k)] > hi[static_cast<std::size_t>(k)]) {
      n[static_cast<std::size_t>(k)] = lo[static_cast<std::size_t>(k)];
      ++k;
    }
    if (k == d) break;
  }
  if (out.points == 0 || scale == 0.0) throw ResolutionError("no lattice point in the box around the saddle");
  out.discrepancy = worst / scale;
  return out;
}

}  // namespace potts
