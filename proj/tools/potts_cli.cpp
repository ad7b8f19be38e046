#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include "potts/chain.hpp"
#include "potts/critical.hpp"
#include "potts/ek.hpp"
#include "potts/errors.hpp"
#include "potts/landscape.hpp"
#include "table.hpp"

#ifndef POTTS_VERSION
#define POTTS_VERSION "0.0.0"
#endif

using namespace potts;
using potts_cli::Cell;
using potts_cli::Header;
using potts_cli::Table;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDomain = 3;
constexpr int kExitVerify = 4;

struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Output {
  std::string dir = ".";
  std::string format = "csv";
  bool quiet = false;

  std::filesystem::path directory() const {
    if (const char* env = std::getenv("POTTS_OUTPUT_DIR"); env && *env) return env;
    return dir;
  }
};

std::string fmt(double v) { return potts_cli::format_double(v); }

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

// Regime label used in headers. Temperatures at or below beta_1 have no
// metastable wells of u_1.
std::string regime_label(int q, double beta, double tol = 0.0) {
  if (q < 3) return "none";
  try {
    const auto r = classify_regime(q, beta, tol);
    if (r.regime == Regime::AtQUnsupported) return "beta=q";
    return r.name;
  } catch (const RegimeError&) {
    return "(0,beta_1]";
  }
}

Header base_header(const std::string& command, const std::vector<std::pair<std::string, std::string>>& config) {
  Header h{{"version", POTTS_VERSION}, {"command", command}};
  for (const auto& kv : config) h.emplace_back("config." + kv.first, kv.second);
  return h;
}

void emit(const Output& out, const std::string& stem, const Header& header, const Table& table) {
  const auto path = potts_cli::write_table(out.directory(), stem, out.format, header, table);
  if (!out.quiet) std::cout << path.string() << '\n';
}

void require_q(int q, int lo, int hi) {
  if (q < lo || q > hi) throw CLI::ValidationError("--q", "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

// ---------------------------------------------------------------- critical

void cmd_critical(const Output& out, int q, std::optional<double> beta) {
  std::vector<std::pair<std::string, std::string>> cfg{{"q", std::to_string(q)}};
  if (beta) cfg.emplace_back("beta", fmt(*beta));
  auto header = base_header("critical", cfg);
  if (beta) header.emplace_back("regime", regime_label(q, *beta));

  if (!beta) {
    const auto prof = temperature_profile(q);
    Table t{"profile", {"name", "value", "bracket_lo", "bracket_hi", "certified"}, {}};
    for (const auto& [i, s] : prof.beta_s)
      t.add({"beta_s" + std::to_string(i), s.value, s.bracket.lo, s.bracket.hi, std::int64_t{s.bracket.certified}});
    t.add({"beta_c", prof.beta_c, NAN, NAN, std::int64_t{0}});
    t.add({"beta_m", prof.beta_m.value, prof.beta_m.bracket.lo, prof.beta_m.bracket.hi,
           std::int64_t{prof.beta_m.bracket.certified}});
    t.add({"beta1", prof.beta1, NAN, NAN, std::int64_t{0}});
    t.add({"beta2", prof.beta2, NAN, NAN, std::int64_t{0}});
    t.add({"beta3", prof.beta3, NAN, NAN, std::int64_t{0}});
    t.add({"beta4", prof.beta4, NAN, NAN, std::int64_t{0}});
    emit(out, "critical", header, t);
    if (!out.quiet)
      std::cout << "beta1 " << fmt(prof.beta1) << " < beta2 " << fmt(prof.beta2) << " < beta3 " << fmt(prof.beta3)
                << (prof.beta3 == prof.beta4 ? " = " : " < ") << "beta4 " << fmt(prof.beta4) << '\n';
    return;
  }

  Table t{"points", {"name", "t", "coords", "classification", "index", "orbit_size", "eigenvalues", "potential"}, {}};
  for (const auto& cp : enumerate_critical_points(q, *beta)) {
    t.add({cp.name(), cp.t, join(cp.location.coords()), to_string(cp.label), std::int64_t{cp.spectrum.index},
           static_cast<std::int64_t>(cp.orbit_size), join(cp.spectrum.expanded()), potential(cp.location, *beta).f});
  }
  emit(out, "critical", header, t);
  if (!out.quiet)
    for (const auto& r : t.rows)
      std::cout << potts_cli::cell_text(r[0]) << ": " << potts_cli::cell_text(r[3]) << '\n';
}

// ---------------------------------------------------------------- landscape

void cmd_landscape(const Output& out, int q, double beta, int M) {
  if (q >= 6) throw DomainError("landscape is limited to q <= 5; the grid grows like M^(q-1)");
  require_q(q, 3, 5);
  auto header = base_header("landscape", {{"q", std::to_string(q)}, {"beta", fmt(beta)}, {"M", std::to_string(M)}});
  header.emplace_back("regime", regime_label(q, beta));

  const auto w = wells(q, beta, M);
  const auto& grid = *w.grid;
  header.emplace_back("saddle_height", fmt(w.saddle_height));
  header.emplace_back("level", fmt(w.level));
  if (q >= 3 && beta > temperature_profile(q).beta1) {
    const auto d = depths(q, beta);
    header.emplace_back("theta_1", fmt(d.theta_1));
    header.emplace_back("theta_o", d.theta_o ? fmt(*d.theta_o) : "none");
  }

  Table comps{"wells", {"component", "labels", "nodes", "min_potential", "argmin"}, {}};
  for (std::size_t c = 0; c < w.components.size(); ++c) {
    double best = INFINITY;
    std::uint32_t arg = 0;
    for (auto n : w.components[c])
      if (w.values[n] < best) best = w.values[n], arg = n;
    comps.add({static_cast<std::int64_t>(c), join(w.labels[c]), static_cast<std::int64_t>(w.components[c].size()), best,
               join(grid.coords(arg))});
  }
  Table gates{"gates", {"a", "b", "nodes", "min_potential", "argmin"}, {}};
  for (const auto& [pair, nodes] : w.gates) {
    double best = INFINITY;
    std::uint32_t arg = nodes.empty() ? 0 : nodes.front();
    for (auto n : nodes)
      if (w.values[n] < best) best = w.values[n], arg = n;
    gates.add({std::int64_t{pair.first}, std::int64_t{pair.second}, static_cast<std::int64_t>(nodes.size()), best,
               join(grid.coords(arg))});
  }
  emit(out, "landscape", header, comps);
  emit(out, "landscape", header, gates);
}

// ---------------------------------------------------------------- simulate

int parse_well(const std::string& s, int q) {
  if (s == "o" || s == "p") return kWellOfP;
  int k = 0;
  try {
    k = std::stoi(s);
  } catch (const std::exception&) {
    throw CLI::ValidationError("well", "expected o or a label 1..q, got '" + s + "'");
  }
  if (k < 1 || k > q) throw CLI::ValidationError("well", "label out of range: " + s);
  return k;
}

struct SimulateArgs {
  int q = 3;
  int N = 12;
  double beta = 3.5;
  std::string start = "1";
  std::string target = "others";
  int runs = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::uint64_t cap = 200'000;
  double regime_tol = 0.0;
};

void cmd_simulate(const Output& out, const SimulateArgs& a) {
  if (a.runs < 0) throw CLI::ValidationError("--runs", "must be nonnegative");
  require_q(a.q, 3, 64);
  const int from = parse_well(a.start, a.q);
  std::vector<int> to;
  if (a.target == "others") {
    for (int k = 1; k <= a.q; ++k)
      if (k != from) to.push_back(k);
  } else {
    std::stringstream ss(a.target);
    std::string item;
    while (std::getline(ss, item, ',')) to.push_back(parse_well(item, a.q));
  }
  if (to.empty()) throw CLI::ValidationError("--target", "empty target");

  const auto minima = labeled_minima(a.q, a.beta);
  auto locate = [&](int label) {
    for (const auto& m : minima)
      if (m.label == label) return m.point;
    throw RegimeError("well " + (label == kWellOfP ? std::string("o") : std::to_string(label)) +
                      " has no minimum at this temperature");
  };

  // The chain is stored up to a fixed limit; exact solves are limited by --cap.
  const std::uint64_t states = composition_count(a.q, a.N);
  const std::uint64_t storage_cap = std::max<std::uint64_t>(a.cap, 10'000'000);
  const MagnetizationChain chain(a.q, a.N, a.beta, storage_cap);
  const std::uint32_t start = chain.nearest(locate(from));
  std::vector<std::uint32_t> target_states;
  for (int k : to) target_states.push_back(chain.nearest(locate(k)));
  const auto target = state_mask(chain, target_states);

  std::string notice = "none";
  const bool exact_ok = states <= a.cap;
  if (!exact_ok) {
    if (a.runs == 0) throw SizeError("state space exceeds --cap and --runs is 0; nothing to compute");
    notice = "state space " + std::to_string(states) + " exceeds cap " + std::to_string(a.cap) + "; Monte Carlo only";
    std::cerr << "notice: " << notice << '\n';
  }

  const double exact = exact_ok ? exact_mean_hitting_time(chain, start, target) : NAN;
  double mean = NAN, se = NAN;
  if (a.runs > 0) {
    const auto t = sample_hitting_times(chain, start, target, a.runs, a.seed, a.threads);
    mean = std::accumulate(t.begin(), t.end(), 0.0) / t.size();
    double ss = 0.0;
    for (double v : t) ss += (v - mean) * (v - mean);
    se = t.size() > 1 ? std::sqrt(ss / (t.size() - 1) / t.size()) : NAN;
  }

  // Eyring-Kramers comparison when the start/target pair is one of the three
  // transitions with a prediction.
  std::optional<Transition> tr;
  const bool all_wells = static_cast<int>(to.size()) == a.q && std::find(to.begin(), to.end(), kWellOfP) == to.end();
  const bool other_wells = from != kWellOfP && static_cast<int>(to.size()) == a.q - 1 &&
                           std::find(to.begin(), to.end(), kWellOfP) == to.end() &&
                           std::find(to.begin(), to.end(), from) == to.end();
  if (from != kWellOfP && to == std::vector<int>{kWellOfP}) tr = Transition::WellToP;
  if (from == kWellOfP && all_wells) tr = Transition::PToWells;
  if (other_wells) tr = Transition::WellToWells;
  double pred = NAN;
  std::string pred_note = "no prediction for this start/target pair";
  if (tr) {
    try {
      pred = ek_prediction(a.q, a.beta, a.N, *tr).mean_time;
      pred_note = "transition " + std::to_string(static_cast<int>(*tr)) + "; mean_time = prefactor * 2 pi N exp(N theta)";
    } catch (const RegimeError& e) {
      pred_note = e.what();
    }
  }

  auto header = base_header("simulate", {{"q", std::to_string(a.q)},
                                         {"N", std::to_string(a.N)},
                                         {"beta", fmt(a.beta)},
                                         {"start", a.start},
                                         {"target", a.target},
                                         {"runs", std::to_string(a.runs)},
                                         {"seed", std::to_string(a.seed)},
                                         {"cap", std::to_string(a.cap)}});
  header.emplace_back("regime", regime_label(a.q, a.beta, a.regime_tol));
  header.emplace_back("states", std::to_string(states));
  header.emplace_back("notice", notice);
  header.emplace_back("prediction", pred_note);

  Table t{"hitting", {"start_state", "target_states", "exact", "mc_mean", "mc_se", "z", "ek_prediction", "exact_over_ek"}, {}};
  std::string ts;
  for (auto s : target_states) ts += (ts.empty() ? "" : " ") + join(chain.counts(s));
  const double z = (std::isfinite(exact) && std::isfinite(se) && se > 0) ? (mean - exact) / se : NAN;
  t.add({join(chain.counts(start)), ts, exact, mean, se, z, pred, exact / pred});
  emit(out, "simulate", header, t);
  if (!out.quiet)
    std::cout << "exact " << fmt(exact) << "  mc " << fmt(mean) << " +- " << fmt(se) << "  ek " << fmt(pred) << '\n';
}

// ---------------------------------------------------------------- ek

void cmd_ek(const Output& out, int q, double beta, const std::vector<int>& Ns, double tol) {
  require_q(q, 3, 64);
  auto header = base_header("ek", {{"q", std::to_string(q)}, {"beta", fmt(beta)}, {"N", join(Ns)}, {"regime_tol", fmt(tol)}});
  const auto dyn = reduced_chain(q, beta, tol);
  header.emplace_back("regime", dyn.regime.name);
  header.emplace_back("time_scale", "mean_time = prefactor * 2 pi N exp(N theta)");

  const auto c = ek_constants(q, beta);
  auto opt = [](const std::optional<double>& v) -> Cell { return v ? Cell{*v} : Cell{std::string("none")}; };
  Table consts{"constants", {"name", "value"}, {}};
  consts.add({"mu_1", opt(c.mu_1)});
  consts.add({"mu_o", opt(c.mu_o)});
  consts.add({"omega_1", opt(c.omega_1)});
  consts.add({"omega_o", opt(c.omega_o)});
  consts.add({"nu_1", c.nu_1});
  consts.add({"nu_o", opt(c.nu_o)});
  consts.add({"theta_1", c.theta_1});
  consts.add({"theta_o", opt(c.theta_o)});
  emit(out, "ek", header, consts);

  Table rates{"reduced", {"chain", "scale", "from", "to", "rate"}, {}};
  auto add_chain = [&](const ReducedChain& r) {
    for (std::size_t i = 0; i < r.states.size(); ++i)
      for (std::size_t j = 0; j < r.states.size(); ++j)
        if (i != j && r.rates(i, j) > 0.0)
          rates.add({r.name, r.depth_name, r.states[i], r.states[j], r.rates(i, j)});
  };
  add_chain(dyn.first);
  if (dyn.second) add_chain(*dyn.second);
  emit(out, "ek", header, rates);

  Table preds{"predictions", {"transition", "N", "prefactor", "theta", "mean_time"}, {}};
  for (auto tr : {Transition::WellToP, Transition::PToWells, Transition::WellToWells}) {
    for (int N : Ns) {
      try {
        const auto p = ek_prediction(q, beta, N, tr);
        preds.add({std::int64_t{static_cast<int>(tr)}, std::int64_t{N}, p.prefactor, p.depth, p.mean_time});
      } catch (const RegimeError&) {
        break;
      }
    }
  }
  emit(out, "ek", header, preds);
}

// ---------------------------------------------------------------- free-energy

void cmd_free_energy(const Output& out, int q, double lo, double hi, int steps, int M) {
  require_q(q, 3, 64);
  if (!(lo > 0.0 && hi > lo) || steps < 2) throw CLI::ValidationError("beta grid", "need 0 < beta-lo < beta-hi and steps >= 2");
  if (M > 0 && q > 5) throw DomainError("grid comparison is limited to q <= 5");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) betas[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (steps - 1);
  const auto curve = free_energy_curve(q, betas);

  auto header = base_header("free-energy", {{"q", std::to_string(q)}, {"beta_lo", fmt(lo)}, {"beta_hi", fmt(hi)},
                                            {"steps", std::to_string(steps)}, {"M", std::to_string(M)}});
  header.emplace_back("regime", "beta_2 = " + fmt(curve.transition));
  header.emplace_back("gap_at_transition", fmt(curve.gap));
  header.emplace_back("slope_jump_numeric", fmt(curve.jump_numeric));
  header.emplace_back("slope_jump_analytic", fmt(curve.jump_analytic));

  Table t{"curve", {"beta", "psi", "grid_psi", "regime"}, {}};
  for (std::size_t k = 0; k < betas.size(); ++k)
    t.add({betas[k], curve.psi[k], M > 0 ? grid_free_energy(q, betas[k], M) : NAN, regime_label(q, betas[k])});
  emit(out, "free-energy", header, t);
}

// ---------------------------------------------------------------- verify

void cmd_verify(const Output& out, int q_lo, int q_hi, unsigned threads) {
  if (q_lo < 3 || q_hi < q_lo) throw CLI::ValidationError("--q-lo/--q-hi", "need 3 <= q-lo <= q-hi");
  if (q_hi > 6500) throw DomainError("the certified range ends at q = 6500");
  auto header = base_header("verify", {{"q_lo", std::to_string(q_lo)}, {"q_hi", std::to_string(q_hi)}});
  bool ok = true;

  Table order{"ordering", {"q", "beta1", "beta2", "beta3", "beta4", "ordered"}, {}};
  for (int q = q_lo; q <= std::min(q_hi, 20); ++q) {
    const auto p = temperature_profile(q);
    const bool good = p.beta1 < p.beta2 && p.beta2 < p.beta3 && p.beta3 <= p.beta4 && p.beta4 == q &&
                      ((q <= 4) == (p.beta3 == q));
    ok = ok && good;
    order.add({std::int64_t{q}, p.beta1, p.beta2, p.beta3, p.beta4, std::int64_t{good}});
  }

  if (q_hi >= 5) {
    const auto rep = verify_appendix(std::max(q_lo, 5), q_hi, threads);
    Table rows{"appendix", {"q", "beta_s2_lo", "beta_s2_hi", "margin_gap", "margin_derivative", "consistent"}, {}};
    for (const auto& r : rep.rows)
      rows.add({std::int64_t{r.q}, r.beta_s2.lo, r.beta_s2.hi, r.margin_gap,
                r.margin_derivative ? Cell{*r.margin_derivative} : Cell{std::string("none")},
                std::int64_t{r.brackets_consistent}});
    header.emplace_back("gap_ok", rep.gap_ok ? "true" : "false");
    header.emplace_back("derivative_ok", rep.derivative_ok ? "true" : "false");
    header.emplace_back("f_star_6500", rep.f_star_lower ? fmt(*rep.f_star_lower) : "not in range");
    header.emplace_back("f_star_ok", rep.f_star_ok ? "true" : "false");
    header.emplace_back("brackets_consistent", rep.consistent ? "true" : "false");
    ok = ok && rep.passed();
    if (!out.quiet && rep.f_star_lower) std::cout << "f_star(6500) lower bound " << fmt(*rep.f_star_lower) << '\n';

    // Free-energy kink at beta_2 for the smallest q in range.
    const int qk = std::max(q_lo, 5);
    const auto c = free_energy_curve(qk, {});
    const bool kink = c.gap < 1e-9 && std::abs(c.jump_numeric - c.jump_analytic) < 1e-4;
    header.emplace_back("kink_q", std::to_string(qk));
    header.emplace_back("kink_ok", kink ? "true" : "false");
    ok = ok && kink;
    emit(out, "verify", header, rows);
  }
  header.emplace_back("passed", ok ? "true" : "false");
  emit(out, "verify", header, order);
  if (!out.quiet) std::cout << (ok ? "verification passed" : "verification FAILED") << '\n';
  if (!ok) throw VerificationFailure("verification failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field Potts landscape and metastability tool"};
  app.set_version_flag("--version", POTTS_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  Output out;
  app.add_option("-o,--out-dir", out.dir, "Output directory (POTTS_OUTPUT_DIR overrides)");
  app.add_option("--format", out.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--quiet", out.quiet, "Do not print a summary");

  int q = 3;
  std::optional<double> beta;
  auto* crit = app.add_subcommand("critical", "Critical temperatures, or classified critical points at one beta");
  crit->add_option("--q", q)->required();
  crit->add_option("--beta", beta);

  double lbeta = 3.5;
  int M = 120;
  auto* land = app.add_subcommand("landscape", "Well decomposition and saddle gates on a grid");
  land->add_option("--q", q)->required();
  land->add_option("--beta", lbeta)->required();
  land->add_option("--M", M, "Grid resolution")->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* simc = app.add_subcommand("simulate", "Monte Carlo and exact mean hitting times");
  simc->add_option("--q", sim.q)->required();
  simc->add_option("--N", sim.N)->required()->check(CLI::Range(1, 65535));
  simc->add_option("--beta", sim.beta)->required()->check(CLI::NonNegativeNumber);
  simc->add_option("--start", sim.start, "Starting well: o or 1..q");
  simc->add_option("--target", sim.target, "Comma-separated wells, or 'others'");
  simc->add_option("--runs", sim.runs);
  simc->add_option("--seed", sim.seed);
  simc->add_option("--threads", sim.threads);
  simc->add_option("--cap", sim.cap, "Largest state space for the exact solve");
  simc->add_option("--regime-tol", sim.regime_tol);

  double ebeta = 3.5, tol = 0.0;
  std::vector<int> Ns{10, 20, 40, 80};
  auto* ek = app.add_subcommand("ek", "Eyring-Kramers constants, reduced chains and predicted times");
  ek->add_option("--q", q)->required();
  ek->add_option("--beta", ebeta)->required();
  ek->add_option("--N", Ns, "System sizes for the predictions")->check(CLI::PositiveNumber);
  ek->add_option("--regime-tol", tol, "Tolerance for landing on a regime boundary");

  double lo = 2.0, hi = 4.0;
  int steps = 41, fM = 0;
  auto* fe = app.add_subcommand("free-energy", "Free energy over a beta grid");
  fe->add_option("--q", q)->required();
  fe->add_option("--beta-lo", lo);
  fe->add_option("--beta-hi", hi);
  fe->add_option("--steps", steps);
  fe->add_option("--M", fM, "Also minimise over a grid of this resolution");

  int q_lo = 5, q_hi = 6500;
  unsigned vthreads = 0;
  auto* ver = app.add_subcommand("verify", "Certified inequalities and temperature ordering");
  ver->add_option("--q-lo", q_lo);
  ver->add_option("--q-hi", q_hi);
  ver->add_option("--threads", vthreads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*crit) {
      require_q(q, 3, 64);
      cmd_critical(out, q, beta);
    } else if (*land) {
      cmd_landscape(out, q, lbeta, M);
    } else if (*simc) {
      cmd_simulate(out, sim);
    } else if (*ek) {
      cmd_ek(out, q, ebeta, Ns, tol);
    } else if (*fe) {
      cmd_free_energy(out, q, lo, hi, steps, fM);
    } else if (*ver) {
      cmd_verify(out, q_lo, q_hi, vthreads);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const VerificationFailure& e) {
    std::cerr << e.what() << '\n';
    return kExitVerify;
  } catch (const InvariantError& e) {
    std::cerr << "numerical check failed: " << e.what() << '\n';
    return kExitVerify;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const RegimeError& e) {
    std::cerr << "regime error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const NoSolutionError& e) {
    std::cerr << "no solution: " << e.what() << '\n';
    return kExitDomain;
  } catch (const SizeError& e) {
    std::cerr << "size error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const ResolutionError& e) {
    std::cerr << "resolution error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
