#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "potts/chain.hpp"
#include "potts/critical.hpp"
#include "potts/ek.hpp"
#include "potts/errors.hpp"
#include "potts/landscape.hpp"
#include "potts/potential.hpp"

namespace py = pybind11;
using namespace potts;

namespace {

py::object opt(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

SimplexPoint point_of(const std::vector<double>& x) { return SimplexPoint(x); }

std::vector<char> mask_of(const MagnetizationChain& ch, const std::vector<std::uint32_t>& states) {
  return state_mask(ch, states);
}

}  // namespace

PYBIND11_MODULE(_potts, m) {
  m.doc() = "Mean-field Potts landscape, magnetization chain and transition-time constants";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NoSolutionError>(m, "NoSolutionError", PyExc_ValueError);
  py::register_exception<RegimeError>(m, "RegimeError", PyExc_ValueError);
  py::register_exception<SizeError>(m, "SizeError", PyExc_MemoryError);
  py::register_exception<ResolutionError>(m, "ResolutionError", PyExc_RuntimeError);
  py::register_exception<StructuralError>(m, "StructuralError", PyExc_RuntimeError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_ArithmeticError);

  m.def("potential", [](const std::vector<double>& x, double beta) { return potential(point_of(x), beta).f; },
        py::arg("x"), py::arg("beta"));
  m.def("gradient", [](const std::vector<double>& x, double beta) { return gradient(point_of(x), beta); },
        py::arg("x"), py::arg("beta"));
  m.def("hessian", [](const std::vector<double>& x, double beta) { return hessian(point_of(x), beta); },
        py::arg("x"), py::arg("beta"));

  m.def("beta_c", &beta_c, py::arg("q"));
  m.def("beta_m", [](int q) { return beta_m(q).value; }, py::arg("q"));
  m.def("temperature_profile", [](int q) {
    const auto p = temperature_profile(q);
    py::dict d;
    d["beta1"] = p.beta1;
    d["beta2"] = p.beta2;
    d["beta3"] = p.beta3;
    d["beta4"] = p.beta4;
    py::dict s;
    for (const auto& [i, v] : p.beta_s) s[py::int_(i)] = v.value;
    d["beta_s"] = s;
    return d;
  }, py::arg("q"));
  m.def("critical_points", [](int q, double beta) {
    py::list out;
    for (const auto& cp : enumerate_critical_points(q, beta)) {
      py::dict d;
      d["name"] = cp.name();
      d["t"] = cp.t;
      d["coords"] = cp.location.coords();
      d["classification"] = to_string(cp.label);
      d["index"] = cp.spectrum.index;
      d["orbit_size"] = cp.orbit_size;
      d["eigenvalues"] = cp.spectrum.expanded();
      out.append(d);
    }
    return out;
  }, py::arg("q"), py::arg("beta"));

  m.def("free_energy", &free_energy, py::arg("q"), py::arg("beta"));
  m.def("grid_free_energy", &grid_free_energy, py::arg("q"), py::arg("beta"), py::arg("M"));
  m.def("wells", [](int q, double beta, int M) {
    const auto w = wells(q, beta, M);
    py::dict d;
    d["saddle_height"] = w.saddle_height;
    d["labels"] = w.labels;
    std::vector<std::size_t> sizes;
    for (const auto& c : w.components) sizes.push_back(c.size());
    d["sizes"] = sizes;
    std::vector<std::pair<int, int>> gates;
    for (const auto& kv : w.gates) gates.push_back(kv.first);
    d["gates"] = gates;
    return d;
  }, py::arg("q"), py::arg("beta"), py::arg("M"));

  m.def("regime", [](int q, double beta, double tol) { return classify_regime(q, beta, tol).name; }, py::arg("q"),
        py::arg("beta"), py::arg("tol") = 0.0);
  m.def("ek_constants", [](int q, double beta) {
    const auto c = ek_constants(q, beta);
    py::dict d;
    d["mu_1"] = opt(c.mu_1);
    d["mu_o"] = opt(c.mu_o);
    d["omega_1"] = opt(c.omega_1);
    d["omega_o"] = opt(c.omega_o);
    d["nu_1"] = c.nu_1;
    d["nu_o"] = opt(c.nu_o);
    d["theta_1"] = c.theta_1;
    d["theta_o"] = opt(c.theta_o);
    return d;
  }, py::arg("q"), py::arg("beta"));
  m.def("reduced_chain", [](int q, double beta, double tol) {
    const auto r = reduced_chain(q, beta, tol);
    auto one = [](const ReducedChain& c) {
      py::dict d;
      d["name"] = c.name;
      d["states"] = c.states;
      d["rates"] = c.rates;
      d["depth_name"] = c.depth_name;
      d["depth"] = c.depth;
      return d;
    };
    py::dict d;
    d["regime"] = r.regime.name;
    d["first"] = one(r.first);
    d["second"] = r.second ? py::object(one(*r.second)) : py::none();
    return d;
  }, py::arg("q"), py::arg("beta"), py::arg("tol") = 0.0);
  m.def("ek_prediction", [](int q, double beta, int N, int transition) {
    if (transition < 1 || transition > 3) throw DomainError("transition must be 1, 2 or 3");
    return ek_prediction(q, beta, N, static_cast<Transition>(transition)).mean_time;
  }, py::arg("q"), py::arg("beta"), py::arg("N"), py::arg("transition"));

  py::class_<MagnetizationChain>(m, "MagnetizationChain")
      .def(py::init<int, int, double, std::uint64_t>(), py::arg("q"), py::arg("N"), py::arg("beta"),
           py::arg("cap") = MagnetizationChain::kDefaultCap)
      .def_property_readonly("size", &MagnetizationChain::size)
      .def("state_of", &MagnetizationChain::state_of, py::arg("counts"))
      .def("counts", &MagnetizationChain::counts, py::arg("state"))
      .def("nearest", [](const MagnetizationChain& ch, const std::vector<double>& x) { return ch.nearest(point_of(x)); },
           py::arg("x"))
      .def("rate", &MagnetizationChain::rate, py::arg("state"), py::arg("i"), py::arg("j"))
      .def_property_readonly("log_pi", &MagnetizationChain::log_pi)
      .def("mean_hitting_time", [](const MagnetizationChain& ch, std::uint32_t start,
                                    const std::vector<std::uint32_t>& target) {
        return exact_mean_hitting_time(ch, start, mask_of(ch, target));
      }, py::arg("start"), py::arg("target"))
      .def("sample_hitting_times", [](const MagnetizationChain& ch, std::uint32_t start,
                                       const std::vector<std::uint32_t>& target, int runs, std::uint64_t seed) {
        py::gil_scoped_release release;
        return sample_hitting_times(ch, start, mask_of(ch, target), runs, seed);
      }, py::arg("start"), py::arg("target"), py::arg("runs"), py::arg("seed"));
}
