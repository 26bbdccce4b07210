#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "mpp/errors.hpp"
#include "mpp/pressure.hpp"
#include "mpp/run.hpp"
#include "mpp/spectral.hpp"
#include "mpp/sweep.hpp"
#include "mpp/tilted.hpp"

namespace py = pybind11;
using namespace mpp;

namespace {

py::dict curve_points(const std::vector<CurvePoint>& pts) {
  py::list s, p, unc, d2, ok;
  for (const auto& c : pts) {
    s.append(c.s);
    p.append(c.ok ? c.P : NAN);
    unc.append(c.uncertainty);
    d2.append(c.D2);
    ok.append(c.ok);
  }
  py::dict d;
  d["s"] = s;
  d["P"] = p;
  d["uncertainty"] = unc;
  d["D2"] = d2;
  d["ok"] = ok;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mpp, m) {
  m.doc() = "Pressure functions of weighted random matrix products.";
  m.attr("__version__") = kToolVersion;

  static py::exception<Error> error(m, "MppError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error((e.kind() + ": " + e.what()).c_str());
    }
  });

  py::class_<MatrixEnsemble>(m, "Ensemble")
      .def_property_readonly("dim", &MatrixEnsemble::dim)
      .def_property_readonly("size", &MatrixEnsemble::size)
      .def_property_readonly("mode", [](const MatrixEnsemble& e) { return to_string(e.mode()); })
      .def_property_readonly("norm", [](const MatrixEnsemble& e) { return to_string(e.norm()); })
      .def_property_readonly("labels",
                             [](const MatrixEnsemble& e) {
                               std::vector<std::string> out;
                               for (const auto& l : e.letters()) out.push_back(l.label);
                               return out;
                             })
      .def("weights", &MatrixEnsemble::weights)
      .def("to_text", [](const MatrixEnsemble& e) { return write_ensemble(e); })
      .def("__repr__", [](const MatrixEnsemble& e) {
        return "<Ensemble d=" + std::to_string(e.dim()) + " letters=" +
               std::to_string(e.size()) + " " + to_string(e.mode()) + ">";
      });

  m.def("parse_ensemble", [](const std::string& text) { return parse_ensemble(text); });
  m.def("load_ensemble", &load_ensemble, py::arg("path"));
  m.def("keep_switch",
        [](double q1, double q2, bool probability) {
          return corpus::keep_switch(q1, q2,
                                     probability ? MeasureMode::probability : MeasureMode::counting);
        },
        py::arg("q1"), py::arg("q2"), py::arg("probability") = false);
  m.def("reducible_pair",
        [](double a, double b, double c, double d) { return corpus::reducible_pair(a, b, c, d); },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"));
  m.def("rotation", [](double c, double theta) { return corpus::rotation(c, theta); },
        py::arg("c"), py::arg("theta"));

  m.def("check", [](const MatrixEnsemble& e, std::uint64_t seed) {
    IrrOptions io;
    io.seed = seed;
    ContOptions co;
    co.seed = seed;
    const auto irr = irr_check(e, io);
    const auto cont = cont_check(e, co);
    py::dict d;
    d["irreducible"] = irr.irreducible;
    d["algebra_dimension"] = irr.algebra_dimension;
    d["certificate_verified"] = irr.certificate_verified;
    d["witness_found"] = cont.witness_found;
    d["witness"] = cont.witness_text;
    d["ratio"] = cont.ratio;
    return d;
  }, py::arg("ensemble"), py::arg("seed") = 1);

  m.def("pressure", [](const MatrixEnsemble& e, double s, std::vector<int> schedule,
                       std::uint64_t seed) {
    if (schedule.empty()) schedule = auto_schedule(e);
    PressureOptions o;
    o.seed = seed;
    const auto p = pressure_estimate(e, s, schedule, o);
    py::dict d;
    d["s"] = s;
    d["value"] = p.value();
    d["half_width"] = p.half_width();
    d["exact"] = p.has_exact;
    d["n"] = p.has_exact ? p.exact_n : p.mc_n;
    d["method"] = p.has_exact ? to_string(p.exact_method) : to_string(WordSumMethod::monte_carlo);
    return d;
  }, py::arg("ensemble"), py::arg("s"), py::arg("schedule") = std::vector<int>{},
        py::arg("seed") = 1);

  m.def("word_sum", [](const MatrixEnsemble& e, int n, double s) {
    return word_sum_exact(e, n, s).value;
  }, py::arg("ensemble"), py::arg("n"), py::arg("s"));

  m.def("reducible_oracle", &reducible_pressure_oracle, py::arg("a"), py::arg("b"),
        py::arg("c"), py::arg("d"), py::arg("s"));

  m.def("spectral", [](const MatrixEnsemble& e, double s, int mesh, bool spectrum) {
    SpectralOptions o;
    o.mesh_size = mesh;
    o.compute_spectrum = spectrum;
    const auto t = solve_spectral(e, s, o);
    py::dict d;
    d["k"] = t.k;
    d["log_k"] = t.log_k();
    d["residual"] = t.residual();
    d["period"] = t.period;
    d["gap"] = t.gap;
    d["e"] = t.e;
    d["sigma"] = t.sigma;
    d["eta"] = t.eta;
    d["warnings"] = t.warnings;
    return d;
  }, py::arg("ensemble"), py::arg("s"), py::arg("mesh") = 512, py::arg("spectrum") = true);

  m.def("sweep", [](const MatrixEnsemble& e, double s_min, double s_max, double step,
                    const std::string& method, int mesh) {
    SweepParams p;
    p.spectral.mesh_size = mesh;
    p.spectral.compute_spectrum = false;
    const auto c = sweep(e, uniform_grid(s_min, s_max, step), parse_sweep_method(method), p);
    py::dict d;
    d["s"] = c.s;
    if (!c.wordsum.empty()) d["wordsum"] = curve_points(c.wordsum);
    if (!c.spectral.empty()) d["spectral"] = curve_points(c.spectral);
    py::list flags;
    for (const auto& f : c.flags) {
      py::dict fd;
      fd["method"] = to_string(f.method);
      fd["s_star"] = f.s_star;
      fd["score"] = f.score;
      fd["left_slope"] = f.left_slope;
      fd["right_slope"] = f.right_slope;
      flags.append(fd);
    }
    d["flags"] = flags;
    return d;
  }, py::arg("ensemble"), py::arg("s_min"), py::arg("s_max"), py::arg("step"),
        py::arg("method") = "wordsum", py::arg("mesh") = 256);

  m.def("thermo", [](const MatrixEnsemble& e, double s, int n, std::size_t count,
                     std::uint64_t seed, int mesh) {
    SpectralOptions o;
    o.mesh_size = mesh;
    const auto k = build_tilted(e, std::make_shared<const SpectralTriple>(solve_spectral(e, s, o)));
    const auto r = thermo_report(k, n, count, seed);
    py::dict d;
    d["pressure"] = r.pressure;
    d["zeta"] = r.zeta.mean;
    d["xi"] = r.xi.mean;
    d["entropy"] = r.entropy.mean;
    d["variational_defect"] = r.variational_defect;
    d["variational_half_width"] = r.variational_half_width;
    d["entropy_route"] = r.entropy_route;
    return d;
  }, py::arg("ensemble"), py::arg("s"), py::arg("n") = 200, py::arg("count") = 1000,
        py::arg("seed") = 1, py::arg("mesh") = 512);

  m.def("run", [](const std::string& config_json) {
    const auto r = run_command(config_from_json(config_json));
    return report_to_json(r);
  }, py::arg("config_json"),
        "Runs a CLI command from a JSON config; returns the report as JSON text.");
  m.def("config_hash", [](const std::string& config_json) {
    return hash_hex(config_hash(config_from_json(config_json)));
  });
}
