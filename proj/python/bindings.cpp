#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "spdcsim/cli.h"
#include "spdcsim/config.h"
#include "spdcsim/counting.h"
#include "spdcsim/csv.h"
#include "spdcsim/interference.h"
#include "spdcsim/jsa.h"

namespace py = pybind11;
using namespace spdc;

namespace {

std::vector<double> to_nm(const std::vector<double>& metres) {
  std::vector<double> out(metres.size());
  for (std::size_t k = 0; k < metres.size(); ++k) out[k] = metres[k] / kNm;
  return out;
}

py::dict design_dict(const DesignResult& d) {
  py::dict r;
  r["K"] = d.schmidt.K;
  r["purity"] = d.schmidt.purity;
  r["signal_fwhm_nm"] = d.marginals.signal_fwhm / kNm;
  r["idler_fwhm_nm"] = d.marginals.idler_fwhm / kNm;
  r["temperature_K"] = d.crystal.temperature;
  r["signal_nm"] = to_nm(d.jsa.grid.signal);
  r["idler_nm"] = to_nm(d.jsa.grid.idler);
  r["jsa"] = d.jsa.f;
  r["jsi"] = Eigen::MatrixXd(d.jsa.f.cwiseAbs2());
  r["singular_values"] = d.schmidt.singular_values;
  return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "spdcsim core bindings";
  m.attr("__version__") = version();

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);

  py::class_<ExperimentConfig>(m, "Config")
      .def_static("load", &load_config_file, py::arg("path"), "Parse and validate a config file.")
      .def_static(
          "from_string",
          [](const std::string& text) {
            std::istringstream in(text);
            return load_config(in);
          },
          py::arg("text"))
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readonly("hash", &ExperimentConfig::hash)
      .def_property(
          "pump_fwhm_nm", [](const ExperimentConfig& c) { return c.design.pump_fwhm / kNm; },
          [](ExperimentConfig& c, double nm) { c.design.pump_fwhm = nm * kNm; })
      .def_property(
          "grid_points", [](const ExperimentConfig& c) { return c.design.grid_points; },
          [](ExperimentConfig& c, std::size_t n) { c.design.grid_points = n; });

  py::enum_<Basis>(m, "Basis").value("H", Basis::H).value("V", Basis::V).value("D", Basis::D).value("A", Basis::A);

  m.def(
      "design", [](const ExperimentConfig& c) { return design_dict(run_design(c)); }, py::arg("config"),
      "Design JSA with marginals and Schmidt number. Wavelengths in nm.");

  m.def(
      "schmidt",
      [](const Eigen::MatrixXcd& f) {
        SchmidtDecomposition s = schmidt(f);
        return py::make_tuple(s.K, s.purity, s.singular_values);
      },
      py::arg("f"), "(K, purity, singular values) of an amplitude matrix.");

  m.def(
      "heralded_efficiency",
      [](double C, double S_s, double S_i) {
        HeraldedEfficiency h = heralded_efficiency(C, S_s, S_i);
        return py::make_tuple(h.H, h.sigma);
      },
      py::arg("coincidences"), py::arg("singles_s"), py::arg("singles_i"));

  m.def(
      "pair_dist", [](double mu, double K, std::size_t n_max) { return pair_dist(mu, K, n_max); }, py::arg("mu"),
      py::arg("modes_K"), py::arg("n_max") = 0);

  m.def(
      "basis_visibility",
      [](Basis basis, double mixed_fraction, double dephasing, double phase) {
        PolarizationModel model;
        model.mixed_fraction = mixed_fraction;
        model.dephasing = dephasing;
        model.phi = phase;
        return basis_visibility(model, basis);
      },
      py::arg("basis"), py::arg("mixed_fraction") = 0.0, py::arg("dephasing") = 0.0, py::arg("phase") = 0.0);

  m.def(
      "hom_overlap",
      [](const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double delay_ps) {
        if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidInput("hom_overlap: shapes differ");
        // Unit-less grid centred at 1550 nm; only the delay phase depends on it.
        JointGrid g = make_joint_grid(1550 * kNm, 10 * kNm, static_cast<std::size_t>(a.rows()), 1550 * kNm,
                                      10 * kNm, static_cast<std::size_t>(a.cols()));
        return heralded_hom_overlap(make_joint_amplitude(g, a), make_joint_amplitude(g, b), delay_ps * kPs);
      },
      py::arg("a"), py::arg("b"), py::arg("delay_ps") = 0.0,
      "Heralded HOM visibility of two amplitude matrices on a 10 nm grid at 1550 nm.");

  m.def(
      "execute",
      [](const std::string& command, const ExperimentConfig& c) {
        Artifacts artifacts;
        {
          py::gil_scoped_release release;
          artifacts = execute(parse_command(command), c);
        }
        py::dict out;
        for (const Artifact& a : artifacts) out[py::str(a.name)] = a.content;
        return out;
      },
      py::arg("command"), py::arg("config"), "Run a subcommand and return {file name: CSV text}.");

  m.def(
      "report",
      [](const ExperimentConfig& c) {
        ReportTable t;
        {
          py::gil_scoped_release release;
          t = build_report(c);
        }
        py::list rows;
        for (const ReportRow& r : t.rows()) {
          py::dict d;
          d["metric"] = r.metric;
          d["unit"] = r.unit;
          d["computed"] = r.computed;
          d["published"] = r.published;
          d["published_uncertainty"] = r.published_uncertainty;
          d["tolerance"] = r.tolerance;
          d["citation"] = r.citation;
          d["pass"] = r.pass;
          rows.append(d);
        }
        return rows;
      },
      py::arg("config"));

  m.def(
      "main",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "spdcsim");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        py::print(out.str(), py::arg("end") = "");
        if (!err.str().empty()) py::print(err.str(), py::arg("end") = "", py::arg("file") = py::module_::import("sys").attr("stderr"));
        return status;
      },
      py::arg("args"), "Command-line entry point; returns the exit status.");
}
