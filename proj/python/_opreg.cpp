#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "opreg/analysis.hpp"
#include "opreg/dynamics.hpp"
#include "opreg/errors.hpp"
#include "opreg/io.hpp"
#include "opreg/pipeline.hpp"
#include "opreg/spectral.hpp"

namespace py = pybind11;
using namespace opreg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Field field_from(const GridConfig& grid, const Array& a) {
  if (a.ndim() != 1 || a.shape(0) != grid.n) throw std::invalid_argument("expected a 1-d array of length n");
  return Field(grid, std::vector<double>(a.data(), a.data() + a.shape(0)));
}

Array to_array(std::span<const double> v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Array snapshots_array(const Trajectory& t) {
  const auto rows = static_cast<py::ssize_t>(t.snapshots.size());
  Array out({rows, static_cast<py::ssize_t>(t.grid.n)});
  double* p = out.mutable_data();
  for (const Field& f : t.snapshots) p = std::copy(f.values().begin(), f.values().end(), p);
  return out;
}

py::dict trajectory_dict(const Trajectory& t) {
  py::dict d;
  d["n"] = t.grid.n;
  d["length"] = t.grid.length;
  d["dt"] = t.dt;
  d["save_stride"] = t.save_stride;
  d["t0"] = t.t0;
  d["snapshots"] = snapshots_array(t);
  return d;
}

RhsSpec rhs_for(const std::string& equation, double coefficient) {
  switch (parse_equation(equation)) {
    case EquationKind::fractional_heat:
      return RhsSpec::fractional_heat(coefficient);
    case EquationKind::ks:
      return RhsSpec::ks();
    case EquationKind::burgers:
      return RhsSpec::burgers();
    case EquationKind::learned:
      break;
  }
  throw std::invalid_argument("use a checkpoint for learned models");
}

}  // namespace

PYBIND11_MODULE(_opreg, m) {
  m.doc() = "Operator regression core: spectral transforms, reference equations, learned operators.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<GridConfig>(m, "Grid")
      .def(py::init<int, double>(), py::arg("n"), py::arg("length"))
      .def_readonly("n", &GridConfig::n)
      .def_readonly("length", &GridConfig::length)
      .def("wavenumbers", [](const GridConfig& g) { return to_array(wavenumbers(g)); })
      .def("points", [](const GridConfig& g) {
        std::vector<double> x(static_cast<std::size_t>(g.n));
        for (int j = 0; j < g.n; ++j) x[static_cast<std::size_t>(j)] = g.point(j);
        return to_array(x);
      })
      .def("__repr__", [](const GridConfig& g) {
        return "Grid(n=" + std::to_string(g.n) + ", length=" + format_double(g.length) + ")";
      });

  m.def(
      "forward_dft",
      [](const GridConfig& grid, const Array& u) {
        const HalfSpectrum s = forward_dft(field_from(grid, u));
        py::array_t<std::complex<double>> out(static_cast<py::ssize_t>(s.size()));
        std::copy(s.coeffs().begin(), s.coeffs().end(), out.mutable_data());
        return out;
      },
      py::arg("grid"), py::arg("u"));
  m.def(
      "inverse_dft",
      [](const GridConfig& grid, const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& s) {
        HalfSpectrum h(grid);
        if (s.ndim() != 1 || static_cast<std::size_t>(s.shape(0)) != h.size()) {
          throw std::invalid_argument("expected n/2+1 coefficients");
        }
        std::copy(s.data(), s.data() + s.shape(0), h.coeffs().begin());
        return to_array(inverse_dft(h).values());
      },
      py::arg("grid"), py::arg("spectrum"));

  m.def(
      "rhs",
      [](const std::string& equation, const GridConfig& grid, const Array& u, double coefficient) {
        return to_array(evaluate_rhs(rhs_for(equation, coefficient), field_from(grid, u)).values());
      },
      py::arg("equation"), py::arg("grid"), py::arg("u"), py::arg("coefficient") = 0.01);
  m.def(
      "filtered_noise",
      [](const GridConfig& grid, double kappa_cut, double amplitude, std::uint64_t seed) {
        return to_array(filtered_noise_ic(grid, kappa_cut, amplitude, seed).values());
      },
      py::arg("grid"), py::arg("kappa_cut"), py::arg("amplitude") = 1.0, py::arg("seed") = 0);
  m.def(
      "simulate",
      [](const std::string& equation, const GridConfig& grid, const Array& u0, double dt, std::size_t steps,
         int save_stride, double coefficient) {
        return snapshots_array(simulate(rhs_for(equation, coefficient), field_from(grid, u0), dt, steps, save_stride));
      },
      py::arg("equation"), py::arg("grid"), py::arg("u0"), py::arg("dt"), py::arg("steps"), py::arg("save_stride") = 1,
      py::arg("coefficient") = 0.01);
  m.def(
      "eval_checkpoint",
      [](const std::filesystem::path& checkpoint, const Array& u) {
        const OperatorModel model = read_checkpoint(checkpoint);
        return to_array(eval_model(model, field_from(model.grid, u)).values());
      },
      py::arg("checkpoint"), py::arg("u"));
  m.def(
      "energy_spectrum",
      [](const GridConfig& grid, const Array& u) { return to_array(energy_spectrum(field_from(grid, u))); },
      py::arg("grid"), py::arg("u"));

  m.def("read_trajectory", [](const std::filesystem::path& p) { return trajectory_dict(read_trajectory(p)); });
  m.def(
      "write_trajectory",
      [](const std::filesystem::path& p, const GridConfig& grid, double dt, const Array& snapshots, int save_stride,
         double t0) {
        if (snapshots.ndim() != 2 || snapshots.shape(1) != grid.n) throw std::invalid_argument("expected (count, n)");
        Trajectory t{grid, dt, save_stride, t0, {}};
        for (py::ssize_t i = 0; i < snapshots.shape(0); ++i) {
          const double* row = snapshots.data(i, 0);
          t.snapshots.emplace_back(grid, std::vector<double>(row, row + grid.n));
        }
        write_trajectory(p, t);
      },
      py::arg("path"), py::arg("grid"), py::arg("dt"), py::arg("snapshots"), py::arg("save_stride") = 1,
      py::arg("t0") = 0.0);

  // Pipeline commands, mirroring the CLI.
  m.def(
      "generate",
      [](const std::filesystem::path& config, const std::filesystem::path& out) {
        return cmd_generate(load_config(config), out).manifest;
      },
      py::arg("config"), py::arg("out"));
  m.def(
      "train",
      [](const std::filesystem::path& config, const std::filesystem::path& manifest, const std::filesystem::path& out) {
        return cmd_train(load_config(config), manifest, out).checkpoint;
      },
      py::arg("config"), py::arg("manifest"), py::arg("out"));
  m.def(
      "simulate_checkpoint",
      [](const std::filesystem::path& config, const std::filesystem::path& checkpoint, std::uint64_t seed,
         const std::filesystem::path& out) {
        const SimulateOutputs o = cmd_simulate(load_config(config), checkpoint, seed, out);
        return py::make_tuple(o.learned, o.reference ? py::cast(*o.reference) : py::none());
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("seed"), py::arg("out"));
  m.def(
      "compare",
      [](const std::filesystem::path& ref, const std::filesystem::path& test, const std::filesystem::path& out) {
        const CompareOutputs o = cmd_compare(ref, test, out);
        return py::make_tuple(o.errors_csv, o.spectra_csv);
      },
      py::arg("reference"), py::arg("test"), py::arg("out"));
  m.def("export", &cmd_export, py::arg("checkpoint"), py::arg("manifest"), py::arg("out"),
        py::arg("density_bins") = 101);
}
