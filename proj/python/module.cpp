#include "blowup/bubble.hpp"
#include "blowup/energy.hpp"
#include "blowup/errors.hpp"
#include "blowup/geometry.hpp"
#include "blowup/io.hpp"
#include "blowup/pipeline.hpp"
#include "blowup/quadrature.hpp"
#include "blowup/reduction.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace blowup;
using geometry::Dim;

PYBIND11_MODULE(_blowup, m) {
  m.doc() = "Boundary blow-up analysis for the half-space Yamabe problem";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<StructuralError> structural(m, "StructuralError", base.ptr());
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<DomainError> domain(m, "DomainError", base.ptr());
  static py::exception<BudgetError> budget(m, "BudgetError", base.ptr());
  static py::exception<NumericError> numeric(m, "NumericError", base.ptr());
  static py::exception<IoError> io_error(m, "IoError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const StructuralError& e) {
      py::set_error(structural, e.what());
    } catch (const ValidationError& e) {
      py::set_error(validation, e.what());
    } catch (const DomainError& e) {
      py::set_error(domain, e.what());
    } catch (const BudgetError& e) {
      py::set_error(budget, e.what());
    } catch (const NumericError& e) {
      py::set_error(numeric, e.what());
    } catch (const IoError& e) {
      py::set_error(io_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("eval_U", [](int n, double t, const Eigen::VectorXd& z) {
    return bubble::eval_U(Dim(n), bubble::HalfSpacePoint(t, z));
  }, py::arg("n"), py::arg("t"), py::arg("z"));
  m.def("eval_kernel", [](int n, int b, double t, const Eigen::VectorXd& z) {
    return bubble::eval_kernel(Dim(n), b, bubble::HalfSpacePoint(t, z));
  }, py::arg("n"), py::arg("b"), py::arg("t"), py::arg("z"));

  m.def("sphere_area", &quadrature::sphere_area, py::arg("m"));
  m.def("moment", [](int n, double p, int a, int b, double tol) {
    const auto r = quadrature::moment(Dim(n), {p, a, b}, tol);
    return py::make_tuple(r.value, r.error);
  }, py::arg("n"), py::arg("p"), py::arg("a"), py::arg("b"), py::arg("tol") = 1e-10);
  m.def("moments", [](int n, double tol) {
    quadrature::MomentTable mt(Dim(n), tol);
    py::dict d;
    d["I1"] = mt.I1();
    d["I2"] = mt.I2();
    d["I3"] = mt.I3();
    d["I4"] = mt.I4();
    return d;
  }, py::arg("n"), py::arg("tol") = 1e-10);

  m.def("compute_A", [](int n) { return energy::compute_A(Dim(n)).A; }, py::arg("n"));
  m.def("compute_B", [](int n) { return energy::compute_B(Dim(n)); }, py::arg("n"));

  m.def("critical_lambda", py::overload_cast<double, double, double>(&reduction::critical_lambda),
        py::arg("B"), py::arg("gamma"), py::arg("phi"));
  m.def("find_blowup_point", [](int n, double B, const std::vector<std::tuple<std::string, double, double>>& pts) {
    reduction::ReducedFunctional rf;
    rf.n = n;
    rf.B = B;
    for (const auto& [l, g, p] : pts) rf.points.push_back({l, g, p});
    rf.validate();
    const auto fam = reduction::find_blowup_point(rf);
    py::dict d;
    d["q0"] = fam.q0;
    d["lambda0"] = fam.lambda0;
    d["G0"] = fam.G0;
    d["excluded"] = fam.excluded_labels;
    return d;
  }, py::arg("n"), py::arg("B"), py::arg("points"));

  m.def("run", [](const std::string& command, const std::string& config_json) {
    const io::RunConfig cfg = io::parse_config_json(config_json);
    std::function<pipeline::CommandResult(const io::RunConfig&)> fn;
    if (command == "verify") fn = pipeline::cmd_verify;
    else if (command == "moments") fn = pipeline::cmd_moments;
    else if (command == "solve-vq") fn = pipeline::cmd_solve_vq;
    else if (command == "phi") fn = pipeline::cmd_phi;
    else if (command == "reduce") fn = pipeline::cmd_reduce;
    else if (command == "family") fn = pipeline::cmd_family;
    else if (command == "residual-slope") fn = pipeline::cmd_residual_slope;
    else if (command == "pipeline") fn = pipeline::cmd_pipeline;
    else throw py::value_error("unknown command '" + command + "'");
    pipeline::CommandResult r;
    {
      py::gil_scoped_release release;
      r = pipeline::guarded([&] { return fn(cfg); });
    }
    py::dict d;
    d["exit_code"] = r.exit_code;
    d["messages"] = r.messages;
    d["files"] = r.files;
    return d;
  }, py::arg("command"), py::arg("config_json") = "{}");
}
