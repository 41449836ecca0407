#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "commands.hpp"
#include "gsr/error.hpp"
#include "gsr/fem.hpp"
#include "gsr/fields.hpp"
#include "gsr/flux.hpp"
#include "gsr/forward.hpp"
#include "gsr/inverse.hpp"
#include "gsr/mesh.hpp"
#include "gsr/observations.hpp"
#include "gsr/profiles.hpp"

namespace py = pybind11;
using namespace gsr;

namespace {

Eigen::MatrixXd node_array(const TriangularMesh& mesh) {
  Eigen::MatrixXd out(mesh.num_nodes(), 2);
  for (int i = 0; i < mesh.num_nodes(); ++i) out.row(i) << mesh.node(i).r, mesh.node(i).z;
  return out;
}

Eigen::MatrixXi triangle_array(const TriangularMesh& mesh) {
  Eigen::MatrixXi out(mesh.num_triangles(), 3);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    out.row(t) << tri[0], tri[1], tri[2];
  }
  return out;
}

py::dict state_dict(const PlasmaState& s) {
  py::dict d;
  d["psi_axis"] = s.psi_axis;
  d["psi_b"] = s.psi_b;
  d["axis"] = py::make_tuple(s.axis.r, s.axis.z);
  d["boundary_kind"] = std::string(to_string(s.boundary_kind));
  if (s.xpoint) d["xpoint"] = py::make_tuple(s.xpoint->r, s.xpoint->z);
  else d["xpoint"] = py::none();
  d["psi_bar"] = s.psi_bar;
  d["mask"] = s.mask;
  return d;
}

ReconstructionConfig config_from(const py::dict& opts) {
  ReconstructionConfig c;
  for (const auto& item : opts) {
    const std::string key = py::cast<std::string>(item.first);
    const py::handle v = item.second;
    if (key == "basis") c.basis_kind = py::cast<std::string>(v);
    else if (key == "m") c.m = py::cast<int>(v);
    else if (key == "eps") c.eps = py::cast<Regularization>(v);
    else if (key == "weights") c.k = py::cast<FamilyWeights>(v);
    else if (key == "max_outer") c.max_outer = py::cast<int>(v);
    else if (key == "tol_u") c.tol_u = py::cast<double>(v);
    else if (key == "tol_psi") c.tol_psi = py::cast<double>(v);
    else if (key == "relaxation") c.relaxation = py::cast<double>(v);
    else if (key == "normalize") c.normalize = py::cast<bool>(v);
    else throw ValidationError("unknown reconstruction option \"" + key + "\"");
  }
  c.validate();
  return c;
}

py::dict result_dict(const ReconstructionResult& r) {
  py::dict d;
  const int m = r.m;
  d["basis"] = r.basis_kind;
  d["m"] = m;
  d["u"] = r.u;
  d["a"] = Eigen::VectorXd(r.u.segment(0, m));
  d["b"] = Eigen::VectorXd(r.u.segment(m, m));
  d["c"] = Eigen::VectorXd(r.u.segment(2 * m, m));
  d["psi"] = r.psi;
  d["converged"] = r.converged;
  d["iterations"] = r.iterations;
  d["plasma_current"] = r.plasma_current;
  d["state"] = r.state ? py::object(state_dict(*r.state)) : py::object(py::none());
  py::dict cost;
  cost["J"] = r.cost.j;
  cost["J_eps"] = r.cost.j_eps;
  cost["total"] = r.cost.total;
  cost["objective"] = r.cost.objective;
  d["cost"] = cost;
  return d;
}

}  // namespace

PYBIND11_MODULE(_gsrecon, mod) {
  mod.doc() = "Free-boundary equilibrium solver and profile reconstruction";

  py::register_exception<Error>(mod, "Error");
  py::register_exception<IoError>(mod, "IoError", PyExc_OSError);
  py::register_exception<ValidationError>(mod, "ValidationError", PyExc_ValueError);

  mod.attr("MU0") = kMu0;

  py::class_<TriangularMesh>(mod, "Mesh")
      .def_property_readonly("num_nodes", &TriangularMesh::num_nodes)
      .def_property_readonly("num_triangles", &TriangularMesh::num_triangles)
      .def_property_readonly("nodes", &node_array, "(N, 2) array of (r, z)")
      .def_property_readonly("triangles", &triangle_array, "(T, 3) node indices")
      .def_property_readonly("boundary", &TriangularMesh::boundary,
                             "counter-clockwise boundary node indices")
      .def_property_readonly("perimeter", &TriangularMesh::perimeter)
      .def("interpolate",
           [](const TriangularMesh& m, const NodalField& v, double r, double z) {
             return m.interpolate(v, Point2{r, z});
           })
      .def("save", [](const TriangularMesh& m, const std::filesystem::path& p) {
        save_mesh(p, m);
      });

  mod.def("load_mesh", &load_mesh, py::arg("path"));
  mod.def(
      "rectangle_mesh",
      [](double r0, double r1, double z0, double z1, int nr, int nz,
         std::optional<std::tuple<double, double, double, int>> limiter) {
        std::vector<Point2> lim;
        if (limiter) {
          const auto [rc, zc, rho, n] = *limiter;
          lim = circle_polyline({rc, zc}, rho, n);
        }
        return rectangle_mesh(r0, r1, z0, z1, nr, nz, lim);
      },
      py::arg("r0"), py::arg("r1"), py::arg("z0"), py::arg("z1"), py::arg("nr"), py::arg("nz"),
      py::arg("limiter") = py::none(),
      "Structured mesh; limiter = (r, z, radius, points) for a circular limiter.");

  py::class_<StiffnessSystem>(mod, "StiffnessSystem")
      .def(py::init<const TriangularMesh&>(), py::keep_alive<1, 2>())
      .def("solve_vacuum", &StiffnessSystem::solve_vacuum, py::arg("h"))
      .def(
          "solve",
          [](const StiffnessSystem& s, const Eigen::VectorXd& source, const Eigen::VectorXd& h) {
            return s.solve(source, h);
          },
          py::arg("source"), py::arg("h"));

  py::class_<ReducedBasis>(mod, "Basis")
      .def(py::init(&ReducedBasis::make), py::arg("kind"), py::arg("m"))
      .def_property_readonly("size", &ReducedBasis::size)
      .def_property_readonly("kind", &ReducedBasis::kind_name)
      .def("values", [](const ReducedBasis& b, double x) { return b.values(x); }, py::arg("x"))
      .def("eval",
           [](const ReducedBasis& b, const Eigen::VectorXd& c, double x) { return b.eval(c, x); },
           py::arg("coefficients"), py::arg("x"))
      .def("penalty", &ReducedBasis::penalty, py::return_value_policy::copy)
      .def("project",
           [](const ReducedBasis& b, const py::function& f) {
             return b.project([&](double x) { return py::cast<double>(f(x)); });
           });

  mod.def(
      "analyze",
      [](const TriangularMesh& mesh, const NodalField& psi) {
        return state_dict(analyze(mesh, psi));
      },
      py::arg("mesh"), py::arg("psi"));

  mod.def(
      "solve_forward",
      [](const StiffnessSystem& sys, const ReducedBasis& basis, const Eigen::VectorXd& u,
         const Eigen::VectorXd& h, std::optional<NodalField> psi0, double tol, int max_iter) {
        ForwardOptions o;
        o.tol = tol;
        o.max_iter = max_iter;
        const ForwardResult r = solve_forward(sys, basis, u, h, psi0, o);
        py::dict d;
        d["psi"] = r.psi;
        d["converged"] = r.converged;
        d["iterations"] = r.iterations;
        d["change"] = r.change;
        d["state"] = r.state ? py::object(state_dict(*r.state)) : py::object(py::none());
        if (r.state)
          d["plasma_current"] = plasma_current(sys.mesh(), *r.state, basis, u);
        else
          d["plasma_current"] = 0.0;
        return d;
      },
      py::arg("system"), py::arg("basis"), py::arg("u"), py::arg("h"),
      py::arg("psi0") = py::none(), py::arg("tol") = 1e-8, py::arg("max_iter") = 50);

  mod.def(
      "reconstruct",
      [](const StiffnessSystem& sys, const std::filesystem::path& measurements,
         const py::dict& options) {
        const MeasurementSet meas = load_measurements(measurements);
        const ReconstructionResult r = reconstruct(sys, meas, config_from(options));
        return result_dict(r);
      },
      py::arg("system"), py::arg("measurements"), py::arg("options") = py::dict(),
      "Reconstruct from a JSON measurement file. options: basis, m, eps, weights, "
      "max_outer, tol_u, tol_psi, relaxation, normalize.");

  mod.def(
      "solve_normal_equation",
      [](const Eigen::MatrixXd& e, const Eigen::VectorXd& f, const Eigen::MatrixXd& lambda) {
        return solve_normal_equation(e, f, lambda);
      },
      py::arg("e"), py::arg("f"), py::arg("penalty"));

  mod.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a gsrecon command; returns (exit code, stdout, stderr).");
}
