#include "gsr/fields.hpp"

#include <iomanip>
#include <ostream>

#include "gsr/error.hpp"
#include "gsr/forward.hpp"
#include "gsr/observations.hpp"

namespace gsr {

double toroidal_current_density(const TriangularMesh& mesh,
                                const PlasmaState& state,
                                const ReducedBasis& basis,
                                const Eigen::VectorXd& u, const Point2& p) {
  const double x = mesh.interpolate(state.psi_bar, p);
  if (x > 1.0) return 0.0;
  const int m = basis.size();
  const Eigen::VectorXd phi = basis.values(x);
  return p.r * phi.dot(u.segment(0, m)) + phi.dot(u.segment(m, m)) / p.r;
}

double toroidal_field(const ReducedBasis& basis, const Eigen::VectorXd& b,
                      double f0, const PlasmaState& state, double psi_bar,
                      double r) {
  if (psi_bar > 1.0) return f0 / r;
  return FProfile(basis, b, state.psi_axis, state.psi_b, f0)(psi_bar) / r;
}

FieldSample sample_fields(const TriangularMesh& mesh, const FluxMap& psi,
                          const std::optional<PlasmaState>& state,
                          const ReducedBasis& basis, const Eigen::VectorXd& u,
                          double f0, const Point2& p) {
  FieldSample s;
  s.location = p;
  const Eigen::Vector2d bp = poloidal_field(mesh, psi, p);
  s.b_r = bp.x();
  s.b_z = bp.y();
  if (state) {
    const int m = basis.size();
    const double x = mesh.interpolate(state->psi_bar, p);
    s.b_phi = toroidal_field(basis, u.segment(m, m), f0, *state, x, p.r);
    s.j_phi = toroidal_current_density(mesh, *state, basis, u, p);
  } else {
    s.b_phi = f0 / p.r;
  }
  return s;
}

double plasma_current(const TriangularMesh& mesh, const PlasmaState& state,
                      const ReducedBasis& basis, const Eigen::VectorXd& u) {
  const int m = basis.size();
  double total = 0.0;
  for (const auto& q : plasma_quadrature(mesh, state)) {
    const Eigen::VectorXd phi = basis.values(q.psi_bar);
    total += q.weight * (q.r * phi.dot(u.segment(0, m)) +
                         phi.dot(u.segment(m, m)) / q.r);
  }
  return total;
}

void write_field_grid_csv(std::ostream& out, const TriangularMesh& mesh,
                          const FluxMap& psi,
                          const std::optional<PlasmaState>& state,
                          const ReducedBasis& basis, const Eigen::VectorXd& u,
                          double f0, int nr, int nz) {
  const auto& bb = mesh.bounds();
  out << "r,z,B_r,B_z,B_phi,j_phi\n" << std::setprecision(17);
  for (int j = 0; j < nz; ++j) {
    const double z = bb.z_min + (bb.z_max - bb.z_min) * j / (nz - 1);
    for (int i = 0; i < nr; ++i) {
      const double r = bb.r_min + (bb.r_max - bb.r_min) * i / (nr - 1);
      const Point2 p{r, z};
      if (!mesh.locate(p)) continue;
      FieldSample s;
      try {
        s = sample_fields(mesh, psi, state, basis, u, f0, p);
      } catch (const ValidationError&) {
        // unphysical f: report the vacuum toroidal field
        s = sample_fields(mesh, psi, std::nullopt, basis, u, f0, p);
      }
      out << r << ',' << z << ',' << s.b_r << ',' << s.b_z << ',' << s.b_phi
          << ',' << s.j_phi << '\n';
    }
  }
}

}  // namespace gsr
