#pragma once

#include <iosfwd>
#include <optional>

#include <Eigen/Core>

#include "gsr/flux.hpp"
#include "gsr/mesh.hpp"
#include "gsr/profiles.hpp"

namespace gsr {

struct FieldSample {
  Point2 location;
  double b_r = 0;
  double b_z = 0;
  double b_phi = 0;
  double j_phi = 0;
};

/// j_phi = r A(psi_bar) + B(psi_bar) / r inside the plasma, 0 outside.
double toroidal_current_density(const TriangularMesh& mesh,
                                const PlasmaState& state,
                                const ReducedBasis& basis,
                                const Eigen::VectorXd& u, const Point2& p);

/// f(psi_bar) / r inside the plasma (psi_bar <= 1), f0 / r outside.
double toroidal_field(const ReducedBasis& basis, const Eigen::VectorXd& b,
                      double f0, const PlasmaState& state, double psi_bar,
                      double r);

/// All field components at p; a missing state means vacuum (no plasma).
FieldSample sample_fields(const TriangularMesh& mesh, const FluxMap& psi,
                          const std::optional<PlasmaState>& state,
                          const ReducedBasis& basis, const Eigen::VectorXd& u,
                          double f0, const Point2& p);

/// Integral of j_phi over the plasma region with the plasma quadrature.
double plasma_current(const TriangularMesh& mesh, const PlasmaState& state,
                      const ReducedBasis& basis, const Eigen::VectorXd& u);

/// CSV r,z,B_r,B_z,B_phi,j_phi on an nr x nz lattice over the mesh bounding
/// box; lattice points outside the mesh are skipped.
void write_field_grid_csv(std::ostream& out, const TriangularMesh& mesh,
                          const FluxMap& psi,
                          const std::optional<PlasmaState>& state,
                          const ReducedBasis& basis, const Eigen::VectorXd& u,
                          double f0, int nr = 65, int nz = 65);

}  // namespace gsr
