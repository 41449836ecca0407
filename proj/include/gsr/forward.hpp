#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gsr/fem.hpp"
#include "gsr/flux.hpp"
#include "gsr/profiles.hpp"

namespace gsr {

/// Quadrature point of the plasma region: edge midpoints of each plasma
/// (sub-)triangle, weight = sub-area / 3.
struct PlasmaQuadraturePoint {
  int triangle;
  std::array<double, 3> lambda;  // barycentric in the parent triangle
  double r;
  double weight;
  double psi_bar;
};

/// Quadrature of the plasma region: whole triangles where mask == 1, the
/// exact sub-polygon {psi_bar <= 1} on cut triangles.
std::vector<PlasmaQuadraturePoint> plasma_quadrature(const TriangularMesh& mesh,
                                                     const PlasmaState& state);

/// D(psi): n x 3m. Column block a carries int_{Omega_p} r phi_i(psi_bar) v_j,
/// block b carries int_{Omega_p} (1/r) phi_i(psi_bar) v_j, block c is zero.
struct PlasmaCurrentMatrix {
  Eigen::MatrixXd d;
  int m = 0;

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const { return d * u; }
};

PlasmaCurrentMatrix assemble_plasma_current(const TriangularMesh& mesh,
                                            const PlasmaState& state,
                                            const ReducedBasis& basis);

/// Total toroidal current: the load vector D u summed against the constant
/// test function.
double total_current(const PlasmaCurrentMatrix& d, const Eigen::VectorXd& u);

/// Plasma guess used before any flux map exists: the limiter interior (whole
/// mesh without limiter) is plasma, with a parabolic normalized flux around
/// the limiter centre.
PlasmaState initial_plasma_guess(const TriangularMesh& mesh);

/// One fixed-point update psi = K~^{-1}(D u + h).
FluxMap picard_step(const StiffnessSystem& system,
                    const PlasmaCurrentMatrix& d, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& h);

struct ForwardOptions {
  double tol = 1e-8;
  int max_iter = 50;
  double relaxation = 1.0;  // 0 < omega <= 1
  double change_floor = 1e-12;
  FluxAnalysisOptions flux;
};

struct ForwardResult {
  FluxMap psi;
  /// Empty when the converged source vanishes (no plasma, u has no A, B).
  std::optional<PlasmaState> state;
  int iterations = 0;
  bool converged = false;
  double change = 0.0;  // relative sup-norm change of the last iteration
};

/// Relative sup-norm change ||a - b||_inf / max(||a||_inf, floor).
double relative_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev,
                       double floor);

/// Picard iteration for K~ psi = D(psi) u + h. Starts from psi0 when given,
/// otherwise from the vacuum solution with initial_plasma_guess(). Throws
/// DegeneratePlasmaError when an iterate has no plasma while the source is
/// non-zero. On non-convergence returns the iterate with the smallest change
/// and converged = false.
ForwardResult solve_forward(const StiffnessSystem& system,
                            const ReducedBasis& basis,
                            const Eigen::VectorXd& u, const Eigen::VectorXd& h,
                            const std::optional<FluxMap>& psi0,
                            const ForwardOptions& options = {});

}  // namespace gsr
