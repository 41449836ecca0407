#pragma once

#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "gsr/mesh.hpp"

namespace gsr {

/// Vacuum permeability (H/m).
inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;

using SparseMatrix = Eigen::SparseMatrix<double>;

/// P1 discretization of -Delta* with Dirichlet data on the mesh boundary.
///
/// K is the full stiffness matrix of int (1/(mu0 r)) grad(psi).grad(v). The
/// modified matrix K~ keeps interior rows of K and replaces boundary rows by
/// identity rows; solves eliminate the boundary columns into the right-hand
/// side so only the symmetric positive-definite interior block is factorized.
/// The factorization is computed once and shared by all subsequent solves.
class StiffnessSystem {
 public:
  explicit StiffnessSystem(const TriangularMesh& mesh);

  StiffnessSystem(const StiffnessSystem&) = delete;
  StiffnessSystem& operator=(const StiffnessSystem&) = delete;

  const TriangularMesh& mesh() const { return *mesh_; }
  int size() const { return mesh_->num_nodes(); }

  /// Full (unmodified) stiffness matrix, n x n.
  const SparseMatrix& stiffness() const { return k_; }
  const std::vector<int>& dirichlet_nodes() const { return mesh_->boundary(); }
  const std::vector<int>& interior_nodes() const { return interior_; }

  /// Solves K~ psi = source + h: interior rows satisfy the discrete weak
  /// form with the given nodal load vector (its boundary entries are
  /// ignored), boundary nodes take the values h, given in boundary() order.
  /// Thread-safe.
  NodalField solve(const Eigen::Ref<const Eigen::VectorXd>& source,
                   const Eigen::Ref<const Eigen::VectorXd>& h) const;

  /// Solves with zero load; the harmonic (vacuum) extension of h.
  NodalField solve_vacuum(const Eigen::Ref<const Eigen::VectorXd>& h) const;

  /// Solves several interior-load right-hand sides at once with zero
  /// boundary data (one column per load vector).
  Eigen::MatrixXd solve_homogeneous(const Eigen::MatrixXd& sources) const;

  /// K~ psi - (source + h), with the same row convention as solve().
  Eigen::VectorXd residual(const NodalField& psi,
                           const Eigen::Ref<const Eigen::VectorXd>& source,
                           const Eigen::Ref<const Eigen::VectorXd>& h) const;

  /// Restriction of a nodal field to the boundary nodes, in boundary() order.
  Eigen::VectorXd boundary_values(const NodalField& psi) const;

 private:
  const TriangularMesh* mesh_;
  SparseMatrix k_;
  SparseMatrix k_ii_;
  SparseMatrix k_ib_;
  std::vector<int> interior_;
  std::vector<int> dof_;  // node -> interior dof, -1 on the boundary
  Eigen::SimplicialLDLT<SparseMatrix> factor_;
};

/// L2(Omega) norm of (P1 interpolant of nodal - exact) with a degree-4 rule.
template <class F>
double l2_error(const TriangularMesh& mesh, const NodalField& nodal,
                F&& exact);

/// L2(Omega) norm of the P1 interpolant of a nodal field.
double l2_norm(const TriangularMesh& mesh, const NodalField& nodal);

namespace detail {
struct TriangleRule {
  std::vector<std::array<double, 3>> lambda;
  std::vector<double> weight;  // fractions of the triangle area, sum to 1
};
/// Six-point symmetric rule exact for degree 4.
const TriangleRule& degree4_rule();
}  // namespace detail

template <class F>
double l2_error(const TriangularMesh& mesh, const NodalField& nodal,
                F&& exact) {
  const auto& rule = detail::degree4_rule();
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (std::size_t q = 0; q < rule.weight.size(); ++q) {
      const Location loc{t, rule.lambda[q]};
      const Point2 p = mesh.point_at(loc);
      const double e = mesh.interpolate(nodal, loc) - exact(p);
      sum += rule.weight[q] * mesh.area(t) * e * e;
    }
  }
  return std::sqrt(sum);
}

}  // namespace gsr
