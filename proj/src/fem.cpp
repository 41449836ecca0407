#include "gsr/fem.hpp"

#include <cmath>
#include <string>

#include "gsr/error.hpp"

namespace gsr {

StiffnessSystem::StiffnessSystem(const TriangularMesh& mesh) : mesh_(&mesh) {
  const int n = mesh.num_nodes();

  // coefficient 1/(mu0 r) taken at the triangle centroid
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 9);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const auto& g = mesh.shape_gradients(t);
    const double coef = mesh.area(t) / (kMu0 * mesh.centroid(t).r);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        trips.emplace_back(tri[a], tri[b], coef * g[a].dot(g[b]));
  }
  k_.resize(n, n);
  k_.setFromTriplets(trips.begin(), trips.end());

  dof_.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    if (!mesh.is_boundary_node(i)) {
      dof_[i] = static_cast<int>(interior_.size());
      interior_.push_back(i);
    }
  }
  const int ni = static_cast<int>(interior_.size());
  const int nb = static_cast<int>(mesh.boundary().size());
  if (ni == 0) return;

  std::vector<Eigen::Triplet<double>> ii, ib;
  for (int col = 0; col < k_.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(k_, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      if (dof_[row] < 0) continue;
      if (dof_[col] >= 0)
        ii.emplace_back(dof_[row], dof_[col], it.value());
      else
        ib.emplace_back(dof_[row], mesh.boundary_position(col), it.value());
    }
  }
  k_ii_.resize(ni, ni);
  k_ii_.setFromTriplets(ii.begin(), ii.end());
  k_ib_.resize(ni, nb);
  k_ib_.setFromTriplets(ib.begin(), ib.end());

  factor_.compute(k_ii_);
  if (factor_.info() != Eigen::Success ||
      (factor_.vectorD().array() <= 0.0).any())
    throw SingularSystemError(
        "interior stiffness block is singular (disconnected mesh?)", -1);
}

NodalField StiffnessSystem::solve(
    const Eigen::Ref<const Eigen::VectorXd>& source,
    const Eigen::Ref<const Eigen::VectorXd>& h) const {
  const int n = size();
  const auto nb = static_cast<Eigen::Index>(mesh_->boundary().size());
  if (source.size() != n)
    throw ValidationError("load vector has " + std::to_string(source.size()) +
                          " entries, expected " + std::to_string(n));
  if (h.size() != nb)
    throw ValidationError("boundary data has " + std::to_string(h.size()) +
                          " entries, expected " + std::to_string(nb));

  NodalField psi(n);
  const auto& boundary = mesh_->boundary();
  for (Eigen::Index k = 0; k < nb; ++k) psi[boundary[k]] = h[k];
  if (interior_.empty()) return psi;

  Eigen::VectorXd rhs(interior_.size());
  for (std::size_t k = 0; k < interior_.size(); ++k)
    rhs[static_cast<Eigen::Index>(k)] = source[interior_[k]];
  rhs -= k_ib_ * h;
  const Eigen::VectorXd x = factor_.solve(rhs);
  for (std::size_t k = 0; k < interior_.size(); ++k)
    psi[interior_[k]] = x[static_cast<Eigen::Index>(k)];
  return psi;
}

NodalField StiffnessSystem::solve_vacuum(
    const Eigen::Ref<const Eigen::VectorXd>& h) const {
  return solve(Eigen::VectorXd::Zero(size()), h);
}

Eigen::MatrixXd StiffnessSystem::solve_homogeneous(
    const Eigen::MatrixXd& sources) const {
  const int n = size();
  if (sources.rows() != n)
    throw ValidationError("load matrix has " + std::to_string(sources.rows()) +
                          " rows, expected " + std::to_string(n));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, sources.cols());
  if (interior_.empty() || sources.cols() == 0) return out;
  Eigen::MatrixXd rhs(interior_.size(), sources.cols());
  for (std::size_t k = 0; k < interior_.size(); ++k)
    rhs.row(static_cast<Eigen::Index>(k)) = sources.row(interior_[k]);
  const Eigen::MatrixXd x = factor_.solve(rhs);
  for (std::size_t k = 0; k < interior_.size(); ++k)
    out.row(interior_[k]) = x.row(static_cast<Eigen::Index>(k));
  return out;
}

Eigen::VectorXd StiffnessSystem::residual(
    const NodalField& psi, const Eigen::Ref<const Eigen::VectorXd>& source,
    const Eigen::Ref<const Eigen::VectorXd>& h) const {
  Eigen::VectorXd r = k_ * psi - source;
  const auto& boundary = mesh_->boundary();
  for (std::size_t k = 0; k < boundary.size(); ++k)
    r[boundary[k]] = psi[boundary[k]] - h[static_cast<Eigen::Index>(k)];
  return r;
}

Eigen::VectorXd StiffnessSystem::boundary_values(const NodalField& psi) const {
  const auto& boundary = mesh_->boundary();
  Eigen::VectorXd out(boundary.size());
  for (std::size_t k = 0; k < boundary.size(); ++k)
    out[static_cast<Eigen::Index>(k)] = psi[boundary[k]];
  return out;
}

double l2_norm(const TriangularMesh& mesh, const NodalField& nodal) {
  return l2_error(mesh, nodal, [](const Point2&) { return 0.0; });
}

namespace detail {

const TriangleRule& degree4_rule() {
  static const TriangleRule rule = [] {
    // Strang-Fix / Dunavant 6-point rule
    const double a1 = 0.445948490915965, w1 = 0.223381589678011;
    const double a2 = 0.091576213509771, w2 = 0.109951743655322;
    TriangleRule r;
    for (const auto& [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
      const double b = 1.0 - 2.0 * a;
      r.lambda.push_back({a, a, b});
      r.lambda.push_back({a, b, a});
      r.lambda.push_back({b, a, a});
      for (int k = 0; k < 3; ++k) r.weight.push_back(w);
    }
    return r;
  }();
  return rule;
}

}  // namespace detail

}  // namespace gsr
