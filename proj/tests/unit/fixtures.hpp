#pragma once

#include <functional>
#include <random>
#include <string>

#include "gsr/fem.hpp"
#include "gsr/mesh.hpp"

namespace gsr::test {

/// [1,3]x[-1.5,1.5] with n x n nodes and an optional unit circular limiter
/// centred at (2, 0).
inline TriangularMesh desk_mesh(int n = 33, bool limiter = true) {
  return rectangle_mesh(1.0, 3.0, -1.5, 1.5, n, n,
                        limiter ? circle_polyline({2.0, 0.0}, 1.0, 128)
                                : std::vector<Point2>{});
}

inline NodalField sample(const TriangularMesh& mesh,
                         const std::function<double(const Point2&)>& f) {
  NodalField v(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) v[i] = f(mesh.node(i));
  return v;
}

inline Eigen::VectorXd boundary_sample(
    const TriangularMesh& mesh, const std::function<double(const Point2&)>& f) {
  Eigen::VectorXd h(mesh.boundary().size());
  for (std::size_t k = 0; k < mesh.boundary().size(); ++k)
    h[k] = f(mesh.node(mesh.boundary()[k]));
  return h;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace gsr::test
