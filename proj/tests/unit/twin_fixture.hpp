#pragma once

#include <doctest.h>

#include "fixtures.hpp"
#include "gsr/forward.hpp"
#include "gsr/observations.hpp"

namespace gsr::test {

// sensor layout on the desk mesh: loops at every boundary node, probes at
// every fourth, three vertical chords and one horizontal, a pressure scan and
// an MSE row on the mid-plane
inline MeasurementSet desk_geometry(const TriangularMesh& mesh) {
  MeasurementSet g;
  g.f0 = 4.0;
  const auto& b = mesh.boundary();
  for (std::size_t k = 0; k < b.size(); ++k) {
    g.flux_loops.push_back({mesh.node(b[k]), 0.0});
    if (k % 4 == 0) {
      const Point2 p = mesh.node(b[k]);
      const Point2 q = mesh.node(b[(k + 1) % b.size()]);
      Eigen::Vector2d t(q.r - p.r, q.z - p.z);
      g.probes.push_back({p, t.normalized(), 0.0, 1.0});
    }
  }
  for (double r : {1.8, 2.05, 2.3})
    g.chords.push_back({{r, -1.4}, {r, 1.4}, 0.0, 0.0, 1.0, 1.0});
  g.chords.push_back({{1.1, 0.2}, {2.9, 0.2}, 0.0, 0.0, 1.0, 1.0});
  for (int k = 0; k <= 8; ++k) g.pressure.push_back({1.2 + 0.2 * k, 0.0, 1.0});
  for (int k = 0; k < 5; ++k)
    g.mse.push_back({{1.6 + 0.2 * k, 0.1}, {0.1, 1.0, 0.0, 0.2, 0.3, 1.0}, 0.0, 1.0});
  return g;
}

struct Twin {
  TriangularMesh mesh = test::desk_mesh(17, true);
  StiffnessSystem sys{mesh};
  ReducedBasis basis = ReducedBasis::cubic_spline(6);
  Eigen::VectorXd u;
  Eigen::VectorXd h;
  ForwardResult truth;
  PlasmaCurrentMatrix d;
  MeasurementSet meas;
  ObservationWeights weights;

  Twin() {
    const int m = basis.size();
    u = Eigen::VectorXd::Zero(3 * m);
    u.segment(0, m) = basis.project([](double x) { return 1e5 * (1.0 - 0.5 * x); });
    u.segment(m, m) = basis.project([](double x) { return 5e4 * (1.0 - x * x); });
    u.segment(2 * m, m) = basis.project([](double x) { return 1e19 * (1.0 - x * x); });
    h = test::boundary_sample(mesh, [](const Point2& p) { return 1e-3 * (p.r * p.r - 4.0); });
    truth = solve_forward(sys, basis, u, h, std::nullopt);
    REQUIRE(truth.converged);
    REQUIRE(truth.state);
    d = assemble_plasma_current(mesh, *truth.state, basis);
    meas = synthesize_measurements(mesh, basis, truth.psi, truth.state, u,
                                   desk_geometry(mesh));
    weights.scale = family_rms(meas);
  }

  LinearizationPoint point() const { return {truth.psi, *truth.state, d, u}; }
};

}  // namespace gsr::test
