#include "gsr/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gsr/error.hpp"

namespace gsr {

std::vector<PlasmaQuadraturePoint> plasma_quadrature(const TriangularMesh& mesh,
                                                     const PlasmaState& state) {
  std::vector<PlasmaQuadraturePoint> out;
  const BarycentricTriangle whole{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!(state.mask[t] > 0.0)) continue;
    const auto& tri = mesh.triangle(t);
    const std::array<double, 3> nb{state.psi_bar[tri[0]], state.psi_bar[tri[1]],
                                   state.psi_bar[tri[2]]};
    std::vector<BarycentricTriangle> pieces;
    if (state.mask[t] >= 1.0)
      pieces.push_back(whole);
    else
      pieces = superlevel_cut({-nb[0], -nb[1], -nb[2]}, -1.0);
    for (const auto& piece : pieces) {
      const double w = barycentric_area(piece) * mesh.area(t) / 3.0;
      for (int e = 0; e < 3; ++e) {
        PlasmaQuadraturePoint q;
        q.triangle = t;
        for (int k = 0; k < 3; ++k)
          q.lambda[k] = 0.5 * (piece[e][k] + piece[(e + 1) % 3][k]);
        q.r = mesh.point_at({t, q.lambda}).r;
        q.weight = w;
        const double x =
            q.lambda[0] * nb[0] + q.lambda[1] * nb[1] + q.lambda[2] * nb[2];
        if (x > 1.0 + 1e-9) continue;
        q.psi_bar = std::clamp(x, 0.0, 1.0);
        out.push_back(q);
      }
    }
  }
  return out;
}

PlasmaCurrentMatrix assemble_plasma_current(const TriangularMesh& mesh,
                                            const PlasmaState& state,
                                            const ReducedBasis& basis) {
  const int m = basis.size();
  PlasmaCurrentMatrix out;
  out.m = m;
  out.d = Eigen::MatrixXd::Zero(mesh.num_nodes(), 3 * m);
  Eigen::VectorXd phi(m);
  for (const auto& q : plasma_quadrature(mesh, state)) {
    basis.values(q.psi_bar, phi.data());
    const auto& tri = mesh.triangle(q.triangle);
    for (int j = 0; j < 3; ++j) {
      const double wv = q.weight * q.lambda[j];
      out.d.row(tri[j]).segment(0, m) += (wv * q.r) * phi.transpose();
      out.d.row(tri[j]).segment(m, m) += (wv / q.r) * phi.transpose();
    }
  }
  return out;
}

double total_current(const PlasmaCurrentMatrix& d, const Eigen::VectorXd& u) {
  return d.apply(u).sum();
}

PlasmaState initial_plasma_guess(const TriangularMesh& mesh) {
  PlasmaState s;
  Point2 center;
  double radius = 0.0;
  if (mesh.has_limiter()) {
    for (const Point2& p : mesh.limiter()) {
      center.r += p.r;
      center.z += p.z;
    }
    center.r /= static_cast<double>(mesh.limiter().size());
    center.z /= static_cast<double>(mesh.limiter().size());
    for (const Point2& p : mesh.limiter())
      radius = std::max(radius, std::hypot(p.r - center.r, p.z - center.z));
  } else {
    const auto& bb = mesh.bounds();
    center = {0.5 * (bb.r_min + bb.r_max), 0.5 * (bb.z_min + bb.z_max)};
    radius = 0.5 * bb.diagonal();
  }
  s.psi_axis = 1.0;
  s.psi_b = 0.0;
  s.axis = center;
  s.psi_bar.resize(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Point2& p = mesh.node(i);
    const double rho = std::hypot(p.r - center.r, p.z - center.z) / radius;
    s.psi_bar[i] = std::min(rho * rho, 1.0);
  }
  s.mask.resize(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    s.mask[t] = !mesh.has_limiter() ||
                        inside_polygon(mesh.limiter(), mesh.centroid(t))
                    ? 1.0
                    : 0.0;
  return s;
}

FluxMap picard_step(const StiffnessSystem& system,
                    const PlasmaCurrentMatrix& d, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& h) {
  if (u.size() != d.d.cols())
    throw ValidationError("coefficient vector has " + std::to_string(u.size()) +
                          " entries, plasma current matrix has " +
                          std::to_string(d.d.cols()) + " columns");
  return system.solve(d.apply(u), h);
}

double relative_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev,
                       double floor) {
  const double scale = std::max(next.lpNorm<Eigen::Infinity>(), floor);
  return (next - prev).lpNorm<Eigen::Infinity>() / scale;
}

ForwardResult solve_forward(const StiffnessSystem& system,
                            const ReducedBasis& basis,
                            const Eigen::VectorXd& u, const Eigen::VectorXd& h,
                            const std::optional<FluxMap>& psi0,
                            const ForwardOptions& options) {
  const TriangularMesh& mesh = system.mesh();
  const int m = basis.size();
  if (u.size() != 3 * m)
    throw ValidationError("coefficient vector has " + std::to_string(u.size()) +
                          " entries, expected " + std::to_string(3 * m));
  if (!(options.tol > 0.0)) throw ValidationError("tolerance must be positive");
  if (!(options.relaxation > 0.0 && options.relaxation <= 1.0))
    throw ValidationError("relaxation must be in (0, 1]");
  const bool sourceless = u.head(2 * m).isZero(0.0);

  ForwardResult best;
  best.change = std::numeric_limits<double>::infinity();

  FluxMap psi;
  PlasmaState state;
  if (psi0) {
    if (psi0->size() != mesh.num_nodes())
      throw ValidationError("initial flux map size does not match the mesh");
    psi = *psi0;
    if (!sourceless) state = analyze(mesh, psi, options.flux);
  } else {
    psi = system.solve_vacuum(h);
    state = initial_plasma_guess(mesh);
  }

  for (int it = 1; it <= options.max_iter; ++it) {
    FluxMap next;
    if (sourceless) {
      next = system.solve_vacuum(h);
    } else {
      const PlasmaCurrentMatrix d = assemble_plasma_current(mesh, state, basis);
      next = picard_step(system, d, u, h);
    }
    if (options.relaxation < 1.0)
      next = options.relaxation * next + (1.0 - options.relaxation) * psi;
    const double change = relative_change(next, psi, options.change_floor);
    psi = std::move(next);

    std::optional<PlasmaState> next_state;
    if (!sourceless) next_state = analyze(mesh, psi, options.flux);

    if (change < best.change) {
      best.psi = psi;
      best.state = next_state;
      best.iterations = it;
      best.change = change;
    }
    if (change < options.tol) {
      best.converged = true;
      best.iterations = it;
      return best;
    }
    if (next_state) state = std::move(*next_state);
  }
  best.iterations = options.max_iter;
  return best;
}

}  // namespace gsr
