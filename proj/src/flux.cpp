#include "gsr/flux.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "gsr/error.hpp"

namespace gsr {

const char* to_string(BoundaryKind kind) {
  return kind == BoundaryKind::Limiter ? "limiter" : "xpoint";
}

double PlasmaState::plasma_area(const TriangularMesh& mesh) const {
  double a = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) a += mask[t] * mesh.area(t);
  return a;
}

namespace {

struct QuadraticFit {
  bool ok = false;
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

std::vector<int> patch_nodes(const TriangularMesh& mesh, int node, int rings) {
  std::set<int> nodes{node};
  std::set<int> frontier{node};
  for (int k = 0; k < rings; ++k) {
    std::set<int> next;
    for (int v : frontier)
      for (int t : mesh.node_triangles(v))
        for (int w : mesh.triangle(t))
          if (nodes.insert(w).second) next.insert(w);
    frontier = std::move(next);
  }
  return {nodes.begin(), nodes.end()};
}

// Least-squares quadratic around `node`, in physical units.
QuadraticFit fit_quadratic(const TriangularMesh& mesh, const FluxMap& psi,
                           int node) {
  const Point2 o = mesh.node(node);
  const double s = mesh.median_edge_length();
  for (int rings = 1; rings <= 2; ++rings) {
    const auto nodes = patch_nodes(mesh, node, rings);
    if (nodes.size() < 6) continue;
    Eigen::MatrixXd a(nodes.size(), 6);
    Eigen::VectorXd b(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double x = (mesh.node(nodes[k]).r - o.r) / s;
      const double y = (mesh.node(nodes[k]).z - o.z) / s;
      a.row(static_cast<Eigen::Index>(k)) << 1.0, x, y, x * x, x * y, y * y;
      b[static_cast<Eigen::Index>(k)] = psi[nodes[k]];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < 6) continue;
    const Eigen::VectorXd c = qr.solve(b);
    QuadraticFit fit;
    fit.ok = true;
    fit.value = c[0];
    fit.grad = Eigen::Vector2d(c[1], c[2]) / s;
    fit.hess << 2.0 * c[3], c[4], c[4], 2.0 * c[5];
    fit.hess /= s * s;
    return fit;
  }
  return {};
}

// Critical point of the fit if it lies in a triangle of the node's patch.
std::optional<std::pair<Point2, double>> refine_critical(
    const TriangularMesh& mesh, const FluxMap& psi, int node,
    bool want_saddle) {
  const QuadraticFit fit = fit_quadratic(mesh, psi, node);
  if (!fit.ok) return std::nullopt;
  const double det = fit.hess.determinant();
  if (want_saddle ? !(det < 0.0)
                  : !(det > 0.0 && fit.hess(0, 0) < 0.0))
    return std::nullopt;
  const Eigen::Vector2d d = -fit.hess.inverse() * fit.grad;
  const Point2 o = mesh.node(node);
  const Point2 p{o.r + d.x(), o.z + d.y()};
  const auto loc = mesh.locate(p);
  if (!loc) return std::nullopt;
  const auto& tris = mesh.node_triangles(node);
  if (!std::binary_search(tris.begin(), tris.end(), loc->triangle))
    return std::nullopt;
  const double value = fit.value + fit.grad.dot(d) + 0.5 * d.dot(fit.hess * d);
  return std::pair{p, value};
}

// Neighbours of an interior node in counter-clockwise cyclic order.
std::vector<int> ordered_ring(const TriangularMesh& mesh, int node) {
  std::map<int, int> next;
  for (int t : mesh.node_triangles(node)) {
    const auto& tri = mesh.triangle(t);
    const int p = static_cast<int>(std::find(tri.begin(), tri.end(), node) -
                                   tri.begin());
    next[tri[(p + 1) % 3]] = tri[(p + 2) % 3];
  }
  std::vector<int> ring;
  const int start = next.begin()->first;
  int v = start;
  do {
    ring.push_back(v);
    auto it = next.find(v);
    if (it == next.end()) return {};  // open ring: boundary node
    v = it->second;
  } while (v != start && ring.size() <= next.size());
  return ring;
}

}  // namespace

MagneticAxis find_axis(const TriangularMesh& mesh, const FluxMap& psi) {
  if (psi.size() != mesh.num_nodes())
    throw ValidationError("flux map size does not match the mesh");
  Eigen::Index imax = 0;
  const double vmax = psi.maxCoeff(&imax);
  const double vmin = psi.minCoeff();
  if (!(vmax - vmin > 1e-14 * std::max(1.0, std::abs(vmax))))
    throw DegeneratePlasmaError("flux map is constant: no magnetic axis");
  const int node = static_cast<int>(imax);
  if (mesh.is_boundary_node(node))
    throw DegeneratePlasmaError(
        "maximum of psi is on the boundary (node " + std::to_string(node) +
        "): no interior plasma");
  MagneticAxis axis;
  axis.node = node;
  axis.psi = vmax;
  axis.point = mesh.node(node);
  if (auto refined = refine_critical(mesh, psi, node, false))
    axis.point = refined->first;
  return axis;
}

std::vector<Saddle> find_saddles(const TriangularMesh& mesh,
                                 const FluxMap& psi,
                                 std::span<const Region> regions) {
  std::vector<Saddle> out;
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    if (mesh.is_boundary_node(v)) continue;
    const Point2& p = mesh.node(v);
    if (std::none_of(regions.begin(), regions.end(),
                     [&](const Region& r) { return r.contains(p); }))
      continue;
    const auto ring = ordered_ring(mesh, v);
    if (ring.size() < 4) continue;
    auto above = [&](int w) {
      return psi[w] > psi[v] || (psi[w] == psi[v] && w > v);
    };
    int changes = 0;
    for (std::size_t k = 0; k < ring.size(); ++k)
      if (above(ring[k]) != above(ring[(k + 1) % ring.size()])) ++changes;
    if (changes < 4) continue;
    Saddle s{p, psi[v], v};
    if (auto refined = refine_critical(mesh, psi, v, true)) {
      s.point = refined->first;
      s.psi = refined->second;
    }
    out.push_back(s);
  }
  return out;
}

BoundaryFlux find_boundary_flux(const TriangularMesh& mesh,
                                const FluxMap& psi,
                                std::span<const Point2> limiter,
                                const MagneticAxis& axis,
                                const FluxAnalysisOptions& options) {
  std::optional<double> limiter_psi;
  if (!limiter.empty()) {
    const double step = 0.25 * mesh.median_edge_length();
    for (std::size_t i = 0; i < limiter.size(); ++i) {
      const Point2& a = limiter[i];
      const Point2& b = limiter[(i + 1) % limiter.size()];
      const double len = std::hypot(b.r - a.r, b.z - a.z);
      const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
      for (int k = 0; k < n; ++k) {
        const double s = static_cast<double>(k) / n;
        const Point2 p{a.r + s * (b.r - a.r), a.z + s * (b.z - a.z)};
        const auto loc = mesh.locate(p);
        if (!loc) continue;
        const double v = mesh.interpolate(psi, *loc);
        if (!limiter_psi || v > *limiter_psi) limiter_psi = v;
      }
    }
  }

  std::optional<Saddle> xpoint;
  if (options.xpoint_search) {
    std::vector<Region> regions = options.xpoint_regions;
    if (regions.empty()) {
      const auto& bb = mesh.bounds();
      const double third = (bb.z_max - bb.z_min) / 3.0;
      regions.push_back({bb.r_min, bb.r_max, bb.z_min, bb.z_min + third});
      regions.push_back({bb.r_min, bb.r_max, bb.z_max - third, bb.z_max});
    }
    for (const Saddle& s : find_saddles(mesh, psi, regions)) {
      if (!(s.psi < axis.psi)) continue;
      if (!xpoint || s.psi > xpoint->psi) xpoint = s;
    }
  }

  if (!limiter_psi && !xpoint)
    throw DegeneratePlasmaError(
        "no plasma boundary: no limiter inside the mesh and no X-point found");
  BoundaryFlux out;
  if (xpoint && (!limiter_psi || xpoint->psi > *limiter_psi)) {
    out.psi_b = xpoint->psi;
    out.kind = BoundaryKind::XPoint;
    out.xpoint = xpoint->point;
  } else {
    out.psi_b = *limiter_psi;
    out.kind = BoundaryKind::Limiter;
  }
  return out;
}

double barycentric_area(const BarycentricTriangle& t) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = t[i][j];
  return std::abs(m.determinant());
}

std::vector<BarycentricTriangle> superlevel_cut(
    const std::array<double, 3>& values, double level) {
  using Bary = std::array<double, 3>;
  auto vertex = [](int i) {
    Bary b{0.0, 0.0, 0.0};
    b[i] = 1.0;
    return b;
  };
  // point on edge i-j where the interpolant equals level
  auto crossing = [&](int i, int j) {
    const double s = (values[i] - level) / (values[i] - values[j]);
    Bary b{0.0, 0.0, 0.0};
    b[i] = 1.0 - s;
    b[j] = s;
    return b;
  };
  std::array<int, 3> in{};
  std::array<int, 3> out{};
  int n_in = 0, n_out = 0;
  for (int i = 0; i < 3; ++i) {
    if (values[i] >= level)
      in[n_in++] = i;
    else
      out[n_out++] = i;
  }
  if (n_in == 3) return {{vertex(0), vertex(1), vertex(2)}};
  if (n_in == 0) return {};
  if (n_in == 1) {
    const int i = in[0];
    return {{vertex(i), crossing(i, out[0]), crossing(i, out[1])}};
  }
  const int k = out[0];
  const Bary pi = crossing(k, in[0]);
  const Bary pj = crossing(k, in[1]);
  return {{vertex(in[0]), vertex(in[1]), pj}, {vertex(in[0]), pj, pi}};
}

double superlevel_fraction(const std::array<double, 3>& values, double level) {
  double f = 0.0;
  for (const auto& t : superlevel_cut(values, level)) f += barycentric_area(t);
  return std::clamp(f, 0.0, 1.0);
}

std::pair<NodalField, Eigen::VectorXd> normalize(const TriangularMesh& mesh,
                                                 const FluxMap& psi,
                                                 double psi_axis,
                                                 double psi_b) {
  if (!(psi_axis > psi_b))
    throw DegeneratePlasmaError(
        "boundary flux " + std::to_string(psi_b) +
        " is not below the axis flux " + std::to_string(psi_axis));
  if (psi.size() != mesh.num_nodes())
    throw ValidationError("flux map size does not match the mesh");
  NodalField psi_bar = (psi.array() - psi_axis) / (psi_b - psi_axis);
  Eigen::VectorXd mask(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    // psi >= psi_b  <=>  psi_bar <= 1
    mask[t] = superlevel_fraction(
        {-psi_bar[tri[0]], -psi_bar[tri[1]], -psi_bar[tri[2]]}, -1.0);
  }
  return {std::move(psi_bar), std::move(mask)};
}

PlasmaState analyze(const TriangularMesh& mesh, const FluxMap& psi,
                    const FluxAnalysisOptions& options) {
  const MagneticAxis axis = find_axis(mesh, psi);
  const BoundaryFlux boundary =
      find_boundary_flux(mesh, psi, mesh.limiter(), axis, options);
  auto [psi_bar, mask] = normalize(mesh, psi, axis.psi, boundary.psi_b);
  PlasmaState state;
  state.psi_axis = axis.psi;
  state.axis = axis.point;
  state.axis_node = axis.node;
  state.psi_b = boundary.psi_b;
  state.boundary_kind = boundary.kind;
  state.xpoint = boundary.xpoint;
  state.psi_bar = std::move(psi_bar);
  state.mask = std::move(mask);
  return state;
}

}  // namespace gsr
