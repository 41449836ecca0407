#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gsr/mesh.hpp"

namespace gsr {

using FluxMap = NodalField;

enum class BoundaryKind { Limiter, XPoint };

const char* to_string(BoundaryKind kind);

struct MagneticAxis {
  Point2 point;    // refined location
  double psi = 0;  // flux of the maximizing node
  int node = -1;
};

struct BoundaryFlux {
  double psi_b = 0;
  BoundaryKind kind = BoundaryKind::Limiter;
  std::optional<Point2> xpoint;
};

/// Axis-aligned rectangle of the poloidal plane.
struct Region {
  double r_min, r_max, z_min, z_max;
  bool contains(const Point2& p) const {
    return p.r >= r_min && p.r <= r_max && p.z >= z_min && p.z <= z_max;
  }
};

struct FluxAnalysisOptions {
  bool xpoint_search = true;
  /// Where saddles are accepted; empty means the lower and upper thirds of
  /// the mesh bounding box.
  std::vector<Region> xpoint_regions;
};

/// Topology of a flux map: axis, plasma boundary and normalized flux.
struct PlasmaState {
  double psi_axis = 0;
  Point2 axis;
  int axis_node = -1;
  double psi_b = 0;
  BoundaryKind boundary_kind = BoundaryKind::Limiter;
  std::optional<Point2> xpoint;
  NodalField psi_bar;    // (psi - psi_axis) / (psi_b - psi_axis), per node
  Eigen::VectorXd mask;  // plasma area fraction per triangle, in [0, 1]

  double plasma_area(const TriangularMesh& mesh) const;
};

/// Magnetic axis as the maximum of psi. Throws DegeneratePlasmaError for a
/// constant field or a maximum on the boundary.
MagneticAxis find_axis(const TriangularMesh& mesh, const FluxMap& psi);

/// Plasma boundary flux from the limiter contour and/or an X-point.
/// When both exist the larger flux (the smaller plasma) wins.
BoundaryFlux find_boundary_flux(const TriangularMesh& mesh,
                                const FluxMap& psi,
                                std::span<const Point2> limiter,
                                const MagneticAxis& axis,
                                const FluxAnalysisOptions& options = {});

/// Saddle points of the P1 flux inside the given regions, with their fluxes.
/// A node is a saddle when the sign of psi(neighbor) - psi(node) changes at
/// least four times around its ring. Locations are refined by a local
/// quadratic fit.
struct Saddle {
  Point2 point;
  double psi;
  int node;
};
std::vector<Saddle> find_saddles(const TriangularMesh& mesh,
                                 const FluxMap& psi,
                                 std::span<const Region> regions);

/// Normalized flux per node and plasma area fraction per triangle.
/// Throws DegeneratePlasmaError unless psi_axis > psi_b.
std::pair<NodalField, Eigen::VectorXd> normalize(const TriangularMesh& mesh,
                                                 const FluxMap& psi,
                                                 double psi_axis,
                                                 double psi_b);

/// Full analysis: axis, boundary flux, normalization.
PlasmaState analyze(const TriangularMesh& mesh, const FluxMap& psi,
                    const FluxAnalysisOptions& options = {});

/// Sub-triangles (in barycentric coordinates of the parent) covering the part
/// of a triangle where the linear interpolant of `values` is >= level.
using BarycentricTriangle = std::array<std::array<double, 3>, 3>;
std::vector<BarycentricTriangle> superlevel_cut(
    const std::array<double, 3>& values, double level);

/// Area fraction of a triangle where the linear interpolant is >= level.
double superlevel_fraction(const std::array<double, 3>& values, double level);

/// Area of a barycentric sub-triangle relative to its parent.
double barycentric_area(const BarycentricTriangle& t);

}  // namespace gsr
