#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gsr {

/// Point of the poloidal plane in cylindrical coordinates (meters).
struct Point2 {
  double r = 0.0;
  double z = 0.0;
};

/// Nodal scalar field on a mesh, one value per node.
using NodalField = Eigen::VectorXd;

/// Result of a successful point location.
struct Location {
  int triangle = -1;
  std::array<double, 3> lambda{};  // barycentric weights, >= 0, sum to 1
};

struct BoundingBox {
  double r_min, r_max, z_min, z_max;
  double diagonal() const;
};

/// Immutable P1 triangulation of the vessel cross-section.
///
/// Triangles are counter-clockwise. The boundary loop is recovered from the
/// edges that belong to exactly one triangle and is ordered
/// counter-clockwise, starting from its lowest node index.
class TriangularMesh {
 public:
  /// Validates the input and builds the boundary loop and the location grid.
  /// Throws ValidationError naming the offending node or triangle.
  TriangularMesh(std::vector<Point2> nodes,
                 std::vector<std::array<int, 3>> triangles,
                 std::vector<Point2> limiter = {});

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }

  const std::vector<Point2>& nodes() const { return nodes_; }
  const Point2& node(int i) const { return nodes_[i]; }
  const std::vector<std::array<int, 3>>& triangles() const {
    return triangles_;
  }
  const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }

  /// Ordered cyclic list of boundary node indices.
  const std::vector<int>& boundary() const { return boundary_; }
  bool is_boundary_node(int i) const { return on_boundary_[i]; }
  /// Position of node i in boundary(), or -1 for interior nodes.
  int boundary_position(int i) const { return boundary_pos_[i]; }

  /// Closed limiter polyline (last point connects to the first); may be empty.
  const std::vector<Point2>& limiter() const { return limiter_; }
  bool has_limiter() const { return !limiter_.empty(); }

  double area(int t) const { return areas_[t]; }
  Point2 centroid(int t) const;
  /// Gradients of the three P1 shape functions of triangle t (constant).
  const std::array<Eigen::Vector2d, 3>& shape_gradients(int t) const {
    return grads_[t];
  }
  /// Triangles incident to node i, ascending.
  const std::vector<int>& node_triangles(int i) const { return node_tris_[i]; }

  const BoundingBox& bounds() const { return bbox_; }
  double median_edge_length() const { return median_edge_; }
  /// Cumulative arclength of boundary() nodes; size boundary().size() + 1,
  /// the last entry is the perimeter.
  const std::vector<double>& boundary_arclength() const { return arclength_; }
  double perimeter() const { return arclength_.back(); }

  /// Locates p. Points on shared edges resolve to the lowest triangle index.
  std::optional<Location> locate(const Point2& p) const;

  /// P1 interpolation of a nodal field; throws LocationError outside.
  double interpolate(const NodalField& nodal, const Point2& p) const;
  double interpolate(const NodalField& nodal, const Location& loc) const;

  /// Gradient of the P1 interpolant on triangle t.
  Eigen::Vector2d gradient(const NodalField& nodal, int t) const;

  Point2 point_at(const Location& loc) const;

 private:
  void validate_and_build();
  void build_boundary();
  void build_grid();

  std::vector<Point2> nodes_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Point2> limiter_;

  std::vector<double> areas_;
  std::vector<std::array<Eigen::Vector2d, 3>> grads_;
  std::vector<std::vector<int>> node_tris_;
  std::vector<int> boundary_;
  std::vector<bool> on_boundary_;
  std::vector<int> boundary_pos_;
  std::vector<double> arclength_;
  BoundingBox bbox_{};
  double median_edge_ = 0.0;

  // uniform background grid for point location
  int grid_nr_ = 1;
  int grid_nz_ = 1;
  double cell_dr_ = 1.0;
  double cell_dz_ = 1.0;
  std::vector<int> cell_start_;
  std::vector<int> cell_tris_;
};

/// Parses the text mesh format:
///   nodes <N> triangles <T>
///   N lines "r z", T lines "i j k" (0-based, CCW)
///   optional "limiter <L>" followed by L lines "r z".
/// '#' starts a comment.
TriangularMesh read_mesh(std::istream& in);
TriangularMesh load_mesh(const std::filesystem::path& path);
void write_mesh(std::ostream& out, const TriangularMesh& mesh);
void save_mesh(const std::filesystem::path& path, const TriangularMesh& mesh);

/// Structured triangulation of [r0,r1]x[z0,z1] with nr x nz nodes. Cells
/// below the mid-plane are split along the (i,j)-(i+1,j+1) diagonal, cells
/// above along (i+1,j)-(i,j+1), so the mesh is mirror-symmetric in z for
/// odd nz. Node index is j*nr + i.
TriangularMesh rectangle_mesh(double r0, double r1, double z0, double z1,
                              int nr, int nz, std::vector<Point2> limiter = {});

/// Closed polygon approximating a circle, counter-clockwise.
std::vector<Point2> circle_polyline(Point2 center, double radius, int points);

/// Even-odd point-in-polygon test.
bool inside_polygon(std::span<const Point2> polygon, const Point2& p);

}  // namespace gsr
