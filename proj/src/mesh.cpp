#include "gsr/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <unordered_map>

#include "gsr/error.hpp"

namespace gsr {

namespace {

constexpr double kBarycentricTol = 1e-12;

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

double signed_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * ((b.r - a.r) * (c.z - a.z) - (c.r - a.r) * (b.z - a.z));
}

double distance(const Point2& a, const Point2& b) {
  return std::hypot(b.r - a.r, b.z - a.z);
}

}  // namespace

double BoundingBox::diagonal() const {
  return std::hypot(r_max - r_min, z_max - z_min);
}

TriangularMesh::TriangularMesh(std::vector<Point2> nodes,
                               std::vector<std::array<int, 3>> triangles,
                               std::vector<Point2> limiter)
    : nodes_(std::move(nodes)),
      triangles_(std::move(triangles)),
      limiter_(std::move(limiter)) {
  validate_and_build();
  build_boundary();
  build_grid();
}

void TriangularMesh::validate_and_build() {
  if (nodes_.empty()) throw ValidationError("mesh has no nodes");
  if (triangles_.empty()) throw ValidationError("mesh has no triangles");

  bbox_ = {nodes_[0].r, nodes_[0].r, nodes_[0].z, nodes_[0].z};
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Point2& p = nodes_[i];
    if (!std::isfinite(p.r) || !std::isfinite(p.z))
      throw ValidationError("node " + std::to_string(i) +
                            " has a non-finite coordinate");
    if (!(p.r > 0.0))
      throw ValidationError("node " + std::to_string(i) +
                            " has non-positive radius r = " +
                            std::to_string(p.r));
    bbox_.r_min = std::min(bbox_.r_min, p.r);
    bbox_.r_max = std::max(bbox_.r_max, p.r);
    bbox_.z_min = std::min(bbox_.z_min, p.z);
    bbox_.z_max = std::max(bbox_.z_max, p.z);
  }

  const int n = num_nodes();
  node_tris_.assign(n, {});
  areas_.resize(triangles_.size());
  grads_.resize(triangles_.size());
  for (int t = 0; t < num_triangles(); ++t) {
    const auto& tri = triangles_[t];
    for (int v : tri) {
      if (v < 0 || v >= n)
        throw ValidationError("triangle " + std::to_string(t) +
                              " references missing node " + std::to_string(v));
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw ValidationError("triangle " + std::to_string(t) +
                            " repeats a node");
    const Point2& a = nodes_[tri[0]];
    const Point2& b = nodes_[tri[1]];
    const Point2& c = nodes_[tri[2]];
    const double area = signed_area(a, b, c);
    if (!(area > 0.0))
      throw ValidationError("triangle " + std::to_string(t) +
                            " is not counter-clockwise (signed area " +
                            std::to_string(area) + ")");
    areas_[t] = area;
    // grad phi_i = (z_j - z_k, r_k - r_j) / (2 area)
    for (int i = 0; i < 3; ++i) {
      const Point2& pj = nodes_[tri[(i + 1) % 3]];
      const Point2& pk = nodes_[tri[(i + 2) % 3]];
      grads_[t][i] = Eigen::Vector2d(pj.z - pk.z, pk.r - pj.r) / (2.0 * area);
    }
    for (int v : tri) node_tris_[v].push_back(t);
  }
  for (int i = 0; i < n; ++i) {
    if (node_tris_[i].empty())
      throw ValidationError("node " + std::to_string(i) +
                            " is not referenced by any triangle");
  }

  if (!limiter_.empty()) {
    if (limiter_.size() < 3)
      throw ValidationError("limiter needs at least 3 points");
    for (std::size_t i = 0; i < limiter_.size(); ++i) {
      if (!std::isfinite(limiter_[i].r) || !std::isfinite(limiter_[i].z) ||
          !(limiter_[i].r > 0.0))
        throw ValidationError("limiter point " + std::to_string(i) +
                              " is invalid");
    }
  }
}

void TriangularMesh::build_boundary() {
  struct EdgeUse {
    int count = 0;
    int from = -1;
    int to = -1;
    int triangle = -1;
  };
  std::unordered_map<std::uint64_t, EdgeUse> edges;
  edges.reserve(triangles_.size() * 2);
  for (int t = 0; t < num_triangles(); ++t) {
    const auto& tri = triangles_[t];
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e];
      const int b = tri[(e + 1) % 3];
      EdgeUse& use = edges[edge_key(a, b)];
      if (use.count == 1 && use.from == a)
        throw ValidationError("triangle " + std::to_string(t) +
                              " overlaps triangle " +
                              std::to_string(use.triangle) + " along edge (" +
                              std::to_string(a) + "," + std::to_string(b) +
                              ")");
      if (use.count == 2)
        throw ValidationError("triangle " + std::to_string(t) +
                              " makes edge (" + std::to_string(a) + "," +
                              std::to_string(b) +
                              ") non-manifold (more than two triangles)");
      if (use.count == 0) {
        use.from = a;
        use.to = b;
        use.triangle = t;
      }
      ++use.count;
    }
  }

  const int n = num_nodes();
  std::vector<int> next(n, -1);
  std::vector<double> lengths;
  lengths.reserve(edges.size());
  int boundary_edges = 0;
  for (const auto& [key, use] : edges) {
    lengths.push_back(distance(nodes_[use.from], nodes_[use.to]));
    if (use.count != 1) continue;
    if (next[use.from] != -1)
      throw ValidationError("boundary is non-manifold at node " +
                            std::to_string(use.from) + " (triangle " +
                            std::to_string(use.triangle) + ")");
    next[use.from] = use.to;
    ++boundary_edges;
  }
  if (boundary_edges == 0) throw ValidationError("mesh has no boundary");

  std::nth_element(lengths.begin(), lengths.begin() + lengths.size() / 2,
                   lengths.end());
  median_edge_ = lengths[lengths.size() / 2];

  const int start = static_cast<int>(
      std::find_if(next.begin(), next.end(), [](int v) { return v != -1; }) -
      next.begin());
  on_boundary_.assign(n, false);
  boundary_pos_.assign(n, -1);
  int v = start;
  do {
    if (on_boundary_[v])
      throw ValidationError("boundary revisits node " + std::to_string(v));
    on_boundary_[v] = true;
    boundary_pos_[v] = static_cast<int>(boundary_.size());
    boundary_.push_back(v);
    v = next[v];
    if (v == -1)
      throw ValidationError("boundary loop is open at node " +
                            std::to_string(boundary_.back()));
  } while (v != start);
  if (static_cast<int>(boundary_.size()) != boundary_edges) {
    const auto stray = std::find_if(next.begin(), next.end(), [&](int w) {
      return w != -1 && !on_boundary_[w];
    });
    const int node = stray == next.end()
                         ? -1
                         : static_cast<int>(stray - next.begin());
    throw ValidationError(
        "boundary has more than one loop (node " + std::to_string(node) +
        " is on a second loop)");
  }

  arclength_.assign(boundary_.size() + 1, 0.0);
  for (std::size_t i = 0; i < boundary_.size(); ++i) {
    const Point2& a = nodes_[boundary_[i]];
    const Point2& b = nodes_[boundary_[(i + 1) % boundary_.size()]];
    arclength_[i + 1] = arclength_[i] + distance(a, b);
  }
}

void TriangularMesh::build_grid() {
  const double w = std::max(bbox_.r_max - bbox_.r_min, 1e-300);
  const double h = std::max(bbox_.z_max - bbox_.z_min, 1e-300);
  const double cells = std::max(1.0, static_cast<double>(num_triangles()) / 2);
  grid_nr_ = std::max(1, static_cast<int>(std::ceil(std::sqrt(cells * w / h))));
  grid_nz_ = std::max(1, static_cast<int>(std::ceil(cells / grid_nr_)));
  cell_dr_ = w / grid_nr_;
  cell_dz_ = h / grid_nz_;

  auto cell_range = [&](int t) {
    const auto& tri = triangles_[t];
    double r_lo = nodes_[tri[0]].r, r_hi = r_lo;
    double z_lo = nodes_[tri[0]].z, z_hi = z_lo;
    for (int v : tri) {
      r_lo = std::min(r_lo, nodes_[v].r);
      r_hi = std::max(r_hi, nodes_[v].r);
      z_lo = std::min(z_lo, nodes_[v].z);
      z_hi = std::max(z_hi, nodes_[v].z);
    }
    auto ci = [&](double r) {
      return std::clamp(static_cast<int>(std::floor((r - bbox_.r_min) / cell_dr_)),
                        0, grid_nr_ - 1);
    };
    auto cj = [&](double z) {
      return std::clamp(static_cast<int>(std::floor((z - bbox_.z_min) / cell_dz_)),
                        0, grid_nz_ - 1);
    };
    const double pad_r = 1e-9 * w;
    const double pad_z = 1e-9 * h;
    return std::array<int, 4>{ci(r_lo - pad_r), ci(r_hi + pad_r),
                              cj(z_lo - pad_z), cj(z_hi + pad_z)};
  };

  std::vector<int> counts(static_cast<std::size_t>(grid_nr_) * grid_nz_ + 1, 0);
  for (int t = 0; t < num_triangles(); ++t) {
    const auto rg = cell_range(t);
    for (int j = rg[2]; j <= rg[3]; ++j)
      for (int i = rg[0]; i <= rg[1]; ++i) ++counts[j * grid_nr_ + i + 1];
  }
  for (std::size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
  cell_start_ = counts;
  cell_tris_.assign(counts.back(), 0);
  std::vector<int> fill(counts.begin(), counts.end() - 1);
  // ascending triangle order within every cell
  for (int t = 0; t < num_triangles(); ++t) {
    const auto rg = cell_range(t);
    for (int j = rg[2]; j <= rg[3]; ++j)
      for (int i = rg[0]; i <= rg[1]; ++i) cell_tris_[fill[j * grid_nr_ + i]++] = t;
  }
}

Point2 TriangularMesh::centroid(int t) const {
  const auto& tri = triangles_[t];
  return {(nodes_[tri[0]].r + nodes_[tri[1]].r + nodes_[tri[2]].r) / 3.0,
          (nodes_[tri[0]].z + nodes_[tri[1]].z + nodes_[tri[2]].z) / 3.0};
}

std::optional<Location> TriangularMesh::locate(const Point2& p) const {
  const double tol_r = 1e-12 * (bbox_.r_max - bbox_.r_min + 1.0);
  const double tol_z = 1e-12 * (bbox_.z_max - bbox_.z_min + 1.0);
  if (!(p.r >= bbox_.r_min - tol_r && p.r <= bbox_.r_max + tol_r &&
        p.z >= bbox_.z_min - tol_z && p.z <= bbox_.z_max + tol_z))
    return std::nullopt;
  const int i = std::clamp(
      static_cast<int>(std::floor((p.r - bbox_.r_min) / cell_dr_)), 0,
      grid_nr_ - 1);
  const int j = std::clamp(
      static_cast<int>(std::floor((p.z - bbox_.z_min) / cell_dz_)), 0,
      grid_nz_ - 1);
  const int cell = j * grid_nr_ + i;
  for (int k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) {
    const int t = cell_tris_[k];
    const auto& tri = triangles_[t];
    std::array<double, 3> lam{};
    bool inside = true;
    for (int v = 0; v < 3; ++v) {
      const Point2& pv = nodes_[tri[v]];
      lam[v] = 1.0 + grads_[t][v].dot(Eigen::Vector2d(p.r - pv.r, p.z - pv.z));
      if (lam[v] < -kBarycentricTol) {
        inside = false;
        break;
      }
    }
    if (!inside) continue;
    double sum = 0.0;
    for (double& l : lam) {
      l = std::max(l, 0.0);
      sum += l;
    }
    for (double& l : lam) l /= sum;
    return Location{t, lam};
  }
  return std::nullopt;
}

double TriangularMesh::interpolate(const NodalField& nodal,
                                   const Location& loc) const {
  const auto& tri = triangles_[loc.triangle];
  return loc.lambda[0] * nodal[tri[0]] + loc.lambda[1] * nodal[tri[1]] +
         loc.lambda[2] * nodal[tri[2]];
}

double TriangularMesh::interpolate(const NodalField& nodal,
                                   const Point2& p) const {
  if (nodal.size() != num_nodes())
    throw ValidationError("nodal field has " + std::to_string(nodal.size()) +
                          " values, mesh has " + std::to_string(num_nodes()) +
                          " nodes");
  const auto loc = locate(p);
  if (!loc)
    throw LocationError("point (" + std::to_string(p.r) + ", " +
                        std::to_string(p.z) + ") is outside the mesh");
  return interpolate(nodal, *loc);
}

Eigen::Vector2d TriangularMesh::gradient(const NodalField& nodal,
                                         int t) const {
  const auto& tri = triangles_[t];
  return nodal[tri[0]] * grads_[t][0] + nodal[tri[1]] * grads_[t][1] +
         nodal[tri[2]] * grads_[t][2];
}

Point2 TriangularMesh::point_at(const Location& loc) const {
  const auto& tri = triangles_[loc.triangle];
  Point2 p{0.0, 0.0};
  for (int v = 0; v < 3; ++v) {
    p.r += loc.lambda[v] * nodes_[tri[v]].r;
    p.z += loc.lambda[v] * nodes_[tri[v]].z;
  }
  return p;
}

// ---------------------------------------------------------------------------
// text format

namespace {

struct Token {
  std::string text;
  int line;
};

class TokenStream {
 public:
  explicit TokenStream(std::istream& in) {
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (auto hash = line.find('#'); hash != std::string::npos)
        line.erase(hash);
      std::istringstream words(line);
      std::string w;
      while (words >> w) tokens_.push_back({w, number});
    }
  }

  bool done() const { return pos_ >= tokens_.size(); }

  const Token& next(const std::string& what) {
    if (done())
      throw ParseError("mesh file: unexpected end of file, expected " + what);
    return tokens_[pos_++];
  }

  void keyword(const std::string& word) {
    const Token& t = next("'" + word + "'");
    if (t.text != word)
      throw ParseError("mesh file line " + std::to_string(t.line) +
                       ": expected '" + word + "', found '" + t.text + "'");
  }

  double number(const std::string& what) {
    const Token& t = next(what);
    try {
      std::size_t used = 0;
      const double v = std::stod(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument(t.text);
      return v;
    } catch (const std::exception&) {
      throw ParseError("mesh file line " + std::to_string(t.line) + ": " +
                       what + " is not a number: '" + t.text + "'");
    }
  }

  long integer(const std::string& what) {
    const Token& t = next(what);
    try {
      std::size_t used = 0;
      const long v = std::stol(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument(t.text);
      return v;
    } catch (const std::exception&) {
      throw ParseError("mesh file line " + std::to_string(t.line) + ": " +
                       what + " is not an integer: '" + t.text + "'");
    }
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

TriangularMesh read_mesh(std::istream& in) {
  TokenStream ts(in);
  ts.keyword("nodes");
  const long n = ts.integer("node count");
  ts.keyword("triangles");
  const long t = ts.integer("triangle count");
  if (n <= 0 || t <= 0)
    throw ParseError("mesh file: node and triangle counts must be positive");

  std::vector<Point2> nodes(n);
  for (long i = 0; i < n; ++i) {
    const std::string what = "node " + std::to_string(i);
    nodes[i].r = ts.number(what + " r");
    nodes[i].z = ts.number(what + " z");
  }
  std::vector<std::array<int, 3>> tris(t);
  for (long i = 0; i < t; ++i) {
    for (int v = 0; v < 3; ++v)
      tris[i][v] = static_cast<int>(
          ts.integer("triangle " + std::to_string(i) + " vertex"));
  }
  std::vector<Point2> limiter;
  if (!ts.done()) {
    ts.keyword("limiter");
    const long l = ts.integer("limiter point count");
    if (l < 0) throw ParseError("mesh file: negative limiter point count");
    limiter.resize(l);
    for (long i = 0; i < l; ++i) {
      const std::string what = "limiter point " + std::to_string(i);
      limiter[i].r = ts.number(what + " r");
      limiter[i].z = ts.number(what + " z");
    }
    if (!ts.done())
      throw ParseError("mesh file: trailing content after limiter section");
  }
  return TriangularMesh(std::move(nodes), std::move(tris), std::move(limiter));
}

TriangularMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file '" + path.string() + "'");
  return read_mesh(in);
}

void write_mesh(std::ostream& out, const TriangularMesh& mesh) {
  out << std::setprecision(17);
  out << "nodes " << mesh.num_nodes() << " triangles " << mesh.num_triangles()
      << '\n';
  for (const Point2& p : mesh.nodes()) out << p.r << ' ' << p.z << '\n';
  for (const auto& tri : mesh.triangles())
    out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
  if (mesh.has_limiter()) {
    out << "limiter " << mesh.limiter().size() << '\n';
    for (const Point2& p : mesh.limiter()) out << p.r << ' ' << p.z << '\n';
  }
}

void save_mesh(const std::filesystem::path& path, const TriangularMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file '" + path.string() + "'");
  write_mesh(out, mesh);
}

TriangularMesh rectangle_mesh(double r0, double r1, double z0, double z1,
                              int nr, int nz, std::vector<Point2> limiter) {
  if (nr < 2 || nz < 2)
    throw ValidationError("rectangle mesh needs at least 2x2 nodes");
  std::vector<Point2> nodes;
  nodes.reserve(static_cast<std::size_t>(nr) * nz);
  for (int j = 0; j < nz; ++j) {
    // symmetric about the mid-plane in floating point as well
    const double z = 0.5 * (z0 + z1) +
                     0.5 * (z1 - z0) * (2 * j - (nz - 1)) / (nz - 1);
    for (int i = 0; i < nr; ++i)
      nodes.push_back({r0 + (r1 - r0) * i / (nr - 1), z});
  }
  std::vector<std::array<int, 3>> tris;
  tris.reserve(2 * static_cast<std::size_t>(nr - 1) * (nz - 1));
  for (int j = 0; j + 1 < nz; ++j) {
    for (int i = 0; i + 1 < nr; ++i) {
      const int a = j * nr + i;
      const int b = a + 1;
      const int c = a + nr + 1;
      const int d = a + nr;
      if (2 * j + 1 < nz - 1) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  }
  return TriangularMesh(std::move(nodes), std::move(tris), std::move(limiter));
}

std::vector<Point2> circle_polyline(Point2 center, double radius, int points) {
  std::vector<Point2> out;
  out.reserve(points);
  for (int k = 0; k < points; ++k) {
    const double a = 2.0 * std::numbers::pi * k / points;
    out.push_back({center.r + radius * std::cos(a),
                   center.z + radius * std::sin(a)});
  }
  return out;
}

bool inside_polygon(std::span<const Point2> polygon, const Point2& p) {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[j];
    if ((a.z > p.z) != (b.z > p.z)) {
      const double r_cross = a.r + (p.z - a.z) * (b.r - a.r) / (b.z - a.z);
      if (p.r < r_cross) inside = !inside;
    }
  }
  return inside;
}

}  // namespace gsr
