#include "gsr/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>

namespace gsr {

std::vector<Segment> contour_segments(const TriangularMesh& mesh,
                                      const NodalField& f, double level) {
  std::vector<Segment> out;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    Point2 pts[2];
    int n = 0;
    for (int e = 0; e < 3 && n < 2; ++e) {
      const int i = tri[e], j = tri[(e + 1) % 3];
      const double fi = f[i] - level, fj = f[j] - level;
      // half-open rule so a vertex on the level is counted once
      if ((fi >= 0.0) == (fj >= 0.0)) continue;
      const double s = fi / (fi - fj);
      const Point2& a = mesh.node(i);
      const Point2& b = mesh.node(j);
      pts[n++] = {a.r + s * (b.r - a.r), a.z + s * (b.z - a.z)};
    }
    if (n == 2) out.push_back({pts[0], pts[1]});
  }
  return out;
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

}  // namespace

void write_flux_svg(std::ostream& out, const TriangularMesh& mesh,
                    const FluxMap& psi, const std::optional<PlasmaState>& state,
                    const SvgOptions& options) {
  const auto& bb = mesh.bounds();
  const double margin = 10.0;
  const double scale = options.width_px / (bb.r_max - bb.r_min);
  const double width = options.width_px + 2 * margin;
  const double height = (bb.z_max - bb.z_min) * scale + 2 * margin;
  auto x = [&](const Point2& p) { return fmt(margin + (p.r - bb.r_min) * scale); };
  auto y = [&](const Point2& p) { return fmt(margin + (bb.z_max - p.z) * scale); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
      << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(width)
      << ' ' << fmt(height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto polyline = [&](const std::vector<Point2>& pts, bool closed,
                      const char* style) {
    out << (closed ? "<polygon" : "<polyline") << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      out << (i ? " " : "") << x(pts[i]) << ',' << y(pts[i]);
    out << "\" " << style << "/>\n";
  };
  auto segments = [&](const std::vector<Segment>& segs, const char* style) {
    if (segs.empty()) return;
    out << "<path d=\"";
    for (const Segment& s : segs)
      out << 'M' << x(s.a) << ' ' << y(s.a) << 'L' << x(s.b) << ' ' << y(s.b);
    out << "\" " << style << "/>\n";
  };

  std::vector<Point2> outline;
  for (int i : mesh.boundary()) outline.push_back(mesh.node(i));
  polyline(outline, true, "fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"");

  const double lo = psi.minCoeff(), hi = psi.maxCoeff();
  if (hi > lo) {
    out << "<g id=\"flux-contours\">\n";
    for (int k = 1; k <= options.levels; ++k) {
      const double level = lo + (hi - lo) * k / (options.levels + 1);
      segments(contour_segments(mesh, psi, level),
               "fill=\"none\" stroke=\"#d07020\" stroke-width=\"0.8\"");
    }
    out << "</g>\n";
  }
  if (mesh.has_limiter()) {
    std::vector<Point2> lim(mesh.limiter().begin(), mesh.limiter().end());
    polyline(lim, true, "id=\"limiter\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"");
  }
  if (state) {
    out << "<g id=\"plasma-boundary\">\n";
    segments(contour_segments(mesh, psi, state->psi_b),
             "fill=\"none\" stroke=\"blue\" stroke-width=\"3\"");
    out << "</g>\n";
    out << "<circle id=\"axis\" cx=\"" << x(state->axis) << "\" cy=\""
        << y(state->axis) << "\" r=\"3\" fill=\"blue\"/>\n";
    if (state->xpoint)
      out << "<circle id=\"xpoint\" cx=\"" << x(*state->xpoint) << "\" cy=\""
          << y(*state->xpoint) << "\" r=\"3\" fill=\"red\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace gsr
