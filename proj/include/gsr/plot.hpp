#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "gsr/flux.hpp"
#include "gsr/mesh.hpp"

namespace gsr {

struct Segment {
  Point2 a;
  Point2 b;
};

/// Marching triangles: the pieces of the level set {f = level} of the P1
/// interpolant, one segment per crossed triangle.
std::vector<Segment> contour_segments(const TriangularMesh& mesh,
                                      const NodalField& f, double level);

struct SvgOptions {
  int levels = 20;
  double width_px = 480.0;
};

/// Flux-surface plot: mesh outline, limiter (black), evenly spaced psi
/// contours and the plasma boundary psi = psi_b (thick blue). Contains no
/// timestamps, so equal inputs give equal files.
void write_flux_svg(std::ostream& out, const TriangularMesh& mesh,
                    const FluxMap& psi, const std::optional<PlasmaState>& state,
                    const SvgOptions& options = {});

}  // namespace gsr
