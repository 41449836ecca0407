#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "gsr/error.hpp"
#include "gsr/flux.hpp"

using namespace gsr;

namespace {

double paraboloid(const Point2& p) {
  return -((p.r - 2.0) * (p.r - 2.0) + p.z * p.z);
}

// Monte-Carlo fraction of the reference triangle where the linear
// interpolant of v is >= level.
double mc_fraction(const std::array<double, 3>& v, double level, int samples,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int hits = 0;
  for (int k = 0; k < samples; ++k) {
    double a = u(rng), b = u(rng);
    if (a + b > 1.0) a = 1.0 - a, b = 1.0 - b;
    const double val = (1.0 - a - b) * v[0] + a * v[1] + b * v[2];
    if (val >= level) ++hits;
  }
  return static_cast<double>(hits) / samples;
}

}  // namespace

TEST_CASE("axis of an analytic paraboloid") {
  const TriangularMesh mesh = test::desk_mesh(33, false);
  const NodalField psi = test::sample(mesh, paraboloid);
  const MagneticAxis axis = find_axis(mesh, psi);
  CHECK(std::abs(axis.point.r - 2.0) < 1e-6);
  CHECK(std::abs(axis.point.z) < 1e-6);
  CHECK(std::abs(axis.psi) < 1e-12);
}

TEST_CASE("axis refinement of an off-node maximum") {
  const TriangularMesh mesh = test::desk_mesh(33, false);
  const NodalField psi = test::sample(mesh, [](const Point2& p) {
    return -((p.r - 2.03) * (p.r - 2.03) + 2.0 * (p.z - 0.02) * (p.z - 0.02));
  });
  const MagneticAxis axis = find_axis(mesh, psi);
  CHECK(std::abs(axis.point.r - 2.03) < 1e-6);
  CHECK(std::abs(axis.point.z - 0.02) < 1e-6);
}

TEST_CASE("degenerate axis cases") {
  const TriangularMesh mesh = test::desk_mesh(9, false);
  CHECK_THROWS_AS(find_axis(mesh, NodalField::Constant(mesh.num_nodes(), 1.0)),
                  DegeneratePlasmaError);
  CHECK_THROWS_AS(find_axis(mesh, test::sample(mesh, [](const Point2& p) { return p.z; })),
                  DegeneratePlasmaError);
}

TEST_CASE("limiter boundary flux") {
  const TriangularMesh mesh = rectangle_mesh(1, 3, -1.5, 1.5, 33, 33,
                                             circle_polyline({2, 0}, 0.5, 256));
  const NodalField psi = test::sample(mesh, paraboloid);
  const MagneticAxis axis = find_axis(mesh, psi);
  const BoundaryFlux b = find_boundary_flux(mesh, psi, mesh.limiter(), axis);
  CHECK(b.kind == BoundaryKind::Limiter);
  CHECK(b.psi_b == doctest::Approx(-0.25).epsilon(0.02));
  CHECK_FALSE(b.xpoint);
}

TEST_CASE("saddle of an analytic hyperbolic field") {
  const TriangularMesh mesh = test::desk_mesh(33, false);
  const NodalField psi = test::sample(mesh, [](const Point2& p) {
    return -(p.r - 2.0) * (p.r - 2.0) + p.z * p.z;
  });
  const std::vector<Region> everywhere{{1.0, 3.0, -1.5, 1.5}};
  const auto saddles = find_saddles(mesh, psi, everywhere);
  REQUIRE(saddles.size() == 1);
  const double cell = 2.0 / 32.0;
  CHECK(std::abs(saddles[0].point.r - 2.0) < cell);
  CHECK(std::abs(saddles[0].point.z) < cell);
}

TEST_CASE("no limiter and no saddle is an error") {
  const TriangularMesh mesh = test::desk_mesh(17, false);
  const NodalField psi = test::sample(mesh, paraboloid);
  const MagneticAxis axis = find_axis(mesh, psi);
  CHECK_THROWS_AS(find_boundary_flux(mesh, psi, {}, axis), DegeneratePlasmaError);
}

TEST_CASE("X-point wins over the limiter when it gives the smaller plasma") {
  // two maxima with a saddle between them, both inside an elliptic limiter
  std::vector<Point2> ellipse;
  for (int k = 0; k < 256; ++k) {
    const double t = 2.0 * std::numbers::pi * k / 256;
    ellipse.push_back({2.0 + 0.9 * std::cos(t), -0.2 + 1.25 * std::sin(t)});
  }
  const TriangularMesh mesh = rectangle_mesh(1, 3, -1.5, 1.5, 41, 41, ellipse);
  const auto bump = [](const Point2& p, double z0) {
    return std::exp(-((p.r - 2.0) * (p.r - 2.0) + (p.z - z0) * (p.z - z0)) / 0.08);
  };
  const NodalField psi = test::sample(
      mesh, [&](const Point2& p) { return bump(p, 0.4) + 0.6 * bump(p, -0.8); });
  FluxAnalysisOptions opts;
  opts.xpoint_regions = {{1.0, 3.0, -1.5, 1.5}};
  const PlasmaState s = analyze(mesh, psi, opts);
  CHECK(s.boundary_kind == BoundaryKind::XPoint);
  REQUIRE(s.xpoint);
  CHECK(s.xpoint->z < 0.4);
  CHECK(s.xpoint->z > -0.8);
  CHECK(std::abs(s.xpoint->r - 2.0) < 0.05);
  opts.xpoint_search = false;
  const PlasmaState l = analyze(mesh, psi, opts);
  CHECK(l.boundary_kind == BoundaryKind::Limiter);
  CHECK(l.psi_b < s.psi_b);
}

TEST_CASE("normalization arithmetic and boundary value") {
  const TriangularMesh mesh = test::desk_mesh(5, false);
  NodalField psi = NodalField::Constant(mesh.num_nodes(), 2.0);
  psi[12] = 10.0;
  psi[6] = 6.0;
  const auto [bar, mask] = normalize(mesh, psi, 10.0, 2.0);
  CHECK(bar[6] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(bar[12] == 0.0);
  CHECK(bar[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(normalize(mesh, psi, 2.0, 2.0), DegeneratePlasmaError);
}

TEST_CASE("cut fraction of the (3,1,1) triangle against Monte-Carlo") {
  CHECK(superlevel_fraction({3.0, 1.0, 1.0}, 2.0) == doctest::Approx(0.25).epsilon(1e-14));
  std::mt19937_64 rng(5);
  CHECK(std::abs(mc_fraction({3.0, 1.0, 1.0}, 2.0, 400000, rng) - 0.25) < 0.005);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const std::array<double, 3> v{u(rng), u(rng), u(rng)};
    const double level = 0.5 * u(rng);
    const double exact = superlevel_fraction(v, level);
    double pieces = 0.0;
    for (const auto& sub : superlevel_cut(v, level)) pieces += barycentric_area(sub);
    CHECK(pieces == doctest::Approx(exact).epsilon(1e-12));
    CHECK(std::abs(mc_fraction(v, level, 200000, rng) - exact) < 0.006);
  }
}

TEST_CASE("mask: range, monotonicity and plasma area against Monte-Carlo") {
  const TriangularMesh mesh = test::desk_mesh(17, false);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NodalField psi(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) psi[i] = u(rng);
  const double hi = psi.maxCoeff();

  Eigen::VectorXd prev;
  for (double level : {0.3, 0.5, 0.7}) {
    const auto [bar, mask] = normalize(mesh, psi, hi, level);
    CHECK(mask.minCoeff() >= 0.0);
    CHECK(mask.maxCoeff() <= 1.0);
    if (prev.size()) CHECK(((mask - prev).array() <= 1e-15).all());
    prev = mask;

    double area = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) area += mask[t] * mesh.area(t);
    std::uniform_real_distribution<double> ur(1.0, 3.0), uz(-1.5, 1.5);
    const int samples = 200000;
    int hits = 0;
    for (int k = 0; k < samples; ++k)
      if (mesh.interpolate(psi, Point2{ur(rng), uz(rng)}) >= level) ++hits;
    const double mc = 6.0 * hits / samples;
    CHECK(std::abs(area - mc) < 0.03);
  }
}

TEST_CASE("normalized flux is invariant under affine rescaling") {
  const TriangularMesh mesh = test::desk_mesh(33, true);
  const NodalField psi = test::sample(mesh, paraboloid);
  const PlasmaState a = analyze(mesh, psi);
  const PlasmaState b = analyze(mesh, NodalField(3.7 * psi.array() + 12.5));
  CHECK((a.psi_bar - b.psi_bar).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.mask - b.mask).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.plasma_area(mesh) == doctest::Approx(std::numbers::pi).epsilon(0.01));
}
