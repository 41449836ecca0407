#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "gsr/error.hpp"
#include "gsr/fields.hpp"
#include "gsr/observations.hpp"

using namespace gsr;

namespace {

PlasmaState constant_state(const TriangularMesh& mesh, double psi_bar) {
  PlasmaState s;
  s.psi_axis = 10.0;
  s.psi_b = 2.0;
  s.psi_bar = NodalField::Constant(mesh.num_nodes(), psi_bar);
  s.mask = Eigen::VectorXd::Ones(mesh.num_triangles());
  return s;
}

Eigen::VectorXd blocks(double a, double b, double c) {
  Eigen::VectorXd u(3);
  u << a, b, c;
  return u;
}

}  // namespace

TEST_CASE("toroidal current density examples") {
  const TriangularMesh mesh = test::desk_mesh(9, false);
  const ReducedBasis one = ReducedBasis::monomial(1);
  const PlasmaState in = constant_state(mesh, 0.5);
  CHECK(toroidal_current_density(mesh, in, one, blocks(1, 0, 0), {2.0, 0.0}) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(toroidal_current_density(mesh, in, one, blocks(0, 3, 0), {1.5, 0.2}) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(toroidal_current_density(mesh, in, one, blocks(2, 3, 0), {1.5, 0.2}) ==
        doctest::Approx(5.0).epsilon(1e-15));
  const PlasmaState out = constant_state(mesh, 1.3);
  CHECK(toroidal_current_density(mesh, out, one, blocks(1, 1, 0), {2.0, 0.0}) == 0.0);
  CHECK_THROWS_AS(toroidal_current_density(mesh, in, one, blocks(1, 1, 0), {4.0, 0.0}),
                  LocationError);
}

TEST_CASE("toroidal field examples") {
  const TriangularMesh mesh = test::desk_mesh(9, false);
  const ReducedBasis mono = ReducedBasis::monomial(3);
  const PlasmaState s = constant_state(mesh, 0.0);
  const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  CHECK(toroidal_field(mono, zero, 3.0, s, 0.4, 1.0) == doctest::Approx(3.0));
  CHECK(toroidal_field(mono, zero, 3.0, s, 0.4, 1.5) == doctest::Approx(2.0));
  const Eigen::Vector3d b(1.0 / (2.0 * kMu0), 0.0, 0.0);
  CHECK(toroidal_field(mono, b, 3.0, s, 0.0, 1.0) == doctest::Approx(std::sqrt(17.0)));
  // outside the plasma the vacuum field is recovered
  CHECK(toroidal_field(mono, b, 3.0, s, 1.4, 2.0) == doctest::Approx(1.5));
}

TEST_CASE("vacuum fields") {
  const TriangularMesh mesh = test::desk_mesh(17, false);
  const NodalField psi = test::sample(mesh, [](const Point2& p) { return 0.3 * p.r - 0.1 * p.z; });
  const ReducedBasis basis = ReducedBasis::cubic_spline(6);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(18, 1e5);
  const Point2 p{1.7, -0.4};
  const FieldSample f = sample_fields(mesh, psi, std::nullopt, basis, u, 2.5, p);
  const Eigen::Vector2d bp = poloidal_field(mesh, psi, p);
  CHECK(f.b_r == bp.x());
  CHECK(f.b_z == bp.y());
  CHECK(f.b_r == doctest::Approx(0.1 / 1.7));
  CHECK(f.b_z == doctest::Approx(0.3 / 1.7));
  CHECK(f.b_phi == doctest::Approx(2.5 / 1.7));
  CHECK(f.j_phi == 0.0);
}

TEST_CASE("total plasma current of constant profiles") {
  const TriangularMesh mesh = test::desk_mesh(33, false);
  const ReducedBasis one = ReducedBasis::monomial(1);
  const PlasmaState s = constant_state(mesh, 0.2);
  // integral of r over [1,3]x[-1.5,1.5] is 12
  CHECK(plasma_current(mesh, s, one, blocks(1, 0, 0)) == doctest::Approx(12.0).epsilon(1e-12));
  // integral of 1/r is 3 ln 3
  CHECK(plasma_current(mesh, s, one, blocks(0, 1, 0)) ==
        doctest::Approx(3.0 * std::log(3.0)).epsilon(1e-3));
  PlasmaState empty = s;
  empty.mask.setZero();
  CHECK(plasma_current(mesh, empty, one, blocks(1, 1, 0)) == 0.0);
}

TEST_CASE("field grid CSV") {
  const TriangularMesh mesh = test::desk_mesh(9, false);
  const NodalField psi = test::sample(mesh, [](const Point2& p) { return p.r; });
  const ReducedBasis one = ReducedBasis::monomial(1);
  std::ostringstream out;
  write_field_grid_csv(out, mesh, psi, constant_state(mesh, 0.5), one, blocks(1, 0, 0), 2.0,
                       5, 7);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "r,z,B_r,B_z,B_phi,j_phi");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 6);
    CHECK(v[2] == doctest::Approx(0.0).scale(1.0));
    CHECK(v[3] == doctest::Approx(1.0 / v[0]));
    CHECK(v[5] == doctest::Approx(v[0]));
  }
  CHECK(rows == 35);
}
