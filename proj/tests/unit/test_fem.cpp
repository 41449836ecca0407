#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "gsr/fem.hpp"

using namespace gsr;

TEST_CASE("single-triangle stiffness entry with centroid quadrature") {
  const TriangularMesh one({{1, 0}, {2, 0}, {1, 1}}, {{0, 1, 2}});
  StiffnessSystem sys(one);
  // grad phi_0 = (-1,-1), area 1/2, r_c = 4/3
  const double k00 = 1.0 / (kMu0 * 4.0 / 3.0) * 2.0 * 0.5;
  CHECK(sys.stiffness().coeff(0, 0) == doctest::Approx(k00).epsilon(1e-14));
  CHECK(k00 == doctest::Approx(3.0 / (4.0 * kMu0)).epsilon(1e-14));
  // phi_1 = r - 1, phi_2 = z: grad.grad = 0
  CHECK(std::abs(sys.stiffness().coeff(1, 2)) < 1e-12 * k00);
  CHECK(sys.stiffness().coeff(0, 1) == doctest::Approx(-k00 / 2.0).epsilon(1e-14));
}

TEST_CASE("stiffness is symmetric and constants are in its kernel") {
  const TriangularMesh mesh = test::desk_mesh(9, false);
  StiffnessSystem sys(mesh);
  const Eigen::MatrixXd k = Eigen::MatrixXd(sys.stiffness());
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * k.cwiseAbs().maxCoeff());
  const Eigen::VectorXd k1 = k * Eigen::VectorXd::Ones(k.rows());
  double interior_max = 0.0;
  for (int i : sys.interior_nodes()) interior_max = std::max(interior_max, std::abs(k1[i]));
  CHECK(interior_max < 1e-10 * k.norm());
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues();
  CHECK(ev.minCoeff() > -1e-9 * ev.maxCoeff());
}

TEST_CASE("constant and z boundary data are reproduced exactly") {
  const TriangularMesh mesh = test::desk_mesh(33, false);
  StiffnessSystem sys(mesh);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(mesh.num_nodes());

  const NodalField c = sys.solve(zero, Eigen::VectorXd::Constant(mesh.boundary().size(), 2.5));
  CHECK((c.array() - 2.5).abs().maxCoeff() < 1e-10 * 2.5);

  const Eigen::VectorXd hz = test::boundary_sample(mesh, [](const Point2& p) { return p.z; });
  const NodalField z = sys.solve_vacuum(hz);
  const NodalField exact = test::sample(mesh, [](const Point2& p) { return p.z; });
  CHECK((z - exact).cwiseAbs().maxCoeff() < 1e-10 * 1.5);
}

TEST_CASE("boundary values are imposed and the solve is linear") {
  const TriangularMesh mesh = test::desk_mesh(17, false);
  StiffnessSystem sys(mesh);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const int nn = mesh.num_nodes();
  const int nb = static_cast<int>(mesh.boundary().size());
  Eigen::VectorXd s1(nn), s2(nn), h1(nb), h2(nb);
  for (int i = 0; i < nn; ++i) s1[i] = n(rng), s2[i] = n(rng);
  for (int i = 0; i < nb; ++i) h1[i] = n(rng), h2[i] = n(rng);
  s1 /= kMu0;
  s2 /= kMu0;
  const NodalField a = sys.solve(s1, h1);
  const NodalField b = sys.solve(s2, h2);
  const NodalField ab = sys.solve(s1 + s2, h1 + h2);
  CHECK((ab - a - b).cwiseAbs().maxCoeff() <= 1e-12 * ab.cwiseAbs().maxCoeff());
  CHECK((sys.boundary_values(a) - h1).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd res = sys.residual(a, s1, h1);
  CHECK(res.cwiseAbs().maxCoeff() <= 1e-9 * s1.cwiseAbs().maxCoeff());

  Eigen::MatrixXd loads(nn, 2);
  loads << s1, s2;
  const Eigen::MatrixXd cols = sys.solve_homogeneous(loads);
  const Eigen::VectorXd zb = Eigen::VectorXd::Zero(nb);
  CHECK((cols.col(0) - sys.solve(s1, zb)).cwiseAbs().maxCoeff() <=
        1e-12 * cols.col(0).cwiseAbs().maxCoeff());
  CHECK((cols.col(1) - sys.solve(s2, zb)).cwiseAbs().maxCoeff() <=
        1e-12 * cols.col(1).cwiseAbs().maxCoeff());
}

TEST_CASE("manufactured null solution r^2 z converges at second order") {
  const auto exact = [](const Point2& p) { return p.r * p.r * p.z; };
  std::vector<double> err;
  for (int n : {9, 17, 33}) {
    const TriangularMesh mesh = test::desk_mesh(n, false);
    StiffnessSystem sys(mesh);
    const NodalField psi = sys.solve_vacuum(test::boundary_sample(mesh, exact));
    err.push_back(l2_error(mesh, psi, exact));
  }
  for (std::size_t k = 1; k < err.size(); ++k) {
    const double ratio = err[k - 1] / err[k];
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
}

TEST_CASE("factorization is reused across solves") {
  const TriangularMesh mesh = test::desk_mesh(45, false);
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  StiffnessSystem sys(mesh);
  const double setup = std::chrono::duration<double>(Clock::now() - t0).count();
  const Eigen::VectorXd h = test::boundary_sample(mesh, [](const Point2& p) { return p.r; });
  sys.solve_vacuum(h);
  double best = 1e9;
  for (int k = 0; k < 5; ++k) {
    const auto t1 = Clock::now();
    sys.solve_vacuum(h * (k + 1.0));
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t1).count());
  }
  CHECK(best * 10.0 <= setup);
}

TEST_CASE("dimension mismatch is rejected") {
  const TriangularMesh mesh = test::desk_mesh(5, false);
  StiffnessSystem sys(mesh);
  CHECK_THROWS(sys.solve(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(mesh.boundary().size())));
  CHECK_THROWS(sys.solve_vacuum(Eigen::VectorXd::Zero(2)));
}
