#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gsr/error.hpp"
#include "gsr/fem.hpp"
#include "gsr/profiles.hpp"

using namespace gsr;

namespace {

// composite Simpson rule on [a, b] with n (even) intervals
template <class F>
double simpson(F&& f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

// second derivative of the basis expansion by central differences of values
double fd_second(const ReducedBasis& basis, const Eigen::VectorXd& c, double x) {
  const double h = 1e-4;
  const double xm = std::clamp(x, h, 1.0 - h);
  return (basis.eval(c, xm + h) - 2.0 * basis.eval(c, xm) + basis.eval(c, xm - h)) /
         (h * h);
}

}  // namespace

TEST_CASE("monomial evaluation") {
  const ReducedBasis mono = ReducedBasis::monomial(3);
  for (double x : {0.0, 0.3, 1.0})
    CHECK(mono.eval(Eigen::Vector3d(1, 0, 0), x) == 1.0);
  CHECK(mono.eval(Eigen::Vector3d(0, 1, 0), 0.5) == 0.5);
  CHECK(mono.kind_name() == "monomial");
}

TEST_CASE("cubic splines form a partition of unity") {
  const ReducedBasis sp = ReducedBasis::cubic_spline(8);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(8);
  for (int k = 0; k <= 10000; ++k) {
    const double x = k / 10000.0;
    CHECK(sp.eval(ones, x) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(sp.values(x).minCoeff() >= -1e-15);
  }
}

TEST_CASE("argument clamping and rejection") {
  const ReducedBasis sp = ReducedBasis::cubic_spline(6);
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(6, 1.0, 2.0);
  CHECK(sp.eval(c, -5e-10) == sp.eval(c, 0.0));
  CHECK(sp.eval(c, 1.0 + 5e-10) == sp.eval(c, 1.0));
  CHECK_THROWS_AS(sp.eval(c, -1e-6), ValidationError);
  CHECK_THROWS_AS(sp.eval(c, 1.01), ValidationError);
  CHECK_THROWS_AS(ReducedBasis::cubic_spline(3), ValidationError);
  CHECK_THROWS_AS(ReducedBasis::make("wavelet", 8), ValidationError);
}

TEST_CASE("monomial penalty matches the hand integral") {
  const ReducedBasis mono = ReducedBasis::monomial(3);
  Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
  expected(2, 2) = 4.0;
  CHECK((mono.penalty() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("penalty quadratic form equals numerical quadrature") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (const ReducedBasis& basis :
       {ReducedBasis::cubic_spline(8), ReducedBasis::cubic_spline(5),
        ReducedBasis::monomial(5)}) {
    const int m = basis.size();
    for (int t = 0; t < 5; ++t) {
      Eigen::VectorXd c(m);
      for (int i = 0; i < m; ++i) c[i] = n(rng);
      const double form = c.dot(basis.penalty() * c);
      // exact second derivatives, quadrature over each knot span
      double exact = 0.0;
      const int spans = basis.kind() == ReducedBasis::Kind::CubicSpline ? m - 3 : 1;
      for (int s = 0; s < spans; ++s) {
        const double a = static_cast<double>(s) / spans, b = (s + 1.0) / spans;
        exact += simpson(
            [&](double x) {
              const double d2 = basis.second_derivatives(x).dot(c);
              return d2 * d2;
            },
            a + 1e-12, b - 1e-12, 400);
      }
      CHECK(form == doctest::Approx(exact).epsilon(1e-8));
      // independent check of the second derivatives themselves
      CHECK(basis.second_derivatives(0.37).dot(c) ==
            doctest::Approx(fd_second(basis, c, 0.37)).epsilon(1e-5));
    }
  }
}

TEST_CASE("penalty matrix structure") {
  const ReducedBasis sp = ReducedBasis::cubic_spline(8);
  const Eigen::MatrixXd zero = penalty_matrix(sp, {0, 0, 0});
  CHECK(zero.rows() == 24);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd lam = penalty_matrix(sp, {1.0, 2.0, 3.0});
  CHECK((lam.block(8, 8, 8, 8) - 2.0 * sp.penalty()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(lam.block(0, 8, 8, 8).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(penalty_matrix(sp, {1.0, -1.0, 0.0}), ValidationError);

  // affine profile A(x) = x has no penalty; S is symmetric PSD
  const Eigen::VectorXd a = sp.project([](double x) { return x; });
  Eigen::VectorXd u = Eigen::VectorXd::Zero(24);
  u.head(8) = a;
  CHECK(std::abs(u.dot(penalty_matrix(sp, {1e6, 0, 0}) * u)) < 1e-6);
  CHECK((sp.penalty() - sp.penalty().transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tail integrals against quadrature") {
  for (const ReducedBasis& basis :
       {ReducedBasis::cubic_spline(8), ReducedBasis::monomial(4)}) {
    for (double x : {0.0, 0.23, 0.5, 0.91, 1.0}) {
      const Eigen::VectorXd tails = basis.tail_integrals(x);
      for (int i = 0; i < basis.size(); ++i) {
        const double q = x < 1.0 ? simpson([&](double s) { return basis.values(s)[i]; },
                                           x, 1.0, 4000)
                                 : 0.0;
        CHECK(tails[i] == doctest::Approx(q).epsilon(1e-10).scale(1e-3));
      }
    }
  }
}

TEST_CASE("projection is exact inside the basis") {
  const ReducedBasis sp = ReducedBasis::cubic_spline(8);
  const auto cubic = [](double x) { return 1.0 - 2.0 * x + 0.5 * x * x * x; };
  const Eigen::VectorXd c = sp.project(cubic);
  for (double x : {0.0, 0.1, 0.55, 1.0})
    CHECK(sp.eval(c, x) == doctest::Approx(cubic(x)).epsilon(1e-12));
}

TEST_CASE("pressure profile closed forms") {
  const ReducedBasis mono = ReducedBasis::monomial(3);
  CHECK(PressureProfile(mono, Eigen::Vector3d::Zero(), 10, 2)(0.3) == 0.0);
  const PressureProfile one(mono, Eigen::Vector3d(1, 0, 0), 10.0, 2.0);
  CHECK(one(0.0) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(one(0.5) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(one(1.0) == 0.0);
  const PressureProfile two_x(mono, Eigen::Vector3d(0, 2, 0), 10.0, 2.0);
  CHECK(two_x(0.0) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(two_x(0.5) == doctest::Approx(8.0 * 0.75).epsilon(1e-14));

  // polynomial A in the spline basis: p = span (x - x^3/3 ... ) closed form
  const ReducedBasis sp = ReducedBasis::cubic_spline(8);
  const Eigen::VectorXd a = sp.project([](double x) { return 3.0 * x * x - 1.0; });
  const PressureProfile p(sp, a, 5.0, 1.0);
  for (double x : {0.0, 0.4, 0.8})
    CHECK(p(x) == doctest::Approx(4.0 * ((1.0 - 1.0) - (x * x * x - x))).epsilon(1e-10));
}

TEST_CASE("f profile closed forms and radicand failure") {
  const ReducedBasis mono = ReducedBasis::monomial(3);
  const FProfile zero(mono, Eigen::Vector3d::Zero(), 10, 2, 3.0);
  CHECK(zero(0.2) == 3.0);
  const FProfile f(mono, Eigen::Vector3d(1.0 / (2.0 * kMu0), 0, 0), 10.0, 2.0, 3.0);
  CHECK(f(0.0) == doctest::Approx(std::sqrt(17.0)).epsilon(1e-14));
  CHECK(f(1.0) == 3.0);
  const FProfile neg(mono, Eigen::Vector3d(1.0 / (2.0 * kMu0), 0, 0), 10.0, 2.0, -3.0);
  CHECK(neg(0.0) == doctest::Approx(-std::sqrt(17.0)).epsilon(1e-14));
  const FProfile bad(mono, Eigen::Vector3d(-1e6, 0, 0), 10.0, 2.0, 0.1);
  try {
    bad(0.25);
    FAIL("expected a radicand error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("0.25") != std::string::npos);
  }
  CHECK_THROWS_AS(FProfile(mono, Eigen::Vector3d::Zero(), 1, 0, 0.0), ValidationError);
}

TEST_CASE("profile coefficients and CSV export") {
  CHECK_THROWS_AS(ProfileCoefficients(Eigen::VectorXd::Zero(7), 2), ValidationError);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(6);
  bad[2] = std::nan("");
  CHECK_THROWS_AS(ProfileCoefficients(bad, 2), ValidationError);
  const ProfileCoefficients u = ProfileCoefficients::from_blocks(
      Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(2, 0, 0));
  CHECK(u.m() == 3);
  CHECK(u.c()[0] == 2.0);

  std::ostringstream out;
  write_profiles_csv(out, ReducedBasis::monomial(3), u, 10.0, 2.0, 3.0);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "psi_bar,A,B,ne,p,f");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 101);
}
