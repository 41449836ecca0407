#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

namespace gsr {

/// Reduced basis on the normalized flux interval [0, 1] shared by the three
/// unknown profiles A = p', B = ff'/mu0 and n_e.
class ReducedBasis {
 public:
  enum class Kind { CubicSpline, Monomial };

  /// Clamped cubic B-splines on uniform knots; m >= 4.
  static ReducedBasis cubic_spline(int m);
  /// 1, x, ..., x^(m-1); m >= 1.
  static ReducedBasis monomial(int m);
  /// Parses "spline" / "monomial".
  static ReducedBasis make(const std::string& kind, int m);

  Kind kind() const { return kind_; }
  std::string kind_name() const;
  int size() const { return m_; }

  /// phi_i(x) for all i. x outside [0,1] by at most 1e-9 is clamped;
  /// further out throws ValidationError.
  Eigen::VectorXd values(double x) const;
  /// Allocation-free variant; out must hold size() entries.
  void values(double x, double* out) const;
  Eigen::VectorXd second_derivatives(double x) const;
  /// int_x^1 phi_i(s) ds for all i.
  Eigen::VectorXd tail_integrals(double x) const;

  double eval(const Eigen::Ref<const Eigen::VectorXd>& coeffs, double x) const;

  /// S_ij = int_0^1 phi_i'' phi_j''.
  const Eigen::MatrixXd& penalty() const { return penalty_; }

  /// Least-squares coefficients of a function sampled densely on [0,1];
  /// exact for functions inside the basis.
  template <class F>
  Eigen::VectorXd project(F&& f, int samples = 257) const;

 private:
  ReducedBasis(Kind kind, int m);
  double clamp_argument(double x) const;
  int find_span(double x) const;
  // values (row 0) and derivatives (rows 1, 2) of the 4 non-zero splines
  void spline_ders(int span, double x, int order, double ders[3][4]) const;

  Kind kind_;
  int m_;
  std::vector<double> knots_;
  std::vector<Eigen::VectorXd> span_tails_;  // int over spans >= s
  Eigen::MatrixXd penalty_;
};

/// Stacked coefficients u = (a_1..a_m, b_1..b_m, c_1..c_m).
class ProfileCoefficients {
 public:
  ProfileCoefficients() = default;
  explicit ProfileCoefficients(int m) : u_(Eigen::VectorXd::Zero(3 * m)) {}
  /// Throws ValidationError unless u has 3m finite entries.
  ProfileCoefficients(Eigen::VectorXd u, int m);
  static ProfileCoefficients from_blocks(const Eigen::VectorXd& a,
                                         const Eigen::VectorXd& b,
                                         const Eigen::VectorXd& c);

  int m() const { return static_cast<int>(u_.size() / 3); }
  const Eigen::VectorXd& vector() const { return u_; }
  Eigen::VectorXd& vector() { return u_; }

  auto a() const { return u_.segment(0, m()); }
  auto b() const { return u_.segment(m(), m()); }
  auto c() const { return u_.segment(2 * m(), m()); }
  auto a() { return u_.segment(0, m()); }
  auto b() { return u_.segment(m(), m()); }
  auto c() { return u_.segment(2 * m(), m()); }

 private:
  Eigen::VectorXd u_;
};

/// Lambda = blockdiag(eps1 S, eps2 S, eps3 S). Throws for negative eps.
Eigen::MatrixXd penalty_matrix(const ReducedBasis& basis,
                               const std::array<double, 3>& eps);

/// p(x) = (psi_axis - psi_b) int_x^1 A, so that p(1) = 0.
class PressureProfile {
 public:
  PressureProfile(ReducedBasis basis, Eigen::VectorXd a, double psi_axis,
                  double psi_b);
  double operator()(double psi_bar) const;

 private:
  ReducedBasis basis_;
  Eigen::VectorXd a_;
  double span_;
};

/// f(x) from f^2 = f0^2 + 2 mu0 (psi_axis - psi_b) int_x^1 B, sign of f0.
class FProfile {
 public:
  FProfile(ReducedBasis basis, Eigen::VectorXd b, double psi_axis,
           double psi_b, double f0);
  /// Throws ValidationError naming psi_bar when f^2 <= 0 there.
  double operator()(double psi_bar) const;

 private:
  ReducedBasis basis_;
  Eigen::VectorXd b_;
  double span_;
  double f0_;
};

/// CSV with columns psi_bar,A,B,ne,p,f at 101 uniform samples. The flux
/// span psi_axis - psi_b may be zero (no plasma). f is written as nan where
/// its radicand is not positive.
void write_profiles_csv(std::ostream& out, const ReducedBasis& basis,
                        const ProfileCoefficients& u, double psi_axis,
                        double psi_b, double f0);

template <class F>
Eigen::VectorXd ReducedBasis::project(F&& f, int samples) const {
  Eigen::MatrixXd a(samples, m_);
  Eigen::VectorXd y(samples);
  for (int k = 0; k < samples; ++k) {
    const double x = static_cast<double>(k) / (samples - 1);
    a.row(k) = values(x).transpose();
    y[k] = f(x);
  }
  return a.colPivHouseholderQr().solve(y);
}

}  // namespace gsr
