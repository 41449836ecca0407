#include "gsr/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "gsr/error.hpp"
#include "gsr/fem.hpp"

namespace gsr {

namespace {

constexpr double kDomainSlack = 1e-9;

// 3-point Gauss-Legendre on [0,1]
constexpr std::array<double, 3> kGaussX = {0.1127016653792583,
                                           0.5, 0.8872983346207417};
constexpr std::array<double, 3> kGaussW = {5.0 / 18.0, 8.0 / 18.0,
                                           5.0 / 18.0};

}  // namespace

ReducedBasis::ReducedBasis(Kind kind, int m) : kind_(kind), m_(m) {}

ReducedBasis ReducedBasis::cubic_spline(int m) {
  if (m < 4)
    throw ValidationError("cubic spline basis needs m >= 4, got " +
                          std::to_string(m));
  ReducedBasis b(Kind::CubicSpline, m);
  const int spans = m - 3;
  b.knots_.assign(4, 0.0);
  for (int k = 1; k < spans; ++k)
    b.knots_.push_back(static_cast<double>(k) / spans);
  b.knots_.insert(b.knots_.end(), 4, 1.0);

  // per-span integrals, accumulated from the right
  b.span_tails_.assign(m + 1, Eigen::VectorXd::Zero(m));
  for (int s = m - 1; s >= 3; --s) {
    Eigen::VectorXd acc = b.span_tails_[s + 1];
    const double lo = b.knots_[s], hi = b.knots_[s + 1];
    double ders[3][4];
    for (int q = 0; q < 3; ++q) {
      const double x = lo + (hi - lo) * kGaussX[q];
      b.spline_ders(s, x, 0, ders);
      for (int j = 0; j < 4; ++j)
        acc[s - 3 + j] += kGaussW[q] * (hi - lo) * ders[0][j];
    }
    b.span_tails_[s] = acc;
  }

  b.penalty_ = Eigen::MatrixXd::Zero(m, m);
  for (int s = 3; s < m; ++s) {
    const double lo = b.knots_[s], hi = b.knots_[s + 1];
    double ders[3][4];
    for (int q = 0; q < 3; ++q) {
      const double x = lo + (hi - lo) * kGaussX[q];
      b.spline_ders(s, x, 2, ders);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          b.penalty_(s - 3 + i, s - 3 + j) +=
              kGaussW[q] * (hi - lo) * ders[2][i] * ders[2][j];
    }
  }
  return b;
}

ReducedBasis ReducedBasis::monomial(int m) {
  if (m < 1)
    throw ValidationError("monomial basis needs m >= 1, got " +
                          std::to_string(m));
  ReducedBasis b(Kind::Monomial, m);
  b.penalty_ = Eigen::MatrixXd::Zero(m, m);
  for (int i = 2; i < m; ++i)
    for (int j = 2; j < m; ++j)
      b.penalty_(i, j) = static_cast<double>(i * (i - 1) * j * (j - 1)) /
                         static_cast<double>(i + j - 3);
  return b;
}

ReducedBasis ReducedBasis::make(const std::string& kind, int m) {
  if (kind == "spline" || kind == "cubic_spline") return cubic_spline(m);
  if (kind == "monomial") return monomial(m);
  throw ValidationError("unknown basis kind '" + kind + "'");
}

std::string ReducedBasis::kind_name() const {
  return kind_ == Kind::CubicSpline ? "spline" : "monomial";
}

double ReducedBasis::clamp_argument(double x) const {
  if (!(x >= -kDomainSlack && x <= 1.0 + kDomainSlack))
    throw ValidationError("normalized flux " + std::to_string(x) +
                          " is outside [0, 1]");
  return std::clamp(x, 0.0, 1.0);
}

int ReducedBasis::find_span(double x) const {
  if (x >= 1.0) return m_ - 1;
  const auto it = std::upper_bound(knots_.begin() + 3, knots_.begin() + m_, x);
  return static_cast<int>(it - knots_.begin()) - 1;
}

void ReducedBasis::spline_ders(int span, double x, int order,
                               double ders[3][4]) const {
  constexpr int p = 3;
  double ndu[p + 1][p + 1];
  double left[p + 1], right[p + 1];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knots_[span + 1 - j];
    right[j] = knots_[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];
  if (order == 0) return;

  double a[2][p + 1];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= order; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= order; ++k) {
    for (int j = 0; j <= p; ++j) ders[k][j] *= factor;
    factor *= (p - k);
  }
}

void ReducedBasis::values(double x, double* out) const {
  x = clamp_argument(x);
  if (kind_ == Kind::Monomial) {
    double v = 1.0;
    for (int i = 0; i < m_; ++i) {
      out[i] = v;
      v *= x;
    }
    return;
  }
  std::fill(out, out + m_, 0.0);
  const int span = find_span(x);
  double ders[3][4];
  spline_ders(span, x, 0, ders);
  for (int j = 0; j < 4; ++j) out[span - 3 + j] = ders[0][j];
}

Eigen::VectorXd ReducedBasis::values(double x) const {
  Eigen::VectorXd out(m_);
  values(x, out.data());
  return out;
}

Eigen::VectorXd ReducedBasis::second_derivatives(double x) const {
  x = clamp_argument(x);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
  if (kind_ == Kind::Monomial) {
    for (int i = 2; i < m_; ++i) out[i] = i * (i - 1) * std::pow(x, i - 2);
    return out;
  }
  const int span = find_span(x);
  double ders[3][4];
  spline_ders(span, x, 2, ders);
  for (int j = 0; j < 4; ++j) out[span - 3 + j] = ders[2][j];
  return out;
}

Eigen::VectorXd ReducedBasis::tail_integrals(double x) const {
  x = clamp_argument(x);
  Eigen::VectorXd out(m_);
  if (kind_ == Kind::Monomial) {
    for (int i = 0; i < m_; ++i)
      out[i] = (1.0 - std::pow(x, i + 1)) / (i + 1);
    return out;
  }
  if (x >= 1.0) return Eigen::VectorXd::Zero(m_);
  const int span = find_span(x);
  out = span_tails_[span + 1];
  const double hi = knots_[span + 1];
  double ders[3][4];
  for (int q = 0; q < 3; ++q) {
    const double s = x + (hi - x) * kGaussX[q];
    spline_ders(span, s, 0, ders);
    for (int j = 0; j < 4; ++j)
      out[span - 3 + j] += kGaussW[q] * (hi - x) * ders[0][j];
  }
  return out;
}

double ReducedBasis::eval(const Eigen::Ref<const Eigen::VectorXd>& coeffs,
                          double x) const {
  if (coeffs.size() != m_)
    throw ValidationError("expected " + std::to_string(m_) +
                          " coefficients, got " +
                          std::to_string(coeffs.size()));
  return values(x).dot(coeffs);
}

ProfileCoefficients::ProfileCoefficients(Eigen::VectorXd u, int m)
    : u_(std::move(u)) {
  if (u_.size() != 3 * m)
    throw ValidationError("coefficient vector has " +
                          std::to_string(u_.size()) + " entries, expected " +
                          std::to_string(3 * m));
  if (!u_.allFinite())
    throw ValidationError("coefficient vector has non-finite entries");
}

ProfileCoefficients ProfileCoefficients::from_blocks(const Eigen::VectorXd& a,
                                                     const Eigen::VectorXd& b,
                                                     const Eigen::VectorXd& c) {
  const auto m = a.size();
  if (b.size() != m || c.size() != m)
    throw ValidationError("profile blocks differ in size");
  Eigen::VectorXd u(3 * m);
  u << a, b, c;
  return ProfileCoefficients(std::move(u), static_cast<int>(m));
}

Eigen::MatrixXd penalty_matrix(const ReducedBasis& basis,
                               const std::array<double, 3>& eps) {
  const int m = basis.size();
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(3 * m, 3 * m);
  for (int k = 0; k < 3; ++k) {
    if (!(eps[k] >= 0.0))
      throw ValidationError("regularization parameter " +
                            std::to_string(k + 1) + " is negative");
    lambda.block(k * m, k * m, m, m) = eps[k] * basis.penalty();
  }
  return lambda;
}

PressureProfile::PressureProfile(ReducedBasis basis, Eigen::VectorXd a,
                                 double psi_axis, double psi_b)
    : basis_(std::move(basis)), a_(std::move(a)), span_(psi_axis - psi_b) {
  if (a_.size() != basis_.size())
    throw ValidationError("pressure coefficients do not match the basis");
}

double PressureProfile::operator()(double psi_bar) const {
  return span_ * basis_.tail_integrals(psi_bar).dot(a_);
}

FProfile::FProfile(ReducedBasis basis, Eigen::VectorXd b, double psi_axis,
                   double psi_b, double f0)
    : basis_(std::move(basis)),
      b_(std::move(b)),
      span_(psi_axis - psi_b),
      f0_(f0) {
  if (b_.size() != basis_.size())
    throw ValidationError("ff' coefficients do not match the basis");
  if (f0_ == 0.0) throw ValidationError("vacuum f0 must be non-zero");
}

double FProfile::operator()(double psi_bar) const {
  const double f2 =
      f0_ * f0_ + 2.0 * kMu0 * span_ * basis_.tail_integrals(psi_bar).dot(b_);
  if (!(f2 > 0.0))
    throw ValidationError("f^2 = " + std::to_string(f2) +
                          " is not positive at normalized flux " +
                          std::to_string(psi_bar));
  return std::copysign(std::sqrt(f2), f0_);
}

void write_profiles_csv(std::ostream& out, const ReducedBasis& basis,
                        const ProfileCoefficients& u, double psi_axis,
                        double psi_b, double f0) {
  const PressureProfile p(basis, u.a(), psi_axis, psi_b);
  const FProfile f(basis, u.b(), psi_axis, psi_b, f0);
  out << "psi_bar,A,B,ne,p,f\n" << std::setprecision(17);
  for (int k = 0; k <= 100; ++k) {
    const double x = k / 100.0;
    const Eigen::VectorXd phi = basis.values(x);
    double fx = std::numeric_limits<double>::quiet_NaN();
    try {
      fx = f(x);
    } catch (const ValidationError&) {
    }
    out << x << ',' << phi.dot(u.a()) << ',' << phi.dot(u.b()) << ','
        << phi.dot(u.c()) << ',' << p(x) << ',' << fx << '\n';
  }
}

}  // namespace gsr
