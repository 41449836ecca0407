#include "gsr/observations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gsr/error.hpp"
#include "gsr/fields.hpp"

namespace gsr {

namespace {

// Linear functional sum_k coef[k] * psi[nodes[k]] on one triangle.
struct NodalFunctional {
  std::array<int, 3> nodes{};
  std::array<double, 3> coef{};

  double apply(const NodalField& psi) const {
    return coef[0] * psi[nodes[0]] + coef[1] * psi[nodes[1]] +
           coef[2] * psi[nodes[2]];
  }
  Eigen::RowVectorXd apply_rows(const Eigen::MatrixXd& g) const {
    return coef[0] * g.row(nodes[0]) + coef[1] * g.row(nodes[1]) +
           coef[2] * g.row(nodes[2]);
  }
};

// (1/r) grad(psi) . n on the triangle of loc
NodalFunctional gradient_functional(const TriangularMesh& mesh,
                                    const Location& loc,
                                    const Eigen::Vector2d& n) {
  NodalFunctional f;
  f.nodes = mesh.triangle(loc.triangle);
  const double r = mesh.point_at(loc).r;
  const auto& g = mesh.shape_gradients(loc.triangle);
  for (int k = 0; k < 3; ++k) f.coef[k] = g[k].dot(n) / r;
  return f;
}

Eigen::Vector2d probe_normal(const Probe& probe) {
  return {probe.tangent.y(), -probe.tangent.x()};
}

Eigen::Vector2d chord_normal(const Chord& chord) {
  const Eigen::Vector2d d(chord.end.r - chord.start.r,
                          chord.end.z - chord.start.z);
  const Eigen::Vector2d u = d.normalized();
  return {u.y(), -u.x()};
}

// a1 Br + a2 Bz + a3 Bphi - tan(gamma) (a4 Br + a5 Bz + a6 Bphi), as
// coefficients of (Br, Bz, Bphi)
std::array<double, 3> mse_row(const MsePoint& p) {
  const double t = std::tan(p.gamma);
  const auto& a = p.coefficients;
  return {a[0] - t * a[3], a[1] - t * a[4], a[2] - t * a[5]};
}

NodalFunctional mse_functional(const TriangularMesh& mesh, const Location& loc,
                               const MsePoint& p) {
  const auto w = mse_row(p);
  // Br = -(1/r) dpsi/dz, Bz = (1/r) dpsi/dr
  return gradient_functional(mesh, loc, Eigen::Vector2d(w[1], -w[0]));
}

Location locate_or_throw(const TriangularMesh& mesh, const Point2& p,
                         const char* what) {
  const auto loc = mesh.locate(p);
  if (!loc)
    throw LocationError(std::string(what) + " at (" + std::to_string(p.r) +
                        ", " + std::to_string(p.z) + ") is outside the mesh");
  return *loc;
}

double square(double x) { return x * x; }

}  // namespace

// ---------------------------------------------------------------------------

void MeasurementSet::validate(const TriangularMesh& mesh) const {
  const double tol = 1e-4 * mesh.bounds().diagonal();
  for (std::size_t i = 0; i < flux_loops.size(); ++i) {
    double d = 0.0;
    boundary_arclength(mesh, flux_loops[i].position, &d);
    if (d > tol)
      throw ValidationError("flux loop " + std::to_string(i) +
                            " is not on the mesh boundary (distance " +
                            std::to_string(d) + ")");
  }
  for (std::size_t i = 0; i < probes.size(); ++i) {
    double d = 0.0;
    boundary_arclength(mesh, probes[i].position, &d);
    if (d > tol)
      throw ValidationError("probe " + std::to_string(i) +
                            " is not on the mesh boundary (distance " +
                            std::to_string(d) + ")");
    if (std::abs(probes[i].tangent.norm() - 1.0) > 1e-6)
      throw ValidationError("probe " + std::to_string(i) +
                            " direction is not a unit vector");
    if (!(probes[i].weight >= 0.0))
      throw ValidationError("probe " + std::to_string(i) +
                            " has a negative weight");
  }
  for (std::size_t i = 0; i < chords.size(); ++i) {
    const Chord& c = chords[i];
    if (c.start.r == c.end.r && c.start.z == c.end.z)
      throw ValidationError("chord " + std::to_string(i) +
                            " has coincident endpoints");
    if (!(c.polarimetry_weight >= 0.0) || !(c.interferometry_weight >= 0.0))
      throw ValidationError("chord " + std::to_string(i) +
                            " has a negative weight");
  }
  for (std::size_t i = 0; i < pressure.size(); ++i) {
    if (!(pressure[i].r > 0.0) || !(pressure[i].weight >= 0.0))
      throw ValidationError("pressure sample " + std::to_string(i) +
                            " is invalid");
  }
  if (pressure_r_min && pressure_r_max && *pressure_r_min > *pressure_r_max)
    throw ValidationError("pressure range has r_min > r_max");
  for (std::size_t i = 0; i < mse.size(); ++i) {
    if (!(mse[i].weight >= 0.0))
      throw ValidationError("MSE point " + std::to_string(i) +
                            " has a negative weight");
  }
  if (weights) {
    for (double k : *weights)
      if (!(k >= 0.0)) throw ValidationError("family weights must be >= 0");
  }
  if (regularization) {
    for (double e : *regularization)
      if (!(e >= 0.0))
        throw ValidationError("regularization parameters must be >= 0");
  }
  if (!(f0 != 0.0) || !std::isfinite(f0))
    throw ValidationError("f0 must be finite and non-zero");
}

double boundary_arclength(const TriangularMesh& mesh, const Point2& p,
                          double* distance) {
  const auto& b = mesh.boundary();
  const auto& s = mesh.boundary_arclength();
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Point2& a = mesh.node(b[i]);
    const Point2& c = mesh.node(b[(i + 1) % b.size()]);
    const double dr = c.r - a.r, dz = c.z - a.z;
    const double len2 = dr * dr + dz * dz;
    double t = ((p.r - a.r) * dr + (p.z - a.z) * dz) / len2;
    t = std::clamp(t, 0.0, 1.0);
    const double d = std::hypot(a.r + t * dr - p.r, a.z + t * dz - p.z);
    if (d < best_d) {
      best_d = d;
      best_s = s[i] + t * (s[i + 1] - s[i]);
    }
  }
  if (distance) *distance = best_d;
  return best_s;
}

Eigen::VectorXd boundary_condition(const TriangularMesh& mesh,
                                   const std::vector<FluxLoop>& loops) {
  if (loops.size() < 2)
    throw ValidationError(
        "boundary condition underdetermined: need at least 2 flux loops, got " +
        std::to_string(loops.size()));
  const double perimeter = mesh.perimeter();
  std::vector<std::pair<double, double>> knots;  // (arclength, value)
  knots.reserve(loops.size());
  for (const FluxLoop& l : loops)
    knots.emplace_back(boundary_arclength(mesh, l.position), l.value);
  std::stable_sort(knots.begin(), knots.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });

  const auto& b = mesh.boundary();
  const auto& s = mesh.boundary_arclength();
  Eigen::VectorXd h(b.size());
  const std::size_t n = knots.size();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double si = s[i];
    // first knot strictly after si, cyclically
    const auto it = std::upper_bound(
        knots.begin(), knots.end(), si,
        [](double v, const auto& k) { return v < k.first; });
    const std::size_t hi = (it == knots.end()) ? 0 : it - knots.begin();
    const std::size_t lo = (hi + n - 1) % n;
    double s_lo = knots[lo].first;
    double s_hi = knots[hi].first;
    double x = si;
    if (s_hi <= s_lo) s_hi += perimeter;  // wrap
    if (x < s_lo) x += perimeter;
    const double gap = s_hi - s_lo;
    const double t = gap > 0.0 ? (x - s_lo) / gap : 0.5;
    h[static_cast<Eigen::Index>(i)] =
        (1.0 - t) * knots[lo].second + t * knots[hi].second;
  }
  return h;
}

Location locate_sensor(const TriangularMesh& mesh, const Point2& p) {
  if (auto loc = mesh.locate(p)) return *loc;
  const auto& b = mesh.boundary();
  double best_d = std::numeric_limits<double>::infinity();
  Point2 target = p;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Point2& a = mesh.node(b[i]);
    const Point2& c = mesh.node(b[(i + 1) % b.size()]);
    const double dr = c.r - a.r, dz = c.z - a.z;
    const double len = std::hypot(dr, dz);
    const double t = std::clamp(
        ((p.r - a.r) * dr + (p.z - a.z) * dz) / (len * len), 0.0, 1.0);
    const Point2 q{a.r + t * dr, a.z + t * dz};
    const double d = std::hypot(q.r - p.r, q.z - p.z);
    if (d < best_d) {
      best_d = d;
      // interior lies to the left of the counter-clockwise boundary
      target = {q.r - 0.5 * dz, q.z + 0.5 * dr};
    }
  }
  return locate_or_throw(mesh, target, "sensor");
}

Eigen::Vector2d poloidal_field(const TriangularMesh& mesh, const FluxMap& psi,
                               const Point2& p) {
  const Location loc = locate_or_throw(mesh, p, "field point");
  const Eigen::Vector2d g = mesh.gradient(psi, loc.triangle);
  const double r = mesh.point_at(loc).r;
  return {-g.y() / r, g.x() / r};
}

double probe_response(const TriangularMesh& mesh, const FluxMap& psi,
                      const Probe& probe) {
  const Location loc = locate_sensor(mesh, probe.position);
  return gradient_functional(mesh, loc, probe_normal(probe)).apply(psi);
}

std::vector<ChordSample> chord_samples(const TriangularMesh& mesh,
                                       const Chord& chord) {
  const double len =
      std::hypot(chord.end.r - chord.start.r, chord.end.z - chord.start.z);
  const double step = 0.5 * mesh.median_edge_length();
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  const double dl = len / n;
  std::vector<ChordSample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double s = (k + 0.5) / n;
    const Point2 p{chord.start.r + s * (chord.end.r - chord.start.r),
                   chord.start.z + s * (chord.end.z - chord.start.z)};
    if (auto loc = mesh.locate(p)) out.push_back({*loc, p.r, dl});
  }
  if (out.empty())
    throw LocationError("chord from (" + std::to_string(chord.start.r) + ", " +
                        std::to_string(chord.start.z) +
                        ") lies entirely outside the mesh");
  return out;
}

ChordValues chord_integrals(const TriangularMesh& mesh,
                            const NodalField& psi_bar, const FluxMap& psi,
                            const ReducedBasis& basis, const Eigen::VectorXd& c,
                            const Chord& chord) {
  const Eigen::Vector2d n = chord_normal(chord);
  ChordValues out;
  for (const ChordSample& s : chord_samples(mesh, chord)) {
    const double x = mesh.interpolate(psi_bar, s.loc);
    if (x > 1.0) continue;
    const double ne = basis.eval(c, std::max(x, 0.0));
    const double dpsi_dn = mesh.gradient(psi, s.loc.triangle).dot(n);
    out.polarimetry += ne * dpsi_dn / s.r * s.dl;
    out.interferometry += ne * s.dl;
  }
  return out;
}

double mse_angle(double b_r, double b_z, double b_phi,
                 const std::array<double, 6>& a) {
  const double num = a[0] * b_r + a[1] * b_z + a[2] * b_phi;
  const double den = a[3] * b_r + a[4] * b_z + a[5] * b_phi;
  if (den == 0.0 || !std::isfinite(num / den))
    throw ValidationError("MSE angle has a vanishing denominator");
  return std::atan(num / den);
}

double mse_residual(double b_r, double b_z, double b_phi,
                    const std::array<double, 6>& a, double gamma) {
  const double t = std::tan(gamma);
  return (a[0] - t * a[3]) * b_r + (a[1] - t * a[4]) * b_z +
         (a[2] - t * a[5]) * b_phi;
}

std::vector<double> pressure_samples(const ReducedBasis& basis,
                                     const Eigen::VectorXd& a,
                                     const PlasmaState& state,
                                     const TriangularMesh& mesh,
                                     const NodalField& psi_bar,
                                     const std::vector<double>& radii) {
  const PressureProfile p(basis, a, state.psi_axis, state.psi_b);
  std::vector<double> out;
  out.reserve(radii.size());
  for (double r : radii) {
    const Location loc = locate_or_throw(mesh, {r, 0.0}, "pressure sample");
    const double x = mesh.interpolate(psi_bar, loc);
    out.push_back(x > 1.0 ? 0.0 : p(std::max(x, 0.0)));
  }
  return out;
}

std::vector<double> pressure_quadrature_weights(const MeasurementSet& meas) {
  const std::size_t n = meas.pressure.size();
  std::vector<double> w(n, 0.0);
  if (n == 0) return w;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) {
    return meas.pressure[i].r < meas.pressure[j].r;
  });
  const double first = meas.pressure[order.front()].r;
  const double last = meas.pressure[order.back()].r;
  const double r_min = std::min(meas.pressure_r_min.value_or(first), first);
  const double r_max = std::max(meas.pressure_r_max.value_or(last), last);
  if (n == 1) {
    w[0] = r_max > r_min ? r_max - r_min : 1.0;
    return w;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double lo = k == 0 ? meas.pressure[order[k]].r
                             : meas.pressure[order[k - 1]].r;
    const double hi = k + 1 == n ? meas.pressure[order[k]].r
                                 : meas.pressure[order[k + 1]].r;
    w[order[k]] = 0.5 * (hi - lo);
  }
  w[order.front()] += first - r_min;
  w[order.back()] += r_max - last;
  return w;
}

// ---------------------------------------------------------------------------

const char* to_string(Family f) {
  switch (f) {
    case Family::Probe: return "probe";
    case Family::Polarimetry: return "polarimetry";
    case Family::Interferometry: return "interferometry";
    case Family::Pressure: return "pressure";
    case Family::Mse: return "mse";
  }
  return "?";
}

std::array<double, kNumFamilies> family_rms(const MeasurementSet& meas) {
  std::array<double, kNumFamilies> sum{};
  std::array<int, kNumFamilies> count{};
  auto add = [&](Family f, double v) {
    sum[static_cast<int>(f)] += v * v;
    ++count[static_cast<int>(f)];
  };
  for (const Probe& p : meas.probes) add(Family::Probe, p.value);
  for (const Chord& c : meas.chords) {
    if (c.polarimetry) add(Family::Polarimetry, *c.polarimetry);
    if (c.interferometry) add(Family::Interferometry, *c.interferometry);
  }
  for (const PressureSample& s : meas.pressure) add(Family::Pressure, s.value);
  for (const MsePoint& p : meas.mse) add(Family::Mse, p.gamma);
  std::array<double, kNumFamilies> out{};
  for (int f = 0; f < kNumFamilies; ++f) {
    const double rms = count[f] ? std::sqrt(sum[f] / count[f]) : 0.0;
    out[f] = rms > 0.0 && std::isfinite(rms) ? rms : 1.0;
  }
  return out;
}

namespace {

double row_weight(const ObservationWeights& w, Family f, double sensor) {
  const double k = w.family_weight(f) * sensor;
  return k > 0.0 ? std::sqrt(k) / w.scale[static_cast<int>(f)] : 0.0;
}

// Inputs of the residual models; the frozen and unfrozen variants differ in
// which flux map feeds each measurement family.
struct ModelInputs {
  const FluxMap& magnetics;        // probes and MSE B_r, B_z
  const NodalField& psi_bar;       // profile argument
  const FluxMap& chord_field;      // polarimetry field factor
  const PlasmaState& state;        // flux span for the pressure integral
  Eigen::VectorXd b_for_bphi;      // ff' coefficients for B_phi
};

// B_phi under the MSE freeze; an unphysical f (negative radicand) during
// the outer iteration falls back to the vacuum field
double frozen_bphi(const ReducedBasis& basis, const Eigen::VectorXd& b,
                   double f0, const PlasmaState& state, double psi_bar,
                   double r) {
  try {
    return toroidal_field(basis, b, f0, state, std::max(psi_bar, 0.0), r);
  } catch (const ValidationError&) {
    return f0 / r;
  }
}

// Per-family sums of sensor-weighted squared residuals; families with zero
// K are skipped.
FamilyMisfit residual_sums(const TriangularMesh& mesh, const ReducedBasis& basis,
                           const ModelInputs& in, const MeasurementSet& meas,
                           const ObservationWeights& weights,
                           const Eigen::VectorXd& u) {
  const int m = basis.size();
  const Eigen::VectorXd a = u.segment(0, m);
  const Eigen::VectorXd c = u.segment(2 * m, m);
  FamilyMisfit j{};
  auto active = [&](Family f) { return weights.family_weight(f) > 0.0; };
  auto& j_probe = j[static_cast<int>(Family::Probe)];
  auto& j_pol = j[static_cast<int>(Family::Polarimetry)];
  auto& j_int = j[static_cast<int>(Family::Interferometry)];
  auto& j_p = j[static_cast<int>(Family::Pressure)];
  auto& j_mse = j[static_cast<int>(Family::Mse)];

  for (const Probe& p : meas.probes) {
    if (!(p.weight > 0.0)) continue;
    j_probe += p.weight * square(probe_response(mesh, in.magnetics, p) - p.value);
  }
  for (const Chord& ch : meas.chords) {
    const bool pol = ch.polarimetry && ch.polarimetry_weight > 0.0 &&
                     active(Family::Polarimetry);
    const bool itf = ch.interferometry && ch.interferometry_weight > 0.0 &&
                     active(Family::Interferometry);
    if (!pol && !itf) continue;
    const ChordValues v =
        chord_integrals(mesh, in.psi_bar, in.chord_field, basis, c, ch);
    if (pol) j_pol += ch.polarimetry_weight * square(v.polarimetry - *ch.polarimetry);
    if (itf)
      j_int += ch.interferometry_weight *
               square(v.interferometry - *ch.interferometry);
  }
  if (!meas.pressure.empty() && active(Family::Pressure)) {
    const auto wq = pressure_quadrature_weights(meas);
    std::vector<double> radii;
    for (const auto& s : meas.pressure) radii.push_back(s.r);
    const auto model =
        pressure_samples(basis, a, in.state, mesh, in.psi_bar, radii);
    for (std::size_t k = 0; k < meas.pressure.size(); ++k) {
      const double w = wq[k] * meas.pressure[k].weight;
      if (!(w > 0.0)) continue;
      j_p += w * square(model[k] - meas.pressure[k].value);
    }
  }
  if (active(Family::Mse)) {
    for (const MsePoint& p : meas.mse) {
      if (!(p.weight > 0.0)) continue;
      const Eigen::Vector2d bp = poloidal_field(mesh, in.magnetics, p.position);
      const double x = mesh.interpolate(in.psi_bar, p.position);
      const double b_phi = frozen_bphi(basis, in.b_for_bphi, meas.f0, in.state,
                                       x, p.position.r);
      j_mse += p.weight * square(mse_residual(bp.x(), bp.y(), b_phi,
                                              p.coefficients, p.gamma));
    }
  }
  return j;
}

}  // namespace

LinearizedObservation linearize(const StiffnessSystem& system,
                                const ReducedBasis& basis,
                                const LinearizationPoint& at,
                                const MeasurementSet& meas,
                                const Eigen::VectorXd& h,
                                const ObservationWeights& weights) {
  const TriangularMesh& mesh = system.mesh();
  const int m = basis.size();
  const int cols = 3 * m;
  if (at.d.d.cols() != cols || at.u.size() != cols)
    throw ValidationError("linearization point does not match the basis");

  const NodalField psi_h = system.solve_vacuum(h);
  // psi(u) = G u + psi_h; only the A and B blocks source the equilibrium
  const Eigen::MatrixXd g = system.solve_homogeneous(at.d.d.leftCols(2 * m));
  const NodalField& psi_bar = at.state.psi_bar;

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> offsets;
  std::vector<Family> family;
  auto push = [&](Family f, double w, Eigen::RowVectorXd row, double off) {
    rows.push_back(w * row);
    offsets.push_back(w * off);
    family.push_back(f);
  };

  for (const Probe& p : meas.probes) {
    const double w = row_weight(weights, Family::Probe, p.weight);
    if (w == 0.0) continue;
    const Location loc = locate_sensor(mesh, p.position);
    const NodalFunctional fn = gradient_functional(mesh, loc, probe_normal(p));
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cols);
    row.head(2 * m) = fn.apply_rows(g);
    push(Family::Probe, w, std::move(row), fn.apply(psi_h) - p.value);
  }

  for (const Chord& ch : meas.chords) {
    const double wp = ch.polarimetry ? row_weight(weights, Family::Polarimetry,
                                                  ch.polarimetry_weight)
                                     : 0.0;
    const double wi = ch.interferometry
                          ? row_weight(weights, Family::Interferometry,
                                       ch.interferometry_weight)
                          : 0.0;
    if (wp == 0.0 && wi == 0.0) continue;
    const Eigen::Vector2d n = chord_normal(ch);
    Eigen::RowVectorXd pol = Eigen::RowVectorXd::Zero(cols);
    Eigen::RowVectorXd itf = Eigen::RowVectorXd::Zero(cols);
    for (const ChordSample& s : chord_samples(mesh, ch)) {
      const double x = mesh.interpolate(psi_bar, s.loc);
      if (x > 1.0) continue;
      const Eigen::RowVectorXd phi = basis.values(std::max(x, 0.0)).transpose();
      const double field =
          mesh.gradient(at.psi, s.loc.triangle).dot(n) / s.r;
      pol.segment(2 * m, m) += (field * s.dl) * phi;
      itf.segment(2 * m, m) += s.dl * phi;
    }
    if (wp > 0.0) push(Family::Polarimetry, wp, pol, -*ch.polarimetry);
    if (wi > 0.0) push(Family::Interferometry, wi, itf, -*ch.interferometry);
  }

  if (!meas.pressure.empty()) {
    const auto wq = pressure_quadrature_weights(meas);
    const double span = at.state.psi_axis - at.state.psi_b;
    for (std::size_t k = 0; k < meas.pressure.size(); ++k) {
      const PressureSample& s = meas.pressure[k];
      const double w = row_weight(weights, Family::Pressure, wq[k] * s.weight);
      if (w == 0.0) continue;
      const Location loc =
          locate_or_throw(mesh, {s.r, 0.0}, "pressure sample");
      const double x = mesh.interpolate(psi_bar, loc);
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cols);
      if (x <= 1.0)
        row.head(m) = span * basis.tail_integrals(std::max(x, 0.0)).transpose();
      push(Family::Pressure, w, std::move(row), -s.value);
    }
  }

  const Eigen::VectorXd b_prev = at.u.segment(m, m);
  for (const MsePoint& p : meas.mse) {
    const double w = row_weight(weights, Family::Mse, p.weight);
    if (w == 0.0) continue;
    const Location loc = locate_or_throw(mesh, p.position, "MSE point");
    const NodalFunctional fn = mse_functional(mesh, loc, p);
    const double x = mesh.interpolate(psi_bar, loc);
    const double b_phi =
        frozen_bphi(basis, b_prev, meas.f0, at.state, x, p.position.r);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cols);
    row.head(2 * m) = fn.apply_rows(g);
    push(Family::Mse, w, std::move(row),
         fn.apply(psi_h) + mse_row(p)[2] * b_phi);
  }

  LinearizedObservation out;
  out.e.resize(static_cast<Eigen::Index>(rows.size()), cols);
  out.f.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.e.row(static_cast<Eigen::Index>(i)) = rows[i];
    out.f[static_cast<Eigen::Index>(i)] = offsets[i];
  }
  out.family = std::move(family);
  return out;
}

double frozen_misfit(const StiffnessSystem& system, const ReducedBasis& basis,
                     const LinearizationPoint& at, const MeasurementSet& meas,
                     const Eigen::VectorXd& h, const ObservationWeights& weights,
                     const Eigen::VectorXd& u) {
  const int m = basis.size();
  const FluxMap psi_u = picard_step(system, at.d, u, h);
  const ModelInputs in{psi_u, at.state.psi_bar, at.psi, at.state,
                       at.u.segment(m, m)};
  return combine_misfit(
      residual_sums(system.mesh(), basis, in, meas, weights, u), weights);
}

FamilyMisfit family_misfit(const TriangularMesh& mesh, const ReducedBasis& basis,
                           const FluxMap& psi, const PlasmaState& state,
                           const MeasurementSet& meas,
                           const ObservationWeights& weights,
                           const Eigen::VectorXd& u) {
  const int m = basis.size();
  const ModelInputs in{psi, state.psi_bar, psi, state, u.segment(m, m)};
  return residual_sums(mesh, basis, in, meas, weights, u);
}

double combine_misfit(const FamilyMisfit& j, const ObservationWeights& weights) {
  double total = 0.0;
  for (int f = 0; f < kNumFamilies; ++f)
    total += weights.family_weight(static_cast<Family>(f)) * j[f] /
             square(weights.scale[f]);
  return total;
}

double unfrozen_misfit(const TriangularMesh& mesh, const ReducedBasis& basis,
                       const FluxMap& psi, const PlasmaState& state,
                       const MeasurementSet& meas,
                       const ObservationWeights& weights,
                       const Eigen::VectorXd& u) {
  return combine_misfit(
      family_misfit(mesh, basis, psi, state, meas, weights, u), weights);
}

MeasurementSet synthesize_measurements(const TriangularMesh& mesh,
                                       const ReducedBasis& basis,
                                       const FluxMap& psi,
                                       const std::optional<PlasmaState>& state,
                                       const Eigen::VectorXd& u,
                                       const MeasurementSet& geometry) {
  const int m = basis.size();
  MeasurementSet out = geometry;
  for (FluxLoop& l : out.flux_loops)
    l.value = mesh.interpolate(psi, locate_sensor(mesh, l.position));
  for (Probe& p : out.probes) p.value = probe_response(mesh, psi, p);
  for (Chord& ch : out.chords) {
    ChordValues v;
    if (state)
      v = chord_integrals(mesh, state->psi_bar, psi, basis,
                          u.segment(2 * m, m), ch);
    if (ch.polarimetry) ch.polarimetry = v.polarimetry;
    if (ch.interferometry) ch.interferometry = v.interferometry;
  }
  if (!out.pressure.empty()) {
    std::vector<double> radii;
    for (const auto& s : out.pressure) radii.push_back(s.r);
    std::vector<double> model(radii.size(), 0.0);
    if (state)
      model = pressure_samples(basis, u.segment(0, m), *state, mesh,
                               state->psi_bar, radii);
    for (std::size_t k = 0; k < radii.size(); ++k)
      out.pressure[k].value = model[k];
  }
  for (MsePoint& p : out.mse) {
    const Eigen::Vector2d bp = poloidal_field(mesh, psi, p.position);
    double b_phi = out.f0 / p.position.r;
    if (state) {
      const double x = mesh.interpolate(state->psi_bar, p.position);
      b_phi = toroidal_field(basis, u.segment(m, m), out.f0, *state,
                             std::max(x, 0.0), p.position.r);
    }
    p.gamma = mse_angle(bp.x(), bp.y(), b_phi, p.coefficients);
  }
  return out;
}

}  // namespace gsr
