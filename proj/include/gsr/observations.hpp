#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gsr/fem.hpp"
#include "gsr/flux.hpp"
#include "gsr/forward.hpp"
#include "gsr/profiles.hpp"

namespace gsr {

// ---------------------------------------------------------------------------
// measurement set

struct FluxLoop {
  Point2 position;  // on the boundary
  double value = 0;  // Wb
};

struct Probe {
  Point2 position;  // on the boundary
  Eigen::Vector2d tangent{0.0, 1.0};  // unit, (r, z) components
  double value = 0;  // T
  double weight = 1;
};

struct Chord {
  Point2 start;
  Point2 end;
  std::optional<double> polarimetry;     // alpha, used when present
  std::optional<double> interferometry;  // beta, used when present
  double polarimetry_weight = 1;
  double interferometry_weight = 1;
};

struct PressureSample {
  double r = 0;  // on the equatorial plane z = 0
  double value = 0;  // Pa
  double weight = 1;
};

struct MsePoint {
  Point2 position;
  std::array<double, 6> coefficients{};
  double gamma = 0;  // rad
  double weight = 1;
};

/// Family weights K1..K4 of polarimetry, interferometry, pressure and MSE.
/// Probes (J0) carry weight 1.
using FamilyWeights = std::array<double, 4>;
/// eps1..eps3 for A, B and n_e.
using Regularization = std::array<double, 3>;

struct MeasurementSet {
  std::vector<FluxLoop> flux_loops;
  std::vector<Probe> probes;
  std::vector<Chord> chords;
  std::vector<PressureSample> pressure;
  std::optional<double> pressure_r_min;
  std::optional<double> pressure_r_max;
  std::vector<MsePoint> mse;
  std::optional<FamilyWeights> weights;
  std::optional<Regularization> regularization;
  double f0 = 1.0;  // vacuum r B_phi (T m)

  /// Checks weights, chord endpoints, probe tangents and that loops and
  /// probes lie on the mesh boundary. Throws ValidationError.
  void validate(const TriangularMesh& mesh) const;
};

/// JSON measurement file, "format": 1.
MeasurementSet read_measurements(std::istream& in);
MeasurementSet load_measurements(const std::filesystem::path& path);
void write_measurements(std::ostream& out, const MeasurementSet& meas);
void save_measurements(const std::filesystem::path& path,
                       const MeasurementSet& meas);

// ---------------------------------------------------------------------------
// measurement models

/// Dirichlet data on boundary() nodes by periodic linear interpolation of
/// the loop values in boundary arclength. Needs at least two loops.
Eigen::VectorXd boundary_condition(const TriangularMesh& mesh,
                                   const std::vector<FluxLoop>& loops);

/// Arclength of the boundary point closest to p.
double boundary_arclength(const TriangularMesh& mesh, const Point2& p,
                          double* distance = nullptr);

/// Location used to evaluate a boundary sensor: the point itself when it is
/// inside the mesh, otherwise its projection on the boundary moved inward by
/// half a boundary edge.
Location locate_sensor(const TriangularMesh& mesh, const Point2& p);

/// (B_r, B_z) = (-(1/r) dpsi/dz, (1/r) dpsi/dr) with the P1 gradient.
Eigen::Vector2d poloidal_field(const TriangularMesh& mesh, const FluxMap& psi,
                               const Point2& p);

/// (1/r) dpsi/dn at the probe, n = tangent rotated by -90 degrees; equal to
/// the poloidal field along the tangent.
double probe_response(const TriangularMesh& mesh, const FluxMap& psi,
                      const Probe& probe);

struct ChordValues {
  double polarimetry = 0;
  double interferometry = 0;
};

/// Midpoint samples of a chord clipped to the mesh.
struct ChordSample {
  Location loc;
  double r;
  double dl;
};
/// Step is at most half the median edge length. Throws LocationError when
/// no sample falls inside the mesh.
std::vector<ChordSample> chord_samples(const TriangularMesh& mesh,
                                       const Chord& chord);

/// Line integrals of n_e B_par = n_e (1/r) dpsi/dn and of n_e along the
/// chord. n_e is zero outside the plasma (psi_bar > 1). The normal is the
/// chord direction rotated by -90 degrees, so that (1/r) dpsi/dn is the
/// poloidal field component along the chord.
ChordValues chord_integrals(const TriangularMesh& mesh, const NodalField& psi_bar,
                            const FluxMap& psi, const ReducedBasis& basis,
                            const Eigen::VectorXd& c, const Chord& chord);

/// Four-quadrant angle m with tan m = (a1 Br + a2 Bz + a3 Bphi) /
/// (a4 Br + a5 Bz + a6 Bphi), reduced to (-pi/2, pi/2]. Throws
/// ValidationError for a vanishing denominator.
double mse_angle(double b_r, double b_z, double b_phi,
                 const std::array<double, 6>& a);

/// Cross-multiplied MSE residual num - tan(gamma) den.
double mse_residual(double b_r, double b_z, double b_phi,
                    const std::array<double, 6>& a, double gamma);

/// Model pressure p(r_k, 0); zero outside the plasma.
std::vector<double> pressure_samples(const ReducedBasis& basis,
                                     const Eigen::VectorXd& a,
                                     const PlasmaState& state,
                                     const TriangularMesh& mesh,
                                     const NodalField& psi_bar,
                                     const std::vector<double>& radii);

/// Trapezoid weights of the pressure samples over [r_min, r_max]; the end
/// intervals are assigned to the nearest sample.
std::vector<double> pressure_quadrature_weights(const MeasurementSet& meas);

// ---------------------------------------------------------------------------
// linearized observation system

enum class Family { Probe = 0, Polarimetry, Interferometry, Pressure, Mse };
inline constexpr int kNumFamilies = 5;
const char* to_string(Family f);

/// Resolved weighting: K per family and the scale each family's residuals
/// are divided by.
struct ObservationWeights {
  FamilyWeights k{1.0, 1.0, 1.0, 1.0};
  std::array<double, kNumFamilies> scale{1.0, 1.0, 1.0, 1.0, 1.0};

  double family_weight(Family f) const {
    return f == Family::Probe ? 1.0 : k[static_cast<int>(f) - 1];
  }
};

/// Root-mean-square of each family's measured values (1 for empty or zero
/// families); the default residual scales.
std::array<double, kNumFamilies> family_rms(const MeasurementSet& meas);

/// Quantities frozen at the current outer iterate.
struct LinearizationPoint {
  const FluxMap& psi;
  const PlasmaState& state;
  const PlasmaCurrentMatrix& d;
  const Eigen::VectorXd& u;  // previous coefficients (B_phi freeze)
};

/// ||E u + F||^2 reproduces the weighted misfit under the freezes: psi(u) =
/// K~^{-1}(D_n u + h) exactly; polarimetry field factor, pressure psi_bar and
/// MSE B_phi frozen at the iterate. Rows of zero weight are absent.
struct LinearizedObservation {
  Eigen::MatrixXd e;
  Eigen::VectorXd f;
  std::vector<Family> family;  // per row
};

LinearizedObservation linearize(const StiffnessSystem& system,
                                const ReducedBasis& basis,
                                const LinearizationPoint& at,
                                const MeasurementSet& meas,
                                const Eigen::VectorXd& h,
                                const ObservationWeights& weights);

/// Weighted misfit of u under the same freezes, evaluated directly from the
/// measurement models (a fresh solve for psi(u), no matrices).
double frozen_misfit(const StiffnessSystem& system, const ReducedBasis& basis,
                     const LinearizationPoint& at, const MeasurementSet& meas,
                     const Eigen::VectorXd& h, const ObservationWeights& weights,
                     const Eigen::VectorXd& u);

/// Per-family sums of sensor-weighted squared residuals (pressure terms carry
/// their trapezoid weights); neither K nor the family scale is applied.
using FamilyMisfit = std::array<double, kNumFamilies>;

/// sum_f K_f J_f / scale_f^2.
double combine_misfit(const FamilyMisfit& j, const ObservationWeights& weights);

/// Family sums of (u, psi) with nothing frozen. Families with K = 0 are
/// reported as 0.
FamilyMisfit family_misfit(const TriangularMesh& mesh, const ReducedBasis& basis,
                           const FluxMap& psi, const PlasmaState& state,
                           const MeasurementSet& meas,
                           const ObservationWeights& weights,
                           const Eigen::VectorXd& u);

/// Weighted misfit of (u, psi) with nothing frozen, in the same normalized
/// form as linearize() (cross-multiplied MSE, trapezoid pressure).
double unfrozen_misfit(const TriangularMesh& mesh, const ReducedBasis& basis,
                       const FluxMap& psi, const PlasmaState& state,
                       const MeasurementSet& meas,
                       const ObservationWeights& weights,
                       const Eigen::VectorXd& u);

/// Model outputs for every measurement of `geometry` at (psi, state, u);
/// values of the returned set are replaced by the model, geometry and
/// weights are kept. Flux loops sample psi.
MeasurementSet synthesize_measurements(const TriangularMesh& mesh,
                                       const ReducedBasis& basis,
                                       const FluxMap& psi,
                                       const std::optional<PlasmaState>& state,
                                       const Eigen::VectorXd& u,
                                       const MeasurementSet& geometry);

}  // namespace gsr
