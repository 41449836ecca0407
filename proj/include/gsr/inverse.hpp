#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsr/fem.hpp"
#include "gsr/flux.hpp"
#include "gsr/observations.hpp"
#include "gsr/profiles.hpp"

namespace gsr {

struct ReconstructionConfig {
  std::string basis_kind = "spline";
  int m = 8;
  Regularization eps{1e-3, 1e-3, 1e-3};
  FamilyWeights k{1.0, 1.0, 1.0, 1.0};
  int max_outer = 200;
  double tol_u = 1e-6;
  double tol_psi = 1e-8;
  double relaxation = 1.0;
  double change_floor = 1e-12;
  /// Divide each family's residuals by a typical magnitude and scale each
  /// eps_k by the data weight of its block, so that the eps are
  /// dimensionless. Off: the raw cost with eps_k S blocks.
  bool normalize = true;
  /// Typical magnitudes of probe, polarimetry, interferometry, pressure and
  /// MSE data; defaults to the RMS of each family's values.
  std::optional<std::array<double, kNumFamilies>> scales;
  FluxAnalysisOptions flux;

  /// Throws ValidationError for caps < 1, non-positive tolerances, negative
  /// eps or K, or relaxation outside (0, 1].
  void validate() const;
};

/// Cost terms of (u, psi). j[f] are the raw family sums (sensor and
/// trapezoid weights applied; no K, no scale); j_eps = sum eps_k int (X'')^2
/// with the raw eps. total = J0 + sum K_k J_k + J_eps. objective is the
/// normalized quantity the solver minimizes (equal to total without
/// normalization).
struct CostBreakdown {
  FamilyMisfit j{};
  double j_eps = 0.0;
  double total = 0.0;
  double objective = 0.0;
};

struct IterationRecord {
  int iteration = 0;
  double change_u = 0.0;
  double change_psi = 0.0;
  double objective = 0.0;  // frozen objective of the linear subproblem
  // wall time in seconds
  double t_flux = 0.0;
  double t_assembly = 0.0;
  double t_linearize = 0.0;
  double t_normal = 0.0;
  double t_picard = 0.0;

  double t_total() const {
    return t_flux + t_assembly + t_linearize + t_normal + t_picard;
  }
};

struct ReconstructionResult {
  std::string basis_kind;
  int m = 0;
  Eigen::VectorXd u;
  FluxMap psi;
  /// Empty for a vacuum result (no A, B source).
  std::optional<PlasmaState> state;
  CostBreakdown cost;
  double plasma_current = 0.0;  // integral of j_phi over the plasma (A)
  int iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> log;
  /// Effective penalty scales tau_k (Lambda = blockdiag(eps_k tau_k S));
  /// reused on warm starts.
  std::array<double, 3> reg_scale{1.0, 1.0, 1.0};
  std::array<double, kNumFamilies> scale{1.0, 1.0, 1.0, 1.0, 1.0};
  double f0 = 1.0;
};

/// Minimizer of ||E u + F||^2 + u^T Lambda u. Columns are equilibrated
/// before a symmetric eigen-decomposition; a numerically singular system
/// throws SingularSystemError with the estimated rank.
Eigen::VectorXd solve_normal_equation(const Eigen::MatrixXd& e,
                                      const Eigen::VectorXd& f,
                                      const Eigen::MatrixXd& lambda);

/// Same, with selected columns held at zero (blocks without data).
Eigen::VectorXd solve_normal_equation(const Eigen::MatrixXd& e,
                                      const Eigen::VectorXd& f,
                                      const Eigen::MatrixXd& lambda,
                                      const std::vector<bool>& active);

/// Residual weighting used by reconstruct(): K from the measurement file or
/// the config, scales from the config or the family RMS.
ObservationWeights resolve_weights(const MeasurementSet& meas,
                                   const ReconstructionConfig& config);
Regularization resolve_regularization(const MeasurementSet& meas,
                                      const ReconstructionConfig& config);

/// Lambda = blockdiag(eps_k tau_k S).
Eigen::MatrixXd effective_penalty(const ReducedBasis& basis,
                                  const Regularization& eps,
                                  const std::array<double, 3>& tau);

/// tau_k = tr(E_k^T E_k) / tr(S) for the column block k of E (0 when the
/// block has no data).
std::array<double, 3> penalty_scales(const ReducedBasis& basis,
                                     const Eigen::MatrixXd& e);

/// Full nonlinear cost breakdown at (u, psi, state).
CostBreakdown evaluate_cost(const TriangularMesh& mesh,
                            const MeasurementSet& meas,
                            const ReducedBasis& basis, const Eigen::VectorXd& u,
                            const FluxMap& psi,
                            const std::optional<PlasmaState>& state,
                            const ObservationWeights& weights,
                            const Regularization& eps,
                            const std::array<double, 3>& tau);

/// Outer identification loop: flux analysis, D(psi_n), linearization,
/// normal equation and one Picard update per iteration, until the relative
/// changes of u and psi are below tol_u and tol_psi. On non-convergence the
/// iterate with the smallest frozen objective is returned with converged =
/// false.
ReconstructionResult reconstruct(const StiffnessSystem& system,
                                 const MeasurementSet& meas,
                                 const ReconstructionConfig& config,
                                 const ReconstructionResult* warm = nullptr);

/// JSON record of a result, including the nodal flux for warm starts.
void write_result(std::ostream& out, const ReconstructionResult& result);
ReconstructionResult read_result(std::istream& in, const TriangularMesh& mesh,
                                 const FluxAnalysisOptions& flux = {});
void save_result(const std::filesystem::path& path,
                 const ReconstructionResult& result);
ReconstructionResult load_result(const std::filesystem::path& path,
                                 const TriangularMesh& mesh,
                                 const FluxAnalysisOptions& flux = {});

/// CSV node,r,z,psi.
void write_psi_csv(std::ostream& out, const TriangularMesh& mesh,
                   const FluxMap& psi);

}  // namespace gsr
