#include "gsr/inverse.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "gsr/error.hpp"
#include "gsr/fields.hpp"
#include "gsr/forward.hpp"

namespace gsr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev,
                  double floor) {
  return relative_change(next, prev, floor);
}

}  // namespace

void ReconstructionConfig::validate() const {
  if (m < 1) throw ValidationError("basis size m must be >= 1");
  if (max_outer < 1) throw ValidationError("outer iteration cap must be >= 1");
  if (!(tol_u > 0.0) || !(tol_psi > 0.0))
    throw ValidationError("convergence tolerances must be positive");
  if (!(relaxation > 0.0 && relaxation <= 1.0))
    throw ValidationError("relaxation must be in (0, 1]");
  for (double e : eps)
    if (!(e >= 0.0)) throw ValidationError("regularization parameters must be >= 0");
  for (double w : k)
    if (!(w >= 0.0)) throw ValidationError("family weights must be >= 0");
  if (scales)
    for (double s : *scales)
      if (!(s > 0.0)) throw ValidationError("family scales must be positive");
}

Eigen::VectorXd solve_normal_equation(const Eigen::MatrixXd& e,
                                      const Eigen::VectorXd& f,
                                      const Eigen::MatrixXd& lambda) {
  return solve_normal_equation(e, f, lambda,
                               std::vector<bool>(e.cols(), true));
}

Eigen::VectorXd solve_normal_equation(const Eigen::MatrixXd& e,
                                      const Eigen::VectorXd& f,
                                      const Eigen::MatrixXd& lambda,
                                      const std::vector<bool>& active) {
  const Eigen::Index n = e.cols();
  if (f.size() != e.rows() || lambda.rows() != n || lambda.cols() != n ||
      static_cast<Eigen::Index>(active.size()) != n)
    throw ValidationError("normal equation dimensions do not agree");

  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < n; ++j)
    if (active[j]) idx.push_back(j);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  const auto k = static_cast<Eigen::Index>(idx.size());
  if (k == 0) return u;

  const Eigen::MatrixXd ete = e.transpose() * e + lambda;
  const Eigen::VectorXd g = -(e.transpose() * f);
  Eigen::MatrixXd a(k, k);
  Eigen::VectorXd rhs(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    rhs[i] = g[idx[i]];
    for (Eigen::Index j = 0; j < k; ++j) a(i, j) = ete(idx[i], idx[j]);
  }

  // column equilibration
  Eigen::VectorXd d(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(a(i, i) > 0.0))
      throw SingularSystemError(
          "normal equation is singular: unknown " + std::to_string(idx[i]) +
              " is not constrained by data or regularization",
          static_cast<int>(k) - 1);
    d[i] = 1.0 / std::sqrt(a(i, i));
  }
  const Eigen::MatrixXd as = d.asDiagonal() * a * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(as);
  if (eig.info() != Eigen::Success)
    throw SingularSystemError("eigen-decomposition of the normal equation failed",
                              0);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cutoff =
      ev.cwiseAbs().maxCoeff() * static_cast<double>(k) *
      std::numeric_limits<double>::epsilon() * 10.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    if (ev[i] > cutoff) ++rank;
  if (rank < k)
    throw SingularSystemError("normal equation is singular (estimated rank " +
                                  std::to_string(rank) + " of " +
                                  std::to_string(k) + ")",
                              rank);
  const Eigen::MatrixXd& v = eig.eigenvectors();
  const Eigen::VectorXd y =
      v * (v.transpose() * d.asDiagonal() * rhs).cwiseQuotient(ev);
  const Eigen::VectorXd x = d.asDiagonal() * y;
  for (Eigen::Index i = 0; i < k; ++i) u[idx[i]] = x[i];
  return u;
}

ObservationWeights resolve_weights(const MeasurementSet& meas,
                                   const ReconstructionConfig& config) {
  ObservationWeights w;
  w.k = meas.weights.value_or(config.k);
  if (config.normalize) w.scale = config.scales.value_or(family_rms(meas));
  return w;
}

Regularization resolve_regularization(const MeasurementSet& meas,
                                      const ReconstructionConfig& config) {
  return meas.regularization.value_or(config.eps);
}

Eigen::MatrixXd effective_penalty(const ReducedBasis& basis,
                                  const Regularization& eps,
                                  const std::array<double, 3>& tau) {
  return penalty_matrix(basis,
                        {eps[0] * tau[0], eps[1] * tau[1], eps[2] * tau[2]});
}

std::array<double, 3> penalty_scales(const ReducedBasis& basis,
                                     const Eigen::MatrixXd& e) {
  const int m = basis.size();
  const double tr_s = basis.penalty().trace();
  std::array<double, 3> tau{};
  for (int k = 0; k < 3; ++k) {
    const double tr_e = e.middleCols(k * m, m).squaredNorm();
    tau[k] = tr_s > 0.0 ? tr_e / tr_s : tr_e;
  }
  return tau;
}

CostBreakdown evaluate_cost(const TriangularMesh& mesh,
                            const MeasurementSet& meas,
                            const ReducedBasis& basis, const Eigen::VectorXd& u,
                            const FluxMap& psi,
                            const std::optional<PlasmaState>& state,
                            const ObservationWeights& weights,
                            const Regularization& eps,
                            const std::array<double, 3>& tau) {
  const int m = basis.size();
  if (u.size() != 3 * m)
    throw ValidationError("coefficient vector does not match the basis");
  CostBreakdown c;
  // vacuum result: profile argument is outside the plasma everywhere
  PlasmaState vacuum;
  if (!state) {
    vacuum.psi_axis = 1.0;
    vacuum.psi_b = 0.0;
    vacuum.psi_bar = NodalField::Constant(mesh.num_nodes(), 2.0);
    vacuum.mask = Eigen::VectorXd::Zero(mesh.num_triangles());
  }
  const PlasmaState& s = state ? *state : vacuum;
  c.j = family_misfit(mesh, basis, psi, s, meas, weights, u);

  const Eigen::MatrixXd& S = basis.penalty();
  double reg_eff = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::VectorXd x = u.segment(k * m, m);
    const double q = x.dot(S * x);
    c.j_eps += eps[k] * q;
    reg_eff += eps[k] * tau[k] * q;
  }
  ObservationWeights raw = weights;
  raw.scale.fill(1.0);
  c.total = combine_misfit(c.j, raw) + c.j_eps;
  c.objective = combine_misfit(c.j, weights) + reg_eff;
  return c;
}

ReconstructionResult reconstruct(const StiffnessSystem& system,
                                 const MeasurementSet& meas,
                                 const ReconstructionConfig& config,
                                 const ReconstructionResult* warm) {
  config.validate();
  const TriangularMesh& mesh = system.mesh();
  meas.validate(mesh);
  const ReducedBasis basis = ReducedBasis::make(config.basis_kind, config.m);
  const int m = basis.size();
  const int cols = 3 * m;

  const Eigen::VectorXd h = boundary_condition(mesh, meas.flux_loops);
  const ObservationWeights weights = resolve_weights(meas, config);
  const Regularization eps = resolve_regularization(meas, config);

  ReconstructionResult out;
  out.basis_kind = basis.kind_name();
  out.m = m;
  out.scale = weights.scale;
  out.f0 = meas.f0;

  Eigen::VectorXd u = Eigen::VectorXd::Zero(cols);
  FluxMap psi;
  PlasmaState state;
  bool have_state = false;  // state must be recomputed from psi when false
  std::optional<std::array<double, 3>> tau;

  if (warm) {
    if (warm->m != m || warm->basis_kind != basis.kind_name())
      throw ValidationError("warm start basis (" + warm->basis_kind + ", m = " +
                            std::to_string(warm->m) +
                            ") does not match the configuration");
    if (warm->psi.size() != mesh.num_nodes())
      throw ValidationError("warm start flux map does not match the mesh");
    u = warm->u;
    psi = warm->psi;
    if (warm->state) {
      state = *warm->state;
      have_state = true;
    } else {
      state = initial_plasma_guess(mesh);
      have_state = true;
    }
    if (config.normalize) tau = warm->reg_scale;
  } else {
    psi = system.solve_vacuum(h);
    state = initial_plasma_guess(mesh);
    have_state = true;
  }

  struct Best {
    double objective = std::numeric_limits<double>::infinity();
    Eigen::VectorXd u;
    FluxMap psi;
    int iteration = 0;
  } best;

  bool converged = false;
  int it = 0;
  for (it = 1; it <= config.max_outer; ++it) {
    IterationRecord rec;
    rec.iteration = it;

    auto t0 = Clock::now();
    if (!have_state) {
      try {
        state = analyze(mesh, psi, config.flux);
      } catch (const DegeneratePlasmaError&) {
        if (!u.head(2 * m).isZero(0.0)) throw;
        state = initial_plasma_guess(mesh);
      }
    }
    have_state = false;
    rec.t_flux = seconds_since(t0);

    t0 = Clock::now();
    const PlasmaCurrentMatrix d = assemble_plasma_current(mesh, state, basis);
    rec.t_assembly = seconds_since(t0);

    t0 = Clock::now();
    const LinearizedObservation lin =
        linearize(system, basis, {psi, state, d, u}, meas, h, weights);
    rec.t_linearize = seconds_since(t0);

    t0 = Clock::now();
    if (!tau) {
      tau = config.normalize ? penalty_scales(basis, lin.e)
                             : std::array<double, 3>{1.0, 1.0, 1.0};
    }
    const Eigen::MatrixXd lambda = effective_penalty(basis, eps, *tau);
    std::vector<bool> active(cols, false);
    for (int k = 0; k < 3; ++k) {
      const bool has_data =
          lin.e.rows() > 0 && lin.e.middleCols(k * m, m).cwiseAbs().maxCoeff() > 0.0;
      for (int j = 0; j < m; ++j) active[k * m + j] = has_data;
    }
    const Eigen::VectorXd u_new =
        solve_normal_equation(lin.e, lin.f, lambda, active);
    rec.objective = (lin.e * u_new + lin.f).squaredNorm() + u_new.dot(lambda * u_new);
    rec.t_normal = seconds_since(t0);

    t0 = Clock::now();
    FluxMap psi_new = picard_step(system, d, u_new, h);
    if (config.relaxation < 1.0)
      psi_new = config.relaxation * psi_new + (1.0 - config.relaxation) * psi;
    rec.t_picard = seconds_since(t0);

    rec.change_u = rel_change(u_new, u, config.change_floor);
    rec.change_psi = rel_change(psi_new, psi, config.change_floor);
    u = u_new;
    psi = std::move(psi_new);
    out.log.push_back(rec);

    if (rec.objective < best.objective) {
      best.objective = rec.objective;
      best.u = u;
      best.psi = psi;
      best.iteration = it;
    }
    if (rec.change_u < config.tol_u && rec.change_psi < config.tol_psi) {
      converged = true;
      break;
    }
  }

  out.converged = converged;
  out.iterations = converged ? it : config.max_outer;
  if (!converged) {
    u = best.u;
    psi = best.psi;
  }
  out.u = u;
  out.psi = psi;
  out.reg_scale = *tau;
  if (!u.head(2 * m).isZero(0.0)) {
    out.state = analyze(mesh, psi, config.flux);
    out.plasma_current = gsr::plasma_current(mesh, *out.state, basis, u);
  }
  out.cost = evaluate_cost(mesh, meas, basis, u, psi, out.state, weights, eps,
                           out.reg_scale);
  return out;
}

}  // namespace gsr
