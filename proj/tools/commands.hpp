#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "gsr/fem.hpp"
#include "gsr/error.hpp"
#include "gsr/forward.hpp"
#include "gsr/inverse.hpp"
#include "gsr/mesh.hpp"
#include "gsr/observations.hpp"

namespace gsr::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kNonConvergence = 2,
  kIo = 3,
  kValidation = 4,
};

/// Missing required input (mesh, measurement file, ...): exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Full command-line entry point; args exclude the program name. Never
/// throws: errors are reported on err and mapped to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

/// Diagnostic geometry of a twin experiment (values are placeholders):
/// twin.loops flux loops at boundary nodes evenly spread in arclength,
/// twin.probes probes at the midpoints of the following boundary edges,
/// three vertical and two horizontal chords with polarimetry and
/// interferometry, twin.pressure outboard equatorial pressure samples and
/// twin.mse equatorial MSE points measuring atan(B_z / B_phi).
MeasurementSet default_diagnostics(const TriangularMesh& mesh, const Settings& s);

/// Adds N(0, (sigma * family RMS)^2) noise to every measured value, flux
/// loops included. Deterministic for a given seed.
MeasurementSet add_noise(const MeasurementSet& clean, double sigma,
                         std::uint64_t seed);

struct TwinData {
  MeasurementSet clean;
  MeasurementSet noisy;
  Eigen::VectorXd u;
  ForwardResult truth;
  Eigen::VectorXd h;
};

/// Synthesis of a twin experiment on a prepared system: boundary data from
/// the external flux sampled at the flux loops (so a reconstruction from the
/// loops sees the same Dirichlet data), forward solve with the profiles of
/// the settings, model outputs of every diagnostic and seeded noise
/// (twin.noise, relative).
TwinData synthesize_twin(const StiffnessSystem& system, const Settings& s,
                         std::uint64_t seed);

/// psi.csv, profiles.csv, fields.csv, flux.svg and result.json in dir.
void write_outputs(const std::filesystem::path& dir, const TriangularMesh& mesh,
                   const ReducedBasis& basis, const ReconstructionResult& r);

}  // namespace gsr::cli
