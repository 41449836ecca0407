#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsr/forward.hpp"
#include "gsr/inverse.hpp"
#include "gsr/mesh.hpp"
#include "gsr/profiles.hpp"

namespace gsr::cli {

/// Flat "section.key" settings read from an INI file and overridden by
/// command-line flags. Unknown keys are ignored.
class Settings {
 public:
  Settings();
  ~Settings();
  Settings(const Settings&);
  Settings& operator=(const Settings&);

  static Settings load(const std::filesystem::path& path);
  static Settings parse(const std::string& text);

  /// "section.key=value"; throws ValidationError on a malformed override.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma- or space-separated numbers.
  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& fallback) const;

 private:
  struct Impl;
  Impl* impl_;
};

ReducedBasis basis_from(const Settings& s);
ReconstructionConfig reconstruction_config_from(const Settings& s);
ForwardOptions forward_options_from(const Settings& s);
FluxAnalysisOptions flux_options_from(const Settings& s);

/// Profile specification:
///   coeffs:v1,...,vm   raw basis coefficients
///   poly:c0,c1,...     sum c_k x^k
///   peaked:v0,k        v0 (1 - x^k)
///   const:v            v
///   0 or empty         zero
Eigen::VectorXd parse_profile(const std::string& spec, const ReducedBasis& basis);

/// u from profiles.A, profiles.B, profiles.ne.
Eigen::VectorXd profile_coefficients_from(const Settings& s,
                                          const ReducedBasis& basis);

/// External vacuum flux c0 + cz z + cr2 r^2 + cr2z r^2 z (each term solves
/// Delta* psi = 0), from boundary.c0, boundary.z, boundary.r2, boundary.r2z.
struct ExternalFlux {
  double c0 = 0, cz = 0, cr2 = 0, cr2z = 0;
  double operator()(const Point2& p) const {
    return c0 + cz * p.z + cr2 * p.r * p.r + cr2z * p.r * p.r * p.z;
  }
};
ExternalFlux external_flux_from(const Settings& s);

}  // namespace gsr::cli
