#include "config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gsr/error.hpp"

namespace gsr::cli {

namespace pt = boost::property_tree;

struct Settings::Impl {
  pt::ptree tree;
};

Settings::Settings() : impl_(new Impl) {}
Settings::~Settings() { delete impl_; }
Settings::Settings(const Settings& o) : impl_(new Impl(*o.impl_)) {}
Settings& Settings::operator=(const Settings& o) {
  if (this != &o) *impl_ = *o.impl_;
  return *this;
}

Settings Settings::parse(const std::string& text) {
  Settings s;
  std::istringstream in(text);
  try {
    pt::read_ini(in, s.impl_->tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message() + " (line " +
                     std::to_string(e.line()) + ")");
  }
  return s;
}

Settings Settings::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void Settings::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("override \"" + assignment +
                          "\" is not of the form section.key=value");
  set(boost::trim_copy(assignment.substr(0, eq)),
      boost::trim_copy(assignment.substr(eq + 1)));
}

void Settings::set(const std::string& key, const std::string& value) {
  impl_->tree.put(key, value);
}

bool Settings::has(const std::string& key) const {
  return static_cast<bool>(impl_->tree.get_optional<std::string>(key));
}

std::optional<std::string> Settings::get(const std::string& key) const {
  const auto v = impl_->tree.get_optional<std::string>(key);
  if (!v) return std::nullopt;
  return boost::trim_copy(*v);
}

std::string Settings::get_string(const std::string& key,
                                 const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double Settings::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const double x = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument(*v);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config key " + key + ": \"" + *v +
                          "\" is not a number");
  }
}

int Settings::get_int(const std::string& key, int fallback) const {
  const double x = get_double(key, fallback);
  if (x != std::floor(x))
    throw ValidationError("config key " + key + " must be an integer");
  return static_cast<int>(x);
}

bool Settings::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  const std::string s = boost::to_lower_copy(*v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ValidationError("config key " + key + ": \"" + *v + "\" is not a boolean");
}

std::vector<double> Settings::get_list(const std::string& key,
                                       const std::vector<double>& fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::vector<std::string> parts;
  boost::split(parts, *v, boost::is_any_of(", \t"), boost::token_compress_on);
  std::vector<double> out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    try {
      out.push_back(std::stod(p));
    } catch (const std::exception&) {
      throw ValidationError("config key " + key + ": \"" + p +
                            "\" is not a number");
    }
  }
  return out;
}

ReducedBasis basis_from(const Settings& s) {
  return ReducedBasis::make(s.get_string("basis.kind", "spline"),
                            s.get_int("basis.m", 8));
}

namespace {

template <std::size_t N>
std::array<double, N> fixed_list(const Settings& s, const std::string& key,
                                 const std::array<double, N>& fallback) {
  const auto v = s.get_list(key, std::vector<double>(fallback.begin(), fallback.end()));
  if (v.size() != N)
    throw ValidationError("config key " + key + " needs " + std::to_string(N) +
                          " values");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

FluxAnalysisOptions flux_options_from(const Settings& s) {
  FluxAnalysisOptions o;
  o.xpoint_search = s.get_bool("flux.xpoint_search", o.xpoint_search);
  return o;
}

ReconstructionConfig reconstruction_config_from(const Settings& s) {
  ReconstructionConfig c;
  c.basis_kind = s.get_string("basis.kind", c.basis_kind);
  c.m = s.get_int("basis.m", c.m);
  c.eps = fixed_list<3>(s, "reconstruction.eps", c.eps);
  c.k = fixed_list<4>(s, "reconstruction.weights", c.k);
  c.max_outer = s.get_int("reconstruction.max_outer", c.max_outer);
  c.tol_u = s.get_double("reconstruction.tol_u", c.tol_u);
  c.tol_psi = s.get_double("reconstruction.tol_psi", c.tol_psi);
  c.relaxation = s.get_double("reconstruction.relaxation", c.relaxation);
  c.normalize = s.get_bool("reconstruction.normalize", c.normalize);
  if (s.has("reconstruction.scales"))
    c.scales = fixed_list<kNumFamilies>(s, "reconstruction.scales", {});
  c.flux = flux_options_from(s);
  c.validate();
  return c;
}

ForwardOptions forward_options_from(const Settings& s) {
  ForwardOptions o;
  o.tol = s.get_double("forward.tol", o.tol);
  o.max_iter = s.get_int("forward.max_iter", o.max_iter);
  o.relaxation = s.get_double("forward.relaxation", o.relaxation);
  o.flux = flux_options_from(s);
  if (!(o.tol > 0.0)) throw ValidationError("forward.tol must be positive");
  if (o.max_iter < 1) throw ValidationError("forward.max_iter must be >= 1");
  return o;
}

Eigen::VectorXd parse_profile(const std::string& spec_in, const ReducedBasis& basis) {
  const std::string spec = boost::trim_copy(spec_in);
  const int m = basis.size();
  if (spec.empty() || spec == "0") return Eigen::VectorXd::Zero(m);
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw ValidationError("profile \"" + spec + "\" has no kind prefix");
  const std::string kind = spec.substr(0, colon);
  Settings tmp;
  tmp.set("p.v", spec.substr(colon + 1));
  const std::vector<double> v = tmp.get_list("p.v", {});
  if (kind == "coeffs") {
    if (static_cast<int>(v.size()) != m)
      throw ValidationError("profile \"" + spec + "\" needs " +
                            std::to_string(m) + " coefficients");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), m);
  }
  if (kind == "poly") {
    if (v.empty()) throw ValidationError("profile \"" + spec + "\" is empty");
    return basis.project([&](double x) {
      double y = 0.0;
      for (std::size_t k = v.size(); k-- > 0;) y = y * x + v[k];
      return y;
    });
  }
  if (kind == "peaked") {
    if (v.size() != 2) throw ValidationError("profile \"" + spec + "\" needs v0,k");
    return basis.project([&](double x) { return v[0] * (1.0 - std::pow(x, v[1])); });
  }
  if (kind == "const") {
    if (v.size() != 1) throw ValidationError("profile \"" + spec + "\" needs one value");
    return basis.project([&](double) { return v[0]; });
  }
  throw ValidationError("unknown profile kind \"" + kind + "\"");
}

Eigen::VectorXd profile_coefficients_from(const Settings& s,
                                          const ReducedBasis& basis) {
  const int m = basis.size();
  Eigen::VectorXd u(3 * m);
  u << parse_profile(s.get_string("profiles.A", ""), basis),
      parse_profile(s.get_string("profiles.B", ""), basis),
      parse_profile(s.get_string("profiles.ne", ""), basis);
  return u;
}

ExternalFlux external_flux_from(const Settings& s) {
  ExternalFlux f;
  f.c0 = s.get_double("boundary.c0", 0.0);
  f.cz = s.get_double("boundary.z", 0.0);
  f.cr2 = s.get_double("boundary.r2", 0.0);
  f.cr2z = s.get_double("boundary.r2z", 0.0);
  return f;
}

}  // namespace gsr::cli
