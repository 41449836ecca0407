#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gsr/error.hpp"
#include "gsr/observations.hpp"

namespace gsr {

using Json = nlohmann::ordered_json;

namespace {

double number(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw ParseError(where + ": missing or non-numeric \"" + key + "\"");
  return it->get<double>();
}

double number_or(const Json& j, const char* key, double fallback,
                 const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  return number(j, key, where);
}

std::optional<double> optional_number(const Json& j, const char* key,
                                      const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return number(j, key, where);
}

Point2 point(const Json& j, const std::string& where) {
  return {number(j, "r", where), number(j, "z", where)};
}

Point2 point_array(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != 2 ||
      !(*it)[0].is_number() || !(*it)[1].is_number())
    throw ParseError(where + ": \"" + key + "\" must be [r, z]");
  return {(*it)[0].get<double>(), (*it)[1].get<double>()};
}

const Json& array_section(const Json& root, const char* key) {
  static const Json empty = Json::array();
  const auto it = root.find(key);
  if (it == root.end() || it->is_null()) return empty;
  if (!it->is_array())
    throw ParseError(std::string("\"") + key + "\" must be an array");
  return *it;
}

Json point_json(const Point2& p) { return Json::array({p.r, p.z}); }

}  // namespace

MeasurementSet read_measurements(std::istream& in) {
  Json root;
  try {
    root = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("measurement file: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("measurement file: expected an object");
  if (number_or(root, "format", 1.0, "measurement file") != 1.0)
    throw ParseError("measurement file: unsupported format (expected 1)");

  MeasurementSet m;
  m.f0 = number_or(root, "f0", 1.0, "measurement file");

  if (root.contains("weights") && !root["weights"].is_null()) {
    const Json& w = root["weights"];
    if (!w.is_object()) throw ParseError("\"weights\" must be an object");
    m.weights = FamilyWeights{number_or(w, "polarimetry", 1.0, "weights"),
                              number_or(w, "interferometry", 1.0, "weights"),
                              number_or(w, "pressure", 1.0, "weights"),
                              number_or(w, "mse", 1.0, "weights")};
  }
  if (root.contains("regularization") && !root["regularization"].is_null()) {
    const Json& r = root["regularization"];
    if (!r.is_array() || r.size() != 3)
      throw ParseError("\"regularization\" must be [eps1, eps2, eps3]");
    Regularization eps{};
    for (int k = 0; k < 3; ++k) {
      if (!r[k].is_number())
        throw ParseError("\"regularization\" entries must be numbers");
      eps[k] = r[k].get<double>();
    }
    m.regularization = eps;
  }

  int i = 0;
  for (const Json& j : array_section(root, "flux_loops")) {
    const std::string where = "flux_loops[" + std::to_string(i++) + "]";
    m.flux_loops.push_back({point(j, where), number(j, "value", where)});
  }
  i = 0;
  for (const Json& j : array_section(root, "probes")) {
    const std::string where = "probes[" + std::to_string(i++) + "]";
    Probe p;
    p.position = point(j, where);
    const Point2 t = point_array(j, "tangent", where);
    p.tangent = {t.r, t.z};
    p.value = number(j, "value", where);
    p.weight = number_or(j, "weight", 1.0, where);
    m.probes.push_back(p);
  }
  i = 0;
  for (const Json& j : array_section(root, "chords")) {
    const std::string where = "chords[" + std::to_string(i++) + "]";
    Chord c;
    c.start = point_array(j, "start", where);
    c.end = point_array(j, "end", where);
    c.polarimetry = optional_number(j, "polarimetry", where);
    c.interferometry = optional_number(j, "interferometry", where);
    c.polarimetry_weight = number_or(j, "polarimetry_weight", 1.0, where);
    c.interferometry_weight = number_or(j, "interferometry_weight", 1.0, where);
    m.chords.push_back(c);
  }
  if (root.contains("pressure") && !root["pressure"].is_null()) {
    const Json& p = root["pressure"];
    if (!p.is_object()) throw ParseError("\"pressure\" must be an object");
    m.pressure_r_min = optional_number(p, "r_min", "pressure");
    m.pressure_r_max = optional_number(p, "r_max", "pressure");
    i = 0;
    for (const Json& j : array_section(p, "samples")) {
      const std::string where = "pressure.samples[" + std::to_string(i++) + "]";
      m.pressure.push_back({number(j, "r", where), number(j, "value", where),
                            number_or(j, "weight", 1.0, where)});
    }
  }
  i = 0;
  for (const Json& j : array_section(root, "mse")) {
    const std::string where = "mse[" + std::to_string(i++) + "]";
    MsePoint p;
    p.position = point(j, where);
    const auto it = j.find("coefficients");
    if (it == j.end() || !it->is_array() || it->size() != 6)
      throw ParseError(where + ": \"coefficients\" must hold 6 numbers");
    for (int k = 0; k < 6; ++k) {
      if (!(*it)[k].is_number())
        throw ParseError(where + ": \"coefficients\" must hold 6 numbers");
      p.coefficients[k] = (*it)[k].get<double>();
    }
    p.gamma = number(j, "gamma", where);
    p.weight = number_or(j, "weight", 1.0, where);
    m.mse.push_back(p);
  }
  return m;
}

MeasurementSet load_measurements(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open measurement file " + path.string());
  return read_measurements(in);
}

void write_measurements(std::ostream& out, const MeasurementSet& m) {
  Json root;
  root["format"] = 1;
  root["f0"] = m.f0;
  if (m.weights) {
    const auto& w = *m.weights;
    root["weights"] = {{"polarimetry", w[0]},
                       {"interferometry", w[1]},
                       {"pressure", w[2]},
                       {"mse", w[3]}};
  }
  if (m.regularization) {
    const auto& e = *m.regularization;
    root["regularization"] = Json::array({e[0], e[1], e[2]});
  }
  Json loops = Json::array();
  for (const FluxLoop& l : m.flux_loops)
    loops.push_back({{"r", l.position.r}, {"z", l.position.z}, {"value", l.value}});
  root["flux_loops"] = loops;
  Json probes = Json::array();
  for (const Probe& p : m.probes)
    probes.push_back({{"r", p.position.r},
                      {"z", p.position.z},
                      {"tangent", Json::array({p.tangent.x(), p.tangent.y()})},
                      {"value", p.value},
                      {"weight", p.weight}});
  root["probes"] = probes;
  Json chords = Json::array();
  for (const Chord& c : m.chords) {
    Json j = {{"start", point_json(c.start)}, {"end", point_json(c.end)}};
    if (c.polarimetry) {
      j["polarimetry"] = *c.polarimetry;
      j["polarimetry_weight"] = c.polarimetry_weight;
    }
    if (c.interferometry) {
      j["interferometry"] = *c.interferometry;
      j["interferometry_weight"] = c.interferometry_weight;
    }
    chords.push_back(j);
  }
  root["chords"] = chords;
  Json pressure = Json::object();
  if (m.pressure_r_min) pressure["r_min"] = *m.pressure_r_min;
  if (m.pressure_r_max) pressure["r_max"] = *m.pressure_r_max;
  Json samples = Json::array();
  for (const PressureSample& s : m.pressure)
    samples.push_back({{"r", s.r}, {"value", s.value}, {"weight", s.weight}});
  pressure["samples"] = samples;
  root["pressure"] = pressure;
  Json mse = Json::array();
  for (const MsePoint& p : m.mse) {
    Json a = Json::array();
    for (double x : p.coefficients) a.push_back(x);
    mse.push_back({{"r", p.position.r},
                   {"z", p.position.z},
                   {"coefficients", a},
                   {"gamma", p.gamma},
                   {"weight", p.weight}});
  }
  root["mse"] = mse;
  out << root.dump(2) << '\n';
}

void save_measurements(const std::filesystem::path& path,
                       const MeasurementSet& meas) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write measurement file " + path.string());
  write_measurements(out, meas);
  if (!out) throw IoError("error writing measurement file " + path.string());
}

}  // namespace gsr
