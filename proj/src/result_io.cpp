#include <fstream>
#include <iomanip>
#include <string>

#include <json.hpp>

#include "gsr/error.hpp"
#include "gsr/inverse.hpp"

namespace gsr {

using Json = nlohmann::ordered_json;

namespace {

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from(const Json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string("result: \"") + what +
                                      "\" must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ParseError(std::string("result: \"") + what +
                       "\" must hold numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

const Json& field(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("result: missing \"") + key + "\"");
  return *it;
}

}  // namespace

void write_result(std::ostream& out, const ReconstructionResult& r) {
  const int m = r.m;
  Json root;
  root["format"] = 1;
  root["basis"] = {{"kind", r.basis_kind}, {"m", m}};
  root["converged"] = r.converged;
  root["iterations"] = r.iterations;
  root["f0"] = r.f0;
  root["u"] = {{"a", vector_json(r.u.segment(0, m))},
               {"b", vector_json(r.u.segment(m, m))},
               {"c", vector_json(r.u.segment(2 * m, m))}};
  Json cost;
  for (int f = 0; f < kNumFamilies; ++f)
    cost["J" + std::to_string(f)] = r.cost.j[f];
  cost["J_eps"] = r.cost.j_eps;
  cost["total"] = r.cost.total;
  cost["objective"] = r.cost.objective;
  root["cost"] = cost;
  Json plasma = nullptr;
  if (r.state) {
    const PlasmaState& s = *r.state;
    plasma = {{"psi_axis", s.psi_axis},
              {"psi_b", s.psi_b},
              {"axis", Json::array({s.axis.r, s.axis.z})},
              {"boundary_kind", to_string(s.boundary_kind)},
              {"xpoint", s.xpoint ? Json::array({s.xpoint->r, s.xpoint->z})
                                  : Json(nullptr)},
              {"current", r.plasma_current}};
  }
  root["plasma"] = plasma;
  root["reg_scale"] = r.reg_scale;
  root["family_scale"] = r.scale;
  Json log = Json::array();
  for (const IterationRecord& it : r.log)
    log.push_back({{"iteration", it.iteration},
                   {"change_u", it.change_u},
                   {"change_psi", it.change_psi},
                   {"objective", it.objective},
                   {"t_flux", it.t_flux},
                   {"t_assembly", it.t_assembly},
                   {"t_linearize", it.t_linearize},
                   {"t_normal", it.t_normal},
                   {"t_picard", it.t_picard}});
  root["log"] = log;
  root["psi"] = vector_json(r.psi);
  out << root.dump(2) << '\n';
}

ReconstructionResult read_result(std::istream& in, const TriangularMesh& mesh,
                                 const FluxAnalysisOptions& flux) {
  Json root;
  try {
    root = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("result: ") + e.what());
  }
  ReconstructionResult r;
  try {
    const Json& basis = field(root, "basis");
    r.basis_kind = field(basis, "kind").get<std::string>();
    r.m = field(basis, "m").get<int>();
    r.converged = root.value("converged", false);
    r.iterations = root.value("iterations", 0);
    r.f0 = root.value("f0", 1.0);
    const Json& u = field(root, "u");
    const Eigen::VectorXd a = vector_from(field(u, "a"), "u.a");
    const Eigen::VectorXd b = vector_from(field(u, "b"), "u.b");
    const Eigen::VectorXd c = vector_from(field(u, "c"), "u.c");
    if (a.size() != r.m || b.size() != r.m || c.size() != r.m)
      throw ParseError("result: coefficient blocks do not have m entries");
    r.u.resize(3 * r.m);
    r.u << a, b, c;
    r.psi = vector_from(field(root, "psi"), "psi");
    if (root.contains("reg_scale"))
      r.reg_scale = root["reg_scale"].get<std::array<double, 3>>();
    if (root.contains("family_scale"))
      r.scale = root["family_scale"].get<std::array<double, kNumFamilies>>();
    if (root.contains("cost")) {
      const Json& cost = root["cost"];
      for (int f = 0; f < kNumFamilies; ++f)
        r.cost.j[f] = cost.value("J" + std::to_string(f), 0.0);
      r.cost.j_eps = cost.value("J_eps", 0.0);
      r.cost.total = cost.value("total", 0.0);
      r.cost.objective = cost.value("objective", 0.0);
    }
    if (root.contains("plasma") && root["plasma"].is_object())
      r.plasma_current = root["plasma"].value("current", 0.0);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("result: ") + e.what());
  }
  if (r.psi.size() != mesh.num_nodes())
    throw ValidationError("result flux map has " + std::to_string(r.psi.size()) +
                          " values, mesh has " +
                          std::to_string(mesh.num_nodes()) + " nodes");
  if (!r.u.head(2 * r.m).isZero(0.0)) r.state = analyze(mesh, r.psi, flux);
  return r;
}

void save_result(const std::filesystem::path& path,
                 const ReconstructionResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write result file " + path.string());
  write_result(out, result);
}

ReconstructionResult load_result(const std::filesystem::path& path,
                                 const TriangularMesh& mesh,
                                 const FluxAnalysisOptions& flux) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open result file " + path.string());
  return read_result(in, mesh, flux);
}

void write_psi_csv(std::ostream& out, const TriangularMesh& mesh,
                   const FluxMap& psi) {
  out << "node,r,z,psi\n" << std::setprecision(17);
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Point2& p = mesh.node(i);
    out << i << ',' << p.r << ',' << p.z << ',' << psi[i] << '\n';
  }
}

}  // namespace gsr
