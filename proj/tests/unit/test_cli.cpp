#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "fixtures.hpp"

using namespace gsr;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run gsrecon(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

// scratch directory with a 17x17 desk mesh and configs, removed on exit
struct Workspace {
  fs::path dir;
  fs::path mesh;

  explicit Workspace(const std::string& name) {
    dir = fs::temp_directory_path() / ("gsr_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    mesh = dir / "desk.mesh";
    save_mesh(mesh, test::desk_mesh(17, true));
    write_text(dir / "twin.ini",
               "[basis]\nkind = spline\nm = 6\n"
               "[profiles]\nA = peaked:2e5,2\nB = peaked:1e5,1\nne = peaked:1e19,2\nf0 = 4\n"
               "[twin]\nnoise = 0\nloops = 24\nprobes = 24\n");
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string path(const std::string& leaf) const { return (dir / leaf).string(); }
};

std::vector<double> csv_column(const fs::path& p, int col) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  std::vector<double> v;
  while (std::getline(f, line)) {
    std::istringstream row(line);
    std::string cell;
    for (int k = 0; k <= col; ++k) std::getline(row, cell, ',');
    v.push_back(std::stod(cell));
  }
  return v;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(gsrecon({}).code == 1);
  CHECK(gsrecon({"frobnicate"}).code == 1);
  CHECK(gsrecon({"forward", "--no-such-flag"}).code == 1);
  const Run r = gsrecon({"forward"});
  CHECK(r.code == 1);
  CHECK(r.err.find("--mesh") != std::string::npos);
}

TEST_CASE("a missing mesh file exits with 3 and names the path") {
  const Run r = gsrecon({"forward", "--mesh", "/nonexistent/desk.mesh"});
  CHECK(r.code == 3);
  CHECK(r.err.find("/nonexistent/desk.mesh") != std::string::npos);
}

TEST_CASE("a single flux loop exits with 4") {
  Workspace ws("oneloop");
  const Run r = gsrecon({"twin", "--mesh", ws.mesh.string(), "--config", ws.path("twin.ini"),
                         "--out", ws.path("out"), "--set", "twin.loops=1"});
  CHECK(r.code == 4);
  CHECK(r.err.find("boundary condition underdetermined") != std::string::npos);
  const Run bad = gsrecon({"forward", "--mesh", ws.mesh.string(), "--set", "profiles.A=wavy:1"});
  CHECK(bad.code == 4);
}

TEST_CASE("gen-mesh writes a loadable mesh") {
  Workspace ws("genmesh");
  const Run r = gsrecon({"gen-mesh", "--rect", "1,3,-1.5,1.5", "--n", "9,9", "--limiter",
                         "2,0,1,64", "--out", ws.path("g.mesh")});
  CHECK(r.code == 0);
  const TriangularMesh m = load_mesh(ws.path("g.mesh"));
  CHECK(m.num_nodes() == 81);
  CHECK(m.limiter().size() == 64);
}

TEST_CASE("forward with zero profiles is the vacuum solution") {
  Workspace ws("vacuum");
  const Run r = gsrecon({"forward", "--mesh", ws.mesh.string(), "--out", ws.path("out"),
                         "--set", "boundary.r2=0.01", "--set", "boundary.z=0.2"});
  REQUIRE(r.code == 0);
  const TriangularMesh mesh = load_mesh(ws.mesh);
  StiffnessSystem sys(mesh);
  const Eigen::VectorXd h = test::boundary_sample(
      mesh, [](const Point2& p) { return 0.01 * p.r * p.r + 0.2 * p.z; });
  const NodalField vac = sys.solve_vacuum(h);
  const auto psi = csv_column(ws.dir / "out" / "psi.csv", 3);
  REQUIRE(static_cast<int>(psi.size()) == mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i)
    CHECK(psi[i] == doctest::Approx(vac[i]).epsilon(1e-12).scale(1e-12));
}

TEST_CASE("forward writes every output file") {
  Workspace ws("forward");
  const Run r = gsrecon({"forward", "--mesh", ws.mesh.string(), "--config", ws.path("twin.ini"),
                         "--out", ws.path("out")});
  REQUIRE(r.code == 0);
  for (const char* f : {"psi.csv", "profiles.csv", "fields.csv", "result.json", "flux.svg"})
    CHECK(fs::file_size(ws.dir / "out" / f) > 0);
  const std::string svg = slurp(ws.dir / "out" / "flux.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("id=\"plasma-boundary\"") != std::string::npos);
  CHECK(svg.find("id=\"flux-contours\"") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(ws.dir / "out" / "result.json"));
  CHECK(j["converged"].get<bool>());
  CHECK(j["plasma"]["current"].get<double>() > 0.0);

  // warm restart from the converged flux
  const Run w = gsrecon({"forward", "--mesh", ws.mesh.string(), "--config", ws.path("twin.ini"),
                         "--out", ws.path("out2"), "--warm", ws.path("out/result.json")});
  CHECK(w.code == 0);
  const auto jw = nlohmann::json::parse(slurp(ws.dir / "out2" / "result.json"));
  CHECK(jw["iterations"].get<int>() <= 2);
}

TEST_CASE("twin data are deterministic for a given seed") {
  Workspace ws("twin");
  auto twin = [&](const std::string& out, const std::string& noise, const std::string& seed) {
    return gsrecon({"twin", "--mesh", ws.mesh.string(), "--config", ws.path("twin.ini"),
                    "--out", ws.path(out), "--seed", seed, "--set", "twin.noise=" + noise});
  };
  REQUIRE(twin("a", "0", "1").code == 0);
  REQUIRE(twin("b", "0", "2").code == 0);
  CHECK(slurp(ws.dir / "a" / "measurements.json") == slurp(ws.dir / "b" / "measurements.json"));
  REQUIRE(twin("c", "0.01", "5").code == 0);
  REQUIRE(twin("d", "0.01", "5").code == 0);
  REQUIRE(twin("e", "0.01", "6").code == 0);
  const std::string c = slurp(ws.dir / "c" / "measurements.json");
  CHECK(c == slurp(ws.dir / "d" / "measurements.json"));
  CHECK(c != slurp(ws.dir / "e" / "measurements.json"));
  CHECK(c != slurp(ws.dir / "a" / "measurements.json"));
  CHECK(fs::exists(ws.dir / "a" / "truth.json"));
}

TEST_CASE("twin then reconstruct converges, and a warm frame is cheaper") {
  Workspace ws("recon");
  REQUIRE(gsrecon({"twin", "--mesh", ws.mesh.string(), "--config", ws.path("twin.ini"),
                   "--out", ws.path("twin")})
              .code == 0);
  const std::string meas = ws.path("twin/measurements.json");
  const Run r = gsrecon({"reconstruct", "--mesh", ws.mesh.string(), "--config",
                         ws.path("twin.ini"), "--measurements", meas, "--out", ws.path("r1")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("cost breakdown") != std::string::npos);
  CHECK(r.out.find("J_eps") != std::string::npos);
  const auto j1 = nlohmann::json::parse(slurp(ws.dir / "r1" / "result.json"));
  CHECK(j1["converged"].get<bool>());
  for (const char* f : {"psi.csv", "profiles.csv", "fields.csv", "result.json", "flux.svg"})
    CHECK(fs::exists(ws.dir / "r1" / f));

  const Run w = gsrecon({"reconstruct", "--mesh", ws.mesh.string(), "--config",
                         ws.path("twin.ini"), "--measurements", meas, "--out", ws.path("r2"),
                         "--warm", ws.path("r1/result.json")});
  REQUIRE(w.code == 0);
  const auto j2 = nlohmann::json::parse(slurp(ws.dir / "r2" / "result.json"));
  CHECK(j2["converged"].get<bool>());
  CHECK(j2["iterations"].get<int>() < j1["iterations"].get<int>());

  // non-convergence exits with 2
  const Run capped = gsrecon({"reconstruct", "--mesh", ws.mesh.string(), "--config",
                              ws.path("twin.ini"), "--measurements", meas, "--out",
                              ws.path("r3"), "--set", "reconstruction.max_outer=2"});
  CHECK(capped.code == 2);
  const Run missing = gsrecon({"reconstruct", "--mesh", ws.mesh.string(), "--measurements",
                               ws.path("nothing.json")});
  CHECK(missing.code == 3);

  // no loops and no probes: the boundary condition is underdetermined
  MeasurementSet empty = load_measurements(meas);
  empty.flux_loops.clear();
  empty.probes.clear();
  save_measurements(ws.path("empty.json"), empty);
  const Run none = gsrecon({"reconstruct", "--mesh", ws.mesh.string(), "--measurements",
                            ws.path("empty.json"), "--out", ws.path("r4")});
  CHECK(none.code == 4);
  CHECK(none.err.find("boundary condition underdetermined") != std::string::npos);
}

TEST_CASE("bench reports every phase") {
  Workspace ws("bench");
  const Run r = gsrecon({"bench", "--mesh", ws.mesh.string(), "--config", ws.path("twin.ini"),
                         "--set", "bench.frames=3"});
  REQUIRE(r.code == 0);
  for (const char* phase : {"flux analysis", "D assembly", "linearization", "normal solve",
                            "Picard solve", "outer iteration"}) {
    const auto pos = r.out.find(phase);
    REQUIRE(pos != std::string::npos);
    std::istringstream row(r.out.substr(pos + std::string(phase).size()));
    double median = 0.0, p99 = 0.0;
    row >> median >> p99;
    CHECK(median > 0.0);
    CHECK(p99 >= median);
  }
  CHECK(r.out.find("median outer iterations per frame") != std::string::npos);
}
