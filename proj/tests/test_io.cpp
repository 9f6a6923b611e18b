#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "perclab/io.hpp"
#include "perclab/pde.hpp"

using namespace perclab;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("g17 formatting round-trips doubles exactly") {
  RandomStream rs(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rs.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rs.bits() % 17) - 8);
    const double back = std::strtod(format_g17(v).c_str(), nullptr);
    CHECK(back == v);
  }
}

TEST_CASE("cluster JSON round-trip is exact") {
  const auto model = sample_conditioned_cluster(1.0, 0.8, 1.0, Window::centered(2, 6),
                                                SelectionPolicy::kLargest, 7);
  const json j = cluster_to_json(model);
  const auto back = cluster_from_json(j);
  CHECK(back.dim() == model.dim());
  CHECK(back.rho() == model.rho());
  CHECK(back.rho_prime() == model.rho_prime());
  CHECK(back.seed() == model.seed());
  CHECK(back.policy() == model.policy());
  REQUIRE(back.centers().size() == model.centers().size());
  for (std::size_t i = 0; i < model.centers().size(); ++i)
    CHECK(back.centers()[i] == model.centers()[i]);
  CHECK(cluster_to_json(back).dump() == j.dump());
}

TEST_CASE("require_field reports the dotted path") {
  const json j = {{"medium", {{"intensity", 1.5}}}};
  CHECK(require_double(j, "medium.intensity") == 1.5);
  try {
    require_field(j, "medium.window.lo");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("medium.window.lo") != std::string::npos);
  }
  CHECK_THROWS_AS(require_double(j, "medium.missing"), SchemaError);
}

TEST_CASE("density and clt CSV shapes") {
  const auto ball = ClusterModel({Vec(0.0, 0.0)}, 8.0, 8.0, Window::centered(2, 14),
                                 SelectionPolicy::kLargest, 0);
  DensityParams dp;
  dp.T = 0.5;
  dp.dt = 0.02;
  dp.n_paths = 500;
  dp.epsilon = 1.0;
  dp.dx = 0.5;
  dp.r_grid = 1.0;
  dp.vol_samples = 200;
  const auto dens = empirical_density(ball, dp, 3);
  const std::string csv = density_csv({&dens});
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "t,epsilon,x1,x2,count,bin_volume,density,rescaled_density,se");
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == dens.grid.n_bins());
}

TEST_CASE("pgm export with sidecar") {
  const auto ball = ClusterModel({Vec(0.0, 0.0)}, 1.0, 1.0, Window::centered(2, 3),
                                 SelectionPolicy::kLargest, 0);
  const auto mask = rasterize(ball, Window::centered(2, 1.5), 0.1);
  const auto dir = std::filesystem::temp_directory_path() / "perclab_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "mask.pgm";
  write_pgm(mask, path);
  const std::string content = slurp(path);
  CHECK(content.substr(0, 2) == "P5");
  const json sidecar = json::parse(slurp(path.string() + ".json"));
  CHECK(sidecar["shape"][0] == mask.nx);
  CHECK(sidecar["pitch"].get<double>() == mask.pitch);
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("heat snapshot pgm export") {
  const auto mask = full_square(1.0, 1.0 / 16);
  const auto field = CoefficientField::isotropic(mask, 1.0);
  std::vector<double> u0(mask.inside.size(), 0.0);
  u0[mask.idx(8, 8)] = 256.0;
  const auto sol = heat_solve(mask, field, u0, 0.5 * explicit_cfl_dt(mask, field), 32);
  const auto dir = std::filesystem::temp_directory_path() / "perclab_io_test2";
  std::filesystem::create_directories(dir);
  write_pgm_field(sol, sol.snaps.size() - 1, dir / "u.pgm");
  CHECK(slurp(dir / "u.pgm").substr(0, 2) == "P5");
  const json sidecar = json::parse(slurp(dir / "u.pgm.json"));
  CHECK(sidecar["time"].get<double>() == doctest::Approx(sol.end_time()));
  CHECK(sidecar["max"].get<double>() > sidecar["min"].get<double>());
  std::filesystem::remove_all(dir);
}

TEST_CASE("manifest carries config, seed and version") {
  const json config = {{"seed", 5}, {"medium", {{"intensity", 1.0}}}};
  const json m = make_manifest("generate", config, 5, 1.25, {"cluster.json"}, 4);
  CHECK(m["command"] == "generate");
  CHECK(m["seed"] == 5);
  CHECK(m["config"]["medium"]["intensity"] == 1.0);
  CHECK(m["version"]["artifact"] == kVersion);
  CHECK(m["outputs"][0] == "cluster.json");
}
