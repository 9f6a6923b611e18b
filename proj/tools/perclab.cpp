#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "perclab/diffusion.hpp"
#include "perclab/io.hpp"

namespace pl = perclab;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0 = unresolved
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pl::SchemaError("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

int resolve_threads(const CommonArgs& args, const json& config) {
  if (args.threads > 0) return args.threads;
  if (const char* env = std::getenv("PERCLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  if (config.contains("threads")) return config["threads"].get<int>();
  return 1;
}

std::uint64_t resolve_seed(const CommonArgs& args, const json& config) {
  if (args.seed) return *args.seed;
  return pl::require_u64(config, "seed");
}

std::filesystem::path resolve_out(const CommonArgs& args, const json& config) {
  std::filesystem::path dir = ".";
  if (config.contains("out")) dir = config["out"].get<std::string>();
  if (!args.out_dir.empty()) dir = args.out_dir;
  std::filesystem::create_directories(dir);
  return dir;
}

pl::Window window_from_json(const json& j) {
  pl::Window w;
  auto read = [](const json& a) {
    if (!a.is_array() || (a.size() != 2 && a.size() != 3))
      throw pl::SchemaError("window corners must be 2- or 3-vectors");
    return a.size() == 2 ? pl::Vec(a[0].get<double>(), a[1].get<double>())
                         : pl::Vec(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  };
  w.lo = read(pl::require_field(j, "lo"));
  w.hi = read(pl::require_field(j, "hi"));
  if (w.degenerate()) throw pl::SchemaError("degenerate window");
  return w;
}

// reads everything under config["medium"], reporting full dotted paths
pl::ClusterModel cluster_from_medium_config(const json& config, const pl::Window& window,
                                            std::uint64_t seed) {
  const double intensity = pl::require_double(config, "medium.intensity");
  const double rho = pl::require_double(config, "medium.rho");
  const double rho_prime = pl::require_double(config, "medium.rho_prime");
  const auto policy = pl::selection_policy_from_string(
      pl::require_field(config, "medium.policy").get<std::string>());
  const json& medium = pl::require_field(config, "medium");
  const bool require_origin = medium.value("require_origin", true);
  const int max_attempts = medium.value("max_attempts", 1000);
  if (require_origin)
    return pl::sample_conditioned_cluster(intensity, rho, rho_prime, window, policy, seed,
                                          max_attempts);
  auto dec = pl::build_clusters(pl::sample_poisson(intensity, window, seed), rho);
  return pl::select_cluster(dec, rho_prime, policy, false);
}

pl::ClusterModel load_or_build_cluster(const json& config, std::uint64_t seed,
                                       const pl::CltSweepConfig* sweep = nullptr) {
  if (config.contains("cluster_file"))
    return pl::cluster_from_json(load_config(config["cluster_file"].get<std::string>()));
  const json& medium = pl::require_field(config, "medium");
  pl::Window window;
  if (medium.contains("window")) {
    window = window_from_json(medium["window"]);
  } else if (sweep) {
    // buffer rule: the window may not be felt by paths started near the origin
    const double eps_min = sweep->epsilons.back();
    const double t_max = sweep->t_values.back();
    const double half = sweep->R / eps_min + 4 * std::sqrt(t_max / (eps_min * eps_min)) +
                        pl::require_double(config, "medium.rho_prime") + 0.5;
    window = pl::Window::centered(static_cast<int>(medium.value("dimension", 2)), half);
  } else {
    throw pl::SchemaError("missing required field: medium.window");
  }
  return cluster_from_medium_config(config, window, seed);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const json& config, std::uint64_t seed, double wall,
                    const std::vector<std::string>& outputs, int threads) {
  pl::write_atomic(dir / ("manifest_" + command + ".json"),
                   pl::make_manifest(command, config, seed, wall, outputs, threads).dump(2) + "\n");
}

int cmd_generate(const CommonArgs& args) {
  Timer timer;
  const json config = load_config(args.config_path);
  const std::uint64_t seed = resolve_seed(args, config);
  const auto dir = resolve_out(args, config);
  const pl::Window window = window_from_json(pl::require_field(config, "medium.window"));
  const auto cluster = cluster_from_medium_config(config, window, seed);
  pl::write_atomic(dir / "cluster.json", pl::cluster_to_json(cluster).dump() + "\n");
  write_manifest(dir, "generate", config, seed, timer.seconds(), {"cluster.json"},
                 resolve_threads(args, config));
  std::cout << "cluster with " << cluster.centers().size() << " centers -> "
            << (dir / "cluster.json").string() << "\n";
  return 0;
}

int cmd_diagnose(const CommonArgs& args) {
  Timer timer;
  const json config = load_config(args.config_path);
  const std::uint64_t seed = resolve_seed(args, config);
  const auto dir = resolve_out(args, config);
  const auto cluster = load_or_build_cluster(config, seed);

  const json& g = pl::require_field(config, "geometry");
  pl::RegularityParams params;
  params.x_samples = g.value("x_samples", params.x_samples);
  params.pair_samples = g.value("pair_samples", params.pair_samples);
  params.vol_samples = g.value("vol_samples", params.vol_samples);
  params.hole_grid = g.value("hole_grid", params.hole_grid);
  params.iso_cuts = g.value("iso_cuts", params.iso_cuts);
  const auto R_values = pl::require_field(g, "R_values").get<std::vector<double>>();

  const auto report = pl::regularity_report(cluster, R_values, params, seed);
  pl::write_atomic(dir / "geometry_report.json",
                   pl::geometry_report_to_json(report).dump(2) + "\n");
  pl::write_atomic(dir / "geometry_sweep.csv", pl::geometry_sweep_csv(report));
  write_manifest(dir, "diagnose", config, seed, timer.seconds(),
                 {"geometry_report.json", "geometry_sweep.csv"}, resolve_threads(args, config));
  std::cout << "gamma_hat=" << report.gamma_hat << " C_W=" << report.c_w
            << " R_hat_theta=" << report.r_hat_theta << "\n";
  return 0;
}

int cmd_simulate(const CommonArgs& args) {
  Timer timer;
  const json config = load_config(args.config_path);
  const std::uint64_t seed = resolve_seed(args, config);
  const int threads = resolve_threads(args, config);
  const auto dir = resolve_out(args, config);
  const auto cluster = load_or_build_cluster(config, seed);

  const json& dj = pl::require_field(config, "diffusion");
  pl::DensityParams dp;
  const double t = pl::require_double(config, "diffusion.t");
  dp.epsilon = pl::require_double(config, "diffusion.epsilon");
  dp.T = t / (dp.epsilon * dp.epsilon);
  dp.dt = pl::require_double(config, "diffusion.dt");
  dp.n_paths = pl::require_u64(config, "diffusion.n_paths");
  dp.dx = dj.value("dx", dp.dx);
  dp.r_grid = dj.value("r_grid", dp.r_grid);
  dp.vol_samples = dj.value("vol_samples", dp.vol_samples);
  dp.n_threads = threads;

  const auto density = pl::empirical_density(cluster, dp, seed);
  const auto cov = pl::estimate_covariance(
      cluster, dp.T, dp.dt, dj.value("cov_paths", dp.n_paths),
      pl::RandomStream::derive(seed, pl::stream_tag::kCovariance, 0).bits(), threads);

  pl::write_atomic(dir / "density.csv", pl::density_csv({&density}));
  pl::write_atomic(dir / "covariance.json", pl::covariance_to_json(cov).dump(2) + "\n");
  write_manifest(dir, "simulate", config, seed, timer.seconds(),
                 {"density.csv", "covariance.json"}, threads);
  std::cout << "density mass=" << density.n_paths << " sigma11=" << cov.sigma[0][0] << "\n";
  return 0;
}

int cmd_clt_sweep(const CommonArgs& args) {
  Timer timer;
  const json config = load_config(args.config_path);
  const std::uint64_t seed = resolve_seed(args, config);
  const int threads = resolve_threads(args, config);
  const auto dir = resolve_out(args, config);

  const json& sj = pl::require_field(config, "sweep");
  pl::CltSweepConfig sweep;
  sweep.epsilons = pl::require_field(config, "sweep.epsilons").get<std::vector<double>>();
  sweep.t_values = pl::require_field(config, "sweep.t_values").get<std::vector<double>>();
  sweep.R = sj.value("R", sweep.R);
  sweep.dx = sj.value("dx", sweep.dx);
  sweep.r_grid = sj.value("r_grid", sweep.r_grid);
  sweep.j_ball_r = sj.value("j_ball_r", sweep.j_ball_r);
  sweep.n_paths = pl::require_u64(config, "sweep.n_paths");
  sweep.cov_paths = sj.value("cov_paths", sweep.n_paths);
  sweep.dt = pl::require_double(config, "sweep.dt");
  sweep.vol_samples = sj.value("vol_samples", sweep.vol_samples);
  sweep.n_threads = threads;
  sweep.validate();

  const auto cluster = load_or_build_cluster(config, seed, &sweep);
  const auto result = pl::clt_sweep(cluster, sweep, seed);

  // the manifest records the window actually used (it may have been derived
  // from the sweep's buffer rule)
  json resolved = config;
  resolved["window_used"] = {{"lo", {cluster.window().lo[0], cluster.window().lo[1]}},
                             {"hi", {cluster.window().hi[0], cluster.window().hi[1]}}};

  pl::write_atomic(dir / "clt.csv", pl::clt_csv(result));
  pl::write_atomic(dir / "clt_summary.json", pl::clt_summary_json(result).dump(2) + "\n");
  std::vector<const pl::EmpiricalDensity*> runs;
  for (const auto& d : result.densities) runs.push_back(&d);
  pl::write_atomic(dir / "densities.csv", pl::density_csv(runs));
  const auto r0_values = sj.value("r0_values", std::vector<double>{0.25, 0.5, 1.0});
  const auto holder = pl::holder_density_check(cluster, runs, r0_values, sweep.R, sweep.dx);
  pl::write_atomic(dir / "holder.csv", pl::holder_rows_csv(holder));
  write_manifest(dir, "clt-sweep", resolved, seed, timer.seconds(),
                 {"clt.csv", "clt_summary.json", "densities.csv", "holder.csv"}, threads);
  for (const auto& row : result.rows)
    std::cout << "eps=" << row.epsilon << " sup_error=" << row.sup_error
              << " noise_floor=" << row.noise_floor << "\n";
  return 0;
}

int cmd_pde_check(const CommonArgs& args) {
  Timer timer;
  const json config = load_config(args.config_path);
  const std::uint64_t seed = resolve_seed(args, config);
  const auto dir = resolve_out(args, config);
  const json& pj = pl::require_field(config, "pde");
  const std::string domain = pl::require_field(config, "pde.domain").get<std::string>();
  const double pitch = pl::require_double(config, "pde.pitch");
  std::vector<std::string> outputs;

  std::function<pl::RasterMask(double)> mask_at;
  pl::Vec x0(0.0, 0.0);
  if (domain == "square") {
    const double L = pl::require_double(config, "pde.L");
    mask_at = [L](double h) { return pl::full_square(L, h); };
    x0 = pl::Vec(L / 2, L / 2);
  } else if (domain == "cluster") {
    const auto cluster =
        pl::cluster_from_json(load_config(pl::require_field(config, "pde.cluster_file").get<std::string>()));
    const double half = pl::require_double(config, "pde.bbox_half");
    pl::Window bbox = pl::Window::centered(2, half);
    mask_at = [cluster, bbox](double h) { return pl::rasterize(cluster, bbox, h); };
    if (pj.contains("x0")) {
      const auto v = pj["x0"].get<std::vector<double>>();
      x0 = pl::Vec(v.at(0), v.at(1));
    }
  } else {
    throw pl::SchemaError("pde.domain must be \"square\" or \"cluster\"");
  }
  auto field_at = [](const pl::RasterMask& m) { return pl::CoefficientField::isotropic(m, 1.0); };

  if (pj.value("dump_mask", false)) {
    pl::write_pgm(mask_at(pitch), dir / "mask.pgm");
    outputs.push_back("mask.pgm");
  }

  json harnack_out = json::array();
  if (pj.contains("harnack")) {
    const json& hj = pj["harnack"];
    const int n_functions = hj.value("n_functions", 20);
    const double tau = hj.value("tau", 1.0);
    const double delta = hj.value("delta", 0.5);
    const double r = pl::require_double(config, "pde.harnack.r");
    std::vector<double> pitches;
    for (int level : hj.value("refine", std::vector<int>{1, 2})) pitches.push_back(pitch / level);
    const pl::RasterMask probe = mask_at(pitch);
    pl::Window box;
    box.lo = probe.origin;
    box.hi = pl::Vec(probe.origin[0] + probe.nx * pitch, probe.origin[1] + probe.ny * pitch);
    for (int f = 0; f < n_functions; ++f) {
      const auto u0 = pl::random_bump_function(
          pl::RandomStream::derive(seed, pl::stream_tag::kInitialData, f).bits(), box);
      const auto study =
          pl::harnack_refinement(mask_at, field_at, u0, x0, r, tau, delta, pitches);
      harnack_out.push_back(pl::harnack_study_to_json(study));
    }
    pl::write_atomic(dir / "harnack.json", harnack_out.dump(2) + "\n");
    outputs.push_back("harnack.json");
  }

  if (pj.contains("holder")) {
    const json& oj = pj["holder"];
    const double r0 = pl::require_double(config, "pde.holder.r0");
    const int levels = oj.value("levels", 5);
    const pl::RasterMask mask = mask_at(pitch);
    const auto field = field_at(mask);
    const auto u0 = pl::random_bump_function(
        pl::RandomStream::derive(seed, pl::stream_tag::kInitialData, 1000).bits(),
        pl::Window{mask.origin,
                   pl::Vec(mask.origin[0] + mask.nx * pitch, mask.origin[1] + mask.ny * pitch)});
    std::vector<double> u0v(mask.inside.size(), 0.0);
    for (int j = 0; j < mask.ny; ++j)
      for (int i = 0; i < mask.nx; ++i)
        if (mask.is_inside(i, j)) u0v[mask.idx(i, j)] = u0(mask.center(i, j));
    const double horizon = r0 * r0;
    const double dt = 0.9 * pl::explicit_cfl_dt(mask, field);
    const int n_steps = static_cast<int>(std::ceil(horizon / dt));
    const auto sol = pl::heat_solve(mask, field, u0v, horizon / n_steps, n_steps);
    const auto [ci, cj] = mask.cell_of(x0);
    const auto osc = pl::holder_oscillation(sol, ci, cj, r0, levels);
    pl::write_atomic(dir / "holder_oscillation.csv", pl::oscillation_csv(osc));
    pl::write_atomic(dir / "holder_oscillation.json", pl::oscillation_to_json(osc).dump(2) + "\n");
    outputs.push_back("holder_oscillation.csv");
    outputs.push_back("holder_oscillation.json");
    const int dumps = oj.value("dump_snapshots", 0);
    for (int k = 0; k < dumps; ++k) {
      const std::size_t s = k * (sol.snaps.size() - 1) / std::max(1, dumps - 1);
      char name[32];
      std::snprintf(name, sizeof(name), "u_%03d.pgm", k);
      pl::write_pgm_field(sol, s, dir / name);
      outputs.push_back(name);
    }
  }

  if (pj.contains("poincare")) {
    const json& qj = pj["poincare"];
    std::vector<pl::PoincareReport> reports;
    const pl::RasterMask mask = mask_at(pitch);
    const auto field = field_at(mask);
    for (double r : pl::require_field(config, "pde.poincare.radii").get<std::vector<double>>()) {
      const auto [ci, cj] = mask.cell_of(x0);
      const auto dist = pl::grid_intrinsic_distance(mask, ci, cj);
      std::vector<int> ball;
      for (std::size_t k = 0; k < dist.size(); ++k)
        if (dist[k] < r) ball.push_back(static_cast<int>(k));
      reports.push_back(pl::poincare_constant(mask, field, ball, r));
    }
    pl::write_atomic(dir / "poincare.csv", pl::poincare_csv(reports));
    outputs.push_back("poincare.csv");
  }

  write_manifest(dir, "pde-check", config, seed, timer.seconds(), outputs,
                 resolve_threads(args, config));
  std::cout << "pde-check wrote " << outputs.size() << " artifact(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuum percolation diffusion laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::uint64_t seed_value = 0;

  auto* generate = app.add_subcommand("generate", "sample a medium and emit the cluster");
  auto* diagnose = app.add_subcommand("diagnose", "geometry report for a cluster");
  auto* simulate = app.add_subcommand("simulate", "empirical density and covariance");
  auto* clt = app.add_subcommand("clt-sweep", "local CLT epsilon sweep");
  auto* pde = app.add_subcommand("pde-check", "Harnack / Hoelder / Poincare checks");
  for (auto* sub : {generate, diagnose, simulate, clt, pde}) {
    sub->add_option("--config", args.config_path, "JSON config file")->required();
    auto* seed_opt = sub->add_option("--seed", seed_value, "master seed override");
    sub->add_option("--out", args.out_dir, "output directory override");
    sub->add_option("--threads", args.threads, "worker pool size");
    sub->parse_complete_callback([&, seed_opt] {
      if (seed_opt->count() > 0) args.seed = seed_value;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (generate->parsed()) return cmd_generate(args);
    if (diagnose->parsed()) return cmd_diagnose(args);
    if (simulate->parsed()) return cmd_simulate(args);
    if (clt->parsed()) return cmd_clt_sweep(args);
    if (pde->parsed()) return cmd_pde_check(args);
  } catch (const pl::SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const pl::ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 2;
  } catch (const pl::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
