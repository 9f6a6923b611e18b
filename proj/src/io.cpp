#include "perclab/io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace perclab {

using nlohmann::json;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw SchemaError("cannot open for writing: " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

const json& require_field(const json& j, const std::string& dotted_path) {
  const json* cur = &j;
  std::size_t pos = 0;
  while (pos <= dotted_path.size()) {
    const std::size_t dot = dotted_path.find('.', pos);
    const std::string key = dotted_path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (!cur->is_object() || !cur->contains(key))
      throw SchemaError("missing required field: " + dotted_path);
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return *cur;
}

double require_double(const json& j, const std::string& p) {
  const json& f = require_field(j, p);
  if (!f.is_number()) throw SchemaError("field is not a number: " + p);
  return f.get<double>();
}

std::uint64_t require_u64(const json& j, const std::string& p) {
  const json& f = require_field(j, p);
  if (!f.is_number_unsigned() && !f.is_number_integer())
    throw SchemaError("field is not an integer: " + p);
  return f.get<std::uint64_t>();
}

namespace {

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.dim(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  if (!a.is_array() || (a.size() != 2 && a.size() != 3))
    throw SchemaError("expected a 2- or 3-vector");
  return a.size() == 2 ? Vec(a[0].get<double>(), a[1].get<double>())
                       : Vec(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

}  // namespace

json cluster_to_json(const ClusterModel& cluster) {
  json j;
  j["d"] = cluster.dim();
  j["rho"] = cluster.rho();
  j["rho_prime"] = cluster.rho_prime();
  j["window"] = {{"lo", vec_to_json(cluster.window().lo)},
                 {"hi", vec_to_json(cluster.window().hi)}};
  json centers = json::array();
  for (const Vec& c : cluster.centers()) centers.push_back(vec_to_json(c));
  j["centers"] = std::move(centers);
  j["policy"] = to_string(cluster.policy());
  j["seed"] = cluster.seed();
  return j;
}

ClusterModel cluster_from_json(const json& j) {
  const int d = static_cast<int>(require_u64(j, "d"));
  if (d != 2 && d != 3) throw SchemaError("cluster: d must be 2 or 3");
  Window w;
  w.lo = vec_from_json(require_field(j, "window.lo"));
  w.hi = vec_from_json(require_field(j, "window.hi"));
  if (w.lo.dim() != d || w.degenerate()) throw SchemaError("cluster: bad window");
  std::vector<Vec> centers;
  for (const auto& c : require_field(j, "centers")) {
    const Vec v = vec_from_json(c);
    if (v.dim() != d) throw SchemaError("cluster: center dimension mismatch");
    centers.push_back(v);
  }
  return ClusterModel(std::move(centers), require_double(j, "rho"),
                      require_double(j, "rho_prime"), w,
                      selection_policy_from_string(require_field(j, "policy").get<std::string>()),
                      require_u64(j, "seed"));
}

json geometry_report_to_json(const GeometryReport& rep) {
  json j;
  j["R_values"] = rep.R_values;
  j["C_V"] = rep.c_v;
  j["C_V_overall"] = rep.c_v_overall;
  json holes = json::array();
  for (const auto& h : rep.holes) holes.push_back({{"lo", h.lo}, {"hi", h.hi}});
  j["holes"] = std::move(holes);
  j["gamma_hat"] = rep.gamma_hat;
  j["gamma_raw"] = rep.gamma_raw;
  j["gamma_se"] = rep.gamma_se;
  j["gamma_ci_hi"] = rep.gamma_ci_hi;
  j["C_hole"] = rep.c_hole;
  j["hole_fit_residuals"] = rep.hole_fit_residuals;
  j["upsilon_hat"] = rep.upsilon_hat;
  j["C_W"] = rep.c_w;
  j["C_W_per_R"] = rep.c_w_per_r;
  j["pair_slack"] = rep.pair_slack;
  j["R_hat_theta"] = rep.r_hat_theta;
  j["iso_ratios"] = rep.iso_ratios;
  j["iso_skipped"] = rep.iso_skipped;
  j["samples"] = {{"x_samples", rep.x_samples},
                  {"pair_samples", rep.pair_samples},
                  {"vol_samples", rep.vol_samples}};
  return j;
}

std::string geometry_sweep_csv(const GeometryReport& rep) {
  std::ostringstream out;
  out << "R,C_V,h_lo,h_hi,gamma_running\n";
  for (std::size_t i = 0; i < rep.R_values.size(); ++i) {
    double gamma_running = std::numeric_limits<double>::quiet_NaN();
    if (i >= 1) {
      std::vector<double> lx, ly;
      for (std::size_t k = 0; k <= i; ++k) {
        lx.push_back(std::log(rep.R_values[k]));
        ly.push_back(std::log(0.5 * (rep.holes[k].lo + rep.holes[k].hi)));
      }
      gamma_running = fit_line(lx, ly).slope;
    }
    out << format_g17(rep.R_values[i]) << ',' << format_g17(rep.c_v[i]) << ','
        << format_g17(rep.holes[i].lo) << ',' << format_g17(rep.holes[i].hi) << ','
        << format_g17(gamma_running) << '\n';
  }
  return out.str();
}

std::string density_csv(const std::vector<const EmpiricalDensity*>& runs) {
  std::ostringstream out;
  const int d = runs.empty() ? 2 : runs.front()->dim;
  out << "t,epsilon";
  for (int a = 0; a < d; ++a) out << ",x" << (a + 1);
  out << ",count,bin_volume,density,rescaled_density,se\n";
  for (const auto* run : runs) {
    for (int k = 0; k < run->grid.n_bins(); ++k) {
      const Vec c = run->grid.center_of(k);
      out << format_g17(run->t_macro) << ',' << format_g17(run->epsilon);
      for (int a = 0; a < d; ++a) out << ',' << format_g17(c[a]);
      out << ',' << run->counts[k] << ',' << format_g17(run->vol[k]) << ','
          << format_g17(run->density[k]) << ',' << format_g17(run->rescaled[k]) << ','
          << format_g17(run->se[k]) << '\n';
    }
  }
  return out.str();
}

json path_stats_to_json(const PathStats& s) {
  return {{"steps", s.steps},
          {"reflections", s.reflections},
          {"capped_steps", s.capped_steps},
          {"redraws", s.redraws},
          {"max_end_gap", s.max_end_gap},
          {"max_len_dev", s.max_len_dev}};
}

json covariance_to_json(const CovarianceEstimate& est) {
  json sig = json::array(), se = json::array();
  for (int a = 0; a < est.dim; ++a) {
    json row = json::array(), row_se = json::array();
    for (int b = 0; b < est.dim; ++b) {
      row.push_back(est.sigma[a][b]);
      row_se.push_back(est.se[a][b]);
    }
    sig.push_back(row);
    se.push_back(row_se);
  }
  return {{"sigma", sig},      {"se", se},
          {"T", est.T},        {"n_paths", est.n_paths},
          {"dim", est.dim},    {"stats", path_stats_to_json(est.stats)}};
}

std::string clt_csv(const CltSweepResult& result) {
  std::ostringstream out;
  const int d = result.densities.empty() ? 2 : result.densities.front().dim;
  out << "epsilon,t";
  for (int a = 0; a < d; ++a) out << ",x" << (a + 1);
  out << ",error,se\n";
  for (const auto& row : result.rows)
    for (const auto& cell : row.cells) {
      out << format_g17(row.epsilon) << ',' << format_g17(cell.t);
      for (int a = 0; a < d; ++a) out << ',' << format_g17(cell.x[a]);
      out << ',' << format_g17(cell.error) << ',' << format_g17(cell.se) << '\n';
    }
  return out.str();
}

json clt_summary_json(const CltSweepResult& result) {
  json sup = json::array();
  for (const auto& row : result.rows) {
    sup.push_back({{"epsilon", row.epsilon},
                   {"sup_error", row.sup_error},
                   {"noise_floor", row.noise_floor},
                   {"bin_modulus", row.bin_modulus},
                   {"argmax_t", row.argmax.t},
                   {"argmax_x", {row.argmax.x[0], row.argmax.x[1]}}});
  }
  json js = json::array();
  for (const auto& je : result.j_integrals)
    js.push_back({{"epsilon", je.epsilon}, {"t", je.t}, {"J", je.value}});
  return {{"sup_error", sup},
          {"j_integral", js},
          {"kendall_tau", result.trend.tau},
          {"trend_p_value", result.trend.p_decreasing},
          {"sigma_hat", covariance_to_json(result.sigma_hat)}};
}

std::string holder_rows_csv(const std::vector<HolderRow>& rows) {
  std::ostringstream out;
  out << "r0,epsilon,stat,noise_floor\n";
  for (const auto& r : rows)
    out << format_g17(r.r0) << ',' << format_g17(r.epsilon) << ',' << format_g17(r.stat) << ','
        << format_g17(r.noise_floor) << '\n';
  return out.str();
}

json harnack_report_to_json(const HarnackReport& rep) {
  return {{"ratio", rep.ratio},
          {"sup_qminus", rep.sup_qminus},
          {"inf_qplus", rep.inf_qplus},
          {"r", rep.r},
          {"s", rep.s},
          {"tau", rep.tau},
          {"delta", rep.delta},
          {"pitch", rep.pitch},
          {"slices_qminus", rep.slices_qminus},
          {"slices_qplus", rep.slices_qplus},
          {"r_below_theta", rep.r_below_theta}};
}

json harnack_study_to_json(const HarnackStudy& study) {
  json reports = json::array();
  for (const auto& r : study.reports) reports.push_back(harnack_report_to_json(r));
  return {{"pitches", study.pitches},
          {"ratios", study.ratios},
          {"max_drift", study.max_drift},
          {"reports", reports}};
}

std::string oscillation_csv(const OscillationReport& rep) {
  std::ostringstream out;
  out << "level,radius,osc\n";
  for (std::size_t i = 0; i < rep.osc.size(); ++i)
    out << rep.levels[i] << ',' << format_g17(rep.radii[i]) << ',' << format_g17(rep.osc[i])
        << '\n';
  return out.str();
}

json oscillation_to_json(const OscillationReport& rep) {
  return {{"levels", rep.levels},
          {"radii", rep.radii},
          {"osc", rep.osc},
          {"alpha_hat", rep.alpha_hat},
          {"alpha_ci_lo", rep.alpha_ci_lo},
          {"alpha_ci_hi", rep.alpha_ci_hi},
          {"degenerate", rep.degenerate}};
}

std::string poincare_csv(const std::vector<PoincareReport>& reps) {
  std::ostringstream out;
  out << "r,cells,mu1,C_P,iterations\n";
  for (const auto& r : reps)
    out << format_g17(r.r) << ',' << r.cells << ',' << format_g17(r.mu1) << ','
        << format_g17(r.c_p) << ',' << r.iterations << '\n';
  return out.str();
}

void write_pgm(const RasterMask& mask, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "P5\n" << mask.nx << ' ' << mask.ny << "\n255\n";
  // top row first
  for (int j = mask.ny - 1; j >= 0; --j)
    for (int i = 0; i < mask.nx; ++i)
      out.put(mask.is_inside(i, j) ? static_cast<char>(255) : static_cast<char>(0));
  write_atomic(path, out.str());
  const json sidecar = {{"origin", {mask.origin[0], mask.origin[1]}},
                        {"pitch", mask.pitch},
                        {"shape", {mask.nx, mask.ny}}};
  write_atomic(path.string() + ".json", sidecar.dump(2) + "\n");
}

void write_pgm_field(const HeatField& field, std::size_t snapshot,
                     const std::filesystem::path& path) {
  if (snapshot >= field.snaps.size()) throw SchemaError("write_pgm_field: snapshot out of range");
  const auto& u = field.snaps[snapshot];
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < u.size(); ++k)
    if (field.inside[k]) {
      lo = std::min(lo, u[k]);
      hi = std::max(hi, u[k]);
    }
  const double span = hi > lo ? hi - lo : 1.0;
  std::ostringstream out;
  out << "P5\n" << field.nx << ' ' << field.ny << "\n255\n";
  for (int j = field.ny - 1; j >= 0; --j)
    for (int i = 0; i < field.nx; ++i) {
      const int k = field.idx(i, j);
      const int v = field.inside[k]
                        ? 1 + static_cast<int>(254.0 * (u[k] - lo) / span)
                        : 0;
      out.put(static_cast<char>(v));
    }
  write_atomic(path, out.str());
  const json sidecar = {{"origin", {field.origin[0], field.origin[1]}},
                        {"pitch", field.pitch},
                        {"shape", {field.nx, field.ny}},
                        {"time", field.times[snapshot]},
                        {"min", lo},
                        {"max", hi}};
  write_atomic(path.string() + ".json", sidecar.dump(2) + "\n");
}

json make_manifest(const std::string& command, const json& config, std::uint64_t seed,
                   double wall_seconds, const std::vector<std::string>& outputs, int threads) {
  return {{"command", command},
          {"config", config},
          {"seed", seed},
          {"version", {{"artifact", kVersion}, {"compiler", __VERSION__}}},
          {"wall_time_s", wall_seconds},
          {"outputs", outputs},
          {"threads", threads}};
}

}  // namespace perclab
