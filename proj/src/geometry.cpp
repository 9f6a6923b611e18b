#include "perclab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "perclab/stats.hpp"

namespace perclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec sample_in_ball(RandomStream& rs, int d, const Vec& center, double r) {
  Vec dir = Vec::zero(d);
  double n2 = 0;
  do {
    for (int a = 0; a < d; ++a) dir[a] = rs.normal();
    n2 = dir.norm2();
  } while (n2 == 0);
  const double radius = r * std::pow(rs.uniform(), 1.0 / d);
  return center + (radius / std::sqrt(n2)) * dir;
}

}  // namespace

Vec closest_point(const ClusterModel& cluster, const Vec& x) {
  double dmin = 0;
  std::vector<int> tied;
  cluster.nearest_centers_tied(x, kLexTol, &dmin, &tied);
  if (dmin <= cluster.rho_prime()) return x;  // interior or on the closure
  Vec best = Vec::zero(x.dim());
  bool have = false;
  for (int i : tied) {
    const Vec& c = cluster.centers()[i];
    const Vec cand = c + (cluster.rho_prime() / dist(x, c)) * (x - c);
    if (!have || lex_less(cand, best, kLexTol)) {
      best = cand;
      have = true;
    }
  }
  return best;
}

double euclidean_gap(const ClusterModel& cluster, const Vec& x) {
  return std::max(cluster.nearest_center(x).second - cluster.rho_prime(), 0.0);
}

HoleBracket hole_size(const ClusterModel& cluster, double R, double h_grid) {
  if (!(R > 0) || !(h_grid > 0)) throw SchemaError("hole_size: R and h_grid must be positive");
  const int d = cluster.dim();
  const double margin = h_grid * std::sqrt(static_cast<double>(d)) / 2;
  const int imax = static_cast<int>(std::ceil((R + h_grid) / h_grid));
  double max_in = 0, max_near = 0;

  auto probe = [&](const Vec& p) {
    const double r = p.norm();
    if (r > R + margin) return;
    const double g = euclidean_gap(cluster, p);
    max_near = std::max(max_near, g);
    if (r <= R) max_in = std::max(max_in, g);
  };
  if (d == 2) {
    for (int i = -imax; i <= imax; ++i)
      for (int j = -imax; j <= imax; ++j)
        probe(Vec((i + 0.5) * h_grid, (j + 0.5) * h_grid));
  } else {
    for (int i = -imax; i <= imax; ++i)
      for (int j = -imax; j <= imax; ++j)
        for (int k = -imax; k <= imax; ++k)
          probe(Vec((i + 0.5) * h_grid, (j + 0.5) * h_grid, (k + 0.5) * h_grid));
  }
  return {max_in, max_near + margin};
}

ClusterGraphDistance::ClusterGraphDistance(const ClusterModel& cluster, const Vec& source)
    : cluster_(&cluster), source_(source) {
  cluster.centers_within(source, cluster.rho_prime() + kBoundaryTol, &source_balls_);
  if (source_balls_.empty())
    throw ModelError("intrinsic distance: source point is not covered by the cluster");

  const auto& centers = cluster.centers();
  const auto& g = cluster.overlap_graph();
  dist_.assign(centers.size(), kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (int i : source_balls_) {
    dist_[i] = dist(source, centers[i]);
    heap.emplace(dist_[i], i);
  }
  while (!heap.empty()) {
    auto [du, u] = heap.top();
    heap.pop();
    if (du > dist_[u]) continue;
    for (int e = g.start[u]; e < g.start[u + 1]; ++e) {
      const int v = g.neighbor[e];
      const double dv = du + g.weight[e];
      if (dv < dist_[v]) {
        dist_[v] = dv;
        heap.emplace(dv, v);
      }
    }
  }
}

double ClusterGraphDistance::to(const Vec& y) const {
  std::vector<int> cover;
  cluster_->centers_within(y, cluster_->rho_prime() + kBoundaryTol, &cover);
  if (cover.empty())
    throw ModelError("intrinsic distance: target point is not covered by the cluster");
  double best = kInf;
  for (int i : cover) {
    best = std::min(best, dist_[i] + dist(cluster_->centers()[i], y));
    // chord through a shared ball stays inside the union
    for (int s : source_balls_)
      if (s == i) best = std::min(best, dist(source_, y));
  }
  return best;
}

double intrinsic_distance_upper(const ClusterModel& cluster, const Vec& x, const Vec& y) {
  return ClusterGraphDistance(cluster, x).to(y);
}

VolumeEstimate ball_volume(const ClusterModel& cluster, const Vec& x, double r, int n_samples,
                           std::uint64_t seed) {
  if (!(r > 0)) throw SchemaError("ball_volume: r must be positive");
  if (euclidean_gap(cluster, x) > kBoundaryTol)
    throw ModelError("ball_volume: center point not covered");
  ClusterGraphDistance gd(cluster, x);
  RandomStream rs = RandomStream::derive(seed, stream_tag::kVolumeSample, 0);
  const int d = cluster.dim();
  std::uint64_t hits = 0;
  for (int i = 0; i < n_samples; ++i) {
    const Vec p = sample_in_ball(rs, d, x, r);
    if (cluster.contains(p) && gd.to(p) < r) ++hits;
  }
  const auto est = binomial_estimate(hits, n_samples);
  const double euc = euclidean_ball_volume(d, r);
  return {est.p_hat * euc, est.se * euc, hits, static_cast<std::uint64_t>(n_samples)};
}

namespace {

// chord of the line {p : p.n = o} inside [-R, R]^2, swept at the given pitch
double line_length_inside(const ClusterModel& cluster, const Vec& n, double o, double R,
                          double pitch) {
  const Vec q0(o * n[0], o * n[1]);
  const Vec t(-n[1], n[0]);
  double s_lo = -kInf, s_hi = kInf;
  for (int a = 0; a < 2; ++a) {
    if (std::abs(t[a]) < 1e-15) {
      if (std::abs(q0[a]) > R) return 0;
      continue;
    }
    double s1 = (-R - q0[a]) / t[a], s2 = (R - q0[a]) / t[a];
    if (s1 > s2) std::swap(s1, s2);
    s_lo = std::max(s_lo, s1);
    s_hi = std::min(s_hi, s2);
  }
  if (!(s_hi > s_lo)) return 0;
  const int m = std::max(2, static_cast<int>((s_hi - s_lo) / pitch));
  std::uint64_t in = 0;
  for (int i = 0; i < m; ++i) {
    const double s = s_lo + (i + 0.5) * (s_hi - s_lo) / m;
    if (cluster.contains(q0 + s * t)) ++in;
  }
  return (s_hi - s_lo) * static_cast<double>(in) / m;
}

}  // namespace

std::vector<IsoCut> isoperimetric_probe(const ClusterModel& cluster, double R, int n_cuts,
                                        std::uint64_t seed) {
  if (n_cuts < 1) throw SchemaError("isoperimetric_probe: n_cuts must be >= 1");
  const int d = cluster.dim();
  std::vector<IsoCut> cuts;
  cuts.reserve(n_cuts);
  const double pi = 3.14159265358979323846;

  for (int c = 0; c < n_cuts; ++c) {
    RandomStream rs = RandomStream::derive(seed, stream_tag::kIsoCut, c);
    IsoCut cut;
    if (c % 2 == 0) {
      // half-space
      if (d == 2) {
        const double th = rs.uniform(0, 2 * pi);
        cut.normal = Vec(std::cos(th), std::sin(th));
      } else {
        Vec v(rs.normal(), rs.normal(), rs.normal());
        while (v.norm2() == 0) v = Vec(rs.normal(), rs.normal(), rs.normal());
        cut.normal = (1.0 / v.norm()) * v;
      }
      cut.offset = rs.uniform(-R / 2, R / 2);
    } else {
      cut.axis = static_cast<int>(rs.bits() % d);
      cut.normal = Vec::zero(d);
      cut.normal[cut.axis] = 1;
      cut.offset = rs.uniform(-R / 2, R / 2);
      cut.halfwidth = rs.uniform(0.15 * R, 0.35 * R);
    }
    auto in_cut = [&](const Vec& p) {
      const double v = p.dot(cut.normal) - cut.offset;
      return cut.axis < 0 ? v < 0 : std::abs(v) < cut.halfwidth;
    };

    if (d == 2) {
      const double hv = std::min(cluster.rho_prime() / 4, 2 * R / 400);
      const int m = static_cast<int>(std::ceil(2 * R / hv));
      std::uint64_t in = 0;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const Vec p(-R + (i + 0.5) * hv, -R + (j + 0.5) * hv);
          if (in_cut(p) && cluster.contains(p)) ++in;
        }
      cut.volume = static_cast<double>(in) * hv * hv;
      cut.surface = line_length_inside(cluster, cut.normal, cut.offset, R, hv / 2);
      if (cut.axis >= 0) {
        cut.surface = line_length_inside(cluster, cut.normal, cut.offset - cut.halfwidth, R, hv / 2) +
                      line_length_inside(cluster, cut.normal, cut.offset + cut.halfwidth, R, hv / 2);
      }
    } else {
      // MC volume plus shell counting for the surface
      const int n_mc = 65536;
      const double w_sh = cluster.rho_prime() / 16;
      std::uint64_t in_vol = 0, in_sh_lo = 0, in_sh_hi = 0;
      for (int i = 0; i < n_mc; ++i) {
        Vec p(rs.uniform(-R, R), rs.uniform(-R, R), rs.uniform(-R, R));
        const bool member = cluster.contains(p);
        if (!member) continue;
        if (in_cut(p)) ++in_vol;
        const double v = p.dot(cut.normal) - cut.offset;
        if (cut.axis < 0) {
          if (std::abs(v) < w_sh) ++in_sh_lo;
        } else {
          if (std::abs(v + cut.halfwidth) < w_sh) ++in_sh_lo;
          if (std::abs(v - cut.halfwidth) < w_sh) ++in_sh_hi;
        }
      }
      const double box = 8 * R * R * R;
      cut.volume = box * static_cast<double>(in_vol) / n_mc;
      cut.surface = box * static_cast<double>(in_sh_lo + in_sh_hi) / n_mc / (2 * w_sh);
    }

    if (cut.volume <= 0) {
      cut.skipped = true;
    } else {
      cut.ratio = cut.surface / std::pow(cut.volume, (d - 1.0) / d);
    }
    cuts.push_back(cut);
  }
  return cuts;
}

namespace {

Vec sample_in_cluster_ball(const ClusterModel& cluster, double R, RandomStream& rs) {
  const Vec origin = Vec::zero(cluster.dim());
  for (int attempt = 0; attempt < 200000; ++attempt) {
    const Vec p = sample_in_ball(rs, cluster.dim(), origin, R);
    if (cluster.contains(p)) return p;
  }
  throw InsufficientSamples("no cluster mass found in B(0,R) after 200000 draws");
}

}  // namespace

GeometryReport regularity_report(const ClusterModel& cluster, const std::vector<double>& R_values,
                                 const RegularityParams& params, std::uint64_t seed) {
  if (R_values.size() < 2) throw SchemaError("regularity_report: need >= 2 R values");
  for (std::size_t i = 1; i < R_values.size(); ++i)
    if (!(R_values[i] > R_values[i - 1]))
      throw SchemaError("regularity_report: R_values must be increasing");
  const int d = cluster.dim();

  GeometryReport rep;
  rep.R_values = R_values;
  rep.x_samples = params.x_samples;
  rep.pair_samples = params.pair_samples;
  rep.vol_samples = params.vol_samples;

  struct Pair {
    double d_euc, d_w, R;
  };
  std::vector<Pair> pairs;

  std::uint64_t sub = 0;
  for (double R : R_values) {
    RandomStream rs = RandomStream::derive(seed, stream_tag::kRegularity, sub++);
    // volume regularity
    double cv = 1;
    for (int s = 0; s < params.x_samples; ++s) {
      const Vec x = sample_in_cluster_ball(cluster, R, rs);
      const auto vol =
          ball_volume(cluster, x, R, params.vol_samples,
                      RandomStream::derive(seed, stream_tag::kVolumeSample, sub * 1000 + s).bits());
      if (vol.value <= 0) {
        cv = std::numeric_limits<double>::infinity();
        continue;
      }
      const double rd = std::pow(R, d);
      cv = std::max({cv, vol.value / rd, rd / vol.value});
    }
    rep.c_v.push_back(cv);

    // holes
    rep.holes.push_back(hole_size(cluster, R, params.hole_grid));

    // distance comparison pairs
    const int per_source = 16;
    const int n_sources = (params.pair_samples + per_source - 1) / per_source;
    int collected = 0;
    for (int s = 0; s < n_sources && collected < params.pair_samples; ++s) {
      const Vec x = sample_in_cluster_ball(cluster, R, rs);
      ClusterGraphDistance gd(cluster, x);
      for (int t = 0; t < per_source && collected < params.pair_samples; ++t) {
        const Vec y = sample_in_cluster_ball(cluster, R, rs);
        const double de = dist(x, y);
        if (de < 1e-9) continue;
        pairs.push_back({de, gd.to(y), R});
        ++collected;
      }
    }
    if (collected < 10)
      throw InsufficientSamples("fewer than 10 distance pairs collected at R=" +
                                std::to_string(R));
  }
  rep.c_v_overall = *std::max_element(rep.c_v.begin(), rep.c_v.end());

  // hole-size exponent: log h_W(R) vs log R on bracket midpoints
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < R_values.size(); ++i) {
    lx.push_back(std::log(R_values[i]));
    ly.push_back(std::log(0.5 * (rep.holes[i].lo + rep.holes[i].hi)));
  }
  const LineFit hole_fit = fit_line(lx, ly);
  rep.gamma_raw = hole_fit.slope;
  rep.gamma_se = hole_fit.slope_se;
  rep.gamma_ci_hi = hole_fit.slope + hole_fit.slope_ci_half();
  rep.gamma_hat = std::clamp(hole_fit.slope, 0.0, 1.0);
  rep.c_hole = std::exp(hole_fit.intercept);
  rep.hole_fit_residuals = hole_fit.residuals;

  // distance comparison: minimal C_W on a Upsilon grid, knee at 10% above
  // the Upsilon=1 floor
  auto c_w_at = [&](double ups) {
    double cw = 1;
    for (const Pair& p : pairs)
      if (p.d_w > std::pow(p.R, ups)) cw = std::max(cw, p.d_w / p.d_euc);
    return cw;
  };
  const double floor_cw = c_w_at(1.0);
  rep.upsilon_hat = 1.0;
  for (int g = 1; g <= 20; ++g) {
    const double ups = 0.05 * g;
    if (c_w_at(ups) <= 1.1 * floor_cw) {
      rep.upsilon_hat = ups;
      break;
    }
  }
  rep.c_w = c_w_at(rep.upsilon_hat);
  for (double R : R_values) {
    double cw = 1;
    for (const Pair& p : pairs)
      if (p.R <= R && p.d_w > std::pow(R, rep.upsilon_hat)) cw = std::max(cw, p.d_w / p.d_euc);
    rep.c_w_per_r.push_back(cw);
  }
  const double R_last = R_values.back();
  for (const Pair& p : pairs)
    if (p.R == R_last)
      rep.pair_slack.push_back(p.d_w -
                               std::max(rep.c_w * p.d_euc, std::pow(R_last, rep.upsilon_hat)));

  // operational R_theta: first R from which C_V stays within 10%, confirmed
  // by at least one larger R
  for (std::size_t i = 0; i + 1 < rep.c_v.size(); ++i) {
    bool stable = std::isfinite(rep.c_v[i]);
    for (std::size_t j = i + 1; j < rep.c_v.size() && stable; ++j)
      stable = std::abs(rep.c_v[j] - rep.c_v[i]) <= 0.1 * rep.c_v[i];
    if (stable) {
      rep.r_hat_theta = R_values[i];
      break;
    }
  }

  const auto cuts = isoperimetric_probe(cluster, R_values.back(), params.iso_cuts,
                                        RandomStream::derive(seed, stream_tag::kIsoCut, 7).bits());
  for (const auto& c : cuts) {
    if (c.skipped)
      ++rep.iso_skipped;
    else
      rep.iso_ratios.push_back(c.ratio);
  }
  return rep;
}

}  // namespace perclab
