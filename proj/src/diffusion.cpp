#include "perclab/diffusion.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <limits>
#include <thread>

#include "perclab/raster.hpp"

namespace perclab {

namespace {

constexpr int kMaxReflections = 32;
constexpr int kMaxWalkIterations = 96;  // reflections plus straight pass-throughs

// run fn(block_index, begin, end) over [0, n) in fixed blocks; the block
// decomposition is independent of the thread count, so any per-block outputs
// reduce deterministically
template <class Fn>
void run_blocked(std::uint64_t n, std::uint64_t block, int n_threads, Fn&& fn) {
  const std::uint64_t n_blocks = block ? (n + block - 1) / block : 0;
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      fn(b, b * block, std::min(n, (b + 1) * block));
    }
  };
  if (n_threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

constexpr std::uint64_t kPathBlock = 4096;

}  // namespace

ReflectResult reflect_step(const ClusterModel& cluster, const Vec& x, const Vec& v,
                           int* ball_hint) {
  const double rp = cluster.rho_prime();
  const double rp2 = rp * rp;
  ReflectResult res;
  res.point = x;
  const double vnorm = v.norm();
  if (vnorm == 0) return res;
  if (!(vnorm < rp)) throw SchemaError("reflect_step: |v| must be < rho'");

  // fast path: one ball covers both endpoints, hence the whole segment
  {
    const int b = cluster.covering_ball(x, ball_hint ? *ball_hint : -1);
    if (b >= 0 && dist2(cluster.centers()[b], x + v) < rp2) {
      res.point = x + v;
      res.path_length = vnorm;
      if (ball_hint) *ball_hint = b;
      return res;
    }
  }

  // every ball that can touch the polyline (total length |v|) is here
  std::vector<int> candidates;
  cluster.centers_within(x, rp + vnorm + 1e-12, &candidates);

  Vec p = x, w = v;
  int zero_advances = 0;
  for (int iter = 0; iter < kMaxWalkIterations; ++iter) {
    const double wn2 = w.norm2();
    if (wn2 == 0) {
      res.point = p;
      if (ball_hint) *ball_hint = -1;
      return res;
    }
    // last covered parameter along p -> p+w among balls covering p
    double t_cover = -1;
    int exit_ball = -1;
    for (int ci : candidates) {
      const Vec pc = p - cluster.centers()[ci];
      const double c0 = pc.norm2() - rp2;
      const double b = pc.dot(w);
      const double band = 1e-10 * rp2;
      const bool covering = c0 < -band || (c0 <= band && b < 0);
      if (!covering) continue;
      const double disc = b * b - wn2 * c0;
      const double t_exit = disc > 0 ? (-b + std::sqrt(disc)) / wn2 : 0.0;
      if (t_exit >= 1.0) {  // stays in this ball to the end
        res.point = p + w;
        res.path_length += std::sqrt(wn2);
        assert(std::abs(res.path_length - vnorm) <= 1e-12 * std::max(1.0, vnorm));
        if (ball_hint) *ball_hint = ci;
        return res;
      }
      if (t_exit > t_cover) {
        t_cover = t_exit;
        exit_ball = ci;
      }
    }
    if (exit_ball < 0 || ++zero_advances > 8) {
      // grazing corner or accumulated roundoff: project the target back
      res.point = closest_point(cluster, p + w);
      res.path_length += std::sqrt(wn2);
      res.capped = true;
      if (ball_hint) *ball_hint = -1;
      return res;
    }
    if (t_cover > 0) zero_advances = 0;

    const Vec q = p + t_cover * w;
    res.path_length += t_cover * std::sqrt(wn2);
    const Vec rem = (1.0 - t_cover) * w;

    // does the union continue past q? interior of another ball, or a
    // boundary point entered inward
    bool covered_past = false;
    for (int ci : candidates) {
      if (ci == exit_ball) continue;
      const Vec qc = q - cluster.centers()[ci];
      const double c0 = qc.norm2() - rp2;
      const double band = 1e-10 * rp2;
      if (c0 < -band || (c0 <= band && qc.dot(rem) < 0)) {
        covered_past = true;
        break;
      }
    }
    p = q;
    if (covered_past) {
      w = rem;  // straight through, no reflection
      continue;
    }
    const Vec qc = q - cluster.centers()[exit_ball];
    const Vec n = (1.0 / qc.norm()) * qc;
    w = specular(rem, n);
    if (++res.reflections > kMaxReflections) {
      res.reflections = kMaxReflections;
      res.point = closest_point(cluster, p + w);
      res.path_length += rem.norm();
      res.capped = true;
      if (ball_hint) *ball_hint = -1;
      return res;
    }
  }
  // iteration budget exhausted
  res.point = closest_point(cluster, p + w);
  res.path_length += w.norm();
  res.capped = true;
  if (ball_hint) *ball_hint = -1;
  return res;
}

Vec simulate_path(const ClusterModel& cluster, const Vec& x0, double T, double dt,
                  RandomStream& rng, PathStats* stats) {
  if (!(dt > 0)) throw SchemaError("simulate_path: dt must be positive");
  if (T < 0) throw SchemaError("simulate_path: T must be >= 0");
  const double rp = cluster.rho_prime();
  if (!(6.0 * std::sqrt(dt) <= rp))
    throw SchemaError("simulate_path: step rule 6*sqrt(dt) <= rho' violated");
  if (T == 0) return x0;

  const int d = cluster.dim();
  const auto n = static_cast<std::uint64_t>(std::ceil(T / dt - 1e-12));
  const double sd = std::sqrt(T / static_cast<double>(n));
  Vec x = x0;
  int hint = -1;
  Vec v = Vec::zero(d);
  for (std::uint64_t s = 0; s < n; ++s) {
    for (;;) {
      for (int a = 0; a < d; ++a) v[a] = sd * rng.normal();
      if (v.norm() < rp) break;
      if (stats) ++stats->redraws;
    }
    const ReflectResult r = reflect_step(cluster, x, v, &hint);
    x = r.point;
    if (stats) {
      ++stats->steps;
      stats->reflections += r.reflections;
      if (r.capped)
        ++stats->capped_steps;
      else
        stats->max_len_dev = std::max(stats->max_len_dev, std::abs(r.path_length - v.norm()));
    }
  }
  if (stats) stats->max_end_gap = std::max(stats->max_end_gap, euclidean_gap(cluster, x));
  return x;
}

double EmpiricalDensity::eval_rescaled(const ClusterModel& cluster, const Vec& x,
                                       double* se_out) const {
  const Vec z = closest_point(cluster, (1.0 / epsilon) * x);
  const int idx = grid.index_of(epsilon * z);
  if (idx < 0) throw MissingGridPoint("evaluation point maps outside the bin grid");
  if (!(vol[idx] > 0)) throw MissingGridPoint("evaluation bin has no measured volume");
  if (se_out) *se_out = se[idx];
  return rescaled[idx];
}

EmpiricalDensity empirical_density(const ClusterModel& cluster, const DensityParams& params,
                                   std::uint64_t seed) {
  if (!(params.epsilon > 0) || !(params.dx > 0) || !(params.r_grid > 0))
    throw SchemaError("empirical_density: epsilon, dx, r_grid must be positive");
  if (params.n_paths < 1) throw SchemaError("empirical_density: n_paths must be >= 1");
  const int d = cluster.dim();
  if (euclidean_gap(cluster, Vec::zero(d)) > kBoundaryTol)
    throw OriginNotCovered("empirical_density: origin not covered by the cluster");

  EmpiricalDensity out;
  out.dim = d;
  out.epsilon = params.epsilon;
  out.T_sim = params.T;
  out.t_macro = params.T * params.epsilon * params.epsilon;
  out.dt = params.dt;
  out.grid = DensityGrid{d, params.dx, static_cast<int>(std::llround(params.r_grid / params.dx))};
  out.start = closest_point(cluster, Vec::zero(d));
  out.n_paths = params.n_paths;

  const int nb = out.grid.n_bins();
  const std::uint64_t n_blocks = (params.n_paths + kPathBlock - 1) / kPathBlock;
  std::vector<std::vector<std::uint64_t>> block_counts(n_blocks);
  std::vector<std::uint64_t> block_overflow(n_blocks, 0);
  std::vector<PathStats> block_stats(n_blocks);

  run_blocked(params.n_paths, kPathBlock, params.n_threads,
              [&](std::uint64_t b, std::uint64_t begin, std::uint64_t end) {
                auto& counts = block_counts[b];
                counts.assign(nb, 0);
                for (std::uint64_t i = begin; i < end; ++i) {
                  RandomStream rs = RandomStream::derive(seed, stream_tag::kPath, i);
                  const Vec y =
                      simulate_path(cluster, out.start, params.T, params.dt, rs, &block_stats[b]);
                  const int idx = out.grid.index_of(params.epsilon * y);
                  if (idx >= 0)
                    ++counts[idx];
                  else
                    ++block_overflow[b];
                }
              });

  out.counts.assign(nb, 0);
  for (std::uint64_t b = 0; b < n_blocks; ++b) {
    for (int k = 0; k < nb; ++k) out.counts[k] += block_counts[b][k];
    out.overflow += block_overflow[b];
    out.stats.merge(block_stats[b]);
  }

  // bin measures in unscaled coordinates
  out.vol.assign(nb, 0);
  out.vol_se.assign(nb, 0);
  run_blocked(nb, 16, params.n_threads, [&](std::uint64_t, std::uint64_t begin,
                                            std::uint64_t end) {
    for (std::uint64_t k = begin; k < end; ++k) {
      const Vec c = out.grid.center_of(static_cast<int>(k));
      Window bin;
      bin.lo = Vec::zero(d);
      bin.hi = Vec::zero(d);
      for (int a = 0; a < d; ++a) {
        bin.lo[a] = (c[a] - params.dx / 2) / params.epsilon;
        bin.hi[a] = (c[a] + params.dx / 2) / params.epsilon;
      }
      const auto est = bin_volume(cluster, bin, params.vol_samples,
                                  RandomStream::derive(seed, stream_tag::kBinVolume, k).bits());
      out.vol[k] = est.value;
      out.vol_se[k] = est.se;
    }
  });

  out.density.assign(nb, 0);
  out.rescaled.assign(nb, 0);
  out.se.assign(nb, 0);
  out.flagged.assign(nb, 0);
  const double inv_eps_d = std::pow(params.epsilon, -d);
  for (int k = 0; k < nb; ++k) {
    const double p = static_cast<double>(out.counts[k]) / static_cast<double>(out.n_paths);
    if (out.counts[k] > 0 && out.vol[k] - 1.96 * out.vol_se[k] <= 0) out.flagged[k] = 1;
    if (out.vol[k] > 0) {
      out.density[k] = p / out.vol[k];
      out.rescaled[k] = inv_eps_d * out.density[k];
      const double count_se = std::sqrt(p * (1 - p) / static_cast<double>(out.n_paths));
      const double rel_vol = out.vol_se[k] / out.vol[k];
      out.se[k] = inv_eps_d / out.vol[k] *
                  std::sqrt(count_se * count_se + p * p * rel_vol * rel_vol);
    } else if (out.counts[k] > 0) {
      out.density[k] = out.rescaled[k] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

CovarianceEstimate estimate_covariance(const ClusterModel& cluster, double T, double dt,
                                       std::uint64_t n_paths, std::uint64_t seed, int n_threads) {
  if (!(T > 0)) throw SchemaError("estimate_covariance: T must be positive");
  if (n_paths < 2) throw SchemaError("estimate_covariance: need >= 2 paths");
  const int d = cluster.dim();
  if (euclidean_gap(cluster, Vec::zero(d)) > kBoundaryTol)
    throw OriginNotCovered("estimate_covariance: origin not covered by the cluster");
  const Vec x0 = closest_point(cluster, Vec::zero(d));

  struct Partial {
    double sum[9] = {};
    double sumsq[9] = {};
  };
  const std::uint64_t n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;
  std::vector<Partial> partials(n_blocks);
  std::vector<PathStats> block_stats(n_blocks);

  run_blocked(n_paths, kPathBlock, n_threads,
              [&](std::uint64_t b, std::uint64_t begin, std::uint64_t end) {
                for (std::uint64_t i = begin; i < end; ++i) {
                  RandomStream rs = RandomStream::derive(seed, stream_tag::kPath, i);
                  const Vec y = simulate_path(cluster, x0, T, dt, rs, &block_stats[b]);
                  const Vec delta = y - x0;
                  for (int a = 0; a < d; ++a)
                    for (int c = 0; c < d; ++c) {
                      const double m = delta[a] * delta[c] / T;
                      partials[b].sum[a * d + c] += m;
                      partials[b].sumsq[a * d + c] += m * m;
                    }
                }
              });

  CovarianceEstimate est;
  est.dim = d;
  est.T = T;
  est.n_paths = n_paths;
  double sum[9] = {}, sumsq[9] = {};
  for (std::uint64_t b = 0; b < n_blocks; ++b) {
    for (int k = 0; k < d * d; ++k) {
      sum[k] += partials[b].sum[k];
      sumsq[k] += partials[b].sumsq[k];
    }
    est.stats.merge(block_stats[b]);
  }
  const double n = static_cast<double>(n_paths);
  for (int a = 0; a < d; ++a)
    for (int c = 0; c < d; ++c) {
      const double mean = sum[a * d + c] / n;
      const double var = std::max(0.0, sumsq[a * d + c] / n - mean * mean);
      est.sigma[a][c] = mean;
      est.se[a][c] = std::sqrt(var / n);
    }
  return est;
}

std::vector<HolderRow> holder_density_check(const ClusterModel& cluster,
                                            const std::vector<const EmpiricalDensity*>& densities,
                                            const std::vector<double>& r0_values, double R_eval,
                                            double eval_step) {
  if (densities.empty()) throw SchemaError("holder_density_check: no densities");
  if (!(eval_step > 0) || !(R_eval > 0))
    throw SchemaError("holder_density_check: R_eval and eval_step must be positive");
  const int d = cluster.dim();

  // evaluation lattice
  std::vector<Vec> pts;
  const int kmax = static_cast<int>(std::floor(R_eval / eval_step));
  if (d == 2) {
    for (int i = -kmax; i <= kmax; ++i)
      for (int j = -kmax; j <= kmax; ++j) {
        const Vec x(i * eval_step, j * eval_step);
        if (x.norm() <= R_eval) pts.push_back(x);
      }
  } else {
    for (int i = -kmax; i <= kmax; ++i)
      for (int j = -kmax; j <= kmax; ++j)
        for (int k = -kmax; k <= kmax; ++k) {
          const Vec x(i * eval_step, j * eval_step, k * eval_step);
          if (x.norm() <= R_eval) pts.push_back(x);
        }
  }

  // group by epsilon (exact: configs hand identical values around)
  std::vector<double> eps_list;
  for (const auto* dd : densities)
    if (std::find(eps_list.begin(), eps_list.end(), dd->epsilon) == eps_list.end())
      eps_list.push_back(dd->epsilon);

  std::vector<HolderRow> rows;
  for (double eps : eps_list) {
    // value tables per t
    std::vector<std::vector<double>> vals;
    double max_se = 0;
    for (const auto* dd : densities) {
      if (dd->epsilon != eps) continue;
      std::vector<double> v(pts.size(), std::numeric_limits<double>::quiet_NaN());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        try {
          double se = 0;
          v[i] = dd->eval_rescaled(cluster, pts[i], &se);
          max_se = std::max(max_se, se);
        } catch (const MissingGridPoint&) {
        }
      }
      vals.push_back(std::move(v));
    }
    for (double r0 : r0_values) {
      double stat = 0;
      for (const auto& v : vals)
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (std::isnan(v[i])) continue;
          for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if (std::isnan(v[j])) continue;
            if (dist(pts[i], pts[j]) < r0) stat = std::max(stat, std::abs(v[i] - v[j]));
          }
        }
      rows.push_back({r0, eps, stat, 2 * max_se});
    }
  }
  return rows;
}

}  // namespace perclab
