#include "perclab/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace perclab {

int RasterMask::count_inside() const {
  int n = 0;
  for (auto v : inside) n += v != 0;
  return n;
}

int RasterMask::count_components() const {
  std::vector<char> seen(inside.size(), 0);
  std::vector<int> stack;
  int components = 0;
  for (int j0 = 0; j0 < ny; ++j0)
    for (int i0 = 0; i0 < nx; ++i0) {
      if (!is_inside(i0, j0) || seen[idx(i0, j0)]) continue;
      ++components;
      stack.assign(1, idx(i0, j0));
      seen[stack[0]] = 1;
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        const int ui = u % nx, uj = u / nx;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0) continue;
            if (is_inside(ui + di, uj + dj) && !seen[idx(ui + di, uj + dj)]) {
              seen[idx(ui + di, uj + dj)] = 1;
              stack.push_back(idx(ui + di, uj + dj));
            }
          }
      }
    }
  return components;
}

RasterMask rasterize(const ClusterModel& cluster, const Window& bbox, double h) {
  if (cluster.dim() != 2) throw SchemaError("rasterize: 2-D clusters only");
  if (!(h > 0)) throw SchemaError("rasterize: pitch must be positive");
  if (h > cluster.rho_prime() / 4)
    throw PitchTooCoarse("rasterize: pitch " + std::to_string(h) + " exceeds rho'/4");
  RasterMask m;
  m.origin = bbox.lo;
  m.pitch = h;
  m.nx = std::max(1, static_cast<int>(std::ceil(bbox.side(0) / h)));
  m.ny = std::max(1, static_cast<int>(std::ceil(bbox.side(1) / h)));
  m.rho_prime = cluster.rho_prime();
  m.inside.assign(static_cast<std::size_t>(m.nx) * m.ny, 0);
  int hint = -1;
  for (int j = 0; j < m.ny; ++j)
    for (int i = 0; i < m.nx; ++i) {
      const int ball = cluster.covering_ball(m.center(i, j), hint);
      if (ball >= 0) {
        m.inside[m.idx(i, j)] = 1;
        hint = ball;
      }
    }
  return m;
}

RasterMask full_square(double L, double h) {
  if (!(L > 0) || !(h > 0)) throw SchemaError("full_square: L and h must be positive");
  RasterMask m;
  m.origin = Vec(0.0, 0.0);
  m.pitch = h;
  m.nx = m.ny = std::max(1, static_cast<int>(std::llround(L / h)));
  m.rho_prime = L;
  m.inside.assign(static_cast<std::size_t>(m.nx) * m.ny, 1);
  return m;
}

std::vector<double> grid_intrinsic_distance(const RasterMask& mask, int si, int sj) {
  if (!mask.is_inside(si, sj)) throw SourceOutside();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(mask.inside.size(), inf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[mask.idx(si, sj)] = 0;
  heap.emplace(0.0, mask.idx(si, sj));
  const double w_axis = mask.pitch, w_diag = mask.pitch * std::sqrt(2.0);
  while (!heap.empty()) {
    auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[u]) continue;
    const int ui = u % mask.nx, uj = u / mask.nx;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        const int vi = ui + di, vj = uj + dj;
        if (!mask.is_inside(vi, vj)) continue;
        const double dv = du + ((di == 0 || dj == 0) ? w_axis : w_diag);
        const int v = mask.idx(vi, vj);
        if (dv < dist[v]) {
          dist[v] = dv;
          heap.emplace(dv, v);
        }
      }
  }
  return dist;
}

VolumeEstimate bin_volume(const ClusterModel& cluster, const Window& bin, int n_samples,
                          std::uint64_t seed) {
  if (bin.degenerate()) throw SchemaError("bin_volume: degenerate bin");
  if (n_samples < 1) throw SchemaError("bin_volume: n_samples must be >= 1");
  RandomStream rs = RandomStream::derive(seed, stream_tag::kBinVolume, 0);
  const int d = bin.dim();
  std::uint64_t hits = 0;
  Vec p = Vec::zero(d);
  for (int s = 0; s < n_samples; ++s) {
    for (int a = 0; a < d; ++a) p[a] = rs.uniform(bin.lo[a], bin.hi[a]);
    if (cluster.contains(p)) ++hits;
  }
  const auto est = binomial_estimate(hits, n_samples);
  return {est.p_hat * bin.volume(), est.se * bin.volume(), hits,
          static_cast<std::uint64_t>(n_samples)};
}

}  // namespace perclab
