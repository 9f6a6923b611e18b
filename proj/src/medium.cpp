#include "perclab/medium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace perclab {

PointConfiguration sample_poisson(double intensity, const Window& window, std::uint64_t seed) {
  if (!std::isfinite(intensity) || intensity <= 0)
    throw SchemaError("sample_poisson: intensity must be finite and positive");
  if (window.degenerate()) throw SchemaError("sample_poisson: degenerate window");
  const int d = window.dim();

  PointConfiguration cfg;
  cfg.dim = d;
  cfg.window = window;
  cfg.seed = seed;

  RandomStream count_stream = RandomStream::derive(seed, stream_tag::kPoissonCount, 0);
  const std::uint64_t n = count_stream.poisson(intensity * window.volume());
  cfg.points.reserve(n);

  RandomStream pt_stream = RandomStream::derive(seed, stream_tag::kPoissonPoints, 0);
  // sorted-by-x mirror of accepted points for the distinctness sweep
  std::vector<int> by_x;
  auto too_close = [&](const Vec& p) {
    auto it = std::lower_bound(by_x.begin(), by_x.end(), p[0] - kPairTol,
                               [&](int i, double v) { return cfg.points[i][0] < v; });
    for (; it != by_x.end() && cfg.points[*it][0] <= p[0] + kPairTol; ++it)
      if (dist(cfg.points[*it], p) <= kPairTol) return true;
    return false;
  };
  for (std::uint64_t i = 0; i < n; ++i) {
    Vec p = Vec::zero(d);
    do {
      for (int a = 0; a < d; ++a) p[a] = pt_stream.uniform(window.lo[a], window.hi[a]);
    } while (too_close(p));
    cfg.points.push_back(p);
    auto it = std::lower_bound(by_x.begin(), by_x.end(), p[0],
                               [&](int i2, double v) { return cfg.points[i2][0] < v; });
    by_x.insert(it, static_cast<int>(cfg.points.size()) - 1);
  }
  return cfg;
}

SpatialHash::SpatialHash(const std::vector<Vec>& pts, double cell) {
  if (cell <= 0) throw SchemaError("SpatialHash: cell size must be positive");
  cell_ = cell;
  dim_ = pts.empty() ? 2 : pts.front().dim();
  lo_ = Vec::zero(dim_);
  if (pts.empty()) {
    start_.assign(2, 0);
    return;
  }
  Vec hi = pts.front();
  lo_ = pts.front();
  for (const Vec& p : pts)
    for (int a = 0; a < dim_; ++a) {
      lo_[a] = std::min(lo_[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  int ncells = 1;
  for (int a = 0; a < dim_; ++a) {
    n_[a] = std::max(1, static_cast<int>(std::floor((hi[a] - lo_[a]) / cell_)) + 1);
    ncells *= n_[a];
  }
  start_.assign(ncells + 1, 0);
  auto id_of = [&](const Vec& p) {
    int c[3] = {0, 0, 0};
    cell_index(p, c);
    for (int a = 0; a < dim_; ++a) c[a] = std::clamp(c[a], 0, n_[a] - 1);
    return dim_ == 2 ? c[0] * n_[1] + c[1] : (c[0] * n_[1] + c[1]) * n_[2] + c[2];
  };
  for (const Vec& p : pts) ++start_[id_of(p) + 1];
  std::partial_sum(start_.begin(), start_.end(), start_.begin());
  item_.resize(pts.size());
  std::vector<int> cursor(start_.begin(), start_.end() - 1);
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) item_[cursor[id_of(pts[i])]++] = i;
}

namespace {

struct UnionFind {
  std::vector<int> parent, size;
  explicit UnionFind(int n) : parent(n), size(n, 1) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }
};

}  // namespace

ClusterDecomposition build_clusters(PointConfiguration config, double rho) {
  if (!(rho > 0)) throw SchemaError("build_clusters: rho must be positive");
  ClusterDecomposition dec;
  dec.rho = rho;
  dec.config = std::move(config);
  const auto& pts = dec.config.points;
  const int n = static_cast<int>(pts.size());
  dec.label.assign(n, -1);
  if (n == 0) return dec;

  SpatialHash hash(pts, 2 * rho);
  UnionFind uf(n);
  const double link2 = (2 * rho + kPairTol) * (2 * rho + kPairTol);
  for (int i = 0; i < n; ++i) {
    hash.visit_ring(pts[i], 1, [&](int j) {
      if (j > i && dist2(pts[i], pts[j]) < link2) uf.unite(i, j);
    });
  }
  // canonical labels in order of first occurrence
  std::vector<int> remap(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = uf.find(i);
    if (remap[r] < 0) {
      remap[r] = dec.n_components++;
      dec.component_size.push_back(0);
    }
    dec.label[i] = remap[r];
    ++dec.component_size[dec.label[i]];
  }
  return dec;
}

std::string to_string(SelectionPolicy p) {
  return p == SelectionPolicy::kLargest ? "largest" : "spanning";
}

SelectionPolicy selection_policy_from_string(const std::string& s) {
  if (s == "largest") return SelectionPolicy::kLargest;
  if (s == "spanning") return SelectionPolicy::kSpanning;
  throw SchemaError("unknown selection policy: " + s);
}

ClusterModel::ClusterModel(std::vector<Vec> centers, double rho, double rho_prime, Window window,
                           SelectionPolicy policy, std::uint64_t seed)
    : dim_(window.dim()),
      rho_(rho),
      rho_prime_(rho_prime),
      window_(window),
      policy_(policy),
      seed_(seed),
      centers_(std::move(centers)),
      grid_(centers_, 2 * rho_prime) {
  if (!(rho > 0) || rho_prime < rho) throw SchemaError("ClusterModel: need 0 < rho <= rho_prime");
  if (centers_.empty()) throw ModelError("ClusterModel: empty center set");
  build_overlap_graph();
}

bool ClusterModel::contains(const Vec& x) const { return covering_ball(x) >= 0; }

int ClusterModel::covering_ball(const Vec& x, int hint) const {
  const double r2 = rho_prime_ * rho_prime_;
  if (hint >= 0 && hint < static_cast<int>(centers_.size()) && dist2(centers_[hint], x) < r2)
    return hint;
  int found = -1;
  double best = r2;
  grid_.visit_ring(x, 1, [&](int i) {
    const double d2 = dist2(centers_[i], x);
    if (d2 < best) {
      best = d2;
      found = i;
    }
  });
  return found;
}

std::pair<int, double> ClusterModel::nearest_center(const Vec& x) const {
  int best = -1;
  double bd = std::numeric_limits<double>::infinity();
  const int kmax = grid_.max_shell(x);
  for (int k = 0; k <= kmax; ++k) {
    if (best >= 0 && (k - 1) * grid_.cell() > std::sqrt(bd)) break;
    grid_.visit_shell(x, k, [&](int i) {
      const double d2 = dist2(centers_[i], x);
      if (d2 < bd) {
        bd = d2;
        best = i;
      }
    });
  }
  return {best, std::sqrt(bd)};
}

void ClusterModel::nearest_centers_tied(const Vec& x, double tol, double* dmin,
                                        std::vector<int>* out) const {
  out->clear();
  double bd = std::numeric_limits<double>::infinity();
  const int kmax = grid_.max_shell(x);
  for (int k = 0; k <= kmax; ++k) {
    if (!out->empty() && (k - 1) * grid_.cell() > bd + tol) break;
    grid_.visit_shell(x, k, [&](int i) {
      const double d = dist(centers_[i], x);
      if (d < bd - tol) {
        bd = d;
        out->assign(1, i);
      } else if (d <= bd + tol) {
        bd = std::min(bd, d);
        out->push_back(i);
      }
    });
  }
  // drop entries that ceased to be ties after bd shrank
  std::vector<int> keep;
  for (int i : *out)
    if (dist(centers_[i], x) <= bd + tol) keep.push_back(i);
  *out = std::move(keep);
  *dmin = bd;
}

void ClusterModel::centers_within(const Vec& x, double radius, std::vector<int>* out) const {
  out->clear();
  const int ring = static_cast<int>(radius / grid_.cell()) + 1;
  const double r2 = radius * radius;
  grid_.visit_ring(x, ring, [&](int i) {
    if (dist2(centers_[i], x) <= r2) out->push_back(i);
  });
}

void ClusterModel::build_overlap_graph() {
  const int n = static_cast<int>(centers_.size());
  const double link2 = 4 * rho_prime_ * rho_prime_;
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  graph_.start.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    grid_.visit_ring(centers_[i], 1, [&](int j) {
      if (j == i) return;
      const double d2 = dist2(centers_[i], centers_[j]);
      if (d2 < link2) adj[i].emplace_back(j, std::sqrt(d2));
    });
    std::sort(adj[i].begin(), adj[i].end());
    graph_.start[i + 1] = graph_.start[i] + static_cast<int>(adj[i].size());
  }
  graph_.neighbor.reserve(graph_.start[n]);
  graph_.weight.reserve(graph_.start[n]);
  for (int i = 0; i < n; ++i)
    for (auto& [j, w] : adj[i]) {
      graph_.neighbor.push_back(j);
      graph_.weight.push_back(w);
    }
}

ClusterModel select_cluster(const ClusterDecomposition& decomp, double rho_prime,
                            SelectionPolicy policy, bool require_origin) {
  if (decomp.n_components < 1) throw ModelError("select_cluster: no components");
  if (rho_prime < decomp.rho) throw SchemaError("select_cluster: rho_prime must be >= rho");
  const auto& pts = decomp.config.points;
  const Window& win = decomp.config.window;
  const int d = decomp.config.dim;

  int chosen = -1;
  if (policy == SelectionPolicy::kLargest) {
    for (int c = 0; c < decomp.n_components; ++c)
      if (chosen < 0 || decomp.component_size[c] > decomp.component_size[chosen]) chosen = c;
  } else {
    // spanning: some axis has centers within rho of both opposite faces
    std::vector<Vec> cmin(decomp.n_components), cmax(decomp.n_components);
    std::vector<bool> seen(decomp.n_components, false);
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
      const int c = decomp.label[i];
      if (!seen[c]) {
        cmin[c] = cmax[c] = pts[i];
        seen[c] = true;
        continue;
      }
      for (int a = 0; a < d; ++a) {
        cmin[c][a] = std::min(cmin[c][a], pts[i][a]);
        cmax[c][a] = std::max(cmax[c][a], pts[i][a]);
      }
    }
    for (int c = 0; c < decomp.n_components; ++c) {
      bool spans = false;
      for (int a = 0; a < d && !spans; ++a)
        spans = (cmin[c][a] - win.lo[a] < decomp.rho) && (win.hi[a] - cmax[c][a] < decomp.rho);
      if (spans && (chosen < 0 || decomp.component_size[c] > decomp.component_size[chosen]))
        chosen = c;
    }
    if (chosen < 0) throw NoSpanningCluster();
  }

  std::vector<Vec> centers;
  centers.reserve(decomp.component_size[chosen]);
  for (int i = 0; i < static_cast<int>(pts.size()); ++i)
    if (decomp.label[i] == chosen) centers.push_back(pts[i]);

  ClusterModel model(std::move(centers), decomp.rho, rho_prime, win, policy,
                     decomp.config.seed);
  if (require_origin && !model.contains(Vec::zero(d))) throw OriginNotCovered();
  return model;
}

ClusterModel sample_conditioned_cluster(double intensity, double rho, double rho_prime,
                                        const Window& window, SelectionPolicy policy,
                                        std::uint64_t master_seed, int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const std::uint64_t trial_seed =
        attempt == 0 ? master_seed
                     : RandomStream::derive(master_seed, stream_tag::kResample, attempt).bits();
    try {
      auto dec = build_clusters(sample_poisson(intensity, window, trial_seed), rho);
      return select_cluster(dec, rho_prime, policy, /*require_origin=*/true);
    } catch (const OriginNotCovered&) {
    } catch (const NoSpanningCluster&) {
    }
  }
  throw OriginNotCovered("origin not covered after " + std::to_string(max_attempts) +
                         " resampling attempts");
}

BinomialEstimate spanning_probability(double intensity, double rho, const Window& window,
                                      int trials, std::uint64_t seed) {
  if (trials < 1) throw SchemaError("spanning_probability: trials must be >= 1");
  std::uint64_t hits = 0;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t s = RandomStream::derive(seed, stream_tag::kSpanningTrial, t).bits();
    auto dec = build_clusters(sample_poisson(intensity, window, s), rho);
    try {
      select_cluster(dec, rho, SelectionPolicy::kSpanning, false);
      ++hits;
    } catch (const ModelError&) {
    }
  }
  return binomial_estimate(hits, trials);
}

}  // namespace perclab
