#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "perclab/errors.hpp"
#include "perclab/geom.hpp"
#include "perclab/rng.hpp"
#include "perclab/stats.hpp"

namespace perclab {

// Two center distances within this of each other (or of 2*rho) compare equal.
inline constexpr double kPairTol = 1e-12;
// Points within this of the closure of the ball union count as covered.
inline constexpr double kBoundaryTol = 1e-9;

struct PointConfiguration {
  int dim = 2;
  Window window;
  std::vector<Vec> points;
  std::uint64_t seed = 0;
};

// Homogeneous Poisson sample on the window. Same (intensity, window, seed)
// reproduces the same point list bit-for-bit. Points closer than kPairTol
// to an earlier point are redrawn.
PointConfiguration sample_poisson(double intensity, const Window& window, std::uint64_t seed);

// Uniform bucket grid over a point set; lookup only, indices refer to the
// owner's vector. Cell size is chosen by the owner (2*rho for overlap tests,
// 2*rho' for membership queries) so ring-1 visits cover the query radius.
class SpatialHash {
 public:
  SpatialHash() = default;
  SpatialHash(const std::vector<Vec>& pts, double cell);

  int dim() const { return dim_; }
  double cell() const { return cell_; }

  // every point index in cells with Chebyshev offset <= ring from x's cell
  template <class F>
  void visit_ring(const Vec& x, int ring, F&& f) const {
    int c[3] = {0, 0, 0};
    cell_index(x, c);
    int lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      lo[a] = std::max(0, c[a] - ring);
      hi[a] = std::min(n_[a] - 1, c[a] + ring);
      if (lo[a] > hi[a]) return;
    }
    if (dim_ == 2) {
      for (int i = lo[0]; i <= hi[0]; ++i)
        for (int j = lo[1]; j <= hi[1]; ++j) visit_cell(i, j, 0, f);
    } else {
      for (int i = lo[0]; i <= hi[0]; ++i)
        for (int j = lo[1]; j <= hi[1]; ++j)
          for (int k = lo[2]; k <= hi[2]; ++k) visit_cell(i, j, k, f);
    }
  }

  // every point index in cells at Chebyshev offset exactly k
  template <class F>
  void visit_shell(const Vec& x, int k, F&& f) const {
    int c[3] = {0, 0, 0};
    cell_index(x, c);
    if (k == 0) {
      if (in_range(c)) visit_cell(c[0], c[1], c[2], f);
      return;
    }
    if (dim_ == 2) {
      for (int i = c[0] - k; i <= c[0] + k; ++i) {
        maybe_visit(i, c[1] - k, 0, f);
        maybe_visit(i, c[1] + k, 0, f);
      }
      for (int j = c[1] - k + 1; j <= c[1] + k - 1; ++j) {
        maybe_visit(c[0] - k, j, 0, f);
        maybe_visit(c[0] + k, j, 0, f);
      }
    } else {
      for (int i = c[0] - k; i <= c[0] + k; ++i)
        for (int j = c[1] - k; j <= c[1] + k; ++j) {
          maybe_visit(i, j, c[2] - k, f);
          maybe_visit(i, j, c[2] + k, f);
        }
      for (int i = c[0] - k; i <= c[0] + k; ++i)
        for (int m = c[2] - k + 1; m <= c[2] + k - 1; ++m) {
          maybe_visit(i, c[1] - k, m, f);
          maybe_visit(i, c[1] + k, m, f);
        }
      for (int j = c[1] - k + 1; j <= c[1] + k - 1; ++j)
        for (int m = c[2] - k + 1; m <= c[2] + k - 1; ++m) {
          maybe_visit(c[0] - k, j, m, f);
          maybe_visit(c[0] + k, j, m, f);
        }
    }
  }

  // shells beyond this cannot contain any cell
  int max_shell(const Vec& x) const {
    int c[3] = {0, 0, 0};
    cell_index(x, c);
    int k = 0;
    for (int a = 0; a < dim_; ++a) k = std::max(k, std::max(c[a], n_[a] - 1 - c[a]));
    return k;
  }

 private:
  void cell_index(const Vec& x, int* c) const {
    for (int a = 0; a < dim_; ++a)
      c[a] = static_cast<int>(std::floor((x[a] - lo_[a]) / cell_));
  }
  bool in_range(const int* c) const {
    for (int a = 0; a < dim_; ++a)
      if (c[a] < 0 || c[a] >= n_[a]) return false;
    return true;
  }
  template <class F>
  void maybe_visit(int i, int j, int k, F&& f) const {
    const int c[3] = {i, j, k};
    if (in_range(c)) visit_cell(i, j, k, f);
  }
  template <class F>
  void visit_cell(int i, int j, int k, F&& f) const {
    const int id = (dim_ == 2) ? i * n_[1] + j : (i * n_[1] + j) * n_[2] + k;
    for (int s = start_[id]; s < start_[id + 1]; ++s) f(item_[s]);
  }

  int dim_ = 2;
  double cell_ = 1;
  Vec lo_;
  int n_[3] = {1, 1, 1};
  std::vector<int> start_;
  std::vector<int> item_;
};

struct ClusterDecomposition {
  PointConfiguration config;
  double rho = 0;
  std::vector<int> label;           // canonical component id per point (order of first occurrence)
  std::vector<int> component_size;  // indexed by component id
  int n_components = 0;
};

// Connected components of the overlap graph: points i,j linked when
// |x_i - x_j| < 2 rho, with |dist - 2 rho| < kPairTol counting as overlap.
ClusterDecomposition build_clusters(PointConfiguration config, double rho);

enum class SelectionPolicy { kLargest, kSpanning };

std::string to_string(SelectionPolicy p);
SelectionPolicy selection_policy_from_string(const std::string& s);

// Center overlap graph of one cluster (edges between balls with
// |c_i - c_j| < 2 rho'), CSR layout. Built lazily, shared read-only.
struct OverlapGraph {
  std::vector<int> start;
  std::vector<int> neighbor;
  std::vector<double> weight;  // Euclidean center distance
};

// Selected component of the ball union: centers I, radius rho' >= rho.
// Immutable after construction; safe to share across threads.
class ClusterModel {
 public:
  ClusterModel(std::vector<Vec> centers, double rho, double rho_prime, Window window,
               SelectionPolicy policy, std::uint64_t seed);

  int dim() const { return dim_; }
  double rho() const { return rho_; }
  double rho_prime() const { return rho_prime_; }
  const Window& window() const { return window_; }
  SelectionPolicy policy() const { return policy_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Vec>& centers() const { return centers_; }
  const SpatialHash& grid() const { return grid_; }

  // strict open-ball membership: exists center with |x - c| < rho'
  bool contains(const Vec& x) const;

  // index of a ball whose open interior contains x, or -1; `hint` tried first
  int covering_ball(const Vec& x, int hint = -1) const;

  // nearest center over all of I (expanding shell search)
  std::pair<int, double> nearest_center(const Vec& x) const;

  // all centers within dmin + tol of x, nearest first discovery order
  void nearest_centers_tied(const Vec& x, double tol, double* dmin, std::vector<int>* out) const;

  // indices of centers with |x - c| <= radius
  void centers_within(const Vec& x, double radius, std::vector<int>* out) const;

  const OverlapGraph& overlap_graph() const { return graph_; }

 private:
  void build_overlap_graph();

  int dim_;
  double rho_, rho_prime_;
  Window window_;
  SelectionPolicy policy_;
  std::uint64_t seed_;
  std::vector<Vec> centers_;
  SpatialHash grid_;
  OverlapGraph graph_;
};

// Component chosen by policy (largest point count, or spanning: holds a
// center within rho of two opposite window faces). With require_origin the
// origin must lie in the selected ball union.
ClusterModel select_cluster(const ClusterDecomposition& decomp, double rho_prime,
                            SelectionPolicy policy, bool require_origin);

// Poisson medium conditioned on origin coverage: resamples with derived seeds
// until select_cluster succeeds, up to max_attempts, then throws.
ClusterModel sample_conditioned_cluster(double intensity, double rho, double rho_prime,
                                        const Window& window, SelectionPolicy policy,
                                        std::uint64_t master_seed, int max_attempts = 1000);

// Fraction of independent samples whose decomposition has a spanning component.
BinomialEstimate spanning_probability(double intensity, double rho, const Window& window,
                                      int trials, std::uint64_t seed);

}  // namespace perclab
