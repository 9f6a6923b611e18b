#pragma once

#include <cstdint>
#include <vector>

#include "perclab/geometry.hpp"

namespace perclab {

// v - 2 <v,n> n for unit n; degenerates to the identity for tangential v
inline Vec specular(const Vec& v, const Vec& n) { return v - (2.0 * v.dot(n)) * n; }

struct ReflectResult {
  Vec point;
  int reflections = 0;
  bool capped = false;       // reflection cap hit or grazing corner; endpoint projected
  double path_length = 0;    // polyline length; equals |v| exactly unless capped
};

// Walk the segment x -> x+v through the open ball union, reflecting the
// remaining displacement specularly at the first union exit; at most 32
// reflections, then the endpoint is projected with closest_point. ball_hint
// carries the covering ball across consecutive steps of one path.
ReflectResult reflect_step(const ClusterModel& cluster, const Vec& x, const Vec& v,
                           int* ball_hint = nullptr);

// Mergeable per-run counters; merging is order-independent.
struct PathStats {
  std::uint64_t steps = 0, reflections = 0, capped_steps = 0, redraws = 0;
  double max_end_gap = 0;   // largest endpoint distance to the closure
  double max_len_dev = 0;   // largest |polyline length - |v|| over uncapped steps
  void merge(const PathStats& o) {
    steps += o.steps;
    reflections += o.reflections;
    capped_steps += o.capped_steps;
    redraws += o.redraws;
    max_end_gap = std::max(max_end_gap, o.max_end_gap);
    max_len_dev = std::max(max_len_dev, o.max_len_dev);
  }
};

// Euler scheme for reflecting Brownian motion (generator (1/2) Laplacian):
// ceil(T/dt) equal steps of dt_eff = T/ceil(T/dt) with N(0, dt_eff I)
// increments; draws with |v| >= rho' are redrawn and counted. Deterministic
// in the stream.
Vec simulate_path(const ClusterModel& cluster, const Vec& x0, double T, double dt,
                  RandomStream& rng, PathStats* stats = nullptr);

// Histogram bins in rescaled coordinates: cubes of side dx centered at
// k*dx for integer k with |k| <= k0 per axis.
struct DensityGrid {
  int dim = 2;
  double dx = 0.25;
  int k0 = 8;

  int bins_per_axis() const { return 2 * k0 + 1; }
  int n_bins() const {
    int n = 1;
    for (int a = 0; a < dim; ++a) n *= bins_per_axis();
    return n;
  }
  // linear index of the bin containing u, or -1 outside the grid
  int index_of(const Vec& u) const {
    int lin = 0;
    for (int a = 0; a < dim; ++a) {
      const int k = static_cast<int>(std::floor(u[a] / dx + 0.5));
      if (k < -k0 || k > k0) return -1;
      lin = lin * bins_per_axis() + (k + k0);
    }
    return lin;
  }
  Vec center_of(int lin) const {
    Vec c = Vec::zero(dim);
    for (int a = dim - 1; a >= 0; --a) {
      c[a] = (lin % bins_per_axis() - k0) * dx;
      lin /= bins_per_axis();
    }
    return c;
  }
};

struct DensityParams {
  double T = 1;              // simulation horizon, T = t / epsilon^2
  double dt = 1e-2;
  std::uint64_t n_paths = 10000;
  double epsilon = 1;
  double dx = 0.25;          // bin width in rescaled coordinates
  double r_grid = 2.5;       // bins cover |x_a| <= r_grid per axis
  int vol_samples = 4096;    // Monte Carlo points per bin volume
  int n_threads = 1;
};

// Volume-corrected endpoint histogram of the rescaled diffusion.
struct EmpiricalDensity {
  int dim = 2;
  double t_macro = 0;        // T * epsilon^2
  double epsilon = 1;
  double T_sim = 0;
  double dt = 0;
  DensityGrid grid;
  Vec start;
  std::uint64_t n_paths = 0;

  std::vector<std::uint64_t> counts;
  std::uint64_t overflow = 0;             // endpoints beyond the grid; mass retained
  std::vector<double> vol, vol_se;        // |bin cap W'| in unscaled coordinates
  std::vector<double> density;            // (count/N) / vol, unscaled
  std::vector<double> rescaled;           // epsilon^{-d} * density
  std::vector<double> se;                 // standard error of the rescaled value
  std::vector<std::uint8_t> flagged;      // nonzero count but volume CI touches 0
  PathStats stats;

  // density value assigned to the macroscopic point x: the bin containing
  // epsilon * g(x / epsilon)
  double eval_rescaled(const ClusterModel& cluster, const Vec& x, double* se_out = nullptr) const;
};

EmpiricalDensity empirical_density(const ClusterModel& cluster, const DensityParams& params,
                                   std::uint64_t seed);

struct CovarianceEstimate {
  int dim = 2;
  double T = 0;
  std::uint64_t n_paths = 0;
  double sigma[3][3] = {};
  double se[3][3] = {};
  PathStats stats;
};

// Sigma_hat = (1/(N T)) sum (X_T - x0)(X_T - x0)^T from x0 = g(0).
CovarianceEstimate estimate_covariance(const ClusterModel& cluster, double T, double dt,
                                       std::uint64_t n_paths, std::uint64_t seed,
                                       int n_threads = 1);

struct HolderRow {
  double r0 = 0;
  double epsilon = 0;
  double stat = 0;         // sup over t and |x-y| < r0 of |value(x) - value(y)|
  double noise_floor = 0;  // 2 * max standard error among evaluated bins
};

// Equicontinuity statistic of the rescaled density over an evaluation
// lattice of the given step covering |x| <= R_eval.
std::vector<HolderRow> holder_density_check(const ClusterModel& cluster,
                                            const std::vector<const EmpiricalDensity*>& densities,
                                            const std::vector<double>& r0_values, double R_eval,
                                            double eval_step);

}  // namespace perclab
