#pragma once

#include <cstdint>
#include <vector>

#include "perclab/diffusion.hpp"
#include "perclab/stats.hpp"

namespace perclab {

// Positive definite symmetric covariance with cached inverse and determinant.
class KernelParams {
 public:
  KernelParams(int dim, const double* sigma_row_major);
  static KernelParams isotropic(int dim, double variance);

  int dim() const { return dim_; }
  double det() const { return det_; }
  double sigma(int a, int b) const { return sigma_[a * dim_ + b]; }
  double inverse(int a, int b) const { return inv_[a * dim_ + b]; }

 private:
  int dim_;
  double sigma_[9] = {};
  double inv_[9] = {};
  double det_ = 0;
};

// k_t(x) = (2 pi t)^{-d/2} (det Sigma)^{-1/2} exp(-<x, Sigma^{-1} x>/(2t))
double gaussian_kernel(const KernelParams& params, double t, const Vec& x);

struct CltCell {
  double t = 0;
  Vec x;
  double value = 0;   // rescaled empirical density at the bin of g(x/eps)
  double se = 0;
  double error = 0;   // value - k_t(x)
};

struct CltErrorResult {
  double epsilon = 0;
  std::vector<CltCell> cells;
  double sup_error = 0;
  CltCell argmax;
  double noise_floor = 0;   // 3 * SE at the argmax
  double bin_modulus = 0;   // grid_step * max |grad k_t| over the grid: the
                            // resolution error bound of the sup statistic
};

// Sup over the lattice {k * grid_step : |x| < R} x {t of each density} of the
// local CLT error, for one epsilon.
CltErrorResult clt_error(const ClusterModel& cluster,
                         const std::vector<const EmpiricalDensity*>& densities_per_t,
                         const KernelParams& params, double R, double grid_step);

struct JEntry {
  double epsilon = 0, t = 0;
  double value = 0;  // integral of (rescaled density - kernel) over B(0, r)
};

struct CltSweepConfig {
  std::vector<double> epsilons;  // strictly decreasing
  std::vector<double> t_values;  // compact interval grid, increasing
  double R = 2.0;
  double dx = 0.25;
  double r_grid = 2.5;           // must cover R with margin
  double j_ball_r = 0.5;
  std::uint64_t n_paths = 200000;
  std::uint64_t cov_paths = 200000;
  double dt = 1.0 / 36.0;
  int vol_samples = 4096;
  int n_threads = 1;

  void validate() const;
};

struct CltSweepResult {
  CovarianceEstimate sigma_hat;
  std::vector<CltErrorResult> rows;       // per epsilon, in config order
  std::vector<JEntry> j_integrals;
  KendallTrend trend;                     // sup_error sequence vs epsilon order
  std::vector<EmpiricalDensity> densities;  // every (epsilon, t) run, epsilon-major
  CltSweepConfig config;
};

// Quenched protocol: the one cluster passed in is reused for every (eps, t).
// Sigma for the kernel is estimated on the same medium at the largest horizon.
CltSweepResult clt_sweep(const ClusterModel& cluster, const CltSweepConfig& config,
                         std::uint64_t seed);

}  // namespace perclab
