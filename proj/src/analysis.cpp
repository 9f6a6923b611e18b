#include "perclab/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace perclab {

namespace {

const double kPi = 3.14159265358979323846;

// Cholesky for d in {2,3}; returns false if not positive definite
bool cholesky(int d, const double* a, double* l) {
  for (int i = 0; i < d * d; ++i) l[i] = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i * d + j];
      for (int k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
      if (i == j) {
        if (!(s > 0)) return false;
        l[i * d + i] = std::sqrt(s);
      } else {
        l[i * d + j] = s / l[j * d + j];
      }
    }
  }
  return true;
}

}  // namespace

KernelParams::KernelParams(int dim, const double* s) : dim_(dim) {
  if (dim != 2 && dim != 3) throw SchemaError("KernelParams: dim must be 2 or 3");
  double scale = 0;
  for (int i = 0; i < dim * dim; ++i) scale = std::max(scale, std::abs(s[i]));
  for (int a = 0; a < dim; ++a)
    for (int b = a + 1; b < dim; ++b)
      if (std::abs(s[a * dim + b] - s[b * dim + a]) > 1e-12 * std::max(1.0, scale))
        throw NumericError("KernelParams: sigma not symmetric within 1e-12");
  // symmetrize exactly, then factor
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) sigma_[a * dim + b] = 0.5 * (s[a * dim + b] + s[b * dim + a]);
  double l[9];
  if (!cholesky(dim, sigma_, l))
    throw NumericError("KernelParams: sigma is not positive definite");
  det_ = 1;
  for (int i = 0; i < dim; ++i) det_ *= l[i * dim + i] * l[i * dim + i];
  if (dim == 2) {
    inv_[0] = sigma_[3] / det_;
    inv_[1] = -sigma_[1] / det_;
    inv_[2] = -sigma_[2] / det_;
    inv_[3] = sigma_[0] / det_;
  } else {
    const double* m = sigma_;
    inv_[0] = (m[4] * m[8] - m[5] * m[7]) / det_;
    inv_[1] = (m[2] * m[7] - m[1] * m[8]) / det_;
    inv_[2] = (m[1] * m[5] - m[2] * m[4]) / det_;
    inv_[3] = (m[5] * m[6] - m[3] * m[8]) / det_;
    inv_[4] = (m[0] * m[8] - m[2] * m[6]) / det_;
    inv_[5] = (m[2] * m[3] - m[0] * m[5]) / det_;
    inv_[6] = (m[3] * m[7] - m[4] * m[6]) / det_;
    inv_[7] = (m[1] * m[6] - m[0] * m[7]) / det_;
    inv_[8] = (m[0] * m[4] - m[1] * m[3]) / det_;
  }
}

KernelParams KernelParams::isotropic(int dim, double variance) {
  double s[9] = {};
  for (int i = 0; i < dim; ++i) s[i * dim + i] = variance;
  return KernelParams(dim, s);
}

double gaussian_kernel(const KernelParams& params, double t, const Vec& x) {
  if (!(t > 0)) throw NonPositiveTime();
  const int d = params.dim();
  double q = 0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) q += x[a] * params.inverse(a, b) * x[b];
  return std::pow(2 * kPi * t, -0.5 * d) / std::sqrt(params.det()) * std::exp(-q / (2 * t));
}

CltErrorResult clt_error(const ClusterModel& cluster,
                         const std::vector<const EmpiricalDensity*>& densities_per_t,
                         const KernelParams& params, double R, double grid_step) {
  if (densities_per_t.empty()) throw SchemaError("clt_error: no densities");
  if (!(R > 0) || !(grid_step > 0))
    throw SchemaError("clt_error: R and grid_step must be positive");
  CltErrorResult res;
  res.epsilon = densities_per_t.front()->epsilon;
  const int d = cluster.dim();

  std::vector<Vec> pts;
  const int kmax = static_cast<int>(std::ceil(R / grid_step));
  auto push = [&](const Vec& x) {
    if (x.norm() < R) pts.push_back(x);
  };
  if (d == 2) {
    for (int i = -kmax; i <= kmax; ++i)
      for (int j = -kmax; j <= kmax; ++j) push(Vec(i * grid_step, j * grid_step));
  } else {
    for (int i = -kmax; i <= kmax; ++i)
      for (int j = -kmax; j <= kmax; ++j)
        for (int k = -kmax; k <= kmax; ++k)
          push(Vec(i * grid_step, j * grid_step, k * grid_step));
  }

  for (const auto* dens : densities_per_t) {
    if (dens->epsilon != res.epsilon)
      throw SchemaError("clt_error: densities must share one epsilon");
    for (const Vec& x : pts) {
      CltCell cell;
      cell.t = dens->t_macro;
      cell.x = x;
      cell.value = dens->eval_rescaled(cluster, x, &cell.se);
      const double k = gaussian_kernel(params, cell.t, x);
      cell.error = cell.value - k;
      res.cells.push_back(cell);
      // kernel gradient magnitude |Sigma^{-1} x| k / t bounds the value change
      // across one grid cell
      Vec grad = Vec::zero(d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) grad[a] += params.inverse(a, b) * x[b];
      res.bin_modulus = std::max(res.bin_modulus, grid_step * k * grad.norm() / cell.t);
    }
  }
  for (const auto& cell : res.cells) {
    if (std::abs(cell.error) >= res.sup_error) {
      res.sup_error = std::abs(cell.error);
      res.argmax = cell;
    }
  }
  res.noise_floor = 3 * res.argmax.se;
  return res;
}

void CltSweepConfig::validate() const {
  if (epsilons.size() < 1) throw SchemaError("clt_sweep: epsilons must be nonempty");
  for (double e : epsilons)
    if (!(e > 0)) throw SchemaError("clt_sweep: epsilons must be positive");
  for (std::size_t i = 1; i < epsilons.size(); ++i)
    if (!(epsilons[i] < epsilons[i - 1]))
      throw SchemaError("clt_sweep: epsilon list must be strictly decreasing");
  if (t_values.empty()) throw SchemaError("clt_sweep: t_values must be nonempty");
  for (double t : t_values)
    if (!(t > 0)) throw SchemaError("clt_sweep: t_values must be positive");
  for (std::size_t i = 1; i < t_values.size(); ++i)
    if (!(t_values[i] > t_values[i - 1]))
      throw SchemaError("clt_sweep: t_values must be increasing");
  if (!(R > 0) || !(dx > 0)) throw SchemaError("clt_sweep: R and dx must be positive");
  if (r_grid < R + dx) throw SchemaError("clt_sweep: r_grid must be >= R + dx");
  if (!(dt > 0)) throw SchemaError("clt_sweep: dt must be positive");
}

CltSweepResult clt_sweep(const ClusterModel& cluster, const CltSweepConfig& config,
                         std::uint64_t seed) {
  config.validate();
  const int d = cluster.dim();
  const double eps_min = config.epsilons.back();
  const double T_max = config.t_values.back() / (eps_min * eps_min);

  // the window must not be felt by paths started near the origin
  const double needed = config.R / eps_min + 4 * std::sqrt(T_max) + cluster.rho_prime();
  for (int a = 0; a < d; ++a) {
    if (-cluster.window().lo[a] < needed || cluster.window().hi[a] < needed)
      throw ModelError("clt_sweep: window buffer too small for the smallest epsilon (need " +
                       std::to_string(needed) + " per axis)");
  }

  CltSweepResult res;
  res.config = config;
  res.sigma_hat = estimate_covariance(
      cluster, T_max, config.dt, config.cov_paths,
      RandomStream::derive(seed, stream_tag::kCovariance, 0).bits(), config.n_threads);

  double sig[9];
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) sig[a * d + b] = res.sigma_hat.sigma[a][b];
  const KernelParams kernel(d, sig);

  for (std::size_t i = 0; i < config.epsilons.size(); ++i) {
    const double eps = config.epsilons[i];
    std::vector<const EmpiricalDensity*> per_t;
    for (std::size_t j = 0; j < config.t_values.size(); ++j) {
      DensityParams dp;
      dp.T = config.t_values[j] / (eps * eps);
      dp.dt = config.dt;
      dp.n_paths = config.n_paths;
      dp.epsilon = eps;
      dp.dx = config.dx;
      dp.r_grid = config.r_grid;
      dp.vol_samples = config.vol_samples;
      dp.n_threads = config.n_threads;
      const std::uint64_t run_seed =
          RandomStream::derive(seed, stream_tag::kPath, i * 1000 + j).bits();
      res.densities.push_back(empirical_density(cluster, dp, run_seed));
    }
    for (std::size_t j = 0; j < config.t_values.size(); ++j)
      per_t.push_back(&res.densities[i * config.t_values.size() + j]);
    res.rows.push_back(clt_error(cluster, per_t, kernel, config.R, config.dx));

    // integrated-ball statistic at the origin
    const double q = config.dx / 4;
    const int m = static_cast<int>(std::ceil(config.j_ball_r / q));
    for (const auto* dens : per_t) {
      JEntry je;
      je.epsilon = eps;
      je.t = dens->t_macro;
      double sum = 0;
      if (d == 2) {
        for (int a = -m; a <= m; ++a)
          for (int b = -m; b <= m; ++b) {
            const Vec y(a * q, b * q);
            if (y.norm() > config.j_ball_r) continue;
            sum += (dens->eval_rescaled(cluster, y) - gaussian_kernel(kernel, je.t, y)) * q * q;
          }
      } else {
        for (int a = -m; a <= m; ++a)
          for (int b = -m; b <= m; ++b)
            for (int c = -m; c <= m; ++c) {
              const Vec y(a * q, b * q, c * q);
              if (y.norm() > config.j_ball_r) continue;
              sum += (dens->eval_rescaled(cluster, y) - gaussian_kernel(kernel, je.t, y)) * q * q *
                     q;
            }
      }
      je.value = sum;
      res.j_integrals.push_back(je);
    }
  }

  std::vector<double> sups;
  for (const auto& r : res.rows) sups.push_back(r.sup_error);
  res.trend = kendall_trend(sups);
  return res;
}

}  // namespace perclab
