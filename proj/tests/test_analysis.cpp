#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "perclab/analysis.hpp"

using namespace perclab;

namespace {

constexpr double kPi = 3.14159265358979323846;

ClusterModel free_space(double radius = 12.0, double window_half = 21.0) {
  return ClusterModel({Vec(0.0, 0.0)}, radius, radius, Window::centered(2, window_half),
                      SelectionPolicy::kLargest, 0);
}

// midpoint quadrature of the kernel over [-8 sqrt(t), 8 sqrt(t)]^2
double kernel_mass(const KernelParams& params, double t) {
  const double L = 8 * std::sqrt(t), h = 0.05 * std::sqrt(t);
  const int n = static_cast<int>(std::llround(2 * L / h));
  double sum = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      sum += gaussian_kernel(params, t, Vec(-L + (i + 0.5) * h, -L + (j + 0.5) * h)) * h * h;
  return sum;
}

KernelParams rotated_spd(double l1, double l2, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double m[4] = {c * c * l1 + s * s * l2, c * s * (l1 - l2),
                       c * s * (l1 - l2), s * s * l1 + c * c * l2};
  return KernelParams(2, m);
}

}  // namespace

TEST_CASE("gaussian kernel closed-form values") {
  const auto id = KernelParams::isotropic(2, 1.0);
  CHECK(gaussian_kernel(id, 1.0, Vec(0.0, 0.0)) == doctest::Approx(1.0 / (2 * kPi)).epsilon(1e-12));
  const auto wide = KernelParams::isotropic(2, 4.0);
  CHECK(gaussian_kernel(wide, 1.0, Vec(0.0, 0.0)) ==
        doctest::Approx(1.0 / (8 * kPi)).epsilon(1e-12));
  CHECK_THROWS_AS(gaussian_kernel(id, 0.0, Vec(0.0, 0.0)), NonPositiveTime);

  // scaling identity k_t(x) = t^{-d/2} k_1(x / sqrt t)
  const auto spd = rotated_spd(0.7, 2.1, 0.6);
  RandomStream rs(4);
  for (int i = 0; i < 50; ++i) {
    const double t = rs.uniform(0.2, 4.0);
    const Vec x(rs.uniform(-2, 2), rs.uniform(-2, 2));
    const double lhs = gaussian_kernel(spd, t, x);
    const double rhs = gaussian_kernel(spd, 1.0, (1.0 / std::sqrt(t)) * x) / t;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("kernel parameter validation") {
  const double asym[4] = {1.0, 0.5, 0.2, 1.0};
  CHECK_THROWS_AS(KernelParams(2, asym), NumericError);
  const double indef[4] = {1.0, 2.0, 2.0, 1.0};
  CHECK_THROWS_AS(KernelParams(2, indef), NumericError);
  const double spd3[9] = {2.0, 0.1, 0.0, 0.1, 1.5, -0.2, 0.0, -0.2, 1.0};
  const KernelParams k3(3, spd3);
  CHECK(k3.det() > 0);
}

TEST_CASE("three dimensional kernel value at the origin") {
  const auto id3 = KernelParams::isotropic(3, 1.0);
  CHECK(gaussian_kernel(id3, 1.0, Vec(0.0, 0.0, 0.0)) ==
        doctest::Approx(std::pow(2 * kPi, -1.5)).epsilon(1e-12));
  // determinant scaling: Sigma = 4I divides by 8
  const auto wide3 = KernelParams::isotropic(3, 4.0);
  CHECK(gaussian_kernel(wide3, 1.0, Vec(0.0, 0.0, 0.0)) ==
        doctest::Approx(std::pow(2 * kPi, -1.5) / 8).epsilon(1e-12));
}

TEST_CASE("kernel quadrature mass is 1 within 1e-3") {
  CHECK(std::abs(kernel_mass(KernelParams::isotropic(2, 1.0), 1.0) - 1.0) <= 1e-3);
  CHECK(std::abs(kernel_mass(rotated_spd(0.6, 2.2, 0.8), 1.0) - 1.0) <= 1e-3);
  CHECK(std::abs(kernel_mass(rotated_spd(0.6, 2.2, 0.8), 0.37) - 1.0) <= 1e-3);
}

TEST_CASE("clt_error vanishes when the density equals the kernel") {
  const auto cluster = free_space();
  const auto kernel = KernelParams::isotropic(2, 1.0);
  EmpiricalDensity dens;
  dens.dim = 2;
  dens.epsilon = 1.0;
  dens.t_macro = 1.0;
  dens.T_sim = 1.0;
  dens.grid = DensityGrid{2, 0.25, 8};
  dens.n_paths = 1;
  const int nb = dens.grid.n_bins();
  dens.counts.assign(nb, 0);
  dens.vol.assign(nb, 1.0);
  dens.vol_se.assign(nb, 0.0);
  dens.density.assign(nb, 0.0);
  dens.rescaled.assign(nb, 0.0);
  dens.se.assign(nb, 0.0);
  dens.flagged.assign(nb, 0);
  for (int k = 0; k < nb; ++k)
    dens.rescaled[k] = gaussian_kernel(kernel, 1.0, dens.grid.center_of(k));

  const auto res = clt_error(cluster, {&dens}, kernel, 1.5, 0.25);
  CHECK(res.sup_error == 0.0);
  CHECK(res.noise_floor == 0.0);
  // sup dominates every stored cell by construction
  for (const auto& cell : res.cells) CHECK(std::abs(cell.error) <= res.sup_error);

  // perturb one bin: sup picks it up
  dens.rescaled[dens.grid.index_of(Vec(0.25, 0.0))] += 0.01;
  const auto res2 = clt_error(cluster, {&dens}, kernel, 1.5, 0.25);
  CHECK(res2.sup_error == doctest::Approx(0.01).epsilon(1e-9));
  for (const auto& cell : res2.cells) CHECK(std::abs(cell.error) <= res2.sup_error + 1e-15);
}

TEST_CASE("clt sweep config validation") {
  const auto cluster = free_space();
  CltSweepConfig bad;
  bad.epsilons = {0.7, 1.0};  // not decreasing
  bad.t_values = {1.0};
  bad.n_paths = 100;
  CHECK_THROWS_AS(clt_sweep(cluster, bad, 1), SchemaError);

  CltSweepConfig grid;
  grid.epsilons = {1.0};
  grid.t_values = {1.0};
  grid.R = 2.0;
  grid.r_grid = 2.0;  // needs R + dx
  grid.n_paths = 100;
  CHECK_THROWS_AS(clt_sweep(cluster, grid, 1), SchemaError);

  // window buffer too small for the smallest epsilon
  const auto tight = ClusterModel({Vec(0.0, 0.0)}, 12.0, 12.0, Window::centered(2, 13),
                                  SelectionPolicy::kLargest, 0);
  CltSweepConfig conf;
  conf.epsilons = {1.0, 0.7};
  conf.t_values = {0.5, 1.0};
  conf.R = 1.5;
  conf.r_grid = 2.0;
  conf.n_paths = 1000;
  conf.cov_paths = 1000;
  conf.dt = 0.02;
  CHECK_THROWS_AS(clt_sweep(tight, conf, 1), ModelError);
}

TEST_CASE("free-space clt sweep stays at the noise floor") {
  const auto cluster = free_space();
  CltSweepConfig conf;
  conf.epsilons = {1.0, 0.7};
  conf.t_values = {0.5, 1.0};
  conf.R = 1.5;
  conf.dx = 0.25;
  conf.r_grid = 2.0;
  conf.j_ball_r = 0.5;
  conf.n_paths = 20000;
  conf.cov_paths = 20000;
  conf.dt = 0.02;
  conf.vol_samples = 1500;
  conf.n_threads = 3;
  const auto res = clt_sweep(cluster, conf, 2024);

  REQUIRE(res.rows.size() == 2);
  // free space: sigma ~ I
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double want = a == b ? 1.0 : 0.0;
      CHECK(std::abs(res.sigma_hat.sigma[a][b] - want) <= 3.5 * res.sigma_hat.se[a][b]);
    }
  // sup error bounded by noise floor + binning modulus of the kernel
  const double t_min = conf.t_values.front();
  const double modulus = conf.dx * 0.0965 / std::pow(t_min, 1.5);
  for (const auto& row : res.rows) {
    CHECK(row.sup_error <= row.noise_floor + modulus + 0.01);
    CHECK(row.noise_floor > 0);
  }
  // integrated statistic is small
  for (const auto& je : res.j_integrals) CHECK(std::abs(je.value) <= 0.03);

  // epsilon-major densities, one per (eps, t)
  CHECK(res.densities.size() == 4);
  CHECK(res.trend.p_decreasing >= 0.0);
  CHECK(res.trend.p_decreasing <= 1.0);
}

TEST_CASE("joint rescaling of epsilon and t keeps the free-space error at the floor") {
  // same simulation horizon T = t / eps^2, measured at two unit systems
  const auto cluster = free_space();
  for (const auto& [eps, t] : {std::pair{1.0, 1.0}, {0.5, 0.25}}) {
    DensityParams dp;
    dp.T = t / (eps * eps);
    dp.dt = 0.02;
    dp.n_paths = 20000;
    dp.epsilon = eps;
    dp.dx = 0.25;
    dp.r_grid = 2.0;
    dp.vol_samples = 1500;
    dp.n_threads = 3;
    const auto dens = empirical_density(cluster, dp, 31);
    const auto row = clt_error(cluster, {&dens}, KernelParams::isotropic(2, 1.0), 1.0, 0.25);
    const double modulus = 0.25 * 0.0965 / std::pow(t, 1.5);
    CHECK(row.sup_error <= row.noise_floor + modulus + 0.02);
  }
}
