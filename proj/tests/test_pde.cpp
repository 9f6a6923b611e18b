#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "perclab/pde.hpp"

using namespace perclab;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> grid_function(const RasterMask& mask,
                                  const std::function<double(const Vec&)>& f) {
  std::vector<double> u(mask.inside.size(), 0.0);
  for (int j = 0; j < mask.ny; ++j)
    for (int i = 0; i < mask.nx; ++i)
      if (mask.is_inside(i, j)) u[mask.idx(i, j)] = f(mask.center(i, j));
  return u;
}

// 1-D Neumann heat kernel on [0, L] by the method of images (a = I so the
// generator is the full Laplacian and the kernel variance is 2t)
double images_1d(double x, double x0, double t, double L) {
  double sum = 0;
  for (int k = -4; k <= 4; ++k) {
    const double g1 = x - x0 + 2 * L * k, g2 = x + x0 + 2 * L * k;
    sum += std::exp(-g1 * g1 / (4 * t)) + std::exp(-g2 * g2 / (4 * t));
  }
  return sum / std::sqrt(4 * kPi * t);
}

ClusterModel supercritical(std::uint64_t seed, double half = 10) {
  return sample_conditioned_cluster(1.5, 1.0, 1.0, Window::centered(2, half),
                                    SelectionPolicy::kLargest, seed);
}

std::vector<int> chamfer_ball(const RasterMask& mask, const Vec& x0, double r) {
  const auto [ci, cj] = mask.cell_of(x0);
  const auto dist = grid_intrinsic_distance(mask, ci, cj);
  std::vector<int> cells;
  for (std::size_t k = 0; k < dist.size(); ++k)
    if (dist[k] < r) cells.push_back(static_cast<int>(k));
  return cells;
}

}  // namespace

TEST_CASE("coefficient field validation") {
  const auto mask = full_square(1.0, 0.25);
  auto f = CoefficientField::isotropic(mask, 1.0);
  f.validate();
  f.lambda = 0.5;
  f.Lambda = 2.0;
  f.a11[3] = 1.8;
  f.a22[3] = 0.6;
  f.validate();
  f.a11[3] = 2.5;  // above Lambda
  CHECK_THROWS_AS(f.validate(), NumericError);
}

TEST_CASE("constants stay constant, mass and bounds hold") {
  const auto mask = full_square(1.0, 1.0 / 64);
  const auto field = CoefficientField::isotropic(mask, 1.0);
  const std::vector<double> u0(mask.inside.size(), 0.7);
  const double dt = 0.9 * explicit_cfl_dt(mask, field);
  const auto sol = heat_solve(mask, field, u0, dt, 400);
  for (const auto& snap : sol.snaps)
    for (std::size_t i = 0; i < snap.size(); ++i) CHECK(snap[i] == 0.7);
  CHECK(sol.mass_drift_rel == 0.0);
}

TEST_CASE("heterogeneous diagonal field: positivity and maximum principle") {
  const auto mask = full_square(1.0, 1.0 / 48);
  auto field = CoefficientField::isotropic(mask, 1.0);
  field.lambda = 0.5;
  field.Lambda = 2.0;
  for (int j = 0; j < mask.ny; ++j)
    for (int i = 0; i < mask.nx; ++i) {
      field.a11[mask.idx(i, j)] = (i + j) % 2 ? 0.5 : 2.0;
      field.a22[mask.idx(i, j)] = (i * 7 + j) % 3 ? 0.6 : 1.7;
    }
  field.validate();
  const auto u0 = grid_function(mask, [](const Vec& p) {
    return std::max(0.0, std::sin(7 * p[0]) * std::cos(5 * p[1]));
  });
  const double umax = *std::max_element(u0.begin(), u0.end());
  const double dt = 0.95 * explicit_cfl_dt(mask, field);
  const auto sol = heat_solve(mask, field, u0, dt, 600);
  CHECK(sol.mass_drift_rel <= 1e-10);
  for (const auto& snap : sol.snaps)
    for (std::size_t i = 0; i < snap.size(); ++i) {
      CHECK(snap[i] >= 0.0);
      CHECK(snap[i] <= umax + 1e-12);
    }
  // the coefficient normalization divides by Lambda
  CHECK(sol.scale == doctest::Approx(0.5));
}

TEST_CASE("point source matches the method-of-images series") {
  const double L = 1.0, h = 1.0 / 128;
  const auto mask = full_square(L, h);
  const auto field = CoefficientField::isotropic(mask, 1.0);
  const int ci = 64, cj = 64;
  std::vector<double> u0(mask.inside.size(), 0.0);
  u0[mask.idx(ci, cj)] = 1.0 / (h * h);
  const Vec x0 = mask.center(ci, cj);

  const double t_end = 0.01;
  const double dt_max = 0.9 * explicit_cfl_dt(mask, field);
  const int n_steps = static_cast<int>(std::ceil(t_end / dt_max));
  const auto sol = heat_solve(mask, field, u0, t_end / n_steps, n_steps);
  CHECK(sol.mass_drift_rel <= 1e-10);

  const auto& u = sol.snaps.back();
  for (int j = 0; j < mask.ny; ++j)
    for (int i = 0; i < mask.nx; ++i) {
      const Vec p = mask.center(i, j);
      if (dist(p, x0) > 0.25) continue;
      const double want = images_1d(p[0], x0[0], t_end, L) * images_1d(p[1], x0[1], t_end, L);
      CHECK(u[mask.idx(i, j)] == doctest::Approx(want).epsilon(0.02));
    }
}

TEST_CASE("variance decays towards the uniform state") {
  const auto mask = full_square(1.0, 1.0 / 64);
  const auto field = CoefficientField::isotropic(mask, 1.0);
  // Neumann eigenmode cos(pi x): decays at exactly pi^2
  const auto u0 = grid_function(mask, [](const Vec& p) { return 1.0 + std::cos(kPi * p[0]); });
  const double dt = 0.9 * explicit_cfl_dt(mask, field);
  const auto sol = heat_solve(mask, field, u0, dt, 10000);
  const int n = mask.count_inside();
  double initial = -1, prev = 1e300;
  for (const auto& snap : sol.snaps) {
    double mean = 0;
    for (double v : snap) mean += v;
    mean /= n;
    double var = 0;
    for (std::size_t i = 0; i < snap.size(); ++i)
      if (mask.inside[i]) var += (snap[i] - mean) * (snap[i] - mean);
    CHECK(var <= prev + 1e-12);
    prev = var;
    if (initial < 0) initial = var;
  }
  CHECK(prev < 1e-3 * initial);  // close to uniform at the end
  // and at the expected rate exp(-2 pi^2 t)
  const double t_end = sol.end_time();
  CHECK(prev / initial == doctest::Approx(std::exp(-2 * kPi * kPi * t_end)).epsilon(0.05));
}

TEST_CASE("implicit stepping matches the explicit solution and conserves mass") {
  const auto mask = full_square(1.0, 1.0 / 48);
  const auto field = CoefficientField::isotropic(mask, 1.0);
  const auto u0 = grid_function(mask, [](const Vec& p) {
    return 1.0 + std::exp(-10 * dist2(p, Vec(0.4, 0.6)));
  });
  const double dt_cfl = explicit_cfl_dt(mask, field);

  HeatSolveOptions no_implicit;
  no_implicit.allow_implicit = false;
  CHECK_THROWS_AS(heat_solve(mask, field, u0, 8 * dt_cfl, 10, no_implicit), UnstableStep);

  const double t_end = 0.004;
  const int n_exp = static_cast<int>(std::ceil(t_end / (0.9 * dt_cfl)));
  const auto exp_sol = heat_solve(mask, field, u0, t_end / n_exp, n_exp);
  const auto imp_sol = heat_solve(mask, field, u0, t_end / 10, 10);  // ~4x the CFL bound
  CHECK(imp_sol.implicit_used);
  CHECK(imp_sol.mass_drift_rel <= 1e-10);
  const auto &a = exp_sol.snaps.back(), &b = imp_sol.snaps.back();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (mask.inside[i]) CHECK(a[i] == doctest::Approx(b[i]).epsilon(0.02));
}

TEST_CASE("mirror symmetric data stays mirror symmetric") {
  const auto mask = full_square(1.0, 1.0 / 64);
  const auto field = CoefficientField::isotropic(mask, 1.0);
  const auto u0 = grid_function(mask, [](const Vec& p) {
    return 0.2 + std::exp(-8 * ((p[0] - 0.5) * (p[0] - 0.5) + (p[1] - 0.3) * (p[1] - 0.3)));
  });
  const double dt = 0.9 * explicit_cfl_dt(mask, field);
  const auto sol = heat_solve(mask, field, u0, dt, 500);
  const auto& u = sol.snaps.back();
  for (int j = 0; j < mask.ny; ++j)
    for (int i = 0; i < mask.nx / 2; ++i)
      CHECK(std::abs(u[mask.idx(i, j)] - u[mask.idx(mask.nx - 1 - i, j)]) <= 1e-12);
}

TEST_CASE("parabolic cylinders: window algebra and ball nesting") {
  const auto mask = full_square(1.0, 1.0 / 64);
  const auto cyl = make_cylinders(mask, 32, 32, 0.3, 0.1, 1.0, 0.5);
  CHECK(cyl.q_lo() == doctest::Approx(0.1 - 0.09));
  CHECK(cyl.qminus_lo() >= cyl.q_lo() - 1e-15);
  CHECK(cyl.qminus_hi() <= cyl.s);
  CHECK(cyl.qplus_lo() >= cyl.q_lo() - 1e-15);
  CHECK(cyl.qminus_prime_lo() == cyl.q_lo());
  CHECK(cyl.ball_delta.size() < cyl.ball.size());
  for (int cell : cyl.ball_delta)
    CHECK(std::find(cyl.ball.begin(), cyl.ball.end(), cell) != cyl.ball.end());
}

TEST_CASE("harnack ratio: constants give exactly 1, positive data stays finite") {
  const auto mask = full_square(1.0, 1.0 / 64);
  const auto field = CoefficientField::isotropic(mask, 1.0);
  const double r = 0.3, tau = 1.0, delta = 0.5;
  const double horizon = 1.05 * tau * r * r;
  const double dt_max = 0.9 * explicit_cfl_dt(mask, field);
  const int n = static_cast<int>(std::ceil(horizon / dt_max));

  const std::vector<double> ones(mask.inside.size(), 3.14);
  const auto flat = heat_solve(mask, field, ones, horizon / n, n);
  const auto cyl = make_cylinders(mask, 32, 32, r, flat.end_time(), tau, delta);
  const auto rep = harnack_ratio(flat, cyl);
  CHECK(std::abs(rep.ratio - 1.0) <= 1e-10);

  const auto u0 = grid_function(mask, random_bump_function(5, Window{Vec(0.0, 0.0), Vec(1.0, 1.0)}));
  const auto sol = heat_solve(mask, field, u0, horizon / n, n);
  const auto rep2 = harnack_ratio(sol, cyl, 0.5);
  CHECK(rep2.ratio >= 1.0);
  CHECK(std::isfinite(rep2.ratio));
  CHECK(rep2.r_below_theta);  // r = 0.3 < passed R_theta = 0.5

  // cylinder reaching before the start of the solve
  const auto bad = make_cylinders(mask, 32, 32, r, 10.0, tau, delta);
  CHECK_THROWS_AS(harnack_ratio(sol, bad), EmptyCylinder);

  // non-positive data on Q
  auto touching_zero = u0;
  const auto neg = heat_solve(mask, field,
                              grid_function(mask, [](const Vec& p) { return p[0] - 0.5; }),
                              horizon / n, n);
  CHECK_THROWS_AS(harnack_ratio(neg, cyl), NonPositiveField);
}

TEST_CASE("harnack refinement drift is small on the square") {
  const double L = 1.0;
  auto mask_at = [&](double h) { return full_square(L, h); };
  auto field_at = [](const RasterMask& m) { return CoefficientField::isotropic(m, 1.0); };
  for (std::uint64_t f = 0; f < 2; ++f) {
    const auto u0 = random_bump_function(100 + f, Window{Vec(0.0, 0.0), Vec(L, L)});
    const auto study = harnack_refinement(mask_at, field_at, u0, Vec(0.5, 0.5), 0.3, 1.0, 0.5,
                                          {1.0 / 48, 1.0 / 96});
    REQUIRE(study.ratios.size() == 2);
    CHECK(study.ratios[0] >= 1.0);
    CHECK(study.max_drift < 0.05);
  }
}

TEST_CASE("holder oscillation decays geometrically on the square") {
  const double L = 1.0, h = 1.0 / 128;
  const auto mask = full_square(L, h);
  const auto field = CoefficientField::isotropic(mask, 1.0);
  const auto u0 = grid_function(mask, [](const Vec& p) {
    return 1.0 + 0.5 * std::sin(2 * kPi * p[0]) * std::sin(2 * kPi * p[1]);
  });
  const double r0 = 0.3;
  const double horizon = r0 * r0;
  const double dt_max = 0.9 * explicit_cfl_dt(mask, field);
  const int n = static_cast<int>(std::ceil(horizon / dt_max));
  const auto sol = heat_solve(mask, field, u0, horizon / n, n);
  const auto rep = holder_oscillation(sol, 64, 64, r0, 5);
  REQUIRE(rep.osc.size() >= 3);
  for (std::size_t k = 1; k < rep.osc.size(); ++k) CHECK(rep.osc[k] <= rep.osc[k - 1] + 1e-15);
  CHECK(rep.alpha_hat > 0);
  CHECK(rep.alpha_ci_lo > 0);

  // constant data: degenerate, no exponent
  const std::vector<double> ones(mask.inside.size(), 1.0);
  const auto flat = heat_solve(mask, field, ones, horizon / n, n);
  CHECK(holder_oscillation(flat, 64, 64, r0, 5).degenerate);

  // radius too small for three levels
  CHECK_THROWS_AS(holder_oscillation(sol, 64, 64, 10 * h, 5), TooFewLevels);
}

TEST_CASE("poincare eigenvalue on the full square against the closed form") {
  const double L = 1.0, h = L / 128;
  const auto mask = full_square(L, h);
  const auto field = CoefficientField::isotropic(mask, 1.0);
  std::vector<int> all;
  for (std::size_t k = 0; k < mask.inside.size(); ++k) all.push_back(static_cast<int>(k));
  const auto rep = poincare_constant(mask, field, all, L / 2);

  const double continuum = kPi * kPi / (L * L);
  const double discrete = 2.0 / (h * h) * (1 - std::cos(kPi * h / L));
  CHECK(std::abs(rep.mu1 - continuum) <= 0.01 * continuum);
  CHECK(rep.mu1 == doctest::Approx(discrete).epsilon(1e-6));
  CHECK(rep.c_p == doctest::Approx(1.0 / (rep.mu1 * 0.25 * L * L)).epsilon(1e-12));

  // doubling L at the same cell count quarters mu1
  const auto mask2 = full_square(2 * L, 2 * h);
  std::vector<int> all2;
  for (std::size_t k = 0; k < mask2.inside.size(); ++k) all2.push_back(static_cast<int>(k));
  const auto rep2 = poincare_constant(mask2, CoefficientField::isotropic(mask2, 1.0), all2, L);
  CHECK(rep2.mu1 / rep.mu1 == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("poincare rejects disconnected balls and measures cluster stability") {
  // two disjoint blobs
  RasterMask mask = full_square(1.0, 1.0 / 32);
  for (int j = 0; j < mask.ny; ++j)
    for (int i = 14; i <= 17; ++i) mask.inside[mask.idx(i, j)] = 0;
  const auto field = CoefficientField::isotropic(mask, 1.0);
  std::vector<int> both;
  for (std::size_t k = 0; k < mask.inside.size(); ++k)
    if (mask.inside[k]) both.push_back(static_cast<int>(k));
  CHECK_THROWS_AS(poincare_constant(mask, field, both, 0.5), DisconnectedBall);

  // intrinsic balls in a supercritical cluster: C_P stable across the r sweep
  const auto model = supercritical(51, 9);
  const auto cmask = rasterize(model, Window::centered(2, 7), 0.2);
  const auto cfield = CoefficientField::isotropic(cmask, 1.0);
  std::vector<double> cps;
  for (double r : {3.0, 4.0}) {
    const auto cells = chamfer_ball(cmask, Vec(0.0, 0.0), r);
    REQUIRE(cells.size() > 50);
    cps.push_back(poincare_constant(cmask, cfield, cells, r).c_p);
  }
  CHECK(cps[1] / cps[0] > 1.0 / 1.5);
  CHECK(cps[1] / cps[0] < 1.5);
}
