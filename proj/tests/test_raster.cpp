#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "perclab/raster.hpp"

using namespace perclab;

namespace {

ClusterModel balls(std::vector<Vec> centers, double rho_prime, double window_half = 30) {
  return ClusterModel(std::move(centers), rho_prime, rho_prime, Window::centered(2, window_half),
                      SelectionPolicy::kLargest, 0);
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

TEST_CASE("rasterize a disk: area and pitch rules") {
  const auto one = balls({Vec(0.0, 0.0)}, 1.0);
  const Window bbox = Window::centered(2, 1.5);
  const auto fine = rasterize(one, bbox, 0.01);
  const double area = fine.count_inside() * fine.pitch * fine.pitch;
  CHECK(area == doctest::Approx(kPi).epsilon(0.02));

  // cells away from the ball are all outside
  const auto far_mask = rasterize(one, Window{Vec(5.0, 5.0), Vec(8.0, 8.0)}, 0.1);
  CHECK(far_mask.count_inside() == 0);

  CHECK_THROWS_AS(rasterize(one, bbox, 0.3), PitchTooCoarse);

  // refinement sweep: boundary error shrinks with h
  double err_coarse = 0, err_fine = 0;
  {
    const auto a = rasterize(one, bbox, 0.08);
    err_coarse = std::abs(a.count_inside() * a.pitch * a.pitch - kPi);
    const auto b = rasterize(one, bbox, 0.02);
    err_fine = std::abs(b.count_inside() * b.pitch * b.pitch - kPi);
  }
  CHECK(err_fine < err_coarse);
}

TEST_CASE("grid distances: corridor, walls, Lipschitz") {
  // corridor of overlapping balls along the x axis
  std::vector<Vec> centers;
  for (double x = -6; x <= 6; x += 0.5) centers.push_back(Vec(x, 0.0));
  const auto corridor = balls(std::move(centers), 1.0, 10);
  const auto mask = rasterize(corridor, Window::centered(2, 7.5), 0.05);
  const auto [si, sj] = mask.cell_of(Vec(-5.0, 0.0));
  REQUIRE(mask.is_inside(si, sj));
  const auto dist = grid_intrinsic_distance(mask, si, sj);
  CHECK(dist[mask.idx(si, sj)] == 0.0);

  const auto [ti, tj] = mask.cell_of(Vec(5.0, 0.0));
  const double euc = 10.0;
  CHECK(dist[mask.idx(ti, tj)] >= euc - 2 * mask.pitch);
  CHECK(dist[mask.idx(ti, tj)] <= kChamferBound * euc + 2 * mask.pitch);

  // unreachable cells are infinite
  int infinite_cells = 0;
  for (int j = 0; j < mask.ny; ++j)
    for (int i = 0; i < mask.nx; ++i)
      if (!mask.is_inside(i, j) && std::isinf(dist[mask.idx(i, j)])) ++infinite_cells;
  CHECK(infinite_cells > 0);

  // 8-neighbor Lipschitz bound h*sqrt(2)
  const double lip = mask.pitch * std::sqrt(2.0) + 1e-12;
  for (int j = 0; j + 1 < mask.ny; ++j)
    for (int i = 0; i + 1 < mask.nx; ++i) {
      if (!mask.is_inside(i, j)) continue;
      for (auto [di, dj] : {std::pair{1, 0}, {0, 1}, {1, 1}}) {
        if (!mask.is_inside(i + di, j + dj)) continue;
        CHECK(std::abs(dist[mask.idx(i, j)] - dist[mask.idx(i + di, j + dj)]) <= lip);
      }
    }

  CHECK_THROWS_AS(grid_intrinsic_distance(mask, 0, 0), SourceOutside);
}

TEST_CASE("well-resolved cluster masks are one 8-connected component") {
  const auto model = sample_conditioned_cluster(1.5, 1.0, 1.0, Window::centered(2, 8),
                                                SelectionPolicy::kLargest, 71);
  const auto mask = rasterize(model, Window::centered(2, 6), 0.1);
  CHECK(mask.count_components() == 1);

  // two disjoint balls rasterize to two components
  const auto pair = ClusterModel({Vec(-3.0, 0.0), Vec(3.0, 0.0)}, 1.0, 1.0,
                                 Window::centered(2, 8), SelectionPolicy::kLargest, 0);
  CHECK(rasterize(pair, Window::centered(2, 5), 0.1).count_components() == 2);
}

TEST_CASE("bin volumes") {
  const auto big = balls({Vec(0.0, 0.0)}, 10.0, 40);

  Window inside_bin{Vec(-0.5, -0.5), Vec(0.5, 0.5)};
  const auto full = bin_volume(big, inside_bin, 4000, 1);
  CHECK(full.value == doctest::Approx(1.0));
  CHECK(full.se == 0.0);

  Window outside_bin{Vec(20.0, 20.0), Vec(21.0, 21.0)};
  CHECK(bin_volume(big, outside_bin, 4000, 2).value == 0.0);

  // ball edge through the bin center, boundary locally flat
  Window half_bin{Vec(9.9, -0.1), Vec(10.1, 0.1)};
  const auto half = bin_volume(big, half_bin, 40000, 3);
  CHECK(std::abs(half.value - 0.5 * half_bin.volume()) <= 3 * half.se + 1e-4);

  // additivity: four children sum to the parent within combined error
  Window parent{Vec(9.5, -0.5), Vec(10.5, 0.5)};
  const auto p = bin_volume(big, parent, 60000, 4);
  double child_sum = 0, child_se2 = 0;
  for (int cx = 0; cx < 2; ++cx)
    for (int cy = 0; cy < 2; ++cy) {
      Window child{Vec(9.5 + 0.5 * cx, -0.5 + 0.5 * cy), Vec(10.0 + 0.5 * cx, 0.0 + 0.5 * cy)};
      const auto c = bin_volume(big, child, 15000, 10 + 2 * cx + cy);
      child_sum += c.value;
      child_se2 += c.se * c.se;
    }
  CHECK(std::abs(child_sum - p.value) <= 3 * std::sqrt(child_se2 + p.se * p.se));
}
