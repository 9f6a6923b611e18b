#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "perclab/medium.hpp"

namespace perclab {

// Chamfer (1, sqrt 2) grid paths overestimate Euclidean length by at most
// this factor (worst direction arctan(sqrt 2 - 1)).
inline constexpr double kChamferBound = 1.0824;

// Cell-center membership mask of a 2-D cluster. Immutable after construction.
struct RasterMask {
  Vec origin;  // lower-left corner of cell (0,0)
  double pitch = 0;
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> inside;
  double rho_prime = 0;

  int idx(int i, int j) const { return j * nx + i; }
  bool in_range(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }
  bool is_inside(int i, int j) const { return in_range(i, j) && inside[idx(i, j)] != 0; }
  Vec center(int i, int j) const {
    return Vec(origin[0] + (i + 0.5) * pitch, origin[1] + (j + 0.5) * pitch);
  }
  std::pair<int, int> cell_of(const Vec& p) const {
    return {static_cast<int>(std::floor((p[0] - origin[0]) / pitch)),
            static_cast<int>(std::floor((p[1] - origin[1]) / pitch))};
  }
  int count_inside() const;
  // number of 8-connected inside components (1 for a well-resolved cluster)
  int count_components() const;
};

// inside(i,j) = contains(cell center); errors with PitchTooCoarse if h > rho'/4
RasterMask rasterize(const ClusterModel& cluster, const Window& bbox, double h);

// all-inside square [0,L]^2 (PDE reference domain)
RasterMask full_square(double L, double h);

// Dijkstra over inside cells, 8-neighborhood, weights h and h*sqrt(2);
// infinity outside the source's component.
std::vector<double> grid_intrinsic_distance(const RasterMask& mask, int si, int sj);

// Lebesgue measure of bin and the ball union, Monte Carlo with binomial error.
VolumeEstimate bin_volume(const ClusterModel& cluster, const Window& bin, int n_samples,
                          std::uint64_t seed);

}  // namespace perclab
