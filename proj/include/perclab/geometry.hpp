#pragma once

#include <cstdint>
#include <vector>

#include "perclab/medium.hpp"

namespace perclab {

// Lexicographic tie-break snaps coordinates to this tolerance.
inline constexpr double kLexTol = 1e-12;

// First closest point of the closure of the ball union, ties between
// equidistant candidate points broken lexicographically. Returns x itself
// when x already lies in the closure.
Vec closest_point(const ClusterModel& cluster, const Vec& x);

// max(min_c |x - c| - rho', 0); zero exactly on the closure
double euclidean_gap(const ClusterModel& cluster, const Vec& x);

struct HoleBracket {
  double lo = 0, hi = 0;  // certified bracket for h_W(R); gap is 1-Lipschitz
};

// Grid scan of the gap over B_Euc(0, R) at pitch h_grid.
HoleBracket hole_size(const ClusterModel& cluster, double R, double h_grid);

// One-source shortest paths over the center overlap graph. Every graph path
// stays inside the ball union (the chord between centers of two overlapping
// equal-radius balls is covered by the pair), so queries are upper bounds on
// the intrinsic distance. Queries for points sharing a ball with the source
// also consider the straight chord.
class ClusterGraphDistance {
 public:
  ClusterGraphDistance(const ClusterModel& cluster, const Vec& source);

  // upper bound on d_W(source, y); y must be covered (within kBoundaryTol)
  double to(const Vec& y) const;
  double to_center(int i) const { return dist_[i]; }

 private:
  const ClusterModel* cluster_;
  Vec source_;
  std::vector<double> dist_;
  std::vector<int> source_balls_;
};

// Unreachable pairs cannot occur inside one ClusterModel; preconditions are
// membership of both endpoints.
double intrinsic_distance_upper(const ClusterModel& cluster, const Vec& x, const Vec& y);

// Monte Carlo |B_W(x, r)| using the graph upper bound on d_W; downward biased.
VolumeEstimate ball_volume(const ClusterModel& cluster, const Vec& x, double r,
                           int n_samples, std::uint64_t seed);

struct IsoCut {
  int axis = -1;            // slab axis, or -1 for half-space cuts
  Vec normal;               // half-space normal (unit)
  double offset = 0;        // plane offset(s)
  double halfwidth = 0;     // slabs only
  double surface = 0;       // H_{d-1}(W cap cut planes), box faces excluded
  double volume = 0;        // |W cap O|
  double ratio = 0;         // surface / volume^{(d-1)/d}
  bool skipped = false;     // cut missed the cluster (0/0)
};

// Random half-space and slab cuts clipped to the box [-R, R]^d. The ratios
// upper-bound the isoperimetric infimum; a probe, not a certificate.
std::vector<IsoCut> isoperimetric_probe(const ClusterModel& cluster, double R, int n_cuts,
                                        std::uint64_t seed);

struct RegularityParams {
  int x_samples = 8;        // ball centers per R for the volume check
  int pair_samples = 64;    // distance-comparison pairs per R
  int vol_samples = 4096;   // Monte Carlo points per ball volume
  double hole_grid = 0.05;  // pitch of the hole scan
  int iso_cuts = 16;
};

struct GeometryReport {
  std::vector<double> R_values;
  std::vector<double> c_v;             // per R: max over sampled x of max(|B|/R^d, R^d/|B|)
  std::vector<HoleBracket> holes;      // per R
  std::vector<double> c_w_per_r;       // per R at the fitted exponent
  double c_v_overall = 1;

  double gamma_hat = 0;                // slope of log h_W(R) vs log R, clamped to [0,1]
  double gamma_raw = 0;
  double gamma_se = 0;
  double gamma_ci_hi = 0;              // 95% upper bound on the raw slope
  double c_hole = 0;                   // exp(intercept)
  std::vector<double> hole_fit_residuals;

  double upsilon_hat = 1;
  double c_w = 1;
  std::vector<double> pair_slack;      // d_W - max(C_W d_Euc, R^Upsilon) per sampled pair, last R

  double r_hat_theta = 0;              // smallest R where C_V has stabilized within 10%; 0 if none
  std::vector<double> iso_ratios;
  int iso_skipped = 0;

  int x_samples = 0, pair_samples = 0, vol_samples = 0;
};

// Fits the geometric functionals of the modified cluster over an R sweep.
GeometryReport regularity_report(const ClusterModel& cluster, const std::vector<double>& R_values,
                                 const RegularityParams& params, std::uint64_t seed);

}  // namespace perclab
