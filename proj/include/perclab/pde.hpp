#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "perclab/raster.hpp"

namespace perclab {

// Per-cell symmetric coefficient field with uniform ellipticity bounds.
// The 5-point finite-volume scheme uses the diagonal entries; a12 is carried
// for the ellipticity contract and must vanish for solves.
struct CoefficientField {
  int nx = 0, ny = 0;
  std::vector<double> a11, a12, a22;
  double lambda = 1, Lambda = 1;

  static CoefficientField isotropic(const RasterMask& mask, double value);
  // checks lambda <= eigenvalues of [[a11,a12],[a12,a22]] <= Lambda per cell
  void validate() const;
};

struct HeatSolveOptions {
  bool normalize = true;      // divide coefficients by Lambda
  bool harmonic_faces = true; // harmonic face means (arithmetic otherwise)
  int max_snapshots = 257;
  bool allow_implicit = true; // backward Euler when dt violates the CFL bound
  double cg_tol = 1e-13;
  int cg_max_iter = 20000;
};

// largest explicit-stable dt for the given mask and field
double explicit_cfl_dt(const RasterMask& mask, const CoefficientField& field,
                       const HeatSolveOptions& options = {});

// Zero-flux heat solution snapshots on a time grid. Mass is conserved to
// 1e-10 relative (checked); a constant initial state stays bitwise constant.
struct HeatField {
  int nx = 0, ny = 0;
  double pitch = 0;
  Vec origin;
  std::vector<std::uint8_t> inside;
  double dt = 0;
  int n_steps = 0;
  double scale = 1;
  bool implicit_used = false;
  double mass_drift_rel = 0;
  std::vector<double> times;
  std::vector<std::vector<double>> snaps;

  int idx(int i, int j) const { return j * nx + i; }
  bool is_inside(int i, int j) const {
    return i >= 0 && i < nx && j >= 0 && j < ny && inside[idx(i, j)] != 0;
  }
  double end_time() const { return times.back(); }
  RasterMask mask_view() const;
};

HeatField heat_solve(const RasterMask& mask, const CoefficientField& field,
                     const std::vector<double>& u0, double dt, int n_steps,
                     const HeatSolveOptions& options = {});

// Space-time cylinders over the chamfer ball B_W(x0, r):
//   Q   = (s - tau r^2, s)                          x B_W(x0, r)
//   Q_d = (s - delta tau r^2, s)                    x B_W(x0, delta r)
//   Q-  = (s - (3+delta) tau r^2/4,
//          s - (3-delta) tau r^2/4)                 x B_W(x0, delta r)
//   Q-' = (s - tau r^2, s - (3-delta) tau r^2/4)    x B_W(x0, delta r)
//   Q+  = (s - (1+delta) tau r^2/4, s)              x B_W(x0, delta r)
struct ParabolicCylinders {
  int ci = 0, cj = 0;
  double r = 0, s = 0, tau = 1, delta = 0.5;
  std::vector<int> ball;        // cell indices with d(x0, .) < r
  std::vector<int> ball_delta;  // < delta r

  double q_lo() const { return s - tau * r * r; }
  double q_delta_lo() const { return s - delta * tau * r * r; }
  double qminus_lo() const { return s - (3 + delta) * tau * r * r / 4; }
  double qminus_hi() const { return s - (3 - delta) * tau * r * r / 4; }
  double qminus_prime_lo() const { return q_lo(); }
  double qminus_prime_hi() const { return qminus_hi(); }
  double qplus_lo() const { return s - (1 + delta) * tau * r * r / 4; }
  double qplus_hi() const { return s; }
};

ParabolicCylinders make_cylinders(const RasterMask& mask, int ci, int cj, double r, double s,
                                  double tau, double delta);

struct HarnackReport {
  double ratio = 0;
  double sup_qminus = 0, inf_qplus = 0;
  double r = 0, s = 0, tau = 0, delta = 0, pitch = 0;
  int slices_qminus = 0, slices_qplus = 0;
  bool r_below_theta = false;  // r below the operational R_theta passed in
};

HarnackReport harnack_ratio(const HeatField& field, const ParabolicCylinders& cyl,
                            double r_hat_theta = 0);

struct HarnackStudy {
  std::vector<double> pitches;
  std::vector<double> ratios;
  std::vector<HarnackReport> reports;
  double max_drift = 0;  // largest relative ratio change between consecutive levels
};

// Re-rasterizes, re-solves and re-measures the same physical cylinder at each
// pitch; initial data and coefficients are sampled from the analytic
// callbacks so levels are comparable.
HarnackStudy harnack_refinement(const std::function<RasterMask(double)>& mask_at,
                                const std::function<CoefficientField(const RasterMask&)>& field_at,
                                const std::function<double(const Vec&)>& u0_fn, const Vec& x0,
                                double r, double tau, double delta,
                                const std::vector<double>& pitches, double cfl_fraction = 0.9,
                                double r_hat_theta = 0);

struct OscillationReport {
  std::vector<int> levels;
  std::vector<double> radii;
  std::vector<double> osc;
  double alpha_hat = 0;
  double alpha_ci_lo = 0, alpha_ci_hi = 0;  // 95% band
  bool degenerate = false;                  // constant field, all oscillations ~ 0
};

// Oscillation over the nested cylinders Q_k = (t0 - r_k^2, t0) x B_W(x0, r_k),
// r_k = 2^-k r0, t0 = end of the solve; decay exponent from log osc vs k.
OscillationReport holder_oscillation(const HeatField& field, int ci, int cj, double r0,
                                     int max_levels);

struct PoincareReport {
  double mu1 = 0;  // smallest nonzero Neumann eigenvalue of -div(a grad) on B
  double c_p = 0;  // 1 / (mu1 r^2)
  double r = 0;
  int iterations = 0;
  int cells = 0;
};

PoincareReport poincare_constant(const RasterMask& mask, const CoefficientField& field,
                                 const std::vector<int>& ball_cells, double r);

// Strictly positive smooth test data: sum of wide Gaussian bumps over the box
// plus a floor. Used to sample positive caloric functions.
std::function<double(const Vec&)> random_bump_function(std::uint64_t seed, const Window& box,
                                                       double floor_value = 0.1, int n_bumps = 3);

}  // namespace perclab
