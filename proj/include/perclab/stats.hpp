#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "perclab/errors.hpp"

namespace perclab {

// two-sided 97.5% Student t quantile (dof 1..30, then normal limit)
inline double student_t_975(int dof) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                 2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                 2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                 2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) return 12.706;
  if (dof <= 30) return table[dof - 1];
  return 1.96;
}

struct LineFit {
  double slope = 0, intercept = 0;
  double slope_se = 0;
  double r2 = 0;
  int n = 0;
  std::vector<double> residuals;

  double slope_ci_half() const { return student_t_975(n - 2) * slope_se; }
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  f.n = static_cast<int>(x.size());
  if (f.n < 2 || y.size() != x.size()) throw SchemaError("fit_line needs >= 2 matched points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / f.n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / f.n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < f.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw SchemaError("fit_line: degenerate abscissae");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  f.residuals.resize(x.size());
  for (int i = 0; i < f.n; ++i) {
    f.residuals[i] = y[i] - (f.intercept + f.slope * x[i]);
    sse += f.residuals[i] * f.residuals[i];
  }
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  f.slope_se = f.n > 2 ? std::sqrt(sse / (f.n - 2) / sxx) : 0.0;
  return f;
}

struct BinomialEstimate {
  double p_hat = 0, se = 0, lo = 0, hi = 0;
  std::uint64_t successes = 0, trials = 0;
};

// Wilson interval at the given z (default 95%)
inline BinomialEstimate binomial_estimate(std::uint64_t k, std::uint64_t n, double z = 1.96) {
  BinomialEstimate e;
  e.successes = k;
  e.trials = n;
  if (n == 0) return e;
  const double p = static_cast<double>(k) / static_cast<double>(n);
  e.p_hat = p;
  e.se = std::sqrt(p * (1 - p) / static_cast<double>(n));
  const double z2 = z * z, nn = static_cast<double>(n);
  const double denom = 1 + z2 / nn;
  const double center = (p + z2 / (2 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
  e.lo = std::max(0.0, center - half);
  e.hi = std::min(1.0, center + half);
  return e;
}

struct VolumeEstimate {
  double value = 0, se = 0;
  std::uint64_t hits = 0, samples = 0;
};

struct KendallTrend {
  double tau = 0;
  // one-sided exact p-value for a decreasing trend (small n, permutation null)
  double p_decreasing = 1;
};

inline double kendall_tau(const std::vector<double>& y) {
  const int n = static_cast<int>(y.size());
  int s = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) s += (y[j] > y[i]) - (y[j] < y[i]);
  return 2.0 * s / (n * (n - 1.0));
}

// Exact permutation test against the index order; n <= 8 enumerates all n!.
inline KendallTrend kendall_trend(std::vector<double> y) {
  KendallTrend r;
  const int n = static_cast<int>(y.size());
  if (n < 2) return r;
  r.tau = kendall_tau(y);
  std::vector<double> perm = y;
  std::sort(perm.begin(), perm.end());
  std::uint64_t count = 0, total = 0;
  do {
    ++total;
    if (kendall_tau(perm) <= r.tau + 1e-15) ++count;
  } while (std::next_permutation(perm.begin(), perm.end()) && total < 50000);
  r.p_decreasing = static_cast<double>(count) / static_cast<double>(total);
  return r;
}

}  // namespace perclab
