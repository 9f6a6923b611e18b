#include "perclab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "perclab/rng.hpp"
#include "perclab/stats.hpp"

namespace perclab {

namespace {

double face_mean(double a, double b, bool harmonic) {
  if (harmonic) return (a > 0 && b > 0) ? 2 * a * b / (a + b) : 0.0;
  return 0.5 * (a + b);
}

// compressed sparse rows, symmetric operators only
struct Csr {
  int n = 0;
  std::vector<int> start, col;
  std::vector<double> val;

  void mul(const std::vector<double>& x, std::vector<double>& y) const {
    for (int i = 0; i < n; ++i) {
      double s = 0;
      for (int e = start[i]; e < start[i + 1]; ++e) s += val[e] * x[col[e]];
      y[i] = s;
    }
  }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// plain conjugate gradients with Jacobi preconditioning
int cg_solve(const Csr& A, const std::vector<double>& b, std::vector<double>& x, double tol,
             int max_iter) {
  const int n = A.n;
  std::vector<double> diag(n, 1.0);
  for (int i = 0; i < n; ++i)
    for (int e = A.start[i]; e < A.start[i + 1]; ++e)
      if (A.col[e] == i && A.val[e] != 0) diag[i] = 1.0 / A.val[e];
  std::vector<double> r(n), z(n), p(n), q(n);
  A.mul(x, r);
  for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
  const double bnorm = std::sqrt(std::max(dot(b, b), 1e-300));
  for (int i = 0; i < n; ++i) z[i] = diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  for (int it = 0; it < max_iter; ++it) {
    if (std::sqrt(dot(r, r)) <= tol * bnorm) return it;
    A.mul(p, q);
    const double alpha = rz / dot(p, q);
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    for (int i = 0; i < n; ++i) z[i] = diag[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericError("conjugate gradients failed to converge");
}

struct Faces {
  // faces between inside cells; weight includes the coefficient only
  std::vector<int> a, b;
  std::vector<double> w;
};

Faces build_faces(const RasterMask& mask, const CoefficientField& field, bool harmonic) {
  Faces f;
  for (int j = 0; j < mask.ny; ++j)
    for (int i = 0; i < mask.nx; ++i) {
      if (!mask.is_inside(i, j)) continue;
      const int u = mask.idx(i, j);
      if (mask.is_inside(i + 1, j)) {
        f.a.push_back(u);
        f.b.push_back(mask.idx(i + 1, j));
        f.w.push_back(face_mean(field.a11[u], field.a11[mask.idx(i + 1, j)], harmonic));
      }
      if (mask.is_inside(i, j + 1)) {
        f.a.push_back(u);
        f.b.push_back(mask.idx(i, j + 1));
        f.w.push_back(face_mean(field.a22[u], field.a22[mask.idx(i, j + 1)], harmonic));
      }
    }
  return f;
}

void require_diagonal(const CoefficientField& field) {
  for (double v : field.a12)
    if (v != 0)
      throw SchemaError("the 5-point scheme supports diagonal coefficient fields only");
}

}  // namespace

CoefficientField CoefficientField::isotropic(const RasterMask& mask, double value) {
  CoefficientField f;
  f.nx = mask.nx;
  f.ny = mask.ny;
  const std::size_t n = static_cast<std::size_t>(mask.nx) * mask.ny;
  f.a11.assign(n, value);
  f.a22.assign(n, value);
  f.a12.assign(n, 0.0);
  f.lambda = f.Lambda = value;
  return f;
}

void CoefficientField::validate() const {
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  if (a11.size() != n || a22.size() != n || a12.size() != n)
    throw SchemaError("CoefficientField: entry arrays must match the grid");
  if (!(lambda > 0) || Lambda < lambda)
    throw SchemaError("CoefficientField: need 0 < lambda <= Lambda");
  const double tol = 1e-12 * Lambda;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = 0.5 * (a11[i] + a22[i]);
    const double r = std::sqrt(0.25 * (a11[i] - a22[i]) * (a11[i] - a22[i]) + a12[i] * a12[i]);
    if (m - r < lambda - tol || m + r > Lambda + tol)
      throw NumericError("CoefficientField: cell eigenvalues violate the ellipticity bounds");
  }
}

double explicit_cfl_dt(const RasterMask& mask, const CoefficientField& field,
                       const HeatSolveOptions& options) {
  const Faces faces = build_faces(mask, field, options.harmonic_faces);
  std::vector<double> row(mask.inside.size(), 0.0);
  for (std::size_t f = 0; f < faces.w.size(); ++f) {
    row[faces.a[f]] += faces.w[f];
    row[faces.b[f]] += faces.w[f];
  }
  const double scale = options.normalize ? 1.0 / field.Lambda : 1.0;
  const double rmax = *std::max_element(row.begin(), row.end());
  if (rmax == 0) return std::numeric_limits<double>::infinity();
  return mask.pitch * mask.pitch / (scale * rmax);
}

RasterMask HeatField::mask_view() const {
  RasterMask m;
  m.origin = origin;
  m.pitch = pitch;
  m.nx = nx;
  m.ny = ny;
  m.inside = inside;
  m.rho_prime = 0;
  return m;
}

HeatField heat_solve(const RasterMask& mask, const CoefficientField& field,
                     const std::vector<double>& u0, double dt, int n_steps,
                     const HeatSolveOptions& options) {
  if (u0.size() != mask.inside.size()) throw SchemaError("heat_solve: u0 must match the grid");
  if (!(dt > 0) || n_steps < 0) throw SchemaError("heat_solve: need dt > 0 and n_steps >= 0");
  field.validate();
  require_diagonal(field);
  for (std::size_t i = 0; i < u0.size(); ++i)
    if (u0[i] != 0 && !mask.inside[i])
      throw SchemaError("heat_solve: u0 supported outside the mask");

  HeatField out;
  out.nx = mask.nx;
  out.ny = mask.ny;
  out.pitch = mask.pitch;
  out.origin = mask.origin;
  out.inside = mask.inside;
  out.dt = dt;
  out.n_steps = n_steps;
  out.scale = options.normalize ? 1.0 / field.Lambda : 1.0;

  const Faces faces = build_faces(mask, field, options.harmonic_faces);
  const double h2 = mask.pitch * mask.pitch;
  const double fac = dt * out.scale / h2;
  const double dt_cfl = explicit_cfl_dt(mask, field, options);
  const bool implicit = dt > dt_cfl;
  if (implicit && !options.allow_implicit)
    throw UnstableStep("heat_solve: dt " + std::to_string(dt) + " exceeds the stable bound " +
                       std::to_string(dt_cfl) + " and implicit stepping is disabled");
  out.implicit_used = implicit;

  // backward Euler matrix over inside cells
  Csr A;
  std::vector<int> compact(mask.inside.size(), -1), expand;
  if (implicit) {
    for (std::size_t i = 0; i < mask.inside.size(); ++i)
      if (mask.inside[i]) {
        compact[i] = static_cast<int>(expand.size());
        expand.push_back(static_cast<int>(i));
      }
    const int n = static_cast<int>(expand.size());
    std::vector<std::vector<std::pair<int, double>>> rows(n);
    for (int i = 0; i < n; ++i) rows[i].emplace_back(i, 1.0);
    for (std::size_t f = 0; f < faces.w.size(); ++f) {
      const int a = compact[faces.a[f]], b = compact[faces.b[f]];
      const double w = fac * faces.w[f];
      rows[a].emplace_back(a, w);
      rows[a].emplace_back(b, -w);
      rows[b].emplace_back(b, w);
      rows[b].emplace_back(a, -w);
    }
    A.n = n;
    A.start.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) {
      std::sort(rows[i].begin(), rows[i].end());
      // merge duplicate columns
      std::vector<std::pair<int, double>> merged;
      for (auto& [c, v] : rows[i]) {
        if (!merged.empty() && merged.back().first == c)
          merged.back().second += v;
        else
          merged.emplace_back(c, v);
      }
      rows[i] = std::move(merged);
      A.start[i + 1] = A.start[i] + static_cast<int>(rows[i].size());
    }
    for (int i = 0; i < n; ++i)
      for (auto& [c, v] : rows[i]) {
        A.col.push_back(c);
        A.val.push_back(v);
      }
  }

  std::vector<double> u = u0, acc(u0.size(), 0.0);
  const int stride = std::max(1, n_steps / std::max(1, options.max_snapshots - 1));
  auto snap = [&](int step) {
    out.times.push_back(step * dt);
    out.snaps.push_back(u);
  };
  snap(0);

  std::vector<double> b_c, x_c;
  for (int step = 1; step <= n_steps; ++step) {
    if (!implicit) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t f = 0; f < faces.w.size(); ++f) {
        const double flux = faces.w[f] * (u[faces.b[f]] - u[faces.a[f]]);
        acc[faces.a[f]] += flux;
        acc[faces.b[f]] -= flux;
      }
      for (std::size_t i = 0; i < u.size(); ++i) u[i] += fac * acc[i];
    } else {
      b_c.assign(A.n, 0.0);
      for (int i = 0; i < A.n; ++i) b_c[i] = u[expand[i]];
      x_c = b_c;
      cg_solve(A, b_c, x_c, options.cg_tol, options.cg_max_iter);
      for (int i = 0; i < A.n; ++i) u[expand[i]] = x_c[i];
    }
    if (step % stride == 0 || step == n_steps) snap(step);
  }

  double m0 = 0, m1 = 0, l1 = 0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (mask.inside[i]) {
      m0 += u0[i];
      m1 += u[i];
      l1 += std::abs(u0[i]);
    }
  out.mass_drift_rel = l1 > 0 ? std::abs(m1 - m0) / l1 : 0.0;
  if (out.mass_drift_rel > 1e-10)
    throw NumericError("heat_solve: mass drift " + std::to_string(out.mass_drift_rel) +
                       " exceeds 1e-10");
  return out;
}

ParabolicCylinders make_cylinders(const RasterMask& mask, int ci, int cj, double r, double s,
                                  double tau, double delta) {
  if (!(r > 0) || !(tau > 0)) throw SchemaError("make_cylinders: r and tau must be positive");
  if (!(delta >= 0.5 && delta < 1)) throw SchemaError("make_cylinders: delta must be in [1/2, 1)");
  ParabolicCylinders cyl;
  cyl.ci = ci;
  cyl.cj = cj;
  cyl.r = r;
  cyl.s = s;
  cyl.tau = tau;
  cyl.delta = delta;
  const auto dist = grid_intrinsic_distance(mask, ci, cj);
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (dist[k] < r) cyl.ball.push_back(static_cast<int>(k));
    if (dist[k] < delta * r) cyl.ball_delta.push_back(static_cast<int>(k));
  }
  return cyl;
}

HarnackReport harnack_ratio(const HeatField& field, const ParabolicCylinders& cyl,
                            double r_hat_theta) {
  HarnackReport rep;
  rep.r = cyl.r;
  rep.s = cyl.s;
  rep.tau = cyl.tau;
  rep.delta = cyl.delta;
  rep.pitch = field.pitch;
  rep.r_below_theta = r_hat_theta > 0 && cyl.r < r_hat_theta;
  if (cyl.ball.empty() || cyl.ball_delta.empty())
    throw EmptyCylinder("harnack_ratio: empty cylinder ball");
  const double t_eps = 1e-12 * std::max(1.0, std::abs(cyl.s));
  if (cyl.q_lo() < field.times.front() - t_eps || cyl.s > field.times.back() + t_eps)
    throw EmptyCylinder("harnack_ratio: cylinder time range outside the solve");

  double sup_minus = -std::numeric_limits<double>::infinity();
  double inf_plus = std::numeric_limits<double>::infinity();
  for (std::size_t si = 0; si < field.times.size(); ++si) {
    const double t = field.times[si];
    if (t < cyl.q_lo() - t_eps || t > cyl.s + t_eps) continue;
    const auto& u = field.snaps[si];
    for (int cell : cyl.ball)
      if (!(u[cell] > 0)) throw NonPositiveField("harnack_ratio: u not positive on Q");
    if (t >= cyl.qminus_lo() - t_eps && t <= cyl.qminus_hi() + t_eps) {
      ++rep.slices_qminus;
      for (int cell : cyl.ball_delta) sup_minus = std::max(sup_minus, u[cell]);
    }
    if (t >= cyl.qplus_lo() - t_eps && t <= cyl.qplus_hi() + t_eps) {
      ++rep.slices_qplus;
      for (int cell : cyl.ball_delta) inf_plus = std::min(inf_plus, u[cell]);
    }
  }
  if (rep.slices_qminus == 0 || rep.slices_qplus == 0)
    throw EmptyCylinder("harnack_ratio: no snapshots inside Q- or Q+");
  rep.sup_qminus = sup_minus;
  rep.inf_qplus = inf_plus;
  rep.ratio = sup_minus / inf_plus;
  return rep;
}

HarnackStudy harnack_refinement(const std::function<RasterMask(double)>& mask_at,
                                const std::function<CoefficientField(const RasterMask&)>& field_at,
                                const std::function<double(const Vec&)>& u0_fn, const Vec& x0,
                                double r, double tau, double delta,
                                const std::vector<double>& pitches, double cfl_fraction,
                                double r_hat_theta) {
  HarnackStudy study;
  for (double h : pitches) {
    const RasterMask mask = mask_at(h);
    const CoefficientField field = field_at(mask);
    std::vector<double> u0(mask.inside.size(), 0.0);
    for (int j = 0; j < mask.ny; ++j)
      for (int i = 0; i < mask.nx; ++i)
        if (mask.is_inside(i, j)) u0[mask.idx(i, j)] = u0_fn(mask.center(i, j));

    const double horizon = 1.05 * tau * r * r;
    const double dt_max = cfl_fraction * explicit_cfl_dt(mask, field);
    const int n_steps = static_cast<int>(std::ceil(horizon / dt_max));
    const double dt = horizon / n_steps;
    const HeatField sol = heat_solve(mask, field, u0, dt, n_steps);

    const auto [ci, cj] = mask.cell_of(x0);
    const auto cyl = make_cylinders(mask, ci, cj, r, sol.end_time(), tau, delta);
    study.reports.push_back(harnack_ratio(sol, cyl, r_hat_theta));
    study.pitches.push_back(h);
    study.ratios.push_back(study.reports.back().ratio);
  }
  for (std::size_t k = 1; k < study.ratios.size(); ++k)
    study.max_drift = std::max(study.max_drift,
                               std::abs(study.ratios[k] / study.ratios[k - 1] - 1.0));
  return study;
}

OscillationReport holder_oscillation(const HeatField& field, int ci, int cj, double r0,
                                     int max_levels) {
  OscillationReport rep;
  const RasterMask mask = field.mask_view();
  const auto dist = grid_intrinsic_distance(mask, ci, cj);
  const double t0 = field.end_time();
  double umax = 0;
  for (const auto& s : field.snaps)
    for (double v : s) umax = std::max(umax, std::abs(v));

  for (int k = 0; k < max_levels; ++k) {
    const double rk = r0 * std::pow(2.0, -k);
    if (rk < 4 * field.pitch) break;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    int slices = 0;
    for (std::size_t si = 0; si < field.times.size(); ++si) {
      const double t = field.times[si];
      if (t < t0 - rk * rk - 1e-15 || t > t0 + 1e-15) continue;
      ++slices;
      const auto& u = field.snaps[si];
      for (std::size_t cell = 0; cell < dist.size(); ++cell)
        if (dist[cell] < rk) {
          lo = std::min(lo, u[cell]);
          hi = std::max(hi, u[cell]);
        }
    }
    if (slices == 0 || !(hi >= lo)) break;
    rep.levels.push_back(k);
    rep.radii.push_back(rk);
    rep.osc.push_back(hi - lo);
  }

  const double floor_osc = 1e-14 * std::max(1.0, umax);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < rep.osc.size(); ++i) {
    if (rep.osc[i] <= floor_osc) break;  // decayed to roundoff; stop the fit there
    xs.push_back(static_cast<double>(rep.levels[i]));
    ys.push_back(std::log(rep.osc[i]));
  }
  if (xs.empty()) {
    rep.degenerate = true;
    return rep;
  }
  if (xs.size() < 3)
    throw TooFewLevels("holder_oscillation: fewer than 3 usable levels");
  const LineFit fit = fit_line(xs, ys);
  const double ln2 = std::log(2.0);
  rep.alpha_hat = -fit.slope / ln2;
  rep.alpha_ci_lo = -(fit.slope + fit.slope_ci_half()) / ln2;
  rep.alpha_ci_hi = -(fit.slope - fit.slope_ci_half()) / ln2;
  return rep;
}

PoincareReport poincare_constant(const RasterMask& mask, const CoefficientField& field,
                                 const std::vector<int>& ball_cells, double r) {
  if (ball_cells.empty()) throw EmptyCylinder("poincare_constant: empty ball");
  field.validate();
  require_diagonal(field);
  const int m = static_cast<int>(ball_cells.size());
  std::vector<int> compact(mask.inside.size(), -1);
  for (int i = 0; i < m; ++i) {
    if (!mask.inside[ball_cells[i]])
      throw SchemaError("poincare_constant: ball cell outside the mask");
    compact[ball_cells[i]] = i;
  }

  // connectivity over the operator stencil (4-neighbor)
  {
    std::vector<char> seen(m, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      const int gi = ball_cells[u] % mask.nx, gj = ball_cells[u] / mask.nx;
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int e = 0; e < 4; ++e) {
        const int ni = gi + di[e], nj = gj + dj[e];
        if (!mask.in_range(ni, nj)) continue;
        const int cv = compact[mask.idx(ni, nj)];
        if (cv >= 0 && !seen[cv]) {
          seen[cv] = 1;
          ++reached;
          q.push(cv);
        }
      }
    }
    if (reached != m) throw DisconnectedBall();
  }

  // A = -div(a grad) restricted to the ball, zero-flux outside
  const double h2 = mask.pitch * mask.pitch;
  Csr A;
  A.n = m;
  std::vector<std::vector<std::pair<int, double>>> rows(m);
  for (int u = 0; u < m; ++u) {
    const int gi = ball_cells[u] % mask.nx, gj = ball_cells[u] / mask.nx;
    auto couple = [&](int ni, int nj, const std::vector<double>& a_axis) {
      if (!mask.in_range(ni, nj)) return;
      const int cv = compact[mask.idx(ni, nj)];
      if (cv < 0) return;
      const double w = face_mean(a_axis[ball_cells[u]], a_axis[mask.idx(ni, nj)], true) / h2;
      rows[u].emplace_back(u, w);
      rows[u].emplace_back(cv, -w);
    };
    couple(gi + 1, gj, field.a11);
    couple(gi - 1, gj, field.a11);
    couple(gi, gj + 1, field.a22);
    couple(gi, gj - 1, field.a22);
  }
  A.start.assign(m + 1, 0);
  for (int i = 0; i < m; ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    std::vector<std::pair<int, double>> merged;
    for (auto& [c, v] : rows[i]) {
      if (!merged.empty() && merged.back().first == c)
        merged.back().second += v;
      else
        merged.emplace_back(c, v);
    }
    rows[i] = std::move(merged);
    A.start[i + 1] = A.start[i] + static_cast<int>(rows[i].size());
  }
  for (int i = 0; i < m; ++i)
    for (auto& [c, v] : rows[i]) {
      A.col.push_back(c);
      A.val.push_back(v);
    }

  auto deflate = [&](std::vector<double>& v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= m;
    for (double& x : v) x -= mean;
  };

  // inverse power iteration orthogonal to constants
  RandomStream rs(0x5eedf00du);
  std::vector<double> x(m), y(m, 0.0), ax(m);
  for (double& v : x) v = rs.uniform() - 0.5;
  deflate(x);
  double nrm = std::sqrt(dot(x, x));
  for (double& v : x) v /= nrm;

  PoincareReport rep;
  rep.r = r;
  rep.cells = m;
  double mu_prev = 0;
  for (int it = 0; it < 500; ++it) {
    ++rep.iterations;
    std::fill(y.begin(), y.end(), 0.0);
    cg_solve(A, x, y, 1e-12, 20000);
    deflate(y);
    nrm = std::sqrt(dot(y, y));
    if (!(nrm > 0)) throw NumericError("poincare_constant: inverse iteration collapsed");
    for (double& v : y) v /= nrm;
    A.mul(y, ax);
    const double mu = dot(y, ax);
    x = y;
    if (it > 2 && std::abs(mu - mu_prev) <= 1e-12 * std::abs(mu)) {
      mu_prev = mu;
      break;
    }
    mu_prev = mu;
  }
  rep.mu1 = mu_prev;
  rep.c_p = 1.0 / (mu_prev * r * r);
  return rep;
}

std::function<double(const Vec&)> random_bump_function(std::uint64_t seed, const Window& box,
                                                       double floor_value, int n_bumps) {
  RandomStream rs = RandomStream::derive(seed, stream_tag::kInitialData, 0);
  struct Bump {
    Vec mu;
    double amp, inv2s2;
  };
  std::vector<Bump> bumps;
  const double L = std::min(box.side(0), box.side(1));
  for (int b = 0; b < n_bumps; ++b) {
    Bump bp;
    bp.mu = Vec::zero(box.dim());
    for (int a = 0; a < box.dim(); ++a) bp.mu[a] = rs.uniform(box.lo[a], box.hi[a]);
    bp.amp = rs.uniform(0.5, 1.5);
    const double s = rs.uniform(0.15 * L, 0.3 * L);
    bp.inv2s2 = 1.0 / (2 * s * s);
    bumps.push_back(bp);
  }
  return [bumps, floor_value](const Vec& p) {
    double v = floor_value;
    for (const auto& b : bumps) v += b.amp * std::exp(-dist2(p, b.mu) * b.inv2s2);
    return v;
  };
}

}  // namespace perclab
