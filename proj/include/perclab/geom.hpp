#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace perclab {

// Point or displacement in R^d, d in {2,3}. Fixed storage, runtime dimension.
class Vec {
 public:
  constexpr Vec() = default;
  constexpr Vec(double x, double y) : c_{x, y, 0.0}, d_(2) {}
  constexpr Vec(double x, double y, double z) : c_{x, y, z}, d_(3) {}

  static Vec zero(int d) { return d == 3 ? Vec(0.0, 0.0, 0.0) : Vec(0.0, 0.0); }

  int dim() const { return d_; }
  double operator[](int i) const { return c_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return c_[static_cast<std::size_t>(i)]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < d_; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < d_; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < d_; ++i) c_[i] *= s;
    return *this;
  }

  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator*(Vec a, double s) { return a *= s; }

  double dot(const Vec& o) const {
    double s = 0;
    for (int i = 0; i < d_; ++i) s += c_[i] * o.c_[i];
    return s;
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }

  bool operator==(const Vec& o) const {
    if (d_ != o.d_) return false;
    for (int i = 0; i < d_; ++i)
      if (c_[i] != o.c_[i]) return false;
    return true;
  }

 private:
  std::array<double, 3> c_{0.0, 0.0, 0.0};
  int d_ = 2;
};

inline double dist2(const Vec& a, const Vec& b) { return (a - b).norm2(); }
inline double dist(const Vec& a, const Vec& b) { return (a - b).norm(); }

// Coordinatewise lexicographic order; coordinates within tol compare equal.
inline bool lex_less(const Vec& a, const Vec& b, double tol) {
  for (int i = 0; i < a.dim(); ++i) {
    if (a[i] < b[i] - tol) return true;
    if (a[i] > b[i] + tol) return false;
  }
  return false;
}

// Axis-aligned box [lo, hi).
struct Window {
  Vec lo, hi;

  int dim() const { return lo.dim(); }
  double side(int i) const { return hi[i] - lo[i]; }
  double volume() const {
    double v = 1;
    for (int i = 0; i < dim(); ++i) v *= side(i);
    return v;
  }
  double diagonal() const {
    double s = 0;
    for (int i = 0; i < dim(); ++i) s += side(i) * side(i);
    return std::sqrt(s);
  }
  bool contains(const Vec& x) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] || x[i] >= hi[i]) return false;
    return true;
  }
  bool degenerate() const {
    if (lo.dim() != hi.dim()) return true;
    for (int i = 0; i < dim(); ++i)
      if (!(hi[i] > lo[i])) return true;
    return false;
  }

  static Window centered(int d, double half) {
    Window w;
    w.lo = Vec::zero(d);
    w.hi = Vec::zero(d);
    for (int i = 0; i < d; ++i) {
      w.lo[i] = -half;
      w.hi[i] = half;
    }
    return w;
  }
};

// Volume of the unit d-ball times r^d.
inline double euclidean_ball_volume(int d, double r) {
  const double pi = 3.14159265358979323846;
  return d == 2 ? pi * r * r : 4.0 / 3.0 * pi * r * r * r;
}

}  // namespace perclab
