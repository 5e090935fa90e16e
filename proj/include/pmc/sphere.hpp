#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pmc/error.hpp"

namespace pmc {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double half_pi = 0.5 * std::numbers::pi;
inline constexpr double angle_tolerance = 1e-12;

// Maps any angle into [-pi, pi).
inline double wrap_angle(double a) {
  if (a >= -pi && a < pi) return a;
  double w = std::fmod(a + pi, two_pi);
  if (w < 0) w += two_pi;
  w -= pi;
  return w >= pi ? w - two_pi : w;
}

// Spherical coordinates of a point on S^{D-1}:
// theta[0] in [-pi, pi), theta[k] in [-pi/2, pi/2] for k >= 1.
class AngleVector {
 public:
  AngleVector() = default;
  explicit AngleVector(std::vector<double> theta) : theta_(std::move(theta)) {
    if (theta_.empty()) throw ValidationError("angle vector needs D-1 >= 1 coordinates");
    theta_[0] = wrap_angle(theta_[0]);
    for (std::size_t k = 1; k < theta_.size(); ++k) {
      if (!(std::abs(theta_[k]) <= half_pi + angle_tolerance))
        throw ValidationError("angle coordinate " + std::to_string(k) + " outside [-pi/2, pi/2]");
      theta_[k] = std::clamp(theta_[k], -half_pi, half_pi);
    }
  }

  std::size_t size() const noexcept { return theta_.size(); }
  int dimension() const noexcept { return static_cast<int>(theta_.size()) + 1; }
  double operator[](std::size_t k) const { return theta_[k]; }
  const std::vector<double>& values() const noexcept { return theta_; }

 private:
  std::vector<double> theta_;
};

class UnitVector {
 public:
  UnitVector() = default;
  explicit UnitVector(std::vector<double> beta) : beta_(std::move(beta)) {
    if (beta_.size() < 2) throw ValidationError("unit vector needs D >= 2");
    double n2 = 0.0;
    for (double b : beta_) n2 += b * b;
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) throw ValidationError("vector is not of unit length");
  }

  // Scales a nonzero vector onto the sphere.
  static UnitVector normalized(std::vector<double> v) {
    double n2 = 0.0;
    for (double b : v) n2 += b * b;
    if (!(n2 > 0.0) || !std::isfinite(n2)) throw ValidationError("cannot normalize a zero or non-finite vector");
    const double n = std::sqrt(n2);
    for (double& b : v) b /= n;
    return UnitVector(std::move(v));
  }

  std::size_t size() const noexcept { return beta_.size(); }
  double operator[](std::size_t k) const { return beta_[k]; }
  const std::vector<double>& values() const noexcept { return beta_; }
  std::span<const double> span() const noexcept { return beta_; }

 private:
  std::vector<double> beta_;
};

// beta_1 = cos t_{D-1} ... cos t_2 cos t_1, beta_2 = cos t_{D-1} ... cos t_2 sin t_1,
// ..., beta_D = sin t_{D-1}   (1-based in this comment; storage is 0-based).
inline UnitVector to_unit(const AngleVector& theta) {
  const std::size_t m = theta.size();
  std::vector<double> beta(m + 1);
  // tail[k] = prod_{q >= k} cos theta[q]
  std::vector<double> tail(m + 1, 1.0);
  for (std::size_t k = m; k-- > 1;) tail[k] = tail[k + 1] * std::cos(theta[k]);
  beta[0] = tail[1] * std::cos(theta[0]);
  beta[1] = tail[1] * std::sin(theta[0]);
  for (std::size_t b = 2; b <= m; ++b) beta[b] = tail[b] * std::sin(theta[b - 1]);
  return UnitVector(std::move(beta));
}

// Inverse of to_unit. At a pole (all leading components zero) the undetermined
// lower angles are set to 0.
inline AngleVector from_unit(const UnitVector& beta) {
  const std::size_t dim = beta.size();
  std::vector<double> theta(dim - 1);
  double lead2 = beta[0] * beta[0] + beta[1] * beta[1];
  theta[0] = std::atan2(beta[1], beta[0]);
  for (std::size_t b = 2; b < dim; ++b) {
    theta[b - 1] = std::atan2(beta[b], std::sqrt(lead2));
    lead2 += beta[b] * beta[b];
  }
  // Pole: everything below the last nonzero latitude is undefined.
  for (std::size_t b = dim - 1; b >= 2; --b) {
    double below = 0.0;
    for (std::size_t q = 0; q < b; ++q) below += beta[q] * beta[q];
    if (below == 0.0) {
      for (std::size_t q = 0; q + 1 < b; ++q) theta[q] = 0.0;
      break;
    }
  }
  if (theta[0] >= pi) theta[0] -= two_pi;
  return AngleVector(std::move(theta));
}

// Great-circle distance arccos(a'b), evaluated as 2*atan2(|a-b|, |a+b|), which is
// the same quantity without the cancellation of arccos near 0 and pi.
inline double geodesic(const UnitVector& a, const UnitVector& b) {
  double diff2 = 0.0, sum2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k], s = a[k] + b[k];
    diff2 += d * d;
    sum2 += s * s;
  }
  return std::clamp(2.0 * std::atan2(std::sqrt(diff2), std::sqrt(sum2)), 0.0, pi);
}

inline double geodesic(const AngleVector& a, const AngleVector& b) { return geodesic(to_unit(a), to_unit(b)); }

// Axis-aligned box in angle space. The first coordinate is periodic: the box
// covers [lower[0], upper[0]] on the circle, where lower[0] is in [-pi, pi) and
// upper[0] may exceed pi when the box crosses the seam (wrapped()).
class AngleRectangle {
 public:
  AngleRectangle() = default;
  AngleRectangle(std::vector<double> lower, std::vector<double> upper) : lo_(std::move(lower)), hi_(std::move(upper)) {
    if (lo_.empty() || lo_.size() != hi_.size()) throw ValidationError("rectangle bounds must have equal, nonzero size");
    normalize();
  }

  // All of Theta for dimension D.
  static AngleRectangle full(int dimension) {
    std::vector<double> lo(dimension - 1, -half_pi), hi(dimension - 1, half_pi);
    lo[0] = -pi;
    hi[0] = pi;
    return AngleRectangle(std::move(lo), std::move(hi));
  }

  std::size_t size() const noexcept { return lo_.size(); }
  int dimension() const noexcept { return static_cast<int>(lo_.size()) + 1; }
  const std::vector<double>& lower() const noexcept { return lo_; }
  const std::vector<double>& upper() const noexcept { return hi_; }
  double width(std::size_t k) const { return hi_[k] - lo_[k]; }
  bool full_circle() const { return width(0) >= two_pi - angle_tolerance; }
  bool wrapped() const { return !full_circle() && hi_[0] > pi; }

  // Unwraps a first coordinate into this box's frame [lower0, lower0 + 2pi).
  double unwrap(double a) const {
    double u = a;
    while (u < lo_[0] - angle_tolerance) u += two_pi;
    while (u >= lo_[0] + two_pi - angle_tolerance) u -= two_pi;
    return u;
  }

  bool contains(const AngleVector& theta, double tol = angle_tolerance) const {
    if (!full_circle()) {
      const double u = unwrap(theta[0]);
      if (u < lo_[0] - tol || u > hi_[0] + tol) return false;
    }
    for (std::size_t k = 1; k < lo_.size(); ++k)
      if (theta[k] < lo_[k] - tol || theta[k] > hi_[k] + tol) return false;
    return true;
  }

  bool contains(const AngleRectangle& inner, double tol = angle_tolerance) const {
    if (!full_circle()) {
      if (inner.full_circle()) return false;
      const double u = unwrap(inner.lo_[0]);
      if (u < lo_[0] - tol || u + inner.width(0) > hi_[0] + tol) return false;
    }
    for (std::size_t k = 1; k < lo_.size(); ++k)
      if (inner.lo_[k] < lo_[k] - tol || inner.hi_[k] > hi_[k] + tol) return false;
    return true;
  }

  AngleVector center() const {
    std::vector<double> c(lo_.size());
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = 0.5 * (lo_[k] + hi_[k]);
    return AngleVector(std::move(c));
  }

  // Upper bound on the geodesic length of a straight coordinate path spanning
  // the box: the metric is diagonal with coefficient prod_{q>k} cos^2 theta_q on
  // coordinate k, bounded by its maximum over the box. Non-increasing under
  // inclusion; capped at pi.
  double diameter_bound() const { return path_bound(1.0); }

  // Every point of the box lies within this geodesic distance of center().
  double radius_bound() const { return path_bound(0.5); }

  friend bool operator==(const AngleRectangle&, const AngleRectangle&) = default;

 private:
  void normalize() {
    for (std::size_t k = 0; k < lo_.size(); ++k)
      if (!(lo_[k] <= hi_[k] + angle_tolerance)) throw ValidationError("rectangle lower bound exceeds upper bound");
    if (width(0) >= two_pi - angle_tolerance) {
      lo_[0] = -pi;
      hi_[0] = pi;
    } else {
      const double shift = wrap_angle(lo_[0]) - lo_[0];
      lo_[0] += shift;
      hi_[0] += shift;
    }
    for (std::size_t k = 1; k < lo_.size(); ++k) {
      lo_[k] = std::clamp(lo_[k], -half_pi, half_pi);
      hi_[k] = std::clamp(hi_[k], lo_[k], half_pi);
    }
  }

  static double max_cos(double lo, double hi) {
    if (lo <= 0.0 && hi >= 0.0) return 1.0;
    return std::max(std::cos(lo), std::cos(hi));
  }

  double path_bound(double fraction) const {
    const std::size_t m = lo_.size();
    double total = 0.0, scale = 1.0;
    for (std::size_t k = m; k-- > 0;) {
      const double w = fraction * width(k);
      total += scale * scale * w * w;
      if (k >= 1) scale *= max_cos(lo_[k], hi_[k]);
    }
    return std::min(pi, std::sqrt(total));
  }

  std::vector<double> lo_, hi_;
};

// Minimal box containing the points. In the first coordinate the points are
// enclosed by the shortest arc: when the largest gap between consecutive values
// is not the one across the seam, the low cluster is shifted by +2pi. Wrapping
// happens only when it strictly shortens the arc.
inline AngleRectangle enclosing_rectangle(std::span<const AngleVector> points) {
  if (points.empty()) throw ValidationError("cannot enclose an empty point set");
  const std::size_t m = points[0].size();
  std::vector<double> lo(m), hi(m);
  for (std::size_t k = 1; k < m; ++k) {
    lo[k] = hi[k] = points[0][k];
    for (const auto& p : points) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  }
  std::vector<double> first;
  first.reserve(points.size());
  for (const auto& p : points) first.push_back(p[0]);
  std::sort(first.begin(), first.end());
  lo[0] = first.front();
  hi[0] = first.back();
  const double plain_width = hi[0] - lo[0];
  double best_gap = -1.0;
  std::size_t at = 0;
  for (std::size_t q = 0; q + 1 < first.size(); ++q) {
    const double gap = first[q + 1] - first[q];
    if (gap > best_gap) {
      best_gap = gap;
      at = q;
    }
  }
  if (best_gap >= 0.0 && two_pi - best_gap < plain_width - angle_tolerance) {
    lo[0] = first[at + 1];
    hi[0] = first[at] + two_pi;
  }
  return AngleRectangle(std::move(lo), std::move(hi));
}

// Minimal box containing the points, measuring the first coordinate in the frame
// of `frame` (so the result lies inside `frame` whenever the points do).
inline AngleRectangle enclosing_rectangle_within(std::span<const AngleVector> points, const AngleRectangle& frame) {
  if (points.empty()) throw ValidationError("cannot enclose an empty point set");
  if (frame.full_circle()) return enclosing_rectangle(points);
  const std::size_t m = points[0].size();
  std::vector<double> lo(m), hi(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double v0 = k == 0 ? frame.unwrap(points[0][0]) : points[0][k];
    lo[k] = hi[k] = v0;
    for (const auto& p : points) {
      const double v = k == 0 ? frame.unwrap(p[0]) : p[k];
      lo[k] = std::min(lo[k], v);
      hi[k] = std::max(hi[k], v);
    }
  }
  return AngleRectangle(std::move(lo), std::move(hi));
}

// Grows each side by margin[k] (first coordinate saturating at the full circle,
// others clamped to [-pi/2, pi/2]), then intersects with `frame`.
inline AngleRectangle inflate_within(const AngleRectangle& box, std::span<const double> margin,
                                     const AngleRectangle& frame) {
  std::vector<double> lo = box.lower(), hi = box.upper();
  for (std::size_t k = 0; k < lo.size(); ++k) {
    lo[k] -= margin[k];
    hi[k] += margin[k];
  }
  if (!frame.full_circle()) {
    // Express in the frame's coordinates before clamping.
    const double base = frame.unwrap(box.lower()[0]) - box.lower()[0];
    lo[0] = std::max(lo[0] + base, frame.lower()[0]);
    hi[0] = std::min(hi[0] + base, frame.upper()[0]);
  } else if (hi[0] - lo[0] >= two_pi) {
    lo[0] = -pi;
    hi[0] = pi;
  }
  for (std::size_t k = 1; k < lo.size(); ++k) {
    lo[k] = std::max(lo[k], frame.lower()[k]);
    hi[k] = std::min(hi[k], frame.upper()[k]);
  }
  return AngleRectangle(std::move(lo), std::move(hi));
}

}  // namespace pmc
