// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "mflab/error.hpp"

namespace mflab {

using Vec2 = Eigen::Vector2d;

/// Closed axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  bool contains(const Vec2& p) const { return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1; }
  double area() const { return (x1 - x0) * (y1 - y0); }
  bool operator==(const Rect&) const = default;
};

/// Planar workspace: bounds, rectangular obstacles, and a goal in free space.
struct NavMap {
  Rect bounds;
  std::vector<Rect> obstacles;
  Vec2 goal{0.9, 0.9};

  bool in_bounds(const Vec2& p) const { return bounds.contains(p); }

  bool in_obstacle(const Vec2& p) const {
    return std::any_of(obstacles.begin(), obstacles.end(), [&](const Rect& r) { return r.contains(p); });
  }

  bool is_free(const Vec2& p) const { return in_bounds(p) && !in_obstacle(p); }

  void validate() const {
    using detail::require;
    require(bounds.x1 > bounds.x0 && bounds.y1 > bounds.y0, "map bounds must have positive area");
    for (const auto& r : obstacles) {
      require(r.x1 > r.x0 && r.y1 > r.y0, "obstacle must have positive area");
      require(r.x0 >= bounds.x0 && r.x1 <= bounds.x1 && r.y0 >= bounds.y0 && r.y1 <= bounds.y1,
              "obstacle must lie within bounds");
    }
    require(is_free(goal), "goal must lie in free space");
  }
};

namespace detail {

// Liang-Barsky: does the closed segment p + t (q - p), t in [0, 1], meet the
// closed rectangle?
inline bool segment_hits_rect(const Vec2& p, const Vec2& q, const Rect& r) {
  double t0 = 0.0, t1 = 1.0;
  const double lo[2] = {r.x0, r.y0};
  const double hi[2] = {r.x1, r.y1};
  for (int a = 0; a < 2; ++a) {
    const double d = q[a] - p[a];
    if (d == 0.0) {
      if (p[a] < lo[a] || p[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - p[a]) / d;
    double tb = (hi[a] - p[a]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace detail

/// True iff the segment pq avoids every obstacle. Touching an obstacle's
/// boundary counts as blocked.
inline bool visible(const NavMap& map, const Vec2& p, const Vec2& q) {
  detail::require(map.in_bounds(p) && map.in_bounds(q), "visible: point out of bounds");
  // Canonical endpoint order keeps the predicate exactly symmetric.
  const bool swap = std::make_pair(q.x(), q.y()) < std::make_pair(p.x(), p.y());
  const Vec2& a = swap ? q : p;
  const Vec2& b = swap ? p : q;
  for (const auto& r : map.obstacles)
    if (detail::segment_hits_rect(a, b, r)) return false;
  return true;
}

}  // namespace mflab
