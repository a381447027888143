// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include "mflab/error.hpp"

namespace mflab {

using Point = Eigen::VectorXd;

enum class ManifoldKind { circle, flat_torus_2d };

/// Closed-form test manifolds. The circle of radius `scale` lives in R^2; the
/// flat 2-torus of side `scale` is the product of two circles of radius
/// scale / (2 pi) in R^4. The measure is always the normalized uniform one.
struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::circle;
  double scale = 1.0;

  static ManifoldSpec circle(double radius) { return {ManifoldKind::circle, radius}; }
  static ManifoldSpec flat_torus(double side) { return {ManifoldKind::flat_torus_2d, side}; }

  int intrinsic_dim() const { return kind == ManifoldKind::circle ? 1 : 2; }
  int ambient_dim() const { return kind == ManifoldKind::circle ? 2 : 4; }

  /// Riemannian volume: 2 pi R for the circle, L^2 for the torus.
  double volume() const {
    return kind == ManifoldKind::circle ? 2.0 * std::numbers::pi * scale : scale * scale;
  }

  /// Radius of each embedded circle factor.
  double factor_radius() const {
    return kind == ManifoldKind::circle ? scale : scale / (2.0 * std::numbers::pi);
  }

  void validate() const {
    detail::require(std::isfinite(scale) && scale > 0.0, "manifold scale must be positive");
  }

  bool operator==(const ManifoldSpec&) const = default;
};

inline std::string kind_name(ManifoldKind kind) {
  return kind == ManifoldKind::circle ? "circle" : "flat_torus_2d";
}

/// Sampled points, one per row of `points`.
struct PointCloud {
  Eigen::MatrixXd points;
  int intrinsic_dim = 1;
  std::optional<ManifoldSpec> manifold;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return points.rows(); }
  Point point(Eigen::Index i) const { return points.row(i).transpose(); }
};

}  // namespace mflab
