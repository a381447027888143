// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>

#include "mflab/cloud.hpp"
#include "mflab/error.hpp"
#include "mflab/manifold.hpp"
#include "mflab/navmap.hpp"
#include "mflab/rng.hpp"

namespace mflab {

/// Values of a signal on the nodes of a sampled cloud.
using GraphSignal = Eigen::VectorXd;

enum class DistanceMetric { euclidean, obstacle_aware };

/// Dense Gaussian-kernel graph over a point cloud and its Laplacian
/// L = diag(W 1) - W.
struct GeometricGraph {
  Eigen::Index n = 0;
  double epsilon = 0.0;
  Eigen::MatrixXd adjacency;
  Eigen::MatrixXd laplacian;
  DistanceMetric metric = DistanceMetric::euclidean;
};

/// 1 / (n eps (4 pi eps)^{d/2}), the prefactor shared by every kernel sum.
inline double kernel_normalizer(Eigen::Index n, int d, double epsilon) {
  detail::require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
  detail::require(n >= 1, "n must be >= 1");
  return 1.0 / (static_cast<double>(n) * epsilon * std::pow(4.0 * std::numbers::pi * epsilon, 0.5 * d));
}

inline double kernel_weight(const Point& xi, const Point& xj, Eigen::Index n, int d, double epsilon) {
  const double c = kernel_normalizer(n, d, epsilon);
  return c * std::exp(-(xi - xj).squaredNorm() / (4.0 * epsilon));
}

/// Default bandwidth n^{-1/(d+4)}.
inline double default_epsilon(Eigen::Index n, int d) {
  return std::pow(static_cast<double>(n), -1.0 / (d + 4.0));
}

/// Builds W from pairwise kernel weights. With the obstacle-aware metric, pairs
/// whose connecting segment crosses an obstacle get weight 0. The diagonal of W
/// holds the self weight; it cancels in L.
inline GeometricGraph build_graph(const PointCloud& cloud, double epsilon,
                                  DistanceMetric metric = DistanceMetric::euclidean,
                                  const NavMap* map = nullptr) {
  using detail::require;
  require(metric != DistanceMetric::obstacle_aware || map != nullptr,
          "build_graph: obstacle_aware metric requires a map");
  const Eigen::Index n = cloud.size();
  require(n >= 2, "build_graph: cloud must have at least 2 points");
  const double c = kernel_normalizer(n, cloud.intrinsic_dim, epsilon);
  const double inv4eps = 1.0 / (4.0 * epsilon);

  GeometricGraph g;
  g.n = n;
  g.epsilon = epsilon;
  g.metric = metric;
  g.adjacency.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.adjacency(i, i) = c;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double w = c * std::exp(-(cloud.points.row(i) - cloud.points.row(j)).squaredNorm() * inv4eps);
      if (metric == DistanceMetric::obstacle_aware) {
        const Vec2 p = cloud.points.row(i).head<2>().transpose();
        const Vec2 q = cloud.points.row(j).head<2>().transpose();
        if (!visible(*map, p, q)) w = 0.0;
      }
      g.adjacency(i, j) = w;
      g.adjacency(j, i) = w;
    }
  }

  g.laplacian = -g.adjacency;
  for (Eigen::Index i = 0; i < n; ++i) {
    double degree = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) degree += g.adjacency(i, j);
    g.laplacian(i, i) = degree;
  }
  return g;
}

namespace detail {

inline double checked_eval(const ManifoldSignal& f, const Point& x) {
  double v;
  try {
    v = f(x);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::evaluation_error, e.what());
  }
  if (!std::isfinite(v)) throw Error(Errc::evaluation_error, "signal evaluated to non-finite value");
  return v;
}

}  // namespace detail

/// P_n f: the signal's values at the sample points.
inline GraphSignal sample_operator(const ManifoldSignal& f, const PointCloud& cloud) {
  GraphSignal out(cloud.size());
  for (Eigen::Index i = 0; i < cloud.size(); ++i) out[i] = detail::checked_eval(f, cloud.point(i));
  return out;
}

/// Graph Laplacian extended to an arbitrary point x, given the sampled values
/// of f and f(x).
inline double discrete_laplacian_at(const GraphSignal& sampled, double fx, const Point& x,
                                    const PointCloud& cloud, double epsilon) {
  detail::require(sampled.size() == cloud.size(), "discrete_laplacian_at: size mismatch");
  const double c = kernel_normalizer(cloud.size(), cloud.intrinsic_dim, epsilon);
  const double inv4eps = 1.0 / (4.0 * epsilon);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    const double diff = fx - sampled[j];
    if (diff != 0.0)
      sum += diff * std::exp(-(x.transpose() - cloud.points.row(j)).squaredNorm() * inv4eps);
  }
  return c * sum;
}

inline double discrete_laplacian_at(const ManifoldSignal& f, const Point& x, const PointCloud& cloud,
                                    double epsilon) {
  detail::require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
  return discrete_laplacian_at(sample_operator(f, cloud), detail::checked_eval(f, x), x, cloud, epsilon);
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Expectation-form kernel Laplacian at x,
///   1/(eps (4 pi eps)^{d/2}) E_{y~mu}[(f(x) - f(y)) exp(-|x-y|^2 / (4 eps))],
/// estimated from quad_n seeded uniform draws, with its standard error.
inline MonteCarloEstimate functional_laplacian_estimate(const ManifoldSignal& f, const Point& x,
                                                        const ManifoldSpec& manifold, double epsilon,
                                                        Eigen::Index quad_n, std::uint64_t seed) {
  using detail::require;
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
  require(quad_n >= 1, "functional_laplacian_at: quad_n must be >= 1");
  const double c = kernel_normalizer(1, manifold.intrinsic_dim(), epsilon);
  const double inv4eps = 1.0 / (4.0 * epsilon);
  const double fx = detail::checked_eval(f, x);
  PointCloud draws = sample_uniform(manifold, std::max<Eigen::Index>(quad_n, 2), seed);
  const Eigen::Index m = quad_n;
  double mean = 0.0, m2 = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const Point y = draws.point(j);
    const double diff = fx - detail::checked_eval(f, y);
    const double term = diff == 0.0 ? 0.0 : c * diff * std::exp(-(x - y).squaredNorm() * inv4eps);
    const double delta = term - mean;
    mean += delta / static_cast<double>(j + 1);
    m2 += delta * (term - mean);
  }
  MonteCarloEstimate est;
  est.mean = mean;
  est.std_error = m > 1 ? std::sqrt(m2 / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
  return est;
}

inline double functional_laplacian_at(const ManifoldSignal& f, const Point& x, const ManifoldSpec& manifold,
                                      double epsilon, Eigen::Index quad_n, std::uint64_t seed) {
  return functional_laplacian_estimate(f, x, manifold, epsilon, quad_n, seed).mean;
}

}  // namespace mflab
