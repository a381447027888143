// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mflab/cloud.hpp"
#include "mflab/error.hpp"
#include "mflab/graph.hpp"
#include "mflab/navmap.hpp"
#include "mflab/rng.hpp"

namespace mflab {

/// Unit square centred on the goal with two block obstacles. The filters have
/// no bias term, so a field that vanishes at the goal is only representable
/// when the goal sits at the origin of the position features.
inline NavMap default_nav_map() {
  NavMap m;
  m.bounds = {-0.5, -0.5, 0.5, 0.5};
  m.obstacles = {{0.15, 0.15, 0.3, 0.3}, {-0.3, 0.1, -0.15, 0.35}};
  m.goal = Vec2(0.0, 0.0);
  return m;
}

/// Uniform rejection sampling over the free space.
inline PointCloud sample_free_space(const NavMap& map, Eigen::Index n, std::uint64_t seed) {
  map.validate();
  detail::require(n >= 1, "sample_free_space: n must be >= 1");
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.resize(n, 2);
  cloud.intrinsic_dim = 2;
  cloud.seed = seed;
  std::uint64_t draws = 0;
  Eigen::Index accepted = 0;
  while (accepted < n) {
    const Vec2 p(uniform(rng, map.bounds.x0, map.bounds.x1), uniform(rng, map.bounds.y0, map.bounds.y1));
    ++draws;
    if (!map.in_obstacle(p)) cloud.points.row(accepted++) = p.transpose();
    if (draws >= 1'000'000 && static_cast<double>(accepted) < 0.01 * static_cast<double>(draws))
      throw Error(Errc::map_infeasible, "free-space acceptance rate below 1%");
  }
  return cloud;
}

/// Kernel graph with weight 0 between points that cannot see each other.
inline GeometricGraph build_nav_graph(const NavMap& map, const PointCloud& cloud, double epsilon) {
  return build_graph(cloud, epsilon, DistanceMetric::obstacle_aware, &map);
}

inline Eigen::Index nearest_node(const PointCloud& cloud, const Vec2& p) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const double d = (cloud.points.row(i).head<2>().transpose() - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

struct NavDataset {
  PointCloud cloud;
  Eigen::Index goal_node = 0;
  std::vector<Eigen::Index> labeled_indices;  // ascending
  std::vector<Vec2> labels;                   // unit directions, parallel to labeled_indices
  std::vector<std::vector<Eigen::Index>> trajectories;
  std::vector<double> distance_to_goal;  // Dijkstra distances, +inf when unreachable
  std::vector<Eigen::Index> next_hop;    // successor toward the goal, -1 when none
  int skipped = 0;                       // starts with no path to the goal
};

/// Shortest paths to the goal node over pairs that see each other, carry
/// positive kernel weight and are at most max_edge_length apart. Nodes on the
/// paths from n_trajectories random starts are labeled with the unit vector
/// toward their successor.
inline NavDataset dijkstra_labels(const GeometricGraph& graph, const PointCloud& cloud, const NavMap& map,
                                  int n_trajectories, std::uint64_t seed,
                                  double max_edge_length = std::numeric_limits<double>::infinity()) {
  using detail::require;
  require(graph.n == cloud.size(), "dijkstra_labels: graph and cloud sizes differ");
  require(n_trajectories >= 0, "dijkstra_labels: n_trajectories must be >= 0");
  const Eigen::Index n = cloud.size();
  auto pos = [&](Eigen::Index i) -> Vec2 { return cloud.points.row(i).head<2>().transpose(); };

  NavDataset data;
  data.cloud = cloud;
  data.goal_node = nearest_node(cloud, map.goal);
  data.distance_to_goal.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  data.next_hop.assign(static_cast<std::size_t>(n), -1);

  // Dense O(n^2) Dijkstra.
  std::vector<char> done(static_cast<std::size_t>(n), 0);
  auto& dist = data.distance_to_goal;
  dist[static_cast<std::size_t>(data.goal_node)] = 0.0;
  for (Eigen::Index iter = 0; iter < n; ++iter) {
    Eigen::Index u = -1;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!done[static_cast<std::size_t>(i)] && std::isfinite(dist[static_cast<std::size_t>(i)]) &&
          (u < 0 || dist[static_cast<std::size_t>(i)] < dist[static_cast<std::size_t>(u)]))
        u = i;
    if (u < 0) break;
    done[static_cast<std::size_t>(u)] = 1;
    for (Eigen::Index v = 0; v < n; ++v) {
      if (v == u || done[static_cast<std::size_t>(v)] || !(graph.adjacency(u, v) > 0.0)) continue;
      const double len = (pos(u) - pos(v)).norm();
      if (len > max_edge_length || !visible(map, pos(u), pos(v))) continue;
      if (dist[static_cast<std::size_t>(u)] + len < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + len;
        data.next_hop[static_cast<std::size_t>(v)] = u;
      }
    }
  }

  Rng rng(seed);
  std::vector<Vec2> label_of(static_cast<std::size_t>(n));
  std::vector<char> labeled(static_cast<std::size_t>(n), 0);
  for (int t = 0; t < n_trajectories; ++t) {
    const auto start = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    if (!std::isfinite(dist[static_cast<std::size_t>(start)])) {
      ++data.skipped;
      continue;
    }
    std::vector<Eigen::Index> path;
    for (Eigen::Index u = start; u != data.goal_node; u = data.next_hop[static_cast<std::size_t>(u)]) {
      const Eigen::Index v = data.next_hop[static_cast<std::size_t>(u)];
      path.push_back(u);
      labeled[static_cast<std::size_t>(u)] = 1;
      label_of[static_cast<std::size_t>(u)] = (pos(v) - pos(u)).normalized();
    }
    data.trajectories.push_back(std::move(path));
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (labeled[static_cast<std::size_t>(i)]) {
      data.labeled_indices.push_back(i);
      data.labels.push_back(label_of[static_cast<std::size_t>(i)]);
    }
  return data;
}

// ---- layered graph filters ----------------------------------------------------

enum class Activation { tanh, none };

/// One graph-filter layer: Y = sum_k S^k X H_k followed by the activation.
/// taps[k] is the in x out matrix H_k.
struct FilterLayer {
  int in = 2;
  int out = 2;
  std::vector<Eigen::MatrixXd> taps;
  Activation activation = Activation::none;

  std::size_t parameter_count() const { return taps.size() * static_cast<std::size_t>(in * out); }
};

struct FilterNet {
  std::vector<FilterLayer> layers;

  std::vector<int> feature_widths() const {
    std::vector<int> w;
    if (layers.empty()) return w;
    w.push_back(layers.front().in);
    for (const auto& l : layers) w.push_back(l.out);
    return w;
  }

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& l : layers) c += l.parameter_count();
    return c;
  }

  /// Flat parameter view, layer by layer, tap by tap, column-major inside a tap.
  Eigen::VectorXd parameters() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (const auto& l : layers)
      for (const auto& h : l.taps) {
        p.segment(k, h.size()) = Eigen::Map<const Eigen::VectorXd>(h.data(), h.size());
        k += h.size();
      }
    return p;
  }

  void set_parameters(const Eigen::VectorXd& p) {
    detail::require(p.size() == static_cast<Eigen::Index>(parameter_count()), "set_parameters: size mismatch");
    Eigen::Index k = 0;
    for (auto& l : layers)
      for (auto& h : l.taps) {
        Eigen::Map<Eigen::VectorXd>(h.data(), h.size()) = p.segment(k, h.size());
        k += h.size();
      }
  }
};

/// widths {2, 2} gives the 1-layer filter, {2, hidden, 2} the 2-layer one.
/// Taps are drawn uniformly from [-0.1, 0.1].
inline FilterNet make_filter_net(const std::vector<int>& widths, int tap_count, bool hidden_tanh, std::uint64_t seed) {
  using detail::require;
  require(widths.size() >= 2 && widths.front() == 2 && widths.back() == 2,
          "make_filter_net: widths must start and end at 2");
  require(tap_count >= 1, "make_filter_net: tap_count must be >= 1");
  Rng rng(seed);
  FilterNet net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    require(widths[l] >= 1 && widths[l + 1] >= 1, "make_filter_net: widths must be positive");
    FilterLayer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    layer.activation = (l + 2 < widths.size() && hidden_tanh) ? Activation::tanh : Activation::none;
    for (int k = 0; k < tap_count; ++k) {
      Eigen::MatrixXd h(layer.in, layer.out);
      for (Eigen::Index c = 0; c < h.cols(); ++c)
        for (Eigen::Index r = 0; r < h.rows(); ++r) h(r, c) = uniform(rng, -0.1, 0.1);
      layer.taps.push_back(std::move(h));
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline FilterNet make_filter_net(int layer_count, int hidden, int tap_count, bool hidden_tanh, std::uint64_t seed) {
  detail::require(layer_count == 1 || layer_count == 2, "make_filter_net: layer count must be 1 or 2");
  return layer_count == 1 ? make_filter_net({2, 2}, tap_count, hidden_tanh, seed)
                          : make_filter_net({2, hidden, 2}, tap_count, hidden_tanh, seed);
}

/// W / lambda_max(W) with lambda_max from power iteration, so powers of the
/// shift stay bounded.
inline Eigen::MatrixXd normalized_gso(const Eigen::MatrixXd& adjacency) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(adjacency.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Eigen::VectorXd w = adjacency * v;
    const double next = w.norm();
    detail::require(next > 0.0, "normalized_gso: adjacency has no positive spectrum", Errc::numerical_failure);
    v = w / next;
    if (std::abs(next - lambda) <= 1e-13 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return adjacency / lambda;
}

namespace detail {

struct LayerCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> powers;  // S^k X, kept when in <= out
  Eigen::MatrixXd output;               // after activation
};

inline Eigen::MatrixXd layer_forward(const FilterLayer& l, const Eigen::MatrixXd& gso, const Eigen::MatrixXd& x,
                                     LayerCache* cache) {
  const auto K = l.taps.size();
  Eigen::MatrixXd y;
  if (l.in <= l.out) {
    std::vector<Eigen::MatrixXd> powers{x};
    for (std::size_t k = 1; k < K; ++k) powers.push_back(gso * powers.back());
    y = powers[0] * l.taps[0];
    for (std::size_t k = 1; k < K; ++k) y += powers[k] * l.taps[k];
    if (cache) cache->powers = std::move(powers);
  } else {
    // Horner on the (narrower) output side.
    y = x * l.taps[K - 1];
    for (std::size_t k = K - 1; k-- > 0;) y = gso * y + x * l.taps[k];
  }
  if (l.activation == Activation::tanh) y = y.array().tanh().matrix();
  if (cache) {
    cache->input = x;
    cache->output = y;
  }
  return y;
}

}  // namespace detail

/// Network output for node features X (n x 2).
inline Eigen::MatrixXd forward(const FilterNet& net, const Eigen::MatrixXd& gso, const Eigen::MatrixXd& x) {
  detail::require(gso.rows() == gso.cols() && gso.rows() == x.rows(), "forward: GSO does not match features");
  detail::require(!net.layers.empty() && x.cols() == net.layers.front().in, "forward: feature width mismatch");
  Eigen::MatrixXd h = x;
  for (const auto& l : net.layers) h = detail::layer_forward(l, gso, h, nullptr);
  return h;
}

/// Mean over labeled nodes of the squared distance between output and label.
inline double nav_loss(const Eigen::MatrixXd& out, const NavDataset& data) {
  double s = 0.0;
  for (std::size_t k = 0; k < data.labeled_indices.size(); ++k)
    s += (out.row(data.labeled_indices[k]).transpose() - data.labels[k]).squaredNorm();
  return data.labeled_indices.empty() ? 0.0 : s / static_cast<double>(data.labeled_indices.size());
}

/// Loss and its gradient with respect to net.parameters(), by reverse-mode
/// accumulation through the taps and activations. The GSO must be symmetric.
inline double loss_and_gradient(const FilterNet& net, const Eigen::MatrixXd& gso, const Eigen::MatrixXd& x,
                                const NavDataset& data, Eigen::VectorXd& grad) {
  const std::size_t L = net.layers.size();
  std::vector<detail::LayerCache> caches(L);
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < L; ++l) h = detail::layer_forward(net.layers[l], gso, h, &caches[l]);
  const double loss = nav_loss(h, data);

  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  const double m = static_cast<double>(std::max<std::size_t>(data.labeled_indices.size(), 1));
  for (std::size_t k = 0; k < data.labeled_indices.size(); ++k)
    d_out.row(data.labeled_indices[k]) = 2.0 * (h.row(data.labeled_indices[k]) - data.labels[k].transpose()) / m;

  std::vector<std::vector<Eigen::MatrixXd>> grads(L);
  for (std::size_t l = L; l-- > 0;) {
    const FilterLayer& layer = net.layers[l];
    const detail::LayerCache& c = caches[l];
    const std::size_t K = layer.taps.size();
    Eigen::MatrixXd dy = d_out;
    if (layer.activation == Activation::tanh)
      dy = (dy.array() * (1.0 - c.output.array().square())).matrix();
    grads[l].resize(K);
    Eigen::MatrixXd dx;
    if (layer.in <= layer.out) {
      for (std::size_t k = 0; k < K; ++k) grads[l][k] = c.powers[k].transpose() * dy;
      if (l > 0) {
        dx = dy * layer.taps[K - 1].transpose();
        for (std::size_t k = K - 1; k-- > 0;) dx = gso * dx + dy * layer.taps[k].transpose();
      }
    } else {
      Eigen::MatrixXd q = dy;
      if (l > 0) dx = q * layer.taps[0].transpose();
      grads[l][0] = c.input.transpose() * q;
      for (std::size_t k = 1; k < K; ++k) {
        q = gso * q;
        grads[l][k] = c.input.transpose() * q;
        if (l > 0) dx += q * layer.taps[k].transpose();
      }
    }
    d_out = std::move(dx);
  }

  grad.resize(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < L; ++l)
    for (const auto& g : grads[l]) {
      grad.segment(k, g.size()) = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
      k += g.size();
    }
  return loss;
}

struct TrainResult {
  FilterNet model;
  std::vector<double> loss_history;  // loss before each step, then the final loss
};

/// Full-batch gradient descent on the labeled nodes.
inline TrainResult train_filter(FilterNet model, const Eigen::MatrixXd& gso, const Eigen::MatrixXd& x,
                                const NavDataset& data, int epochs, double lr) {
  detail::require(epochs >= 0, "train_filter: epochs must be >= 0");
  detail::require(lr > 0.0 && std::isfinite(lr), "train_filter: lr must be positive");
  TrainResult r;
  r.loss_history.reserve(static_cast<std::size_t>(epochs) + 1);
  Eigen::VectorXd params = model.parameters();
  Eigen::VectorXd grad;
  for (int e = 0; e <= epochs; ++e) {
    const double loss = loss_and_gradient(model, gso, x, data, grad);
    if (!std::isfinite(loss) || !grad.allFinite())
      throw Error(Errc::diverged, "training diverged at epoch " + std::to_string(e));
    r.loss_history.push_back(loss);
    if (e == epochs) break;
    params -= lr * grad;
    model.set_parameters(params);
  }
  r.model = std::move(model);
  return r;
}

// ---- rollouts -------------------------------------------------------------------

struct RolloutOptions {
  double step_size = 0.02;
  double goal_radius = 0.05;
  int max_steps = 500;
};

struct RolloutResult {
  std::vector<Vec2> trajectory;
  bool success = false;
  int steps = 0;
};

/// Moves along the direction stored at the node nearest the agent. Fails on
/// leaving the bounds, crossing an obstacle, a zero direction, or running out
/// of steps; succeeds inside the goal radius.
inline RolloutResult rollout(const Eigen::MatrixXd& field, const PointCloud& cloud, const NavMap& map, const Vec2& start,
                             const RolloutOptions& opt = {}) {
  detail::require(field.rows() == cloud.size() && field.cols() == 2, "rollout: field must be n x 2");
  RolloutResult r;
  Vec2 p = start;
  r.trajectory.push_back(p);
  if ((p - map.goal).norm() <= opt.goal_radius) {
    r.success = true;
    return r;
  }
  if (!map.is_free(p)) return r;
  for (int s = 0; s < opt.max_steps; ++s) {
    const Vec2 d = field.row(nearest_node(cloud, p)).transpose();
    const double len = d.norm();
    if (!(len > 0.0) || !std::isfinite(len)) return r;
    const Vec2 q = p + opt.step_size * d / len;
    if (!map.in_bounds(q) || !visible(map, p, q)) return r;
    p = q;
    r.trajectory.push_back(p);
    r.steps = s + 1;
    if ((p - map.goal).norm() <= opt.goal_radius) {
      r.success = true;
      return r;
    }
  }
  return r;
}

inline RolloutResult rollout(const Eigen::MatrixXd& field, const PointCloud& cloud, const NavMap& map,
                             Eigen::Index start_node, const RolloutOptions& opt = {}) {
  detail::require(start_node >= 0 && start_node < cloud.size(), "rollout: start node out of range");
  return rollout(field, cloud, map, Vec2(cloud.points.row(start_node).head<2>().transpose()), opt);
}

/// Successful rollouts from n_tests seeded free-space starts.
inline int evaluate(const Eigen::MatrixXd& field, const PointCloud& cloud, const NavMap& map, int n_tests,
                    std::uint64_t seed, const RolloutOptions& opt = {}) {
  detail::require(n_tests >= 0, "evaluate: n_tests must be >= 0");
  if (n_tests == 0) return 0;
  const PointCloud starts = sample_free_space(map, n_tests, seed);
  int wins = 0;
  for (Eigen::Index i = 0; i < starts.size(); ++i)
    wins += rollout(field, cloud, map, Vec2(starts.points.row(i).transpose()), opt).success;
  return wins;
}

inline int evaluate(const FilterNet& model, const Eigen::MatrixXd& gso, const PointCloud& cloud, const NavMap& map,
                    int n_tests, std::uint64_t seed, const RolloutOptions& opt = {}) {
  return evaluate(forward(model, gso, cloud.points), cloud, map, n_tests, seed, opt);
}

// ---- end-to-end pipeline ------------------------------------------------------------

struct NavConfig {
  Eigen::Index n = 413;
  double epsilon = 0.002;
  int layers = 2;
  int hidden = 32;
  int taps = 5;
  bool tanh = true;
  int epochs = 3000;
  double lr = 0.0002;
  int n_trajectories = 4;
  double max_edge_length = 0.1;
  std::uint64_t seed = 1;
  RolloutOptions rollout;
};

/// Everything derived deterministically from (map, config) before training.
struct NavProblem {
  PointCloud cloud;
  GeometricGraph graph;
  Eigen::MatrixXd gso;
  NavDataset data;
};

inline NavProblem prepare_nav_problem(const NavMap& map, const NavConfig& cfg) {
  NavProblem p;
  p.cloud = sample_free_space(map, cfg.n, mix64(cfg.seed ^ 0x636c6f7564ULL));
  p.graph = build_nav_graph(map, p.cloud, cfg.epsilon);
  p.gso = normalized_gso(p.graph.adjacency);
  p.data = dijkstra_labels(p.graph, p.cloud, map, cfg.n_trajectories, mix64(cfg.seed ^ 0x7472616aULL),
                           cfg.max_edge_length);
  return p;
}

/// Success count over n_tests starts drawn from a stream derived from seed.
inline int evaluate(const NavProblem& p, const FilterNet& model, const NavMap& map, int n_tests, std::uint64_t seed,
                    const RolloutOptions& opt = {}) {
  return evaluate(model, p.gso, p.cloud, map, n_tests, mix64(seed ^ 0x74657374ULL), opt);
}

}  // namespace mflab
