// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mflab/navigation.hpp"
#include "oracles.hpp"

using namespace mflab;

namespace {

NavMap square_with_block() {
  NavMap m;
  m.bounds = {0.0, 0.0, 1.0, 1.0};
  m.obstacles = {{0.4, 0.4, 0.6, 0.6}};
  m.goal = Vec2(0.9, 0.9);
  return m;
}

NavMap empty_centred() {
  NavMap m;
  m.bounds = {-0.5, -0.5, 0.5, 0.5};
  m.goal = Vec2(0.0, 0.0);
  return m;
}

PointCloud cloud_from(const std::vector<Vec2>& pts) {
  PointCloud c;
  c.intrinsic_dim = 2;
  c.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) c.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return c;
}

// Field at each node given by fn(position).
template <class Fn>
Eigen::MatrixXd field_of(const PointCloud& c, Fn fn) {
  Eigen::MatrixXd f(c.size(), 2);
  for (Eigen::Index i = 0; i < c.size(); ++i) f.row(i) = fn(Vec2(c.points.row(i).transpose())).transpose();
  return f;
}

}  // namespace

TEST(Visible, Examples) {
  const NavMap m = square_with_block();
  EXPECT_FALSE(visible(m, Vec2(0.1, 0.5), Vec2(0.9, 0.5)));
  EXPECT_TRUE(visible(m, Vec2(0.1, 0.1), Vec2(0.9, 0.1)));
  EXPECT_FALSE(visible(m, Vec2(0.1, 0.4), Vec2(0.9, 0.4)));
  EXPECT_TRUE(visible(m, Vec2(0.2, 0.2), Vec2(0.2, 0.2)));
  EXPECT_THROW(visible(m, Vec2(-0.1, 0.5), Vec2(0.5, 0.1)), Error);
}

TEST(Visible, Symmetric) {
  const NavMap m = default_nav_map();
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int t = 0; t < 2000; ++t) {
    const Vec2 p(u(gen), u(gen)), q(u(gen), u(gen));
    EXPECT_EQ(visible(m, p, q), visible(m, q, p));
  }
}

TEST(NavMapTest, DefaultMapIsValid) {
  const NavMap m = default_nav_map();
  EXPECT_NO_THROW(m.validate());
  EXPECT_TRUE(m.is_free(m.goal));
}

TEST(NavMapTest, ValidationFailures) {
  NavMap m = square_with_block();
  m.goal = Vec2(0.5, 0.5);
  EXPECT_THROW(m.validate(), Error);
  m = square_with_block();
  m.obstacles.push_back({0.8, 0.8, 1.2, 0.9});
  EXPECT_THROW(m.validate(), Error);
}

TEST(SampleFreeSpace, NoObstacles) {
  NavMap m = square_with_block();
  m.obstacles.clear();
  const PointCloud c = sample_free_space(m, 500, 1);
  ASSERT_EQ(c.size(), 500);
  for (Eigen::Index i = 0; i < c.size(); ++i) EXPECT_TRUE(m.in_bounds(Vec2(c.points.row(i).transpose())));
  EXPECT_EQ(c.points, sample_free_space(m, 500, 1).points);
}

TEST(SampleFreeSpace, HalfBlocked) {
  NavMap m = square_with_block();
  m.obstacles = {{0.0, 0.0, 1.0, 0.5}};
  const PointCloud c = sample_free_space(m, 1000, 3);
  for (Eigen::Index i = 0; i < c.size(); ++i) EXPECT_TRUE(m.is_free(Vec2(c.points.row(i).transpose())));
}

TEST(SampleFreeSpace, InfeasibleMap) {
  NavMap m = square_with_block();
  m.obstacles = {{0.0, 0.0, 1.0, 0.995}};
  m.goal = Vec2(0.5, 0.999);
  try {
    sample_free_space(m, 10000, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::map_infeasible);
  }
}

TEST(NavGraph, BlocksOccludedPairs) {
  const NavMap m = square_with_block();
  const PointCloud c = cloud_from({Vec2(0.1, 0.5), Vec2(0.9, 0.5), Vec2(0.1, 0.2)});
  const GeometricGraph g = build_nav_graph(m, c, 0.5);
  EXPECT_EQ(g.adjacency(0, 1), 0.0);
  EXPECT_GT(g.adjacency(0, 2), 0.0);
  EXPECT_GT(g.adjacency(1, 2), 0.0);
}

TEST(Dijkstra, CollinearNodes) {
  NavMap m = square_with_block();
  m.obstacles.clear();
  m.goal = Vec2(0.3, 0.5);
  const PointCloud c = cloud_from({Vec2(0.1, 0.5), Vec2(0.2, 0.5), Vec2(0.3, 0.5)});
  const GeometricGraph g = build_nav_graph(m, c, 0.5);
  const NavDataset d = dijkstra_labels(g, c, m, 20, 4, 0.15);
  EXPECT_EQ(d.goal_node, 2);
  EXPECT_EQ(d.distance_to_goal[2], 0.0);
  EXPECT_EQ(d.next_hop[2], -1);
  EXPECT_EQ(d.next_hop[0], 1);
  EXPECT_EQ(d.next_hop[1], 2);
  EXPECT_NEAR(d.distance_to_goal[0], 0.2, 1e-15);
  for (std::size_t k = 0; k < d.labels.size(); ++k) EXPECT_NEAR((d.labels[k] - Vec2(1, 0)).norm(), 0.0, 1e-12);
  // Some of the 20 draws start at the goal and contribute empty paths.
  bool saw_empty = false;
  for (const auto& t : d.trajectories) saw_empty |= t.empty();
  EXPECT_TRUE(saw_empty);
}

TEST(Dijkstra, UnreachableStartsAreSkipped) {
  NavMap m = square_with_block();
  m.obstacles = {{0.45, 0.0, 0.55, 1.0}};
  m.goal = Vec2(0.9, 0.5);
  const PointCloud c = cloud_from({Vec2(0.1, 0.5), Vec2(0.8, 0.5), Vec2(0.9, 0.5)});
  const NavDataset d = dijkstra_labels(build_nav_graph(m, c, 0.5), c, m, 30, 2);
  EXPECT_TRUE(std::isinf(d.distance_to_goal[0]));
  EXPECT_GT(d.skipped, 0);
  for (Eigen::Index i : d.labeled_indices) EXPECT_NE(i, 0);
}

TEST(Dijkstra, ConsistentDistancesAndUnitLabels) {
  const NavMap m = default_nav_map();
  const PointCloud c = sample_free_space(m, 200, 8);
  const GeometricGraph g = build_nav_graph(m, c, 0.01);
  const NavDataset d = dijkstra_labels(g, c, m, 10, 3, 0.1);
  for (Eigen::Index v = 0; v < c.size(); ++v) {
    const Eigen::Index u = d.next_hop[static_cast<std::size_t>(v)];
    if (u < 0) continue;
    const double len = (c.points.row(v) - c.points.row(u)).norm();
    EXPECT_LE(len, 0.1);
    EXPECT_NEAR(d.distance_to_goal[static_cast<std::size_t>(v)], d.distance_to_goal[static_cast<std::size_t>(u)] + len,
                1e-12);
    EXPECT_TRUE(visible(m, Vec2(c.points.row(v).transpose()), Vec2(c.points.row(u).transpose())));
  }
  EXPECT_FALSE(d.labels.empty());
  for (const auto& l : d.labels) EXPECT_NEAR(l.norm(), 1.0, 1e-12);
  EXPECT_TRUE(std::is_sorted(d.labeled_indices.begin(), d.labeled_indices.end()));
}

TEST(FilterNetTest, ShapesAndParameters) {
  const FilterNet one = make_filter_net(1, 32, 5, true, 1);
  EXPECT_EQ(one.feature_widths(), (std::vector<int>{2, 2}));
  EXPECT_EQ(one.parameter_count(), 20u);
  EXPECT_EQ(one.layers[0].activation, Activation::none);
  const FilterNet two = make_filter_net(2, 32, 5, true, 1);
  EXPECT_EQ(two.feature_widths(), (std::vector<int>{2, 32, 2}));
  EXPECT_EQ(two.layers[0].activation, Activation::tanh);
  EXPECT_EQ(two.layers[1].activation, Activation::none);
  FilterNet copy = two;
  const Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(two.parameter_count()), -1, 1);
  copy.set_parameters(p);
  EXPECT_EQ(copy.parameters(), p);
  EXPECT_THROW(make_filter_net(3, 8, 5, true, 1), Error);
}

TEST(FilterNetTest, ForwardMatchesDensePolynomial) {
  std::mt19937_64 gen(2);
  const Eigen::MatrixXd s = oracle::random_symmetric(6, gen) / 6.0;
  const Eigen::MatrixXd x = oracle::random_symmetric(6, gen).leftCols(2);
  const FilterNet net = make_filter_net(1, 4, 4, false, 9);
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(6, 2);
  for (int k = 0; k < 4; ++k) {
    std::vector<double> e(static_cast<std::size_t>(k) + 1, 0.0);
    e.back() = 1.0;
    ref += oracle::dense_polynomial(s, e) * x * net.layers[0].taps[static_cast<std::size_t>(k)];
  }
  EXPECT_LE((forward(net, s, x) - ref).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(NormalizedGso, UnitSpectralRadius) {
  std::mt19937_64 gen(4);
  Eigen::MatrixXd w = oracle::random_psd(12, gen).cwiseAbs();
  const Eigen::MatrixXd s = normalized_gso(w);
  const auto ev = oracle::power_iteration_eigenvalues(s);
  EXPECT_NEAR(std::max(std::abs(ev.front()), std::abs(ev.back())), 1.0, 1e-8);
}

namespace {

struct SmallProblem {
  Eigen::MatrixXd gso;
  Eigen::MatrixXd x;
  NavDataset data;
};

SmallProblem small_problem(std::uint64_t seed, int labels) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SmallProblem p;
  const Eigen::Index n = 15;
  p.x.resize(n, 2);
  for (auto& v : p.x.reshaped()) v = u(gen);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) w(i, j) = w(j, i) = std::exp(-(p.x.row(i) - p.x.row(j)).squaredNorm());
  p.gso = normalized_gso(w);
  for (int k = 0; k < labels; ++k) {
    p.data.labeled_indices.push_back(k * 2);
    const double a = u(gen) * 6.28;
    p.data.labels.emplace_back(std::cos(a), std::sin(a));
  }
  return p;
}

}  // namespace

TEST(Training, ZeroEpochsReturnsInitialModel) {
  const SmallProblem p = small_problem(1, 3);
  const FilterNet net = make_filter_net(1, 4, 3, true, 5);
  const TrainResult r = train_filter(net, p.gso, p.x, p.data, 0, 0.1);
  EXPECT_EQ(r.model.parameters(), net.parameters());
  ASSERT_EQ(r.loss_history.size(), 1u);
  EXPECT_EQ(r.loss_history[0], nav_loss(forward(net, p.gso, p.x), p.data));
}

TEST(Training, SingleLabelIsFitted) {
  const SmallProblem p = small_problem(2, 1);
  const TrainResult r = train_filter(make_filter_net(1, 4, 5, true, 5), p.gso, p.x, p.data, 2000, 0.1);
  EXPECT_LT(r.loss_history.back(), 1e-3 * r.loss_history.front());
}

TEST(Training, GradientMatchesCentralDifferences) {
  const SmallProblem p = small_problem(3, 5);
  for (int layers : {1, 2}) {
    const FilterNet net = make_filter_net(layers, 3, 3, true, 11);
    Eigen::VectorXd grad;
    loss_and_gradient(net, p.gso, p.x, p.data, grad);
    const Eigen::VectorXd theta = net.parameters();
    FilterNet probe = net;
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd t = theta;
      t[k] += h;
      probe.set_parameters(t);
      const double up = nav_loss(forward(probe, p.gso, p.x), p.data);
      t[k] -= 2 * h;
      probe.set_parameters(t);
      const double down = nav_loss(forward(probe, p.gso, p.x), p.data);
      EXPECT_NEAR(grad[k], (up - down) / (2 * h), 1e-7 + 1e-5 * std::abs(grad[k])) << "layers " << layers << " k " << k;
    }
  }
}

TEST(Training, LossMostlyDecreasesOnNavProblem) {
  NavConfig cfg;
  cfg.n = 150;
  cfg.layers = 1;
  cfg.epochs = 300;
  const NavMap map = default_nav_map();
  const NavProblem p = prepare_nav_problem(map, cfg);
  const TrainResult r =
      train_filter(make_filter_net(1, cfg.hidden, cfg.taps, true, 1), p.gso, p.cloud.points, p.data, cfg.epochs, cfg.lr);
  int down = 0;
  for (std::size_t e = 1; e < r.loss_history.size(); ++e) down += r.loss_history[e] <= r.loss_history[e - 1];
  EXPECT_GE(down, static_cast<int>(0.9 * (r.loss_history.size() - 1)));
}

TEST(Training, Deterministic) {
  const SmallProblem p = small_problem(4, 4);
  const TrainResult a = train_filter(make_filter_net(2, 6, 3, true, 2), p.gso, p.x, p.data, 50, 0.05);
  const TrainResult b = train_filter(make_filter_net(2, 6, 3, true, 2), p.gso, p.x, p.data, 50, 0.05);
  EXPECT_EQ(a.model.parameters(), b.model.parameters());
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Training, DivergenceIsReported) {
  const SmallProblem p = small_problem(5, 4);
  try {
    train_filter(make_filter_net(1, 4, 5, true, 5), p.gso, p.x, p.data, 5000, 1e6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::diverged);
  }
}

TEST(Rollout, StartInsideGoal) {
  const NavMap m = empty_centred();
  const PointCloud c = cloud_from({Vec2(0.1, 0.1)});
  const RolloutResult r = rollout(Eigen::MatrixXd::Zero(1, 2), c, m, Vec2(0.01, 0.0));
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.steps, 0);
}

TEST(Rollout, StraightLineStepCount) {
  const NavMap m = empty_centred();
  const PointCloud c = cloud_from({Vec2(0.0, 0.0)});
  Eigen::MatrixXd f(1, 2);
  f << 1.0, 0.0;
  RolloutOptions opt;
  const Vec2 start(-0.4, 0.0);
  const RolloutResult r = rollout(f, c, m, start, opt);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.steps, static_cast<int>(std::ceil((0.4 - opt.goal_radius) / opt.step_size)));
  EXPECT_EQ(r.trajectory.size(), static_cast<std::size_t>(r.steps) + 1);
}

TEST(Rollout, FailureModes) {
  const NavMap m = empty_centred();
  const PointCloud c = sample_free_space(m, 2000, 6);
  const auto away = field_of(c, [](const Vec2& p) { return Vec2(p.normalized()); });
  const RolloutResult out = rollout(away, c, m, Vec2(0.2, 0.1));
  EXPECT_FALSE(out.success);
  EXPECT_LT(out.steps, 500);

  RolloutOptions opt;
  opt.max_steps = 100;
  const auto circling = field_of(c, [](const Vec2& p) { return Vec2(-p.y(), p.x()); });
  const RolloutResult loop = rollout(circling, c, m, Vec2(0.2, 0.0), opt);
  EXPECT_FALSE(loop.success);
  EXPECT_EQ(loop.steps, 100);

  NavMap blocked = empty_centred();
  blocked.obstacles = {{-0.3, -0.1, -0.2, 0.1}};
  const PointCloud one = cloud_from({Vec2(0.0, 0.0)});
  Eigen::MatrixXd f(1, 2);
  f << 1.0, 0.0;
  EXPECT_FALSE(rollout(f, one, blocked, Vec2(-0.45, 0.0)).success);
}

TEST(Evaluate, Examples) {
  const NavMap m = empty_centred();
  const PointCloud c = sample_free_space(m, 2000, 7);
  const auto perfect = field_of(c, [](const Vec2& p) { return Vec2(-p); });
  EXPECT_EQ(evaluate(perfect, c, m, 0, 1), 0);
  EXPECT_EQ(evaluate(perfect, c, m, 100, 1), 100);
  EXPECT_EQ(evaluate(Eigen::MatrixXd(Eigen::MatrixXd::Zero(c.size(), 2)), c, m, 20, 1), 0);
}

TEST(Evaluate, SuccessfulPathsAvoidObstacles) {
  const NavMap m = default_nav_map();
  const PointCloud c = sample_free_space(m, 1500, 9);
  const auto perfect = field_of(c, [](const Vec2& p) { return Vec2(-p); });
  const PointCloud starts = sample_free_space(m, 50, 4);
  for (Eigen::Index i = 0; i < starts.size(); ++i) {
    const RolloutResult r = rollout(perfect, c, m, Vec2(starts.points.row(i).transpose()));
    if (!r.success) continue;
    for (std::size_t k = 1; k < r.trajectory.size(); ++k) {
      EXPECT_TRUE(m.is_free(r.trajectory[k]));
      EXPECT_TRUE(visible(m, r.trajectory[k - 1], r.trajectory[k]));
    }
  }
}

TEST(NavPipeline, PrepareIsDeterministic) {
  NavConfig cfg;
  cfg.n = 120;
  const NavMap m = default_nav_map();
  const NavProblem a = prepare_nav_problem(m, cfg);
  const NavProblem b = prepare_nav_problem(m, cfg);
  EXPECT_EQ(a.cloud.points, b.cloud.points);
  EXPECT_EQ(a.gso, b.gso);
  EXPECT_EQ(a.data.labeled_indices, b.data.labeled_indices);
}
