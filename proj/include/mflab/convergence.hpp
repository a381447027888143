// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mflab/error.hpp"
#include "mflab/filters.hpp"
#include "mflab/graph.hpp"
#include "mflab/manifold.hpp"
#include "mflab/parallel.hpp"
#include "mflab/rng.hpp"
#include "mflab/spectral.hpp"

namespace mflab {

/// Bandwidth as a function of n: n^{-1/(d+4)} by default, or a fixed value.
struct EpsilonRule {
  std::optional<double> fixed;

  double operator()(Eigen::Index n, int d) const { return fixed ? *fixed : default_epsilon(n, d); }
};

struct ExperimentConfig {
  ManifoldSpec manifold = ManifoldSpec::circle(1.0);
  std::vector<Eigen::Index> n_values{250, 500, 1000, 2000};
  int trials = 10;
  std::uint64_t master_seed = 42;
  EpsilonRule epsilon_rule;
  std::size_t K = 5;
  FilterSpec filter = FilterSpec::heat(1.0);
  /// Filter-convergence input: coefficients over the analytic eigenbasis (default: mode 1).
  std::vector<double> signal_coefficients{0.0, 1.0};
  /// Overrides signal_coefficients when set; must still declare a band limit
  /// unless allow_truncation is on.
  std::optional<ManifoldSignal> signal;
  bool allow_truncation = false;
  int eval_points = 20;
  /// Compare vol(M) * L_n against the Laplace-Beltrami operator. The kernel
  /// Laplacian under a probability measure converges to L / vol(M).
  bool volume_calibrated = true;
  double fdt_alpha = 0.5;
  double fdt_gamma = 0.1;
  Eigen::Index quad_n = 20000;  // Monte-Carlo draws when the signal has no expansion
  EigenSolver solver = EigenSolver::automatic;

  void validate() const {
    using detail::require;
    manifold.validate();
    require(!n_values.empty(), "config: n_values must be non-empty");
    for (std::size_t i = 0; i < n_values.size(); ++i) {
      require(n_values[i] >= 2, "config: every n must be >= 2");
      if (i > 0) require(n_values[i] > n_values[i - 1], "config: n_values must be strictly ascending");
    }
    require(trials >= 1, "config: trials must be >= 1");
    require(K >= 1, "config: K must be >= 1");
    require(static_cast<Eigen::Index>(K) <= n_values.front(), "config: K must not exceed the smallest n");
    require(eval_points >= 1, "config: eval_points must be >= 1");
    if (epsilon_rule.fixed) require(*epsilon_rule.fixed > 0.0, "config: fixed epsilon must be positive");
    require(fdt_alpha > 0.0 && fdt_gamma > 0.0, "config: FDT alpha and gamma must be positive");
  }

  double operator_scale() const { return volume_calibrated ? manifold.volume() : 1.0; }
};

struct ReportRow {
  std::string theorem_id;
  Eigen::Index n = 0;
  double epsilon = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;

  bool operator==(const ReportRow&) const = default;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::string primary_metric;
  double fitted_slope = std::numeric_limits<double>::quiet_NaN();
  double fitted_intercept = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> values(const std::string& metric, Eigen::Index n) const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (r.metric == metric && r.n == n) out.push_back(r.value);
    return out;
  }
};

inline double median(std::vector<double> v) {
  detail::require(!v.empty(), "median of empty sequence", Errc::insufficient_data);
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<std::pair<Eigen::Index, double>> per_n_medians;  // every n, including excluded ones
};

/// OLS of log(median value) on log(n) for one metric. Non-positive medians are
/// left out of the fit.
inline RateFit fit_rate(const ExperimentReport& report, const std::string& metric) {
  std::map<Eigen::Index, std::vector<double>> by_n;
  for (const auto& r : report.rows)
    if (r.metric == metric) by_n[r.n].push_back(r.value);
  RateFit fit;
  std::vector<double> xs, ys;
  for (auto& [n, vals] : by_n) {
    const double med = median(vals);
    fit.per_n_medians.emplace_back(n, med);
    if (med > 0.0 && std::isfinite(med)) {
      xs.push_back(std::log(static_cast<double>(n)));
      ys.push_back(std::log(med));
    }
  }
  if (xs.size() < 2) throw Error(Errc::insufficient_data, "fit_rate: fewer than two usable n values for " + metric);
  const double k = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

namespace detail {

struct Cell {
  Eigen::Index n;
  int trial;
  std::uint64_t seed;
  double epsilon;
};

inline std::vector<Cell> experiment_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (Eigen::Index n : cfg.n_values)
    for (int t = 0; t < cfg.trials; ++t)
      cells.push_back({n, t, derive_seed(cfg.master_seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(t)),
                       cfg.epsilon_rule(n, cfg.manifold.intrinsic_dim())});
  return cells;
}

template <class CellFn>
ExperimentReport run_cells(const ExperimentConfig& cfg, const std::string& primary, CellFn&& fn) {
  const auto cells = experiment_cells(cfg);
  std::vector<std::vector<ReportRow>> per_cell(cells.size());
  parallel_for(cells.size(), [&](std::size_t k) { per_cell[k] = fn(cells[k]); });
  ExperimentReport report;
  report.primary_metric = primary;
  for (auto& rows : per_cell)
    for (auto& r : rows) report.rows.push_back(std::move(r));
  try {
    RateFit fit = fit_rate(report, primary);
    report.fitted_slope = fit.slope;
    report.fitted_intercept = fit.intercept;
  } catch (const Error&) {
  }
  return report;
}

inline ReportRow make_row(const char* id, const Cell& c, const char* metric, double value) {
  return ReportRow{id, c.n, c.epsilon, c.trial, c.seed, metric, value};
}

// Analytic depth that completes the multiplicity cluster straddling K.
inline std::size_t complete_cluster_depth(const ManifoldSpec& m, std::size_t K) {
  AnalyticSpectrum s = lb_spectrum(m, K + 16);
  std::size_t depth = K;
  while (depth < s.size() && same_cluster(s.eigenvalue(depth), s.eigenvalue(K - 1))) ++depth;
  return depth;
}

}  // namespace detail

/// Pointwise operator error: for each cell, max and median over i < K and
/// random sample points x of |vol L_n phi_i(x) - lambda_i phi_i(x)|.
inline ExperimentReport thm1_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const AnalyticSpectrum analytic = lb_spectrum(cfg.manifold, cfg.K);
  const double scale = cfg.operator_scale();
  return detail::run_cells(cfg, "thm1_err", [&](const detail::Cell& c) {
    const PointCloud cloud = sample_uniform(cfg.manifold, c.n, c.seed);
    Rng pick(mix64(c.seed ^ 0x7468'6d31ULL));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(c.n));
    for (Eigen::Index i = 0; i < c.n; ++i) idx[static_cast<std::size_t>(i)] = i;
    const auto m = static_cast<std::size_t>(std::min<Eigen::Index>(cfg.eval_points, c.n));
    for (std::size_t k = 0; k < m; ++k)
      std::swap(idx[k], idx[k + uniform_index(pick, idx.size() - k)]);
    idx.resize(m);

    std::vector<double> errs;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      Eigen::VectorXd vals(c.n);
      for (Eigen::Index j = 0; j < c.n; ++j) vals[j] = analytic.evaluate(i, cloud.point(j));
      for (Eigen::Index x : idx) {
        const double lap = scale * discrete_laplacian_at(vals, vals[x], cloud.point(x), cloud, c.epsilon);
        errs.push_back(std::abs(lap - analytic.eigenvalue(i) * vals[x]));
      }
    }
    return std::vector<ReportRow>{
        detail::make_row("thm1", c, "thm1_err", *std::max_element(errs.begin(), errs.end())),
        detail::make_row("thm1", c, "thm1_err_median", median(errs))};
  });
}

/// Spectral convergence: eigenvalue and aligned eigenfunction errors of the
/// first K pairs of vol * L_n against the analytic spectrum.
inline ExperimentReport thm2_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t depth = detail::complete_cluster_depth(cfg.manifold, cfg.K);
  const AnalyticSpectrum analytic = lb_spectrum(cfg.manifold, depth);
  const double scale = cfg.operator_scale();
  return detail::run_cells(cfg, "lambda_err", [&](const detail::Cell& c) {
    const PointCloud cloud = sample_uniform(cfg.manifold, c.n, c.seed);
    const GeometricGraph g = build_graph(cloud, c.epsilon);
    const Eigen::MatrixXd op = scale * g.laplacian;
    const auto count = std::min<Eigen::Index>(static_cast<Eigen::Index>(depth), c.n);
    Spectrum s;
    if (cfg.solver == EigenSolver::lapack || (cfg.solver == EigenSolver::automatic && c.n > 256)) {
      s = eig_sym_lowest(op, count);
    } else {
      s = eig_sym(op);
    }
    s = gn_normalize(std::move(s));
    const AlignmentReport a = align_eigenpairs(s, analytic, cloud, cfg.K);
    return std::vector<ReportRow>{
        detail::make_row("thm2", c, "lambda_err", a.max_lambda_error()),
        detail::make_row("thm2", c, "phi_err", a.max_eigenfunction_error()),
        detail::make_row("thm2", c, "lambda0_err", a.records.front().lambda_abs_error)};
  });
}

/// Filter convergence: || h(vol L_n) P_n f - P_n h(L) f ||_{G_n} for a
/// band-limited f, plus the filter's Lipschitz estimate and FDT spread on the
/// graph eigenvalues below the K-th.
inline ExperimentReport thm3_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::require(cfg.filter.is_response(), "thm3: filter must be a frequency response");
  validate(cfg.filter);
  const AnalyticSpectrum analytic = lb_spectrum(cfg.manifold, cfg.K);
  const ManifoldSignal f = cfg.signal ? *cfg.signal : [&] {
    detail::require(cfg.signal_coefficients.size() <= analytic.size() || cfg.allow_truncation,
                    "thm3: signal band limit exceeds K", Errc::truncation_refused);
    const AnalyticSpectrum basis = lb_spectrum(cfg.manifold, std::max(cfg.K, cfg.signal_coefficients.size()));
    Eigen::VectorXd coeffs = Eigen::Map<const Eigen::VectorXd>(cfg.signal_coefficients.data(),
                                                                static_cast<Eigen::Index>(cfg.signal_coefficients.size()));
    return band_limited_signal(basis, coeffs, "configured band-limited signal");
  }();
  // Fails with truncation-refused before any cell runs.
  (void)manifold_filter_apply(cfg.filter, f, analytic, analytic.size(), cfg.quad_n, cfg.master_seed,
                              cfg.allow_truncation);

  const double scale = cfg.operator_scale();
  const double lip = lipschitz_constant(cfg.filter, 0.0, std::max(1.0, analytic.eigenvalue(cfg.K - 1)), 1000);
  return detail::run_cells(cfg, "thm3_err", [&](const detail::Cell& c) {
    const PointCloud cloud = sample_uniform(cfg.manifold, c.n, c.seed);
    const GeometricGraph g = build_graph(cloud, c.epsilon);
    const Spectrum s = gn_normalize(decompose(scale * g.laplacian, cfg.solver));

    const ManifoldSignal h_f = manifold_filter_apply(cfg.filter, f, analytic, analytic.size(), cfg.quad_n,
                                                     mix64(c.seed ^ 0x71756164ULL), cfg.allow_truncation);
    const GraphSignal manifold_side = sample_operator(h_f, cloud);
    const GraphSignal graph_side = spectral_filter_apply(s, cfg.filter, sample_operator(f, cloud));

    std::vector<double> low(s.eigenvalues.data(), s.eigenvalues.data() + cfg.K);
    for (double& l : low) l = std::max(l, 0.0);
    const FdtReport fdt = fdt_check(cfg.filter, low, cfg.fdt_alpha, cfg.fdt_gamma);
    return std::vector<ReportRow>{
        detail::make_row("thm3", c, "thm3_err", gn_norm(graph_side - manifold_side)),
        detail::make_row("thm3", c, "lipschitz", lip),
        detail::make_row("thm3", c, "fdt_max_variation", fdt.max_variation()),
        detail::make_row("thm3", c, "fdt_passes", fdt.passes ? 1.0 : 0.0)};
  });
}

// ---- perturbation lemmas -------------------------------------------------------

struct LemmaCheck {
  double lhs_eigfun = 0.0;  // min_a || a u_i - w_i ||
  double rhs_eigfun = 0.0;  // 2 || B u_i - A u_i || / min_{j != i} | lambda_j(B) - lambda_i(A) |
  double lhs_eigval = 0.0;  // | lambda_i(A) - lambda_i(B) |
  double rhs_eigval = 0.0;  // || (A - B) u_i || / | <u_i, w_i> |
  bool holds_eigfun = false;
  bool holds_eigval = false;
};

/// Evaluates both sides of the eigenvector and eigenvalue perturbation bounds
/// for index i of the pair (A, B).
inline LemmaCheck lemma_bound_check(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::size_t i) {
  using detail::require;
  require(A.rows() == B.rows() && A.cols() == B.cols(), "lemma_bound_check: size mismatch");
  require(i < static_cast<std::size_t>(A.rows()), "lemma_bound_check: index out of range");
  const Spectrum sa = eig_sym(A);
  const Spectrum sb = eig_sym(B);
  const auto k = static_cast<Eigen::Index>(i);
  const double la = sa.eigenvalues[k];
  for (Eigen::Index j = 0; j < sa.size(); ++j)
    if (j != k && sa.eigenvalues[j] == la)
      throw Error(Errc::degenerate_case, "lemma_bound_check: eigenvalue of A is not simple");

  const Eigen::VectorXd u = sa.eigenvectors.col(k);
  const Eigen::VectorXd w = sb.eigenvectors.col(k);
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < sb.size(); ++j)
    if (j != k) gap = std::min(gap, std::abs(sb.eigenvalues[j] - la));
  const double overlap = u.dot(w);
  if (!(gap > 0.0)) throw Error(Errc::degenerate_case, "lemma_bound_check: zero spectral gap");
  if (overlap == 0.0) throw Error(Errc::degenerate_case, "lemma_bound_check: zero eigenvector overlap");

  LemmaCheck r;
  r.lhs_eigfun = std::min((u - w).norm(), (u + w).norm());
  r.rhs_eigfun = 2.0 * (B * u - A * u).norm() / gap;
  r.lhs_eigval = std::abs(la - sb.eigenvalues[k]);
  r.rhs_eigval = ((A - B) * u).norm() / std::abs(overlap);
  constexpr double rel = 1e-12, abs_tol = 1e-13;
  r.holds_eigfun = r.lhs_eigfun <= r.rhs_eigfun * (1.0 + rel) + abs_tol;
  r.holds_eigval = r.lhs_eigval <= r.rhs_eigval * (1.0 + rel) + abs_tol;
  return r;
}

struct LemmaSweep {
  int pairs = 0;
  int nondegenerate = 0;
  int eigfun_holds = 0;
  int eigval_holds = 0;
};

inline Eigen::MatrixXd random_symmetric(Eigen::Index dim, Rng& rng) {
  Eigen::MatrixXd m(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = r; c < dim; ++c) m(r, c) = m(c, r) = uniform(rng, -1.0, 1.0);
  return m;
}

/// Random pairs (A, A + perturb * E) with A, E symmetric and entries in
/// [-1, 1]; the checked index is drawn uniformly. Degenerate draws are counted
/// out of `nondegenerate`.
inline LemmaSweep lemma_sweep(int pairs, Eigen::Index dim, double perturb, std::uint64_t seed) {
  detail::require(pairs >= 0, "lemma_sweep: pairs must be >= 0");
  detail::require(dim >= 2, "lemma_sweep: dim must be >= 2");
  detail::require(perturb >= 0.0 && std::isfinite(perturb), "lemma_sweep: perturbation must be >= 0");
  Rng rng(seed);
  LemmaSweep s;
  s.pairs = pairs;
  for (int p = 0; p < pairs; ++p) {
    const Eigen::MatrixXd A = random_symmetric(dim, rng);
    const Eigen::MatrixXd B = A + perturb * random_symmetric(dim, rng);
    const auto i = static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(dim)));
    try {
      const LemmaCheck c = lemma_bound_check(A, B, i);
      ++s.nondegenerate;
      s.eigfun_holds += c.holds_eigfun;
      s.eigval_holds += c.holds_eigval;
    } catch (const Error& e) {
      if (e.code() != Errc::degenerate_case) throw;
    }
  }
  return s;
}

}  // namespace mflab
