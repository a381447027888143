// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mflab/mflab.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace mflab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, x);
  return buf;
}

std::string medians_text(const RateFit& fit) {
  std::string s;
  for (auto [n, m] : fit.per_n_medians) s += (s.empty() ? "" : ", ") + std::to_string(n) + ":" + num(m, 5);
  return s;
}

bool strictly_decreasing(const RateFit& fit) {
  for (std::size_t i = 1; i < fit.per_n_medians.size(); ++i)
    if (!(fit.per_n_medians[i].second < fit.per_n_medians[i - 1].second)) return false;
  return true;
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---- criteria --------------------------------------------------------------------

Outcome laplacian_structure() {
  double worst_row = 0.0, lowest = INFINITY;
  Rng rng(2024);
  for (int t = 0; t < 50; ++t) {
    const auto n = static_cast<Eigen::Index>(20 + uniform_index(rng, 181));
    const PointCloud c = sample_uniform(ManifoldSpec::circle(1.0), n, rng());
    const Eigen::MatrixXd l = build_graph(c, default_epsilon(n, 1)).laplacian;
    worst_row = std::max(worst_row, l.rowwise().sum().cwiseAbs().maxCoeff());
    lowest = std::min(lowest, eig_sym_lowest(l, 1).eigenvalues[0]);
  }
  return {worst_row <= 1e-10 && lowest >= -1e-9,
          "max |row sum| " + num(worst_row) + ", min eigenvalue " + num(lowest)};
}

Outcome heat_oracle_equivalence() {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> tau_dist(0.0, 2.0);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(gen() % 20);
    const Eigen::MatrixXd a = oracle::random_psd(n, gen);
    const double tau = tau_dist(gen);
    const Spectrum s = gn_normalize(eig_sym(a));
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, j);
      const Eigen::VectorXd d = spectral_filter_apply(s, FilterSpec::heat(tau), e) - heat_filter_oracle(a, tau, e);
      worst = std::max(worst, d.cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-7, "max-norm difference " + num(worst)};
}

ExperimentConfig circle_grid() {
  ExperimentConfig cfg;
  cfg.manifold = ManifoldSpec::circle(1.0);
  cfg.n_values = {250, 500, 1000, 2000};
  cfg.trials = 10;
  cfg.master_seed = 42;
  cfg.K = 5;
  return cfg;
}

Outcome spectral_trend() {
  const ExperimentReport r = thm2_experiment(circle_grid());
  const RateFit lam = fit_rate(r, "lambda_err");
  const RateFit phi = fit_rate(r, "phi_err");
  double lambda0 = 0.0;
  for (const auto& row : r.rows)
    if (row.metric == "lambda0_err") lambda0 = std::max(lambda0, row.value);
  const bool pass = strictly_decreasing(lam) && strictly_decreasing(phi) && lambda0 <= 1e-10;
  return {pass, "lambda medians [" + medians_text(lam) + "], eigenfunction medians [" + medians_text(phi) +
                    "], max lambda0 error " + num(lambda0)};
}

Outcome filter_trend() {
  const ExperimentReport r = thm3_experiment(circle_grid());
  const RateFit fit = fit_rate(r, "thm3_err");
  ExperimentConfig id = circle_grid();
  id.filter = FilterSpec::constant(1.0);
  id.trials = 2;
  double identity = 0.0;
  for (const auto& row : thm3_experiment(id).rows)
    if (row.metric == "thm3_err") identity = std::max(identity, row.value);
  const bool pass = strictly_decreasing(fit) && fit.slope < -0.05 && identity <= 1e-6;
  return {pass, "medians [" + medians_text(fit) + "], slope " + num(fit.slope, 4) +
                    " (worst-case bound rate -0.1), identity error " + num(identity)};
}

Outcome lemma_sweep_check() {
  const LemmaSweep s = lemma_sweep(1000, 4, 1e-2, 9);
  const bool pass = s.nondegenerate > 0 && s.eigfun_holds == s.nondegenerate && s.eigval_holds == s.nondegenerate;
  return {pass, "eigenvector bound " + std::to_string(s.eigfun_holds) + "/" + std::to_string(s.nondegenerate) +
                    ", eigenvalue bound " + std::to_string(s.eigval_holds) + "/" + std::to_string(s.nondegenerate) +
                    " of " + std::to_string(s.pairs) + " pairs"};
}

Outcome fdt_identity() {
  const std::vector<double> ev = lb_spectrum(ManifoldSpec::circle(1.0), 20).eigenvalues();
  const SpectrumPartition p = alpha_partition(ev, 0.5);
  int multi = 0;
  for (auto [b, e] : p.groups) multi += e - b > 1;
  const auto h = FilterSpec::heat(1.0);
  const auto parts = fdt_decompose(h, p, ev);
  double worst = 0.0;
  for (double l : ev) {
    double sum = 0.0;
    for (const auto& part : parts) sum += response_eval(part, l);
    worst = std::max(worst, std::abs(sum - response_eval(h, l)));
  }
  return {multi >= 1 && worst <= 1e-12,
          std::to_string(multi) + " multi-eigenvalue groups, max reconstruction error " + num(worst)};
}

Outcome gradient_check() {
  Rng rng(31);
  const Eigen::Index n = 6;
  Eigen::MatrixXd x(n, 2);
  for (auto& v : x.reshaped()) v = uniform(rng, -0.5, 0.5);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) w(i, j) = w(j, i) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / 0.2);
  const Eigen::MatrixXd gso = normalized_gso(w);
  NavDataset data;
  for (Eigen::Index i : {0, 2, 3, 5}) {
    data.labeled_indices.push_back(i);
    const double a = uniform(rng, 0.0, 6.283185307179586);
    data.labels.emplace_back(std::cos(a), std::sin(a));
  }
  double worst = 0.0;
  std::size_t checked = 0;
  for (int layers : {1, 2}) {
    const FilterNet net = make_filter_net(layers, 8, 5, true, 17);
    Eigen::VectorXd grad;
    loss_and_gradient(net, gso, x, data, grad);
    const Eigen::VectorXd theta = net.parameters();
    FilterNet probe = net;
    auto loss_at = [&](Eigen::Index k, double offset) {
      Eigen::VectorXd t = theta;
      t[k] += offset;
      probe.set_parameters(t);
      return nav_loss(forward(probe, gso, x), data);
    };
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      // Five-point stencil: truncation O(h^4), roundoff about 1e-16 / h.
      const double h = 1e-3;
      const double fd = (loss_at(k, -2 * h) - 8 * loss_at(k, -h) + 8 * loss_at(k, h) - loss_at(k, 2 * h)) / (12 * h);
      // Relative to the larger magnitude; gradients below 1e-6 are compared at that scale.
      worst = std::max(worst, std::abs(grad[k] - fd) / std::max({std::abs(grad[k]), std::abs(fd), 1e-6}));
      ++checked;
    }
  }
  return {worst <= 1e-5, std::to_string(checked) + " parameters, max relative error " + num(worst)};
}

Outcome navigation() {
  const NavMap map = default_nav_map();
  int wins[3] = {0, 0, 0};
  for (int layers : {1, 2}) {
    NavConfig cfg;
    cfg.layers = layers;
    const NavProblem p = prepare_nav_problem(map, cfg);
    const TrainResult r =
        train_filter(make_filter_net(cfg.layers, cfg.hidden, cfg.taps, cfg.tanh, cfg.seed), p.gso, p.cloud.points,
                     p.data, cfg.epochs, cfg.lr);
    wins[layers] = evaluate(p, r.model, map, 100, cfg.seed, cfg.rollout);
  }
  const bool pass = wins[2] >= 50 && wins[2] >= wins[1];
  return {pass, "1-layer " + std::to_string(wins[1]) + "/100, 2-layer " + std::to_string(wins[2]) +
                    "/100 (reference: n=413 1-layer 74, 2-layer 79; n=1117 1-layer 75, 2-layer 84)"};
}

Outcome replay_determinism() {
  const fs::path root = fs::absolute("acceptance_work");
  fs::remove_all(root);
  const std::string cli = std::string("'") + MFLAB_CLI_PATH + "'";
  const fs::path a = root / "first", b = root / "replayed";
  const std::vector<std::pair<std::string, std::string>> runs{
      {"thm1 --n 60,120 --trials 2 --out " + (a / "thm1.csv").string(), "thm1"},
      {"thm2 --n 60,120 --trials 2 --out " + (a / "thm2.csv").string(), "thm2"},
      {"thm3 --n 60,120 --trials 2 --out " + (a / "thm3.csv").string(), "thm3"},
      {"lemmas --pairs 200 --out " + (a / "lemmas.csv").string(), "lemmas"},
      {"nav-train --default-map --n 100 --layers 2 --hidden 8 --epochs 30 --model " + (a / "nav.json").string(), "nav"},
  };
  std::vector<std::string> failures;
  int compared = 0;
  for (const auto& [args, stem] : runs) {
    if (shell(cli + " " + args) != 0) {
      failures.push_back(stem + " (run)");
      continue;
    }
    if (shell(cli + " replay " + (a / (stem + ".manifest.json")).string() + " --out-dir " + b.string()) != 0) {
      failures.push_back(stem + " (replay)");
      continue;
    }
  }
  if (shell(cli + " nav-eval --model " + (a / "nav.json").string() + " --tests 20 --out " +
            (a / "eval.csv").string()) != 0 ||
      shell(cli + " replay " + (a / "eval.manifest.json").string() + " --out-dir " + b.string()) != 0)
    failures.push_back("nav-eval");
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path p = entry.path();
    // Manifests record wall-clock time, so only the outputs themselves are compared.
    if (p.filename().string().find(".manifest.") != std::string::npos) continue;
    ++compared;
    const fs::path q = b / p.filename();
    if (!fs::exists(q) || io::read_text(p.string()) != io::read_text(q.string()))
      failures.push_back(p.filename().string());
  }
  std::string detail = std::to_string(compared) + " output files compared";
  if (!failures.empty()) {
    detail += "; mismatched:";
    for (const auto& f : failures) detail += " " + f;
  }
  return {failures.empty() && compared >= 10, detail};
}

}  // namespace

// Optional arguments select criteria by number; none runs all nine.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Laplacian structure", laplacian_structure},
      {"heat filter oracle equivalence", heat_oracle_equivalence},
      {"spectral convergence trend", spectral_trend},
      {"filter convergence trend", filter_trend},
      {"perturbation bound sweep", lemma_sweep_check},
      {"FDT decomposition identity", fdt_identity},
      {"filter network gradient check", gradient_check},
      {"navigation success counts", navigation},
      {"manifest replay determinism", replay_determinism},
  };
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[a]);
      return 2;
    }
    selected[static_cast<std::size_t>(k - 1)] = true;
  }
  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("criterion %zu: %s  %s | %s | %.1f s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
