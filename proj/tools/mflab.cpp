// SPDX-License-Identifier: Apache-2.0
// mflab: command-line driver for the convergence experiments, the perturbation
// bound sweep and the navigation pipeline. Every run writes a manifest next to
// its outputs; `mflab replay MANIFEST` re-runs it.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mflab/mflab.hpp"

namespace fs = std::filesystem;
using mflab::io::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

// Bad input detected before any work starts.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string stem_of(const std::string& path) {
  const fs::path p(path);
  return (p.parent_path() / p.stem()).string();
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_file(const std::string& path, const std::string& text) {
  ensure_parent(path);
  mflab::io::write_text(path, text);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<Eigen::Index> parse_n_list(const std::string& s) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<Eigen::Index>(v));
    } catch (const std::exception&) {
      throw UsageError("--n: '" + item + "' is not an integer");
    }
  }
  if (out.empty()) throw UsageError("--n: empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": '" + item + "' is not a number");
    }
  }
  return out;
}

json manifest(const std::string& command, const json& config, std::uint64_t seed, const json& outputs,
              double seconds) {
  return {{"command", command},  {"config", config},   {"master_seed", seed},
          {"version", MFLAB_VERSION}, {"outputs", outputs}, {"duration_seconds", seconds}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- thm1 / thm2 / thm3 ----------------------------------------------------------

struct ThmPaths {
  std::string report;
  std::string summary;
  std::string manifest;

  static ThmPaths from_report(const std::string& report) {
    const std::string s = stem_of(report);
    return {report, s + ".summary.json", s + ".manifest.json"};
  }
};

int run_thm(const std::string& command, const mflab::ExperimentConfig& cfg, const ThmPaths& paths) {
  const auto t0 = std::chrono::steady_clock::now();
  mflab::ExperimentReport report;
  if (command == "thm1") report = mflab::thm1_experiment(cfg);
  else if (command == "thm2") report = mflab::thm2_experiment(cfg);
  else report = mflab::thm3_experiment(cfg);

  const json summary = mflab::io::report_summary(report);
  write_file(paths.report, mflab::io::report_csv(report));
  write_file(paths.summary, dump(summary));
  const json outputs = {{"report", paths.report}, {"summary", paths.summary}};
  write_file(paths.manifest, dump(manifest(command, mflab::io::to_json(cfg), cfg.master_seed, outputs,
                                            seconds_since(t0))));

  std::cout << command << " " << report.primary_metric << " medians:";
  for (const auto& m : summary["per_n_medians"])
    std::cout << " n=" << m["n"].get<long long>() << ":" << mflab::io::fmt(m["median"].get<double>());
  std::cout << "\n";
  if (summary["slope"].is_null()) std::cout << "fitted slope: n/a\n";
  else std::cout << "fitted slope: " << mflab::io::fmt(summary["slope"].get<double>()) << "\n";
  std::cout << "wrote " << paths.report << "\n";
  return exit_ok;
}

struct ThmFlags {
  std::string manifold = "circle";
  double scale = 1.0;
  std::string n_list = "250,500,1000,2000";
  int trials = 10;
  std::uint64_t seed = 42;
  std::size_t K = 5;
  std::string filter;
  std::string signal;
  std::string out;
  std::optional<double> epsilon;
  int eval_points = 20;
  bool quick = false;
  bool raw = false;
  bool allow_truncation = false;
  std::string solver = "auto";
};

void add_thm_flags(CLI::App* sub, ThmFlags& f) {
  sub->add_option("--manifold", f.manifold, "circle or torus2")->capture_default_str();
  sub->add_option("--scale", f.scale, "circle radius or torus side length")->capture_default_str();
  sub->add_option("--n", f.n_list, "comma-separated sample sizes, ascending")->capture_default_str();
  sub->add_option("--trials", f.trials, "trials per sample size")->capture_default_str();
  sub->add_option("--seed", f.seed, "master seed")->capture_default_str();
  sub->add_option("--K", f.K, "spectral depth")->capture_default_str();
  sub->add_option("--filter", f.filter, "filter JSON, e.g. {\"form\":\"response\",\"family\":\"heat\",\"tau\":1}");
  sub->add_option("--signal", f.signal, "band-limited signal coefficients over the analytic basis, e.g. 0,1");
  sub->add_option("--out", f.out, "report CSV path (default ./out/<command>_<seed>.csv)");
  sub->add_option("--epsilon", f.epsilon, "fixed bandwidth instead of n^{-1/(d+4)}");
  sub->add_option("--eval-points", f.eval_points, "sample points per cloud for thm1")->capture_default_str();
  sub->add_flag("--quick", f.quick, "halve every n and the trial count");
  sub->add_flag("--raw", f.raw, "compare L_n itself instead of vol(M) * L_n");
  sub->add_flag("--allow-truncation", f.allow_truncation, "permit signals beyond the spectral depth");
  sub->add_option("--solver", f.solver, "jacobi, lapack or auto")->capture_default_str();
}

mflab::ExperimentConfig resolve_thm(const ThmFlags& f) {
  mflab::ExperimentConfig cfg;
  try {
    cfg.manifold = {mflab::io::parse_kind(f.manifold), f.scale};
    cfg.manifold.validate();
    cfg.n_values = parse_n_list(f.n_list);
    cfg.trials = f.trials;
    if (f.quick) {
      for (auto& n : cfg.n_values) n = std::max<Eigen::Index>(2, n / 2);
      cfg.trials = std::max(1, cfg.trials / 2);
    }
    cfg.master_seed = f.seed;
    cfg.K = f.K;
    if (!f.filter.empty()) cfg.filter = mflab::io::filter_from_json(mflab::io::parse_json(f.filter, "--filter"));
    if (!f.signal.empty()) cfg.signal_coefficients = parse_double_list(f.signal, "--signal");
    cfg.epsilon_rule.fixed = f.epsilon;
    cfg.eval_points = f.eval_points;
    cfg.volume_calibrated = !f.raw;
    cfg.allow_truncation = f.allow_truncation;
    cfg.solver = mflab::io::parse_solver(f.solver);
    cfg.validate();
  } catch (const mflab::Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

// ---- lemmas -------------------------------------------------------------------------

struct LemmaFlags {
  int pairs = 1000;
  Eigen::Index dim = 4;
  double perturb = 0.01;
  std::uint64_t seed = 9;
  std::string out;
};

std::string rate(int holds, int total) {
  if (total == 0) return "N/A";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d/%d (%.2f%%)", holds, total, 100.0 * holds / total);
  return buf;
}

json lemma_config(const LemmaFlags& f) {
  return {{"pairs", f.pairs}, {"dim", f.dim}, {"perturb", f.perturb}, {"seed", f.seed}};
}

int run_lemmas(const LemmaFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const mflab::LemmaSweep s = mflab::lemma_sweep(f.pairs, f.dim, f.perturb, f.seed);
  std::cout << "pairs: " << s.pairs << "  non-degenerate: " << s.nondegenerate << "\n";
  std::cout << "eigenvector perturbation bound holds: " << rate(s.eigfun_holds, s.nondegenerate) << "\n";
  std::cout << "eigenvalue perturbation bound holds: " << rate(s.eigval_holds, s.nondegenerate) << "\n";
  if (!f.out.empty()) {
    std::string csv = "pairs,nondegenerate,eigenvector_holds,eigenvalue_holds\n";
    csv += std::to_string(s.pairs) + ',' + std::to_string(s.nondegenerate) + ',' + std::to_string(s.eigfun_holds) +
           ',' + std::to_string(s.eigval_holds) + '\n';
    write_file(f.out, csv);
    write_file(stem_of(f.out) + ".manifest.json",
               dump(manifest("lemmas", lemma_config(f), f.seed, {{"report", f.out}}, seconds_since(t0))));
  }
  return exit_ok;
}

// ---- navigation ---------------------------------------------------------------------

struct NavTrainFlags {
  std::string map_path;
  bool default_map = false;
  Eigen::Index n = 413;
  int layers = 2;
  int epochs = 3000;
  double lr = 0.0002;
  std::uint64_t seed = 1;
  std::string model;
  std::optional<double> epsilon;
  int hidden = 32;
  bool no_tanh = false;
};

struct NavTrainPaths {
  std::string model, loss, dataset, trajectories, manifest;

  static NavTrainPaths from_model(const std::string& model) {
    const std::string s = stem_of(model);
    return {model, s + ".loss.csv", s + ".dataset.csv", s + ".trajectories.csv", s + ".manifest.json"};
  }
};

mflab::NavMap load_map(const std::string& path) {
  return mflab::io::map_from_json(mflab::io::parse_json(mflab::io::read_text(path), path));
}

int run_nav_train(const mflab::NavMap& map, const mflab::NavConfig& cfg, const NavTrainPaths& paths) {
  const auto t0 = std::chrono::steady_clock::now();
  const mflab::NavProblem p = mflab::prepare_nav_problem(map, cfg);
  mflab::FilterNet net = mflab::make_filter_net(cfg.layers, cfg.hidden, cfg.taps, cfg.tanh, cfg.seed);
  const mflab::TrainResult r = mflab::train_filter(std::move(net), p.gso, p.cloud.points, p.data, cfg.epochs, cfg.lr);

  const json config = {{"map", mflab::io::to_json(map)}, {"nav", mflab::io::to_json(cfg)}};
  json model = config;
  model["model"] = mflab::io::to_json(r.model);
  write_file(paths.model, dump(model));
  write_file(paths.loss, mflab::io::loss_csv(r.loss_history));
  write_file(paths.dataset, mflab::io::dataset_csv(p.data));
  write_file(paths.trajectories, mflab::io::trajectories_csv(p.data));
  const json outputs = {{"model", paths.model},
                        {"loss", paths.loss},
                        {"dataset", paths.dataset},
                        {"trajectories", paths.trajectories}};
  write_file(paths.manifest, dump(manifest("nav-train", config, cfg.seed, outputs, seconds_since(t0))));

  std::cout << "labeled nodes: " << p.data.labeled_indices.size() << " from " << p.data.trajectories.size()
            << " trajectories";
  if (p.data.skipped) std::cout << " (" << p.data.skipped << " unreachable starts skipped)";
  std::cout << "\nloss: " << mflab::io::fmt(r.loss_history.front()) << " -> "
            << mflab::io::fmt(r.loss_history.back()) << "\nwrote " << paths.model << "\n";
  return exit_ok;
}

struct NavEvalFlags {
  std::string model;
  int tests = 100;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_nav_eval(const NavEvalFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  if (f.model.empty() || !fs::exists(f.model)) throw UsageError("nav-eval: model file '" + f.model + "' not found");
  if (f.tests < 0) throw UsageError("nav-eval: --tests must be >= 0");
  const json j = mflab::io::parse_json(mflab::io::read_text(f.model), f.model);
  mflab::NavMap map;
  mflab::NavConfig cfg;
  mflab::FilterNet net;
  try {
    map = mflab::io::map_from_json(j.at("map"));
    cfg = mflab::io::nav_config_from_json(j.at("nav"));
    net = mflab::io::filter_net_from_json(j.at("model"));
  } catch (const std::exception& e) {
    throw UsageError(std::string("nav-eval: malformed model file: ") + e.what());
  }
  const std::uint64_t seed = f.seed.value_or(cfg.seed);
  const mflab::NavProblem p = mflab::prepare_nav_problem(map, cfg);
  const int wins = mflab::evaluate(p, net, map, f.tests, seed, cfg.rollout);

  const std::string label = std::to_string(net.layers.size()) + "-layer graph filter";
  std::printf("%-24s | n=%lld\n", "", static_cast<long long>(cfg.n));
  std::printf("%-24s | %d/%d\n", label.c_str(), wins, f.tests);
  std::printf("%d\n", wins);
  if (!f.out.empty()) {
    write_file(f.out, "layers,n,tests,seed,successes\n" + std::to_string(net.layers.size()) + ',' +
                          std::to_string(cfg.n) + ',' + std::to_string(f.tests) + ',' + std::to_string(seed) + ',' +
                          std::to_string(wins) + '\n');
    const json config = {{"model", f.model}, {"tests", f.tests}, {"seed", seed}};
    write_file(stem_of(f.out) + ".manifest.json",
               dump(manifest("nav-eval", config, seed, {{"report", f.out}}, seconds_since(t0))));
  }
  return exit_ok;
}

// ---- replay ---------------------------------------------------------------------------

std::string redirect(const std::string& path, const std::optional<std::string>& out_dir) {
  if (!out_dir) return path;
  return (fs::path(*out_dir) / fs::path(path).filename()).string();
}

int run_replay(const std::string& manifest_path, const std::optional<std::string>& out_dir) {
  if (!fs::exists(manifest_path)) throw UsageError("replay: manifest '" + manifest_path + "' not found");
  const json m = mflab::io::parse_json(mflab::io::read_text(manifest_path), manifest_path);
  std::string command;
  json config, outputs;
  try {
    command = m.at("command").get<std::string>();
    config = m.at("config");
    outputs = m.at("outputs");
  } catch (const json::exception& e) {
    throw UsageError(std::string("replay: malformed manifest: ") + e.what());
  }
  try {
    if (command == "thm1" || command == "thm2" || command == "thm3") {
      const auto cfg = mflab::io::config_from_json(config);
      cfg.validate();
      return run_thm(command, cfg, ThmPaths::from_report(redirect(outputs.at("report").get<std::string>(), out_dir)));
    }
    if (command == "nav-train") {
      const auto map = mflab::io::map_from_json(config.at("map"));
      const auto cfg = mflab::io::nav_config_from_json(config.at("nav"));
      return run_nav_train(map, cfg,
                           NavTrainPaths::from_model(redirect(outputs.at("model").get<std::string>(), out_dir)));
    }
    if (command == "nav-eval") {
      NavEvalFlags f;
      f.model = config.at("model").get<std::string>();
      f.tests = config.at("tests").get<int>();
      f.seed = config.at("seed").get<std::uint64_t>();
      f.out = redirect(outputs.at("report").get<std::string>(), out_dir);
      return run_nav_eval(f);
    }
    if (command == "lemmas") {
      LemmaFlags f;
      f.pairs = config.at("pairs").get<int>();
      f.dim = config.at("dim").get<Eigen::Index>();
      f.perturb = config.at("perturb").get<double>();
      f.seed = config.at("seed").get<std::uint64_t>();
      f.out = redirect(outputs.at("report").get<std::string>(), out_dir);
      return run_lemmas(f);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("replay: malformed manifest: ") + e.what());
  } catch (const mflab::Error& e) {
    if (e.code() == mflab::Errc::invalid_argument) throw UsageError(e.what());
    throw;
  }
  throw UsageError("replay: unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"manifold filter convergence experiments and graph-filter navigation"};
  app.set_version_flag("--version", MFLAB_VERSION);
  app.require_subcommand(1);

  ThmFlags thm;
  std::vector<CLI::App*> thm_subs;
  for (const char* name : {"thm1", "thm2", "thm3"}) {
    const char* about = name[3] == '1'   ? "pointwise operator convergence of the kernel Laplacian"
                        : name[3] == '2' ? "eigenvalue and eigenfunction convergence"
                                         : "spectral filter convergence";
    CLI::App* sub = app.add_subcommand(name, about);
    add_thm_flags(sub, thm);
    thm_subs.push_back(sub);
  }

  LemmaFlags lemma;
  CLI::App* lemmas = app.add_subcommand("lemmas", "random sweep of the eigenvector/eigenvalue perturbation bounds");
  lemmas->add_option("--pairs", lemma.pairs, "random matrix pairs")->capture_default_str();
  lemmas->add_option("--dim", lemma.dim, "matrix dimension")->capture_default_str();
  lemmas->add_option("--perturb", lemma.perturb, "perturbation scale")->capture_default_str();
  lemmas->add_option("--seed", lemma.seed, "seed")->capture_default_str();
  lemmas->add_option("--out", lemma.out, "optional CSV summary path");

  NavTrainFlags train;
  CLI::App* nav_train = app.add_subcommand("nav-train", "train a 1- or 2-layer graph filter on Dijkstra labels");
  auto* map_opt = nav_train->add_option("--map", train.map_path, "map JSON file");
  auto* default_opt = nav_train->add_flag("--default-map", train.default_map, "use the built-in map");
  map_opt->excludes(default_opt);
  nav_train->add_option("--n", train.n, "free-space samples")->capture_default_str();
  nav_train->add_option("--layers", train.layers, "1 or 2")->check(CLI::IsMember({1, 2}))->capture_default_str();
  nav_train->add_option("--epochs", train.epochs, "gradient steps")->capture_default_str();
  nav_train->add_option("--lr", train.lr, "learning rate")->capture_default_str();
  nav_train->add_option("--seed", train.seed, "seed")->capture_default_str();
  nav_train->add_option("--model", train.model, "model JSON path (default ./out/nav_L<layers>_<seed>.json)");
  nav_train->add_option("--epsilon", train.epsilon, "kernel bandwidth of the navigation graph");
  nav_train->add_option("--hidden", train.hidden, "hidden width of the 2-layer model")->capture_default_str();
  nav_train->add_flag("--no-tanh", train.no_tanh, "drop the hidden nonlinearity");

  NavEvalFlags eval;
  CLI::App* nav_eval = app.add_subcommand("nav-eval", "count successful rollouts of a trained model");
  nav_eval->add_option("--model", eval.model, "model JSON written by nav-train");
  nav_eval->add_option("--tests", eval.tests, "rollouts")->capture_default_str();
  nav_eval->add_option("--seed", eval.seed, "start-point seed (default: the training seed)");
  nav_eval->add_option("--out", eval.out, "optional CSV result path");

  std::string replay_manifest;
  std::optional<std::string> replay_dir;
  CLI::App* replay = app.add_subcommand("replay", "re-run an experiment from its manifest");
  replay->add_option("manifest", replay_manifest, "manifest JSON")->required();
  replay->add_option("--out-dir", replay_dir, "write outputs here instead of the recorded paths");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    for (CLI::App* sub : thm_subs) {
      if (!sub->parsed()) continue;
      const std::string name = sub->get_name();
      const auto cfg = resolve_thm(thm);
      const std::string out = thm.out.empty() ? "out/" + name + "_" + std::to_string(cfg.master_seed) + ".csv" : thm.out;
      return run_thm(name, cfg, ThmPaths::from_report(out));
    }
    if (lemmas->parsed()) {
      if (lemma.pairs < 0 || lemma.dim < 2 || !(lemma.perturb >= 0.0))
        throw UsageError("lemmas: need --pairs >= 0, --dim >= 2, --perturb >= 0");
      return run_lemmas(lemma);
    }
    if (nav_train->parsed()) {
      if (!train.default_map && train.map_path.empty()) throw UsageError("nav-train: give --map PATH or --default-map");
      mflab::NavMap map;
      mflab::NavConfig cfg;
      try {
        map = train.default_map ? mflab::default_nav_map() : load_map(train.map_path);
      } catch (const mflab::Error& e) {
        throw UsageError(e.what());
      }
      if (train.n < 1 || train.epochs < 0 || !(train.lr > 0.0) || train.hidden < 1)
        throw UsageError("nav-train: need --n >= 1, --epochs >= 0, --lr > 0, --hidden >= 1");
      cfg.n = train.n;
      cfg.layers = train.layers;
      cfg.epochs = train.epochs;
      cfg.lr = train.lr;
      cfg.seed = train.seed;
      cfg.hidden = train.hidden;
      cfg.tanh = !train.no_tanh;
      if (train.epsilon) cfg.epsilon = *train.epsilon;
      const std::string model = train.model.empty()
                                    ? "out/nav_L" + std::to_string(cfg.layers) + "_" + std::to_string(cfg.seed) + ".json"
                                    : train.model;
      return run_nav_train(map, cfg, NavTrainPaths::from_model(model));
    }
    if (nav_eval->parsed()) return run_nav_eval(eval);
    if (replay->parsed()) return run_replay(replay_manifest, replay_dir);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const mflab::Error& e) {
    std::cerr << "error (" << mflab::errc_name(e.code()) << "): " << e.what() << "\n";
    return exit_failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_failure;
  }
  return exit_usage;
}
