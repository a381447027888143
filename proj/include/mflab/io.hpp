// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mflab/convergence.hpp"
#include "mflab/error.hpp"
#include "mflab/graph.hpp"
#include "mflab/manifold.hpp"
#include "mflab/navigation.hpp"
#include "mflab/response.hpp"
#include "mflab/spectral.hpp"

namespace mflab::io {

using json = nlohmann::json;

/// Shortest round-trip-safe decimal: 17 significant digits.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, what + ": " + e.what());
  }
}

// ---- manifold ---------------------------------------------------------------

inline json to_json(const ManifoldSpec& m) { return {{"kind", kind_name(m.kind)}, {"scale", m.scale}}; }

inline ManifoldKind parse_kind(const std::string& s) {
  if (s == "circle") return ManifoldKind::circle;
  if (s == "flat_torus_2d" || s == "torus2") return ManifoldKind::flat_torus_2d;
  throw Error(Errc::invalid_argument, "unknown manifold kind '" + s + "' (valid: circle, torus2)");
}

inline ManifoldSpec manifold_from_json(const json& j) {
  try {
    ManifoldSpec m{parse_kind(j.at("kind").get<std::string>()), j.value("scale", 1.0)};
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("manifold JSON: ") + e.what());
  }
}

// ---- filters ------------------------------------------------------------------

inline json to_json(const FilterSpec& spec) {
  return std::visit(
      [](const auto& f) -> json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantResponse>)
          return {{"form", "response"}, {"family", "constant"}, {"value", f.value}};
        else if constexpr (std::is_same_v<T, HeatResponse>)
          return {{"form", "response"}, {"family", "heat"}, {"tau", f.tau}};
        else if constexpr (std::is_same_v<T, TikhonovResponse>)
          return {{"form", "response"}, {"family", "tikhonov"}, {"mu", f.mu}};
        else if constexpr (std::is_same_v<T, BandRejectResponse>)
          return {{"form", "response"}, {"family", "band_reject"}, {"center", f.center}, {"width", f.width},
                  {"depth", f.depth}};
        else if constexpr (std::is_same_v<T, TabulatedResponse>)
          return {{"form", "response"}, {"family", "tabulated"}, {"lambdas", f.lambdas}, {"values", f.values}};
        else
          return {{"form", "taps"}, {"taps", f.taps}};
      },
      spec.form);
}

inline FilterSpec filter_from_json(const json& j) {
  try {
    const std::string form = j.at("form").get<std::string>();
    FilterSpec spec;
    if (form == "taps") {
      spec = FilterSpec::taps(j.at("taps").get<std::vector<double>>());
    } else if (form == "response") {
      const std::string family = j.at("family").get<std::string>();
      if (family == "constant") spec = FilterSpec::constant(j.at("value").get<double>());
      else if (family == "heat") spec = FilterSpec::heat(j.at("tau").get<double>());
      else if (family == "tikhonov") spec = FilterSpec::tikhonov(j.at("mu").get<double>());
      else if (family == "band_reject")
        spec = FilterSpec::band_reject(j.at("center").get<double>(), j.at("width").get<double>(),
                                       j.at("depth").get<double>());
      else if (family == "tabulated")
        spec = FilterSpec::tabulated(j.at("lambdas").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
      else
        throw Error(Errc::invalid_argument, "unknown filter family '" + family + "'");
    } else {
      throw Error(Errc::invalid_argument, "unknown filter form '" + form + "'");
    }
    validate(spec);
    return spec;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("filter JSON: ") + e.what());
  }
}

// ---- navigation -----------------------------------------------------------------

inline json to_json(const Rect& r) { return json::array({r.x0, r.y0, r.x1, r.y1}); }

inline Rect rect_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw Error(Errc::invalid_argument, "rectangle must have 4 numbers");
  return {v[0], v[1], v[2], v[3]};
}

inline json to_json(const NavMap& m) {
  json obstacles = json::array();
  for (const auto& r : m.obstacles) obstacles.push_back(to_json(r));
  return {{"bounds", to_json(m.bounds)}, {"obstacles", obstacles}, {"goal", {m.goal.x(), m.goal.y()}}};
}

inline NavMap map_from_json(const json& j) {
  try {
    NavMap m;
    m.bounds = rect_from_json(j.at("bounds"));
    for (const auto& o : j.value("obstacles", json::array())) m.obstacles.push_back(rect_from_json(o));
    const auto g = j.at("goal").get<std::vector<double>>();
    if (g.size() != 2) throw Error(Errc::invalid_argument, "goal must have 2 numbers");
    m.goal = Vec2(g[0], g[1]);
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("map JSON: ") + e.what());
  }
}

/// Tap banks as nested arrays [in][out][k].
inline json to_json(const FilterNet& net) {
  json layers = json::array();
  for (const auto& l : net.layers) {
    json bank = json::array();
    for (int i = 0; i < l.in; ++i) {
      json row = json::array();
      for (int o = 0; o < l.out; ++o) {
        json taps = json::array();
        for (const auto& h : l.taps) taps.push_back(h(i, o));
        row.push_back(taps);
      }
      bank.push_back(row);
    }
    layers.push_back({{"in", l.in},
                      {"out", l.out},
                      {"activation", l.activation == Activation::tanh ? "tanh" : "none"},
                      {"taps", bank}});
  }
  return {{"feature_widths", net.feature_widths()}, {"layers", layers}};
}

inline FilterNet filter_net_from_json(const json& j) {
  try {
    FilterNet net;
    for (const auto& lj : j.at("layers")) {
      FilterLayer l;
      l.in = lj.at("in").get<int>();
      l.out = lj.at("out").get<int>();
      l.activation = lj.at("activation").get<std::string>() == "tanh" ? Activation::tanh : Activation::none;
      const auto& bank = lj.at("taps");
      if (static_cast<int>(bank.size()) != l.in) throw Error(Errc::invalid_argument, "tap bank rows != in");
      const std::size_t K = bank.at(0).at(0).size();
      l.taps.assign(K, Eigen::MatrixXd(l.in, l.out));
      for (int i = 0; i < l.in; ++i) {
        if (static_cast<int>(bank[i].size()) != l.out) throw Error(Errc::invalid_argument, "tap bank cols != out");
        for (int o = 0; o < l.out; ++o) {
          const auto taps = bank[i][o].get<std::vector<double>>();
          if (taps.size() != K) throw Error(Errc::invalid_argument, "ragged tap bank");
          for (std::size_t k = 0; k < K; ++k) l.taps[k](i, o) = taps[k];
        }
      }
      net.layers.push_back(std::move(l));
    }
    return net;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("model JSON: ") + e.what());
  }
}

// ---- CSV writers -------------------------------------------------------------------

inline std::string report_csv(const ExperimentReport& r) {
  std::string s = "theorem_id,n,epsilon,trial,seed,metric,value\n";
  for (const auto& row : r.rows) {
    s += row.theorem_id + ',' + std::to_string(row.n) + ',' + fmt(row.epsilon) + ',' + std::to_string(row.trial) +
         ',' + std::to_string(row.seed) + ',' + row.metric + ',' + fmt(row.value) + '\n';
  }
  return s;
}

inline json rate_json(const RateFit& fit) {
  json medians = json::array();
  for (auto [n, m] : fit.per_n_medians) medians.push_back({{"n", n}, {"median", m}});
  return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"per_n_medians", medians}};
}

/// {slope, intercept, per_n_medians} for the primary metric, plus the same
/// triple for every other metric that admits a fit.
inline json report_summary(const ExperimentReport& r) {
  json out = {{"metric", r.primary_metric}};
  json metrics = json::object();
  std::vector<std::string> names;
  for (const auto& row : r.rows)
    if (std::find(names.begin(), names.end(), row.metric) == names.end()) names.push_back(row.metric);
  for (const auto& name : names) {
    try {
      metrics[name] = rate_json(fit_rate(r, name));
    } catch (const Error&) {
      std::map<Eigen::Index, std::vector<double>> by_n;
      for (const auto& row : r.rows)
        if (row.metric == name) by_n[row.n].push_back(row.value);
      json medians = json::array();
      for (auto& [n, v] : by_n) medians.push_back({{"n", n}, {"median", median(v)}});
      metrics[name] = {{"slope", nullptr}, {"intercept", nullptr}, {"per_n_medians", medians}};
    }
  }
  const json& primary = metrics.contains(r.primary_metric) ? metrics[r.primary_metric] : json::object();
  out["slope"] = primary.value("slope", json(nullptr));
  out["intercept"] = primary.value("intercept", json(nullptr));
  out["per_n_medians"] = primary.value("per_n_medians", json::array());
  out["metrics"] = metrics;
  return out;
}

inline std::string cloud_csv(const PointCloud& c) {
  std::string s = "index";
  for (Eigen::Index k = 0; k < c.points.cols(); ++k) s += ",x" + std::to_string(k);
  s += '\n';
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    s += std::to_string(i);
    for (Eigen::Index k = 0; k < c.points.cols(); ++k) s += ',' + fmt(c.points(i, k));
    s += '\n';
  }
  return s;
}

/// Upper-triangle edges with positive weight.
inline std::string graph_edges_csv(const GeometricGraph& g) {
  std::string s = "i,j,w\n";
  for (Eigen::Index i = 0; i < g.n; ++i)
    for (Eigen::Index j = i + 1; j < g.n; ++j)
      if (g.adjacency(i, j) > 0.0) s += std::to_string(i) + ',' + std::to_string(j) + ',' + fmt(g.adjacency(i, j)) + '\n';
  return s;
}

inline std::string spectrum_csv(const Spectrum& s) {
  std::string out = "index,eigenvalue\n";
  for (Eigen::Index i = 0; i < s.size(); ++i) out += std::to_string(i) + ',' + fmt(s.eigenvalues[i]) + '\n';
  return out;
}

inline json spectrum_json(const Spectrum& s) {
  std::vector<double> v(s.eigenvalues.data(), s.eigenvalues.data() + s.size());
  return {{"inner_product", s.inner == InnerProduct::gn ? "gn" : "standard"}, {"eigenvalues", v}};
}

/// Row i holds node i's entries of every eigenvector.
inline std::string eigenvectors_csv(const Spectrum& s) {
  std::string out;
  for (Eigen::Index i = 0; i < s.dim(); ++i) {
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (k) out += ',';
      out += fmt(s.eigenvectors(i, k));
    }
    out += '\n';
  }
  return out;
}

inline std::string dataset_csv(const NavDataset& d) {
  std::string s = "node,x,y,label_x,label_y\n";
  for (std::size_t k = 0; k < d.labeled_indices.size(); ++k) {
    const Eigen::Index i = d.labeled_indices[k];
    s += std::to_string(i) + ',' + fmt(d.cloud.points(i, 0)) + ',' + fmt(d.cloud.points(i, 1)) + ',' +
         fmt(d.labels[k].x()) + ',' + fmt(d.labels[k].y()) + '\n';
  }
  return s;
}

inline std::string trajectories_csv(const NavDataset& d) {
  std::string s = "trajectory,step,node,x,y\n";
  for (std::size_t t = 0; t < d.trajectories.size(); ++t)
    for (std::size_t k = 0; k < d.trajectories[t].size(); ++k) {
      const Eigen::Index i = d.trajectories[t][k];
      s += std::to_string(t) + ',' + std::to_string(k) + ',' + std::to_string(i) + ',' + fmt(d.cloud.points(i, 0)) +
           ',' + fmt(d.cloud.points(i, 1)) + '\n';
    }
  return s;
}

inline std::string loss_csv(const std::vector<double>& history) {
  std::string s = "epoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) s += std::to_string(e) + ',' + fmt(history[e]) + '\n';
  return s;
}

// ---- experiment config ---------------------------------------------------------------

inline const char* solver_name(EigenSolver s) {
  switch (s) {
    case EigenSolver::jacobi: return "jacobi";
    case EigenSolver::lapack: return "lapack";
    case EigenSolver::automatic: return "auto";
  }
  return "auto";
}

inline EigenSolver parse_solver(const std::string& s) {
  if (s == "jacobi") return EigenSolver::jacobi;
  if (s == "lapack") return EigenSolver::lapack;
  if (s == "auto") return EigenSolver::automatic;
  throw Error(Errc::invalid_argument, "unknown solver '" + s + "' (valid: jacobi, lapack, auto)");
}

inline json to_json(const ExperimentConfig& c) {
  std::vector<long long> ns(c.n_values.begin(), c.n_values.end());
  return {{"manifold", to_json(c.manifold)},
          {"n_values", ns},
          {"trials", c.trials},
          {"master_seed", c.master_seed},
          {"epsilon", c.epsilon_rule.fixed ? json(*c.epsilon_rule.fixed) : json("default")},
          {"K", c.K},
          {"filter", to_json(c.filter)},
          {"signal_coefficients", c.signal_coefficients},
          {"eval_points", c.eval_points},
          {"volume_calibrated", c.volume_calibrated},
          {"fdt_alpha", c.fdt_alpha},
          {"fdt_gamma", c.fdt_gamma},
          {"quad_n", c.quad_n},
          {"solver", solver_name(c.solver)}};
}

inline ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    c.manifold = manifold_from_json(j.at("manifold"));
    c.n_values.clear();
    for (auto n : j.at("n_values").get<std::vector<long long>>()) c.n_values.push_back(static_cast<Eigen::Index>(n));
    c.trials = j.at("trials").get<int>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    const json& eps = j.at("epsilon");
    if (eps.is_number()) c.epsilon_rule.fixed = eps.get<double>();
    c.K = j.at("K").get<std::size_t>();
    c.filter = filter_from_json(j.at("filter"));
    c.signal_coefficients = j.at("signal_coefficients").get<std::vector<double>>();
    c.eval_points = j.at("eval_points").get<int>();
    c.volume_calibrated = j.at("volume_calibrated").get<bool>();
    c.fdt_alpha = j.at("fdt_alpha").get<double>();
    c.fdt_gamma = j.at("fdt_gamma").get<double>();
    c.quad_n = j.at("quad_n").get<Eigen::Index>();
    c.solver = parse_solver(j.at("solver").get<std::string>());
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("config JSON: ") + e.what());
  }
}

inline json to_json(const NavConfig& c) {
  return {{"n", c.n},
          {"epsilon", c.epsilon},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"taps", c.taps},
          {"tanh", c.tanh},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"n_trajectories", c.n_trajectories},
          {"max_edge_length", c.max_edge_length},
          {"seed", c.seed},
          {"step_size", c.rollout.step_size},
          {"goal_radius", c.rollout.goal_radius},
          {"max_steps", c.rollout.max_steps}};
}

inline NavConfig nav_config_from_json(const json& j) {
  try {
    NavConfig c;
    c.n = j.at("n").get<Eigen::Index>();
    c.epsilon = j.at("epsilon").get<double>();
    c.layers = j.at("layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.taps = j.at("taps").get<int>();
    c.tanh = j.at("tanh").get<bool>();
    c.epochs = j.at("epochs").get<int>();
    c.lr = j.at("lr").get<double>();
    c.n_trajectories = j.at("n_trajectories").get<int>();
    c.max_edge_length = j.at("max_edge_length").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.rollout.step_size = j.at("step_size").get<double>();
    c.rollout.goal_radius = j.at("goal_radius").get<double>();
    c.rollout.max_steps = j.at("max_steps").get<int>();
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("nav config JSON: ") + e.what());
  }
}

}  // namespace mflab::io
