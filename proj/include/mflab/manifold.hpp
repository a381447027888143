// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mflab/cloud.hpp"
#include "mflab/error.hpp"
#include "mflab/response.hpp"
#include "mflab/rng.hpp"

namespace mflab {

/// Intrinsic angle coordinates of an ambient point: one angle for the circle,
/// two for the torus.
inline std::array<double, 2> angles_of(const ManifoldSpec& m, const Point& x) {
  if (m.kind == ManifoldKind::circle) return {std::atan2(x[1], x[0]), 0.0};
  return {std::atan2(x[1], x[0]), std::atan2(x[3], x[2])};
}

inline Point point_at(const ManifoldSpec& m, double theta1, double theta2 = 0.0) {
  const double r = m.factor_radius();
  Point p(m.ambient_dim());
  p[0] = r * std::cos(theta1);
  p[1] = r * std::sin(theta1);
  if (m.kind == ManifoldKind::flat_torus_2d) {
    p[2] = r * std::cos(theta2);
    p[3] = r * std::sin(theta2);
  }
  return p;
}

/// A real Laplace-Beltrami eigenfunction amplitude * trig(k1 t1 + k2 t2),
/// normalized to unit L2 norm under the probability measure.
struct Eigenmode {
  enum class Trig { constant, cos, sin };

  ManifoldSpec manifold;
  std::array<int, 2> freq{0, 0};
  Trig trig = Trig::constant;

  double amplitude() const { return trig == Trig::constant ? 1.0 : std::numbers::sqrt2; }

  double at_angles(double t1, double t2 = 0.0) const {
    const double phase = freq[0] * t1 + freq[1] * t2;
    switch (trig) {
      case Trig::constant: return 1.0;
      case Trig::cos: return amplitude() * std::cos(phase);
      case Trig::sin: return amplitude() * std::sin(phase);
    }
    return 0.0;
  }

  double operator()(const Point& x) const {
    auto [t1, t2] = angles_of(manifold, x);
    return at_angles(t1, t2);
  }
};

struct AnalyticEigenpair {
  double eigenvalue = 0.0;
  Eigenmode mode;
  int multiplicity_group_id = 0;
};

/// First K Laplace-Beltrami eigenpairs in ascending order. Index 0 is the
/// constant mode with eigenvalue 0.
struct AnalyticSpectrum {
  ManifoldSpec manifold;
  std::vector<AnalyticEigenpair> entries;

  std::size_t size() const { return entries.size(); }
  double eigenvalue(std::size_t i) const { return entries.at(i).eigenvalue; }
  double evaluate(std::size_t i, const Point& x) const { return entries.at(i).mode(x); }

  std::vector<double> eigenvalues() const {
    std::vector<double> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.eigenvalue);
    return out;
  }
};

/// Scalar signal on the manifold. When `coefficients` is present the signal is
/// exactly that finite combination of the canonical analytic eigenbasis.
struct ManifoldSignal {
  std::function<double(const Point&)> evaluator;
  std::string description;
  std::optional<std::size_t> band_limit;
  std::optional<Eigen::VectorXd> coefficients;

  double operator()(const Point& x) const { return evaluator(x); }
};

inline AnalyticSpectrum lb_spectrum(const ManifoldSpec& m, std::size_t K) {
  m.validate();
  detail::require(K >= 1, "lb_spectrum: K must be >= 1");
  AnalyticSpectrum spec{m, {}};
  spec.entries.reserve(K + 8);
  spec.entries.push_back({0.0, Eigenmode{m, {0, 0}, Eigenmode::Trig::constant}, 0});

  using Trig = Eigenmode::Trig;
  if (m.kind == ManifoldKind::circle) {
    const double inv_r2 = 1.0 / (m.scale * m.scale);
    for (int k = 1; spec.entries.size() < K; ++k) {
      const double lambda = k * k * inv_r2;
      spec.entries.push_back({lambda, Eigenmode{m, {k, 0}, Trig::cos}, k});
      spec.entries.push_back({lambda, Eigenmode{m, {k, 0}, Trig::sin}, k});
    }
  } else {
    // Half-lattice of frequency pairs (k1 > 0, or k1 == 0 and k2 > 0); each
    // contributes a cos and a sin mode. Shells of equal |k|^2 are emitted whole.
    const double base = 2.0 * std::numbers::pi / m.scale;
    int group = 0;
    for (int shell = 1; spec.entries.size() < K; ++shell) {
      std::vector<std::array<int, 2>> ks;
      const int r = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(shell))));
      for (int k1 = 0; k1 <= r; ++k1)
        for (int k2 = -r; k2 <= r; ++k2)
          if (k1 * k1 + k2 * k2 == shell && (k1 > 0 || k2 > 0)) ks.push_back({k1, k2});
      if (ks.empty()) continue;
      ++group;
      const double lambda = base * base * shell;
      for (const auto& k : ks) {
        spec.entries.push_back({lambda, Eigenmode{m, k, Trig::cos}, group});
        spec.entries.push_back({lambda, Eigenmode{m, k, Trig::sin}, group});
      }
    }
  }
  spec.entries.resize(K);
  return spec;
}

inline PointCloud sample_uniform(const ManifoldSpec& m, Eigen::Index n, std::uint64_t seed) {
  m.validate();
  detail::require(n >= 2, "sample_uniform: n must be >= 2");
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.resize(n, m.ambient_dim());
  cloud.intrinsic_dim = m.intrinsic_dim();
  cloud.manifold = m;
  cloud.seed = seed;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t1 = two_pi * uniform01(rng);
    const double t2 = m.kind == ManifoldKind::flat_torus_2d ? two_pi * uniform01(rng) : 0.0;
    cloud.points.row(i) = point_at(m, t1, t2).transpose();
  }
  return cloud;
}

// ---- signal constructors ----------------------------------------------------

/// Finite combination sum_i c_i phi_i of the first coeffs.size() analytic modes.
inline ManifoldSignal band_limited_signal(const AnalyticSpectrum& spectrum,
                                          const Eigen::VectorXd& coeffs,
                                          std::string description = "band-limited") {
  detail::require(static_cast<std::size_t>(coeffs.size()) <= spectrum.size(),
                  "band_limited_signal: more coefficients than analytic modes");
  std::vector<Eigenmode> modes;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) modes.push_back(spectrum.entries[i].mode);
  ManifoldSignal f;
  f.evaluator = [modes, coeffs](const Point& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < modes.size(); ++i)
      if (coeffs[static_cast<Eigen::Index>(i)] != 0.0)
        s += coeffs[static_cast<Eigen::Index>(i)] * modes[i](x);
    return s;
  };
  f.description = std::move(description);
  f.band_limit = static_cast<std::size_t>(coeffs.size());
  f.coefficients = coeffs;
  return f;
}

inline ManifoldSignal mode_signal(const AnalyticSpectrum& spectrum, std::size_t index,
                                  double amplitude = 1.0) {
  detail::require(index < spectrum.size(), "mode_signal: index beyond analytic spectrum");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index + 1));
  c[static_cast<Eigen::Index>(index)] = amplitude;
  return band_limited_signal(spectrum, c, "mode " + std::to_string(index));
}

inline ManifoldSignal constant_signal(double value) {
  ManifoldSignal f;
  f.evaluator = [value](const Point&) { return value; };
  f.description = "constant";
  f.band_limit = 1;
  f.coefficients = Eigen::VectorXd::Constant(1, value);
  return f;
}

/// Arbitrary signal with no declared band limit.
inline ManifoldSignal function_signal(std::function<double(const Point&)> fn,
                                      std::string description = "function") {
  return ManifoldSignal{std::move(fn), std::move(description), std::nullopt, std::nullopt};
}

// ---- manifold filtering ----------------------------------------------------

/// g = sum_{i < K} h(lambda_i) <f, phi_i> phi_i. Coefficients are exact for
/// signals carrying their expansion, otherwise a seeded Monte-Carlo estimate
/// over quad_n uniform samples. Signals whose band limit exceeds k_trunc (or
/// is unknown) are refused unless allow_truncation is set.
inline ManifoldSignal manifold_filter_apply(const FilterSpec& response, const ManifoldSignal& f,
                                            const AnalyticSpectrum& spectrum, std::size_t k_trunc,
                                            Eigen::Index quad_n, std::uint64_t seed,
                                            bool allow_truncation = false) {
  using detail::require;
  require(response.is_response(), "manifold_filter_apply: needs a frequency response");
  validate(response);
  require(k_trunc >= 1 && k_trunc <= spectrum.size(),
          "manifold_filter_apply: k_trunc must be within the analytic spectrum");
  if (!allow_truncation) {
    if (!f.band_limit)
      throw Error(Errc::truncation_refused, "signal has no declared band limit");
    if (*f.band_limit > k_trunc)
      throw Error(Errc::truncation_refused, "signal band limit " + std::to_string(*f.band_limit) +
                                                " exceeds truncation " + std::to_string(k_trunc));
  }

  const auto K = static_cast<Eigen::Index>(k_trunc);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(K);
  if (f.coefficients) {
    const Eigen::Index m = std::min(K, f.coefficients->size());
    coeffs.head(m) = f.coefficients->head(m);
  } else {
    require(quad_n >= 1, "manifold_filter_apply: quad_n must be >= 1");
    PointCloud q = sample_uniform(spectrum.manifold, std::max<Eigen::Index>(quad_n, 2), seed);
    for (Eigen::Index s = 0; s < q.size(); ++s) {
      const Point x = q.point(s);
      const double fx = f(x);
      if (!std::isfinite(fx)) throw Error(Errc::evaluation_error, "signal evaluated to non-finite");
      for (Eigen::Index i = 0; i < K; ++i) coeffs[i] += fx * spectrum.evaluate(i, x);
    }
    coeffs /= static_cast<double>(q.size());
  }
  for (Eigen::Index i = 0; i < K; ++i)
    coeffs[i] *= response_eval(response, spectrum.eigenvalue(static_cast<std::size_t>(i)));

  ManifoldSignal g = band_limited_signal(spectrum, coeffs, "filtered(" + f.description + ")");
  return g;
}

}  // namespace mflab
