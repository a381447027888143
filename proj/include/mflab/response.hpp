// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "mflab/error.hpp"

namespace mflab {

// Frequency-response families. Each is a closed-form h(lambda) on lambda >= 0.
struct ConstantResponse {
  double value = 1.0;
};
struct HeatResponse {
  double tau = 1.0;  // exp(-tau * lambda)
};
struct TikhonovResponse {
  double mu = 1.0;  // 1 / (1 + mu * lambda)
};
struct BandRejectResponse {
  double center = 1.0;
  double width = 1.0;
  double depth = 1.0;  // 1 - depth * exp(-((lambda - center) / width)^2)
};
/// Piecewise-linear through (lambda, value) knots, clamped outside the knot range.
struct TabulatedResponse {
  std::vector<double> lambdas;
  std::vector<double> values;
};
/// Polynomial taps h_0 ... h_{K-1} of a shift-and-sum graph filter.
struct FilterTaps {
  std::vector<double> taps;
};

struct FilterSpec {
  std::variant<ConstantResponse, HeatResponse, TikhonovResponse, BandRejectResponse,
               TabulatedResponse, FilterTaps>
      form;

  bool is_response() const { return !std::holds_alternative<FilterTaps>(form); }

  static FilterSpec constant(double value) { return {ConstantResponse{value}}; }
  static FilterSpec heat(double tau) { return {HeatResponse{tau}}; }
  static FilterSpec tikhonov(double mu) { return {TikhonovResponse{mu}}; }
  static FilterSpec band_reject(double center, double width, double depth) {
    return {BandRejectResponse{center, width, depth}};
  }
  static FilterSpec tabulated(std::vector<double> lambdas, std::vector<double> values) {
    return {TabulatedResponse{std::move(lambdas), std::move(values)}};
  }
  static FilterSpec taps(std::vector<double> h) { return {FilterTaps{std::move(h)}}; }
};

inline std::string family_name(const FilterSpec& spec) {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantResponse>) return "constant";
        else if constexpr (std::is_same_v<T, HeatResponse>) return "heat";
        else if constexpr (std::is_same_v<T, TikhonovResponse>) return "tikhonov";
        else if constexpr (std::is_same_v<T, BandRejectResponse>) return "band_reject";
        else if constexpr (std::is_same_v<T, TabulatedResponse>) return "tabulated";
        else return "taps";
      },
      spec.form);
}

/// Rejects parameter sets outside each family's domain.
inline void validate(const FilterSpec& spec) {
  using detail::require;
  std::visit(
      [](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantResponse>) {
          require(std::isfinite(f.value), "constant response must be finite");
        } else if constexpr (std::is_same_v<T, HeatResponse>) {
          require(std::isfinite(f.tau) && f.tau >= 0.0, "heat tau must be >= 0");
        } else if constexpr (std::is_same_v<T, TikhonovResponse>) {
          require(std::isfinite(f.mu) && f.mu >= 0.0, "tikhonov mu must be >= 0");
        } else if constexpr (std::is_same_v<T, BandRejectResponse>) {
          require(f.width > 0.0, "band_reject width must be > 0");
        } else if constexpr (std::is_same_v<T, TabulatedResponse>) {
          require(!f.lambdas.empty() && f.lambdas.size() == f.values.size(),
                  "tabulated response needs matching non-empty knot arrays");
          for (std::size_t i = 1; i < f.lambdas.size(); ++i)
            require(f.lambdas[i] > f.lambdas[i - 1], "tabulated knots must be strictly increasing");
        } else {
          require(!f.taps.empty(), "tap sequence must be non-empty");
        }
      },
      spec.form);
}

namespace detail {

inline double tabulated_eval(const TabulatedResponse& t, double lambda) {
  const auto& xs = t.lambdas;
  if (lambda <= xs.front()) return t.values.front();
  if (lambda >= xs.back()) return t.values.back();
  auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), lambda) - xs.begin());
  std::size_t lo = hi - 1;
  if (xs[lo] == lambda) return t.values[lo];
  double w = (lambda - xs[lo]) / (xs[hi] - xs[lo]);
  return (1.0 - w) * t.values[lo] + w * t.values[hi];
}

}  // namespace detail

/// h(lambda) for a response-form spec.
inline double response_eval(const FilterSpec& spec, double lambda) {
  detail::require(lambda >= 0.0, "response_eval: lambda must be >= 0");
  return std::visit(
      [lambda](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantResponse>) {
          return f.value;
        } else if constexpr (std::is_same_v<T, HeatResponse>) {
          return std::exp(-f.tau * lambda);
        } else if constexpr (std::is_same_v<T, TikhonovResponse>) {
          return 1.0 / (1.0 + f.mu * lambda);
        } else if constexpr (std::is_same_v<T, BandRejectResponse>) {
          double z = (lambda - f.center) / f.width;
          return 1.0 - f.depth * std::exp(-z * z);
        } else if constexpr (std::is_same_v<T, TabulatedResponse>) {
          return detail::tabulated_eval(f, lambda);
        } else {
          throw Error(Errc::invalid_argument, "response_eval: taps form has no frequency response");
        }
      },
      spec.form);
}

}  // namespace mflab
