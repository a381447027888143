// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mflab/error.hpp"
#include "mflab/graph.hpp"
#include "mflab/response.hpp"
#include "mflab/spectral.hpp"

namespace mflab {

namespace detail {

// Eigenvalues of a PSD operator can come back as -1e-16; clamp those, reject
// anything clearly negative.
inline double clamp_psd_eigenvalue(double lambda, double scale) {
  if (lambda >= 0.0) return lambda;
  require(lambda >= -(1e-9 * scale + 1e-12), "spectral filter: operator has a negative eigenvalue");
  return 0.0;
}

}  // namespace detail

/// g = sum_i h(lambda_i) <x, phi_i>_{G_n} phi_i over the complete gn-normalized
/// eigenbasis.
inline GraphSignal spectral_filter_apply(const Spectrum& spectrum, const FilterSpec& spec, const GraphSignal& x) {
  using detail::require;
  require(spectrum.inner == InnerProduct::gn, "spectral_filter_apply: spectrum must be gn-normalized");
  require(spectrum.dim() == x.size(), "spectral_filter_apply: signal length does not match spectrum");
  require(spectrum.size() == spectrum.dim(), "spectral_filter_apply: needs the complete eigenbasis");
  require(spec.is_response(), "spectral_filter_apply: needs a frequency response");
  validate(spec);
  const double scale = spectrum.eigenvalues.cwiseAbs().maxCoeff();
  Eigen::VectorXd coeffs = spectrum.eigenvectors.transpose() * x / static_cast<double>(x.size());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i)
    coeffs[i] *= response_eval(spec, detail::clamp_psd_eigenvalue(spectrum.eigenvalues[i], scale));
  return spectrum.eigenvectors * coeffs;
}

/// exp(-tau L) x by scaling and squaring a 20-term Taylor series. Uses no
/// eigendecomposition, so it serves as an independent check on the spectral
/// route.
inline GraphSignal heat_filter_oracle(const Eigen::MatrixXd& laplacian, double tau, const GraphSignal& x) {
  using detail::require;
  require(std::isfinite(tau) && tau >= 0.0, "heat_filter_oracle: tau must be >= 0");
  require(laplacian.rows() == laplacian.cols() && laplacian.rows() == x.size(),
          "heat_filter_oracle: dimension mismatch");
  if (tau == 0.0) return x;
  const Eigen::Index n = laplacian.rows();
  Eigen::MatrixXd a = -tau * laplacian;
  const double inf_norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (inf_norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(inf_norm / 0.5)));
  a /= std::ldexp(1.0, squarings);

  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd expm = term;
  for (int k = 1; k <= 20; ++k) {
    term = term * a / static_cast<double>(k);
    expm += term;
  }
  for (int s = 0; s < squarings; ++s) expm = expm * expm;
  return expm * x;
}

/// sum_k h_k S^k x with one running power vector.
inline GraphSignal poly_filter_apply(const Eigen::MatrixXd& gso, const std::vector<double>& taps, const GraphSignal& x) {
  using detail::require;
  require(gso.rows() == gso.cols() && gso.rows() == x.size(), "poly_filter_apply: dimension mismatch");
  require(!taps.empty(), "poly_filter_apply: taps must be non-empty");
  GraphSignal power = x;
  GraphSignal y = taps[0] * x;
  for (std::size_t k = 1; k < taps.size(); ++k) {
    power = gso * power;
    y += taps[k] * power;
  }
  return y;
}

// ---- frequency difference threshold -------------------------------------------

struct FdtReport {
  double alpha = 0.0;
  double gamma = 0.0;
  SpectrumPartition partition;
  std::vector<double> per_group_variation;
  bool passes = false;

  double max_variation() const {
    double m = 0.0;
    for (double v : per_group_variation) m = std::max(m, v);
    return m;
  }
};

/// Partitions the spectrum at separation alpha and measures the spread of h
/// inside each group; passes iff every spread is at most gamma.
inline FdtReport fdt_check(const FilterSpec& spec, const std::vector<double>& eigenvalues, double alpha,
                           double gamma) {
  detail::require(!eigenvalues.empty(), "fdt_check: empty spectrum");
  detail::require(gamma > 0.0, "fdt_check: gamma must be positive");
  FdtReport r;
  r.alpha = alpha;
  r.gamma = gamma;
  r.partition = alpha_partition(eigenvalues, alpha);
  r.passes = true;
  for (auto [b, e] : r.partition.groups) {
    // Max pairwise |h(a) - h(b)| over the group is max h - min h.
    double lo = response_eval(spec, eigenvalues[b]);
    double hi = lo;
    for (std::size_t i = b + 1; i < e; ++i) {
      const double h = response_eval(spec, eigenvalues[i]);
      lo = std::min(lo, h);
      hi = std::max(hi, h);
    }
    r.per_group_variation.push_back(hi - lo);
    if (hi - lo > gamma) r.passes = false;
  }
  return r;
}

/// Splits h into h0 plus one part per multi-eigenvalue group, each tabulated
/// at the distinct eigenvalues. The parts sum back to h at every eigenvalue.
/// The representative C_l of a group is the midpoint of its range.
inline std::vector<FilterSpec> fdt_decompose(const FilterSpec& spec, const SpectrumPartition& partition,
                                             const std::vector<double>& eigenvalues) {
  using detail::require;
  require(spec.is_response(), "fdt_decompose: needs a frequency response");
  require(!partition.groups.empty(), "fdt_decompose: empty partition");
  std::size_t expect = 0;
  for (auto [b, e] : partition.groups) {
    require(b == expect && e > b, "fdt_decompose: partition does not tile the eigenvalues");
    expect = e;
  }
  require(expect == eigenvalues.size(), "fdt_decompose: partition does not match eigenvalues");

  std::vector<std::size_t> group_of(eigenvalues.size());
  std::vector<std::size_t> multi;
  for (std::size_t g = 0; g < partition.groups.size(); ++g) {
    auto [b, e] = partition.groups[g];
    for (std::size_t i = b; i < e; ++i) group_of[i] = g;
    if (e - b > 1) multi.push_back(g);
  }
  std::vector<double> rep_response;
  double rep_sum = 0.0;
  for (std::size_t g : multi) {
    auto [b, e] = partition.groups[g];
    const double c = 0.5 * (eigenvalues[b] + eigenvalues[e - 1]);
    rep_response.push_back(response_eval(spec, c));
    rep_sum += rep_response.back();
  }

  // Knots at distinct eigenvalues.
  std::vector<std::size_t> knots;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i)
    if (i == 0 || eigenvalues[i] != eigenvalues[i - 1]) knots.push_back(i);
  auto is_singleton = [&](std::size_t i) {
    auto [b, e] = partition.groups[group_of[i]];
    return e - b == 1;
  };

  std::vector<double> xs;
  for (std::size_t i : knots) xs.push_back(eigenvalues[i]);

  std::vector<FilterSpec> parts;
  std::vector<double> h0;
  for (std::size_t i : knots)
    h0.push_back(is_singleton(i) ? response_eval(spec, eigenvalues[i]) - rep_sum : 0.0);
  parts.push_back(FilterSpec::tabulated(xs, std::move(h0)));

  for (std::size_t l = 0; l < multi.size(); ++l) {
    std::vector<double> hl;
    for (std::size_t i : knots) {
      if (is_singleton(i)) hl.push_back(rep_response[l]);
      else if (group_of[i] == multi[l]) hl.push_back(response_eval(spec, eigenvalues[i]));
      else hl.push_back(0.0);
    }
    parts.push_back(FilterSpec::tabulated(xs, std::move(hl)));
  }
  return parts;
}

/// Grid estimate of the Lipschitz constant of h on [lo, hi]: the largest
/// finite-difference slope between neighbouring grid points. This is a lower
/// bound on the true constant.
inline double lipschitz_constant(const FilterSpec& spec, double lo, double hi, std::size_t grid_n) {
  using detail::require;
  require(lo >= 0.0 && hi > lo && std::isfinite(hi), "lipschitz_constant: need 0 <= lo < hi");
  require(grid_n >= 2, "lipschitz_constant: grid_n must be >= 2");
  const double step = (hi - lo) / static_cast<double>(grid_n - 1);
  double best = 0.0;
  double prev = response_eval(spec, lo);
  for (std::size_t i = 1; i < grid_n; ++i) {
    const double lambda = i + 1 == grid_n ? hi : lo + step * static_cast<double>(i);
    const double h = response_eval(spec, lambda);
    best = std::max(best, std::abs(h - prev) / step);
    prev = h;
  }
  return best;
}

}  // namespace mflab
