// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mflab/cloud.hpp"
#include "mflab/error.hpp"
#include "mflab/graph.hpp"
#include "mflab/manifold.hpp"

namespace mflab {

enum class InnerProduct { standard, gn };

/// Eigenpairs of a symmetric matrix, eigenvalues ascending. Columns of
/// `eigenvectors` are orthonormal under `inner` (gn carries the 1/n weight).
/// A partial decomposition holds fewer columns than rows.
struct Spectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  InnerProduct inner = InnerProduct::standard;

  Eigen::Index size() const { return eigenvalues.size(); }
  Eigen::Index dim() const { return eigenvectors.rows(); }
};

namespace detail {

inline void require_symmetric(const Eigen::MatrixXd& m, const char* who) {
  require(m.rows() == m.cols(), std::string(who) + ": matrix must be square");
  require(m.rows() >= 1, std::string(who) + ": matrix must be non-empty");
  require(m.allFinite(), std::string(who) + ": matrix has non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          std::string(who) + ": matrix is not symmetric");
}

inline Spectrum sorted_spectrum(const Eigen::VectorXd& values, const Eigen::MatrixXd& vectors) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  Spectrum s;
  s.eigenvalues.resize(values.size());
  s.eigenvectors.resize(vectors.rows(), values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    s.eigenvalues[k] = values[order[static_cast<std::size_t>(k)]];
    s.eigenvectors.col(k) = vectors.col(order[static_cast<std::size_t>(k)]);
  }
  return s;
}

}  // namespace detail

/// Cyclic Jacobi eigensolver. Sweeps the upper triangle row by row until the
/// off-diagonal Frobenius norm is at most tol * ||M||_F.
inline Spectrum eig_sym(const Eigen::MatrixXd& matrix, double tol = 1e-12) {
  detail::require_symmetric(matrix, "eig_sym");
  const Eigen::Index n = matrix.rows();
  detail::require(n <= 4096, "eig_sym: n must be <= 4096");
  detail::require(tol > 0.0, "eig_sym: tol must be positive");

  Eigen::MatrixXd a = 0.5 * (matrix + matrix.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double threshold = tol * a.norm();
  constexpr int max_sweeps = 100;

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  bool converged = false;
  for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
    if (off_norm() <= threshold) {
      converged = true;
      break;
    }
    if (sweep == max_sweeps) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          const double np = c * arp - s * arq;
          const double nq = s * arp + c * arq;
          a(r, p) = np;
          a(p, r) = np;
          a(r, q) = nq;
          a(q, r) = nq;
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }
  if (!converged) throw Error(Errc::numerical_failure, "eig_sym: Jacobi did not converge in 100 sweeps");
  return detail::sorted_spectrum(a.diagonal(), v);
}

/// Full decomposition through LAPACK's divide-and-conquer driver.
inline Spectrum eig_sym_lapack(const Eigen::MatrixXd& matrix) {
  detail::require_symmetric(matrix, "eig_sym_lapack");
  const auto n = static_cast<lapack_int>(matrix.rows());
  Eigen::MatrixXd a = 0.5 * (matrix + matrix.transpose());
  Eigen::VectorXd w(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, a.data(), n, w.data());
  if (info != 0) throw Error(Errc::numerical_failure, "dsyevd failed, info=" + std::to_string(info));
  return detail::sorted_spectrum(w, a);
}

/// The `count` smallest eigenpairs (LAPACK MRRR driver).
inline Spectrum eig_sym_lowest(const Eigen::MatrixXd& matrix, Eigen::Index count) {
  detail::require_symmetric(matrix, "eig_sym_lowest");
  const auto n = static_cast<lapack_int>(matrix.rows());
  detail::require(count >= 1 && count <= matrix.rows(), "eig_sym_lowest: count out of range");
  Eigen::MatrixXd a = 0.5 * (matrix + matrix.transpose());
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, count);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(count));
  lapack_int found = 0;
  const lapack_int info =
      LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, a.data(), n, 0.0, 0.0, 1,
                     static_cast<lapack_int>(count), 0.0, &found, w.data(), z.data(), n, support.data());
  if (info != 0 || found != count)
    throw Error(Errc::numerical_failure, "dsyevr failed, info=" + std::to_string(info));
  return detail::sorted_spectrum(w.head(count), z);
}

enum class EigenSolver { jacobi, lapack, automatic };

/// Jacobi below `jacobi_limit` rows, LAPACK above (automatic mode).
inline Spectrum decompose(const Eigen::MatrixXd& matrix, EigenSolver solver = EigenSolver::automatic,
                          Eigen::Index jacobi_limit = 256) {
  if (solver == EigenSolver::jacobi || (solver == EigenSolver::automatic && matrix.rows() <= jacobi_limit))
    return eig_sym(matrix);
  return eig_sym_lapack(matrix);
}

// ---- L2(G_n) geometry -------------------------------------------------------

inline double gn_inner(const GraphSignal& u, const GraphSignal& v) {
  detail::require(u.size() == v.size(), "gn_inner: length mismatch");
  detail::require(u.size() > 0, "gn_inner: empty signals");
  return u.dot(v) / static_cast<double>(u.size());
}

inline double gn_norm(const GraphSignal& u) { return std::sqrt(gn_inner(u, u)); }

/// Rescales standard-orthonormal eigenvectors by sqrt(n) so they are unit in L2(G_n).
inline Spectrum gn_normalize(Spectrum spectrum) {
  detail::require(spectrum.inner == InnerProduct::standard, "gn_normalize: spectrum is already gn-normalized");
  spectrum.eigenvectors *= std::sqrt(static_cast<double>(spectrum.dim()));
  spectrum.inner = InnerProduct::gn;
  return spectrum;
}

// ---- eigengap and alpha partition --------------------------------------------

/// Two eigenvalues belong to one multiplicity cluster when closer than
/// 1e-6 + 1e-3 * lambda.
inline bool same_cluster(double a, double b) {
  return std::abs(a - b) <= 1e-6 + 1e-3 * std::max(std::abs(a), std::abs(b));
}

/// Contiguous [begin, end) ranges of clustered values in a sorted sequence.
inline std::vector<std::pair<std::size_t, std::size_t>> multiplicity_clusters(const std::vector<double>& sorted) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t b = 0;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i == sorted.size() || !same_cluster(sorted[i - 1], sorted[i])) {
      if (i > b) out.emplace_back(b, i);
      b = i;
    }
  }
  return out;
}

/// min over distinct values i = 1..K of {v_i - v_{i-1}, v_{i+1} - v_i}, after
/// collapsing multiplicities. Indices past the last distinct value are skipped.
inline double eigengap(const std::vector<double>& eigenvalues, std::size_t K) {
  detail::require(K >= 1, "eigengap: K must be >= 1");
  detail::require(eigenvalues.size() >= K + 1, "eigengap: need K+1 eigenvalues");
  std::vector<double> distinct;
  for (auto [b, e] : multiplicity_clusters(eigenvalues)) distinct.push_back(eigenvalues[b]);
  detail::require(distinct.size() >= 2, "eigengap: needs at least two distinct values");
  const std::size_t m = distinct.size();
  double theta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i <= std::min(K, m - 1); ++i) {
    theta = std::min(theta, distinct[i] - distinct[i - 1]);
    if (i + 1 < m) theta = std::min(theta, distinct[i + 1] - distinct[i]);
  }
  return theta;
}

struct SpectrumPartition {
  double alpha = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> groups;  // [begin, end) into the eigenvalue list
  std::vector<double> group_gaps;                           // gap between group k and k+1

  std::size_t count() const { return groups.size(); }
};

/// Greedy split of a sorted spectrum: a new group starts whenever the step
/// from the previous eigenvalue exceeds alpha.
inline SpectrumPartition alpha_partition(const std::vector<double>& eigenvalues, double alpha) {
  detail::require(std::isfinite(alpha) && alpha > 0.0, "alpha_partition: alpha must be positive");
  detail::require(std::is_sorted(eigenvalues.begin(), eigenvalues.end()), "alpha_partition: eigenvalues must be sorted");
  SpectrumPartition p;
  p.alpha = alpha;
  if (eigenvalues.empty()) return p;
  std::size_t b = 0;
  for (std::size_t i = 1; i <= eigenvalues.size(); ++i) {
    if (i == eigenvalues.size() || eigenvalues[i] - eigenvalues[i - 1] > alpha) {
      p.groups.emplace_back(b, i);
      if (i < eigenvalues.size()) p.group_gaps.push_back(eigenvalues[i] - eigenvalues[i - 1]);
      b = i;
    }
  }
  return p;
}

// ---- graph / analytic alignment ----------------------------------------------

struct AlignmentRecord {
  std::size_t index = 0;
  double lambda_graph = 0.0;
  double lambda_analytic = 0.0;
  double lambda_abs_error = 0.0;
  int sign = 1;           // a_i for simple eigenvalues; 0 in subspace mode
  bool subspace = false;  // aligned by an orthogonal rotation of a degenerate block
  double eigenfunction_error = 0.0;  // ||a_i phi_{i,n} - P_n phi_i||_{G_n}
};

struct AlignmentReport {
  std::vector<AlignmentRecord> records;
  double theta = std::numeric_limits<double>::quiet_NaN();

  double max_lambda_error() const {
    double m = 0.0;
    for (const auto& r : records) m = std::max(m, r.lambda_abs_error);
    return m;
  }
  double max_eigenfunction_error() const {
    double m = 0.0;
    for (const auto& r : records) m = std::max(m, r.eigenfunction_error);
    return m;
  }
};

/// Compares the first K graph eigenpairs with the analytic ones. Simple
/// eigenvalues are sign-aligned; inside a multiplicity cluster the graph block
/// is rotated onto the sampled analytic block by orthogonal Procrustes. A
/// cluster that straddles K is aligned as a whole when both spectra hold it.
inline AlignmentReport align_eigenpairs(const Spectrum& graph, const AnalyticSpectrum& analytic,
                                        const PointCloud& cloud, std::size_t K) {
  using detail::require;
  require(graph.inner == InnerProduct::gn, "align_eigenpairs: graph spectrum must be gn-normalized");
  require(K >= 1, "align_eigenpairs: K must be >= 1");
  require(K <= static_cast<std::size_t>(graph.size()) && K <= analytic.size(),
          "align_eigenpairs: K exceeds available eigenpairs");
  require(graph.dim() == cloud.size(), "align_eigenpairs: cloud and spectrum sizes differ");

  const Eigen::Index n = cloud.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::vector<double> lambdas = analytic.eigenvalues();
  const std::size_t usable = std::min(analytic.size(), static_cast<std::size_t>(graph.size()));

  AlignmentReport report;
  report.records.resize(K);
  for (auto [b, e] : multiplicity_clusters(lambdas)) {
    if (b >= K) break;
    const std::size_t end = std::min(e, usable);
    const auto m = static_cast<Eigen::Index>(end - b);
    Eigen::MatrixXd sampled(n, m);
    for (Eigen::Index c = 0; c < m; ++c)
      for (Eigen::Index i = 0; i < n; ++i)
        sampled(i, c) = analytic.evaluate(b + static_cast<std::size_t>(c), cloud.point(i));
    const Eigen::MatrixXd block = graph.eigenvectors.middleCols(static_cast<Eigen::Index>(b), m);

    Eigen::MatrixXd aligned;
    std::vector<int> signs(static_cast<std::size_t>(m), 0);
    if (m == 1) {
      const double overlap = inv_n * block.col(0).dot(sampled.col(0));
      signs[0] = overlap >= 0.0 ? 1 : -1;
      aligned = signs[0] * block;
    } else {
      const Eigen::MatrixXd cross = inv_n * block.transpose() * sampled;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
      aligned = block * (svd.matrixU() * svd.matrixV().transpose());
    }
    for (Eigen::Index c = 0; c < m; ++c) {
      const std::size_t idx = b + static_cast<std::size_t>(c);
      if (idx >= K) break;
      AlignmentRecord& r = report.records[idx];
      r.index = idx;
      r.lambda_graph = graph.eigenvalues[static_cast<Eigen::Index>(idx)];
      r.lambda_analytic = lambdas[idx];
      r.lambda_abs_error = std::abs(r.lambda_graph - r.lambda_analytic);
      r.subspace = m > 1;
      r.sign = signs[static_cast<std::size_t>(c)];
      r.eigenfunction_error = gn_norm(aligned.col(c) - sampled.col(c));
    }
  }

  std::size_t distinct_in_k = multiplicity_clusters(std::vector<double>(lambdas.begin(), lambdas.begin() + static_cast<std::ptrdiff_t>(K))).size();
  try {
    report.theta = eigengap(lambdas, std::max<std::size_t>(1, distinct_in_k - 1));
  } catch (const Error&) {
    report.theta = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

}  // namespace mflab
