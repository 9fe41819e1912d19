#pragma once

// Correlation matrices, their eigenspectra, and the Wishart/Marchenko-Pastur
// reference band.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xcorr/error.hpp"
#include "xcorr/panel.hpp"

namespace xcorr {

class CorrelationMatrix {
 public:
  static constexpr double kSymmetryTolerance = 1e-12;

  CorrelationMatrix(Eigen::MatrixXd values, std::size_t t_length)
      : values_(std::move(values)), t_length_(t_length) {
    if (values_.rows() != values_.cols())
      throw Error(ErrorKind::structural, "correlation matrix must be square");
    if (asymmetry(values_) > kSymmetryTolerance)
      throw Error(ErrorKind::invalid_input, "correlation matrix is not symmetric");
  }

  const Eigen::MatrixXd& values() const { return values_; }
  std::size_t n_series() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t t_length() const { return t_length_; }
  double operator()(std::size_t m, std::size_t n) const {
    return values_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  }

  static double asymmetry(const Eigen::MatrixXd& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
  }

 private:
  Eigen::MatrixXd values_;
  std::size_t t_length_;
};

/// Eigenvalues in descending order; column i of `eigenvectors` is x_i with its
/// largest-magnitude component positive.
struct EigenSpectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  double source_q = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
  double lambda(std::size_t i) const { return eigenvalues(static_cast<Eigen::Index>(i)); }
  Eigen::VectorXd vector(std::size_t i) const {
    return eigenvectors.col(static_cast<Eigen::Index>(i));
  }
};

struct MpBounds {
  double q = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;

  bool contains(double lambda) const { return lambda_min <= lambda && lambda <= lambda_max; }
  double width() const { return lambda_max - lambda_min; }
};

/// Histogram of off-diagonal matrix elements with a moment-fitted normal.
struct ElementDistribution {
  std::vector<double> bin_edges;
  std::vector<double> densities;
  double gaussian_mu = 0.0;
  double gaussian_sigma = 0.0;
  // (empirical - fitted density) at the bin holding the 99th percentile,
  // in units of the standard deviation of all per-bin residuals.
  double tail_deviation = 0.0;
  std::size_t sample_count = 0;
  bool degenerate = false;

  std::vector<double> bin_centers() const {
    std::vector<double> c(densities.size());
    for (std::size_t b = 0; b < c.size(); ++b) c[b] = 0.5 * (bin_edges[b] + bin_edges[b + 1]);
    return c;
  }
  double fitted_density(double x) const {
    if (gaussian_sigma <= 0.0) return 0.0;
    const double z = (x - gaussian_mu) / gaussian_sigma;
    return std::exp(-0.5 * z * z) / (gaussian_sigma * std::sqrt(2.0 * std::numbers::pi));
  }
};

/// C = (1/T) M M^T over a standardized panel.
inline CorrelationMatrix correlation_matrix(const ReturnPanel& r) {
  if (!r.standardized())
    throw Error(ErrorKind::invalid_input,
                "correlation_matrix requires a standardized panel");
  if (r.n_assets() < 1)
    throw Error(ErrorKind::structural, "correlation_matrix: empty panel");
  const auto n = static_cast<Eigen::Index>(r.n_assets());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  c.selfadjointView<Eigen::Lower>().rankUpdate(r.values());
  c = c.selfadjointView<Eigen::Lower>();
  c /= static_cast<double>(r.length());
  return CorrelationMatrix(std::move(c), r.length());
}

/// Diagonalizes any symmetric matrix; `source_q` is carried through.
inline EigenSpectrum eigendecompose_symmetric(const Eigen::MatrixXd& c, double source_q) {
  if (c.rows() != c.cols())
    throw Error(ErrorKind::structural, "eigendecompose: matrix must be square");
  if (CorrelationMatrix::asymmetry(c) > CorrelationMatrix::kSymmetryTolerance)
    throw Error(ErrorKind::invalid_input, "eigendecompose: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::degenerate, "eigendecompose: solver did not converge");

  const Eigen::Index n = c.rows();
  EigenSpectrum s;
  s.source_q = source_q;
  s.eigenvalues.resize(n);
  s.eigenvectors.resize(n, n);
  // Eigen returns ascending order.
  for (Eigen::Index i = 0; i < n; ++i) {
    s.eigenvalues(i) = solver.eigenvalues()(n - 1 - i);
    Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    s.eigenvectors.col(i) = v;
  }
  return s;
}

inline EigenSpectrum eigendecompose(const CorrelationMatrix& c) {
  const double q = static_cast<double>(c.t_length()) / static_cast<double>(c.n_series());
  return eigendecompose_symmetric(c.values(), q);
}

/// lambda_min/max = 1 + 1/Q -/+ 2/sqrt(Q).
inline MpBounds mp_bounds(double q) {
  if (!(q > 0.0) || !std::isfinite(q))
    throw Error(ErrorKind::invalid_input, "mp_bounds: Q must be positive");
  const double centre = 1.0 + 1.0 / q;
  const double half = 2.0 / std::sqrt(q);
  return {q, centre - half, centre + half};
}

inline double overlap_fraction(std::span<const double> eigenvalues, const MpBounds& b) {
  if (eigenvalues.empty()) return 0.0;
  const auto inside = std::count_if(eigenvalues.begin(), eigenvalues.end(),
                                    [&](double l) { return b.contains(l); });
  return static_cast<double>(inside) / static_cast<double>(eigenvalues.size());
}

inline double overlap_fraction(const EigenSpectrum& s, const MpBounds& b) {
  return overlap_fraction(std::span<const double>(s.eigenvalues.data(), s.size()), b);
}

/// max |C - sum_i lambda_i x_i x_i^T|.
inline double reconstruction_error(const Eigen::MatrixXd& c, const EigenSpectrum& s) {
  const Eigen::MatrixXd rebuilt =
      s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose();
  return (c - rebuilt).cwiseAbs().maxCoeff();
}

/// max |x_i^T x_j - delta_ij|.
inline double orthonormality_error(const EigenSpectrum& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  return (s.eigenvectors.transpose() * s.eigenvectors - Eigen::MatrixXd::Identity(n, n))
      .cwiseAbs()
      .maxCoeff();
}

namespace detail {

inline std::vector<double> off_diagonal(const Eigen::MatrixXd& c) {
  std::vector<double> out;
  const Eigen::Index n = c.rows();
  out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index m = 0; m < n; ++m)
    for (Eigen::Index k = m + 1; k < n; ++k) out.push_back(c(m, k));
  return out;
}

/// Linear interpolation between order statistics.
inline double percentile(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  const double pos = p * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline ElementDistribution distribution_of(const std::vector<double>& entries, int n_bins) {
  if (n_bins < 10)
    throw Error(ErrorKind::invalid_input, "element distribution: need at least 10 bins");
  if (entries.size() < 3)
    throw Error(ErrorKind::degenerate,
                "element distribution: too few off-diagonal entries (need N >= 3)");

  ElementDistribution d;
  d.sample_count = entries.size();
  d.gaussian_mu = mean(entries);
  d.gaussian_sigma = std::sqrt(variance_pop(entries));

  const auto [lo_it, hi_it] = std::minmax_element(entries.begin(), entries.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (!(hi > lo)) {
    d.degenerate = true;
    lo -= 0.5;
    hi += 0.5;
  }
  const auto bins = static_cast<std::size_t>(n_bins);
  const double width = (hi - lo) / static_cast<double>(bins);
  d.bin_edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) d.bin_edges[b] = lo + width * static_cast<double>(b);
  d.bin_edges.back() = hi;

  auto bin_of = [&](double x) {
    auto b = static_cast<std::size_t>(std::floor((x - lo) / width));
    return std::min(b, bins - 1);
  };
  std::vector<double> counts(bins, 0.0);
  for (double x : entries) counts[bin_of(x)] += 1.0;
  d.densities.resize(bins);
  const double norm = static_cast<double>(entries.size()) * width;
  for (std::size_t b = 0; b < bins; ++b) d.densities[b] = counts[b] / norm;

  if (d.degenerate || d.gaussian_sigma <= 0.0) {
    d.degenerate = true;
    return d;
  }
  const auto centers = d.bin_centers();
  std::vector<double> resid(bins);
  for (std::size_t b = 0; b < bins; ++b) resid[b] = d.densities[b] - d.fitted_density(centers[b]);
  const double resid_sd = std::sqrt(variance_pop(resid));
  const std::size_t tail_bin = bin_of(percentile(entries, 0.99));
  d.tail_deviation = resid_sd > 0.0 ? resid[tail_bin] / resid_sd : 0.0;
  return d;
}

}  // namespace detail

inline ElementDistribution element_distribution(const CorrelationMatrix& c, int n_bins = 50) {
  if (c.n_series() < 3)
    throw Error(ErrorKind::degenerate, "element_distribution: need N >= 3");
  return detail::distribution_of(detail::off_diagonal(c.values()), n_bins);
}

/// Pools the off-diagonal elements of matrices built on non-overlapping
/// windows of length round(q_target * N); each window is standardized on its
/// own and a trailing remainder is discarded.
inline ElementDistribution windowed_element_distribution(const ReturnPanel& r, double q_target,
                                                         int n_bins = 50) {
  if (!(q_target > 0.0))
    throw Error(ErrorKind::invalid_input, "windowed distribution: q_target must be positive");
  if (r.n_assets() < 3)
    throw Error(ErrorKind::degenerate, "windowed distribution: need N >= 3");
  const auto window =
      static_cast<std::size_t>(std::llround(q_target * static_cast<double>(r.n_assets())));
  if (window < 2 || window > r.length())
    throw Error(ErrorKind::invalid_input,
                "windowed distribution: fewer than one full window of length " +
                    std::to_string(window));
  const std::size_t n_windows = r.length() / window;

  std::vector<double> pooled;
  for (std::size_t w = 0; w < n_windows; ++w) {
    RowMatrix block = r.values().middleCols(static_cast<Eigen::Index>(w * window),
                                            static_cast<Eigen::Index>(window));
    standardize_rows(block, r.assets());
    const ReturnPanel part = r.with_values(std::move(block), true);
    const auto entries = detail::off_diagonal(correlation_matrix(part).values());
    pooled.insert(pooled.end(), entries.begin(), entries.end());
  }
  return detail::distribution_of(pooled, n_bins);
}

}  // namespace xcorr
