#pragma once

// Multifractal detrended fluctuation analysis of a single series: profile,
// segment-wise polynomial detrending from both ends, q-th order fluctuation
// functions, generalized Hurst exponents and the singularity spectrum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xcorr/error.hpp"

namespace xcorr {

/// q values k * step for k in [lo/step, hi/step]; computed from integers so
/// q = 0 is hit exactly.
inline std::vector<double> uniform_q_grid(double lo = -4.0, double hi = 4.0, double step = 0.2) {
  if (!(step > 0.0) || hi < lo)
    throw Error(ErrorKind::invalid_input, "q grid: need step > 0 and lo <= hi");
  const auto k0 = static_cast<long>(std::llround(lo / step));
  const auto k1 = static_cast<long>(std::llround(hi / step));
  std::vector<double> q;
  for (long k = k0; k <= k1; ++k) q.push_back(static_cast<double>(k) * step);
  return q;
}

/// Geometrically spaced integer scales, duplicates removed.
inline std::vector<std::size_t> geometric_scales(std::size_t min_scale, std::size_t max_scale,
                                                 std::size_t count) {
  if (min_scale < 1 || max_scale < min_scale || count < 2)
    throw Error(ErrorKind::invalid_input, "scale grid: need 1 <= min <= max and count >= 2");
  std::vector<std::size_t> out;
  const double ratio = static_cast<double>(max_scale) / static_cast<double>(min_scale);
  for (std::size_t k = 0; k < count; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(count - 1);
    const auto n = static_cast<std::size_t>(
        std::llround(static_cast<double>(min_scale) * std::pow(ratio, frac)));
    if (out.empty() || n > out.back()) out.push_back(n);
  }
  return out;
}

struct MfdfaConfig {
  std::vector<double> q_grid = uniform_q_grid();
  int detrend_order = 2;
  std::vector<std::size_t> scales;
  std::size_t fit_min = 0;  // inclusive bounds on n for the h(q) fit
  std::size_t fit_max = 0;

  /// Default grid: 20 geometric scales from 16 to N/20, all used in the fit.
  static MfdfaConfig defaults(std::size_t series_length) {
    MfdfaConfig cfg;
    const std::size_t top = std::max<std::size_t>(series_length / 20, 17);
    cfg.scales = geometric_scales(16, top, 20);
    cfg.fit_min = cfg.scales.front();
    cfg.fit_max = cfg.scales.back();
    return cfg;
  }

  std::vector<std::size_t> fit_scales() const {
    std::vector<std::size_t> out;
    for (auto n : scales)
      if (n >= fit_min && n <= fit_max) out.push_back(n);
    return out;
  }

  void validate(std::size_t series_length) const {
    if (detrend_order < 1)
      throw Error(ErrorKind::invalid_input, "mfdfa: detrend order must be >= 1");
    if (scales.empty()) throw Error(ErrorKind::invalid_input, "mfdfa: empty scale grid");
    if (scales.front() < static_cast<std::size_t>(detrend_order) + 2)
      throw Error(ErrorKind::invalid_input,
                  "mfdfa: smallest scale must be >= detrend order + 2");
    for (std::size_t i = 1; i < scales.size(); ++i)
      if (scales[i] <= scales[i - 1])
        throw Error(ErrorKind::invalid_input, "mfdfa: scales must be strictly increasing");
    if (scales.back() > series_length / 4)
      throw Error(ErrorKind::invalid_input,
                  "mfdfa: largest scale " + std::to_string(scales.back()) +
                      " exceeds series length / 4 = " + std::to_string(series_length / 4));
    if (q_grid.empty()) throw Error(ErrorKind::invalid_input, "mfdfa: empty q grid");
    for (std::size_t i = 0; i < q_grid.size(); ++i) {
      if (i > 0 && q_grid[i] <= q_grid[i - 1])
        throw Error(ErrorKind::invalid_input, "mfdfa: q grid must be strictly increasing");
      if (q_grid[i] != 0.0 && std::abs(q_grid[i]) < 0.1)
        throw Error(ErrorKind::invalid_input,
                    "mfdfa: q values in (-0.1, 0.1) other than 0 are not allowed");
    }
    if (fit_scales().size() < 5)
      throw Error(ErrorKind::invalid_input, "mfdfa: fit range must contain at least 5 scales");
  }
};

/// F_q(n): rows follow q_grid, columns follow scales.
struct FluctuationSurface {
  std::vector<double> q;
  std::vector<std::size_t> scales;
  Eigen::MatrixXd values;
  std::vector<double> h;
  std::vector<double> fit_residual;
};

struct HurstFit {
  std::vector<double> h;
  std::vector<double> residual_rms;
};

struct SingularitySpectrum {
  std::vector<double> q;
  std::vector<double> h;
  std::vector<double> alpha;
  std::vector<double> f;
  double width = 0.0;
  Warnings warnings;

  /// alpha at the maximum of f.
  double apex_alpha() const {
    const auto it = std::max_element(f.begin(), f.end());
    return alpha[static_cast<std::size_t>(it - f.begin())];
  }
};

/// Y(j) = sum_{k<=j} (x_k - <x>).
inline std::vector<double> profile(std::span<const double> x, std::size_t min_scale = 1) {
  if (x.size() < 4 * std::max<std::size_t>(min_scale, 1))
    throw Error(ErrorKind::invalid_input,
                "profile: series of length " + std::to_string(x.size()) +
                    " shorter than 4 x smallest scale");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  std::vector<double> y(x.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    acc += x[j] - mean;
    y[j] = acc;
  }
  return y;
}

namespace detail {

/// Orthonormal basis (columns) of polynomials of degree <= order on n
/// points, built on indices centred and scaled to [-1, 1].
inline Eigen::MatrixXd polynomial_basis(std::size_t n, int order) {
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(order + 1);
  Eigen::MatrixXd basis(rows, cols);
  const double half = 0.5 * static_cast<double>(n - 1);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const double t = (static_cast<double>(k) - half) / half;
    double p = 1.0;
    for (Eigen::Index d = 0; d < cols; ++d, p *= t) basis(k, d) = p;
  }
  // Modified Gram-Schmidt, applied twice.
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index d = 0; d < cols; ++d) {
      for (Eigen::Index e = 0; e < d; ++e)
        basis.col(d) -= basis.col(e).dot(basis.col(d)) * basis.col(e);
      basis.col(d).normalize();
    }
  return basis;
}

}  // namespace detail

/// F^2(nu, n) for floor(N/n) segments taken from the start followed by the
/// same number taken from the end; each segment has its order-l least-squares
/// polynomial removed and the variance uses divisor n.
inline std::vector<double> segment_variances(std::span<const double> y, std::size_t n,
                                             int order) {
  if (order < 1) throw Error(ErrorKind::invalid_input, "segment_variances: order must be >= 1");
  if (n <= static_cast<std::size_t>(order) + 1)
    throw Error(ErrorKind::invalid_input,
                "segment_variances: scale " + std::to_string(n) +
                    " gives an under-determined order-" + std::to_string(order) + " fit");
  if (n > y.size() / 4)
    throw Error(ErrorKind::invalid_input,
                "segment_variances: scale exceeds profile length / 4");
  const Eigen::MatrixXd basis = detail::polynomial_basis(n, order);
  const std::size_t segments = y.size() / n;
  std::vector<double> out;
  out.reserve(2 * segments);
  auto variance_at = [&](std::size_t start) {
    const Eigen::Map<const Eigen::VectorXd> seg(y.data() + start, static_cast<Eigen::Index>(n));
    const Eigen::VectorXd coeff = basis.transpose() * seg;
    const Eigen::VectorXd resid = seg - basis * coeff;
    return resid.squaredNorm() / static_cast<double>(n);
  };
  for (std::size_t v = 0; v < segments; ++v) out.push_back(variance_at(v * n));
  for (std::size_t v = 0; v < segments; ++v) out.push_back(variance_at(y.size() - (v + 1) * n));
  return out;
}

/// q-th order generalized mean of segment RMS values; q = 0 uses the
/// logarithmic mean exp(<ln F^2> / 2). Summed in segment order.
inline double fluctuation(std::span<const double> variances, double q) {
  if (variances.empty()) throw Error(ErrorKind::invalid_input, "fluctuation: no variances");
  bool any_positive = false;
  for (double v : variances) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw Error(ErrorKind::invalid_input, "fluctuation: variances must be finite and >= 0");
    if (v > 0.0) {
      any_positive = true;
    } else if (q <= 0.0) {
      throw Error(ErrorKind::degenerate,
                  "fluctuation: zero segment variance with q <= 0 diverges; "
                  "raise the smallest scale");
    }
  }
  if (!any_positive)
    throw Error(ErrorKind::degenerate, "fluctuation: all segment variances are zero");

  const double count = static_cast<double>(variances.size());
  if (q == 0.0) {
    double s = 0.0;
    for (double v : variances) s += std::log(v);
    return std::exp(0.5 * s / count);
  }
  // log-sum-exp over (q/2) ln v for stability at large |q|.
  double top = -std::numeric_limits<double>::infinity();
  for (double v : variances)
    if (v > 0.0) top = std::max(top, 0.5 * q * std::log(v));
  double s = 0.0;
  for (double v : variances)
    if (v > 0.0) s += std::exp(0.5 * q * std::log(v) - top);
  return std::exp((top + std::log(s / count)) / q);
}

inline FluctuationSurface fluctuation_surface(std::span<const double> series,
                                              const MfdfaConfig& cfg) {
  cfg.validate(series.size());
  const auto y = profile(series, cfg.scales.front());
  FluctuationSurface s;
  s.q = cfg.q_grid;
  s.scales = cfg.scales;
  s.values.resize(static_cast<Eigen::Index>(s.q.size()), static_cast<Eigen::Index>(s.scales.size()));
  for (std::size_t c = 0; c < s.scales.size(); ++c) {
    const auto v = segment_variances(y, s.scales[c], cfg.detrend_order);
    for (std::size_t r = 0; r < s.q.size(); ++r)
      s.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = fluctuation(v, s.q[r]);
  }
  return s;
}

/// Per q, least squares of ln F_q(n) on ln n over the fit range.
inline HurstFit hurst_exponents(const FluctuationSurface& surface, const MfdfaConfig& cfg) {
  std::vector<Eigen::Index> cols;
  for (std::size_t c = 0; c < surface.scales.size(); ++c)
    if (surface.scales[c] >= cfg.fit_min && surface.scales[c] <= cfg.fit_max)
      cols.push_back(static_cast<Eigen::Index>(c));
  if (cols.size() < 5)
    throw Error(ErrorKind::invalid_input, "hurst_exponents: fit range has fewer than 5 scales");

  const auto m = static_cast<double>(cols.size());
  std::vector<double> x;
  for (auto c : cols) x.push_back(std::log(static_cast<double>(surface.scales[static_cast<std::size_t>(c)])));
  double x_mean = 0.0;
  for (double v : x) x_mean += v;
  x_mean /= m;
  double sxx = 0.0;
  for (double v : x) sxx += (v - x_mean) * (v - x_mean);

  HurstFit fit;
  for (Eigen::Index r = 0; r < surface.values.rows(); ++r) {
    std::vector<double> y;
    for (auto c : cols) {
      const double f = surface.values(r, c);
      if (!std::isfinite(f) || !(f > 0.0))
        throw Error(ErrorKind::invalid_input, "hurst_exponents: non-finite or non-positive F_q(n)");
      y.push_back(std::log(f));
    }
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= m;
    double sxy = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) sxy += (x[k] - x_mean) * (y[k] - y_mean);
    const double slope = sxy / sxx;
    double ss = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double e = y[k] - (y_mean + slope * (x[k] - x_mean));
      ss += e * e;
    }
    fit.h.push_back(slope);
    fit.residual_rms.push_back(std::sqrt(ss / m));
  }
  return fit;
}

/// alpha = h + q h', f = q (alpha - h) + 1 with h' from central differences
/// (one-sided at the ends of the grid).
inline SingularitySpectrum singularity_spectrum(std::span<const double> h,
                                                std::span<const double> q) {
  if (h.size() != q.size())
    throw Error(ErrorKind::structural, "singularity_spectrum: h and q lengths differ");
  if (h.size() < 5)
    throw Error(ErrorKind::invalid_input, "singularity_spectrum: need at least 5 q points");
  const std::size_t n = h.size();
  SingularitySpectrum s;
  s.q.assign(q.begin(), q.end());
  s.h.assign(h.begin(), h.end());
  s.alpha.resize(n);
  s.f.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? i : i + 1;
    const double dh = (h[hi] - h[lo]) / (q[hi] - q[lo]);
    s.alpha[i] = h[i] + q[i] * dh;
    s.f[i] = q[i] * (s.alpha[i] - h[i]) + 1.0;
  }
  const auto [lo, hi] = std::minmax_element(s.alpha.begin(), s.alpha.end());
  s.width = *hi - *lo;
  for (std::size_t i = 1; i < n; ++i)
    if (s.alpha[i] > s.alpha[i - 1] + 1e-6) {
      s.warnings.push_back("alpha is not monotone in q near q = " + std::to_string(q[i]));
      break;
    }
  return s;
}

struct MfdfaResult {
  FluctuationSurface surface;
  SingularitySpectrum spectrum;
};

inline MfdfaResult mfdfa(std::span<const double> series, const MfdfaConfig& cfg) {
  MfdfaResult out;
  out.surface = fluctuation_surface(series, cfg);
  auto fit = hurst_exponents(out.surface, cfg);
  out.spectrum = singularity_spectrum(fit.h, out.surface.q);
  out.surface.h = std::move(fit.h);
  out.surface.fit_residual = std::move(fit.residual_rms);
  return out;
}

/// Averages (alpha, f) parametrically at fixed q across spectra sharing one q grid.
inline SingularitySpectrum average_spectra(std::span<const SingularitySpectrum> spectra) {
  if (spectra.empty()) throw Error(ErrorKind::invalid_input, "average_spectra: nothing to average");
  SingularitySpectrum avg;
  avg.q = spectra.front().q;
  const std::size_t n = avg.q.size();
  avg.h.assign(n, 0.0);
  avg.alpha.assign(n, 0.0);
  avg.f.assign(n, 0.0);
  for (const auto& s : spectra) {
    if (s.q != avg.q)
      throw Error(ErrorKind::structural, "average_spectra: q grids differ");
    for (std::size_t i = 0; i < n; ++i) {
      avg.h[i] += s.h[i];
      avg.alpha[i] += s.alpha[i];
      avg.f[i] += s.f[i];
    }
  }
  const double k = static_cast<double>(spectra.size());
  for (std::size_t i = 0; i < n; ++i) {
    avg.h[i] /= k;
    avg.alpha[i] /= k;
    avg.f[i] /= k;
  }
  const auto [lo, hi] = std::minmax_element(avg.alpha.begin(), avg.alpha.end());
  avg.width = *hi - *lo;
  return avg;
}

}  // namespace xcorr
