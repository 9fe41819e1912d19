#pragma once

// Price and return panels: N aligned series on a uniform time grid.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "xcorr/error.hpp"

namespace xcorr {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline RowMatrix stack_rows(const std::vector<std::vector<double>>& rows,
                            const char* what) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  RowMatrix m(static_cast<Eigen::Index>(rows.size()),
              static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      throw Error(ErrorKind::structural,
                  std::string(what) + ": ragged rows (row " +
                      std::to_string(i) + " has " +
                      std::to_string(rows[i].size()) + " entries, expected " +
                      std::to_string(cols) + ")");
    }
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Population variance (divisor = length), two-pass.
inline double variance_pop(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

inline std::span<const double> row_span(const RowMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace detail

/// Prices p_s(t_j) for N assets at T+1 grid points.
class PricePanel {
 public:
  PricePanel(std::vector<std::string> assets, std::vector<double> timestamps,
             RowMatrix prices, int bars_per_day)
      : assets_(std::move(assets)),
        timestamps_(std::move(timestamps)),
        prices_(std::move(prices)),
        bars_per_day_(bars_per_day) {
    validate();
  }

  static PricePanel from_rows(std::vector<std::string> assets,
                              std::vector<double> timestamps,
                              const std::vector<std::vector<double>>& rows,
                              int bars_per_day) {
    return PricePanel(std::move(assets), std::move(timestamps),
                      detail::stack_rows(rows, "price panel"), bars_per_day);
  }

  std::size_t n_assets() const { return static_cast<std::size_t>(prices_.rows()); }
  std::size_t n_points() const { return static_cast<std::size_t>(prices_.cols()); }
  const std::vector<std::string>& assets() const { return assets_; }
  const std::vector<double>& timestamps() const { return timestamps_; }
  const RowMatrix& values() const { return prices_; }
  std::span<const double> row(std::size_t i) const {
    return detail::row_span(prices_, static_cast<Eigen::Index>(i));
  }
  int bars_per_day() const { return bars_per_day_; }

 private:
  void validate() const {
    if (assets_.size() != n_assets())
      throw Error(ErrorKind::structural, "price panel: asset count does not match rows");
    if (timestamps_.size() != n_points())
      throw Error(ErrorKind::structural,
                  "price panel: timestamps length does not match row length");
    if (n_points() < 2)
      throw Error(ErrorKind::structural, "price panel: need at least two price points");
    if (bars_per_day_ <= 0)
      throw Error(ErrorKind::invalid_input, "price panel: bars_per_day must be positive");
    for (std::size_t j = 1; j < timestamps_.size(); ++j) {
      if (!(timestamps_[j] > timestamps_[j - 1]))
        throw Error(ErrorKind::invalid_input,
                    "price panel: timestamps not strictly increasing at column " +
                        std::to_string(j));
    }
    for (Eigen::Index i = 0; i < prices_.rows(); ++i) {
      for (Eigen::Index j = 0; j < prices_.cols(); ++j) {
        const double p = prices_(i, j);
        if (!(p > 0.0) || !std::isfinite(p))
          throw Error(ErrorKind::invalid_input,
                      "non-positive or non-finite price at row " + std::to_string(i) +
                          " (" + assets_[static_cast<std::size_t>(i)] + "), column " +
                          std::to_string(j));
      }
    }
  }

  std::vector<std::string> assets_;
  std::vector<double> timestamps_;
  RowMatrix prices_;
  int bars_per_day_;
};

/// N x T matrix of log-returns g_s(j). When `standardized` is set, each row
/// has zero mean and unit population variance (checked on construction).
class ReturnPanel {
 public:
  static constexpr double kMeanTolerance = 1e-10;
  static constexpr double kVarianceTolerance = 1e-8;

  ReturnPanel(std::vector<std::string> assets, RowMatrix returns,
              int bars_per_day, double dt_seconds, bool standardized = false)
      : assets_(std::move(assets)),
        returns_(std::move(returns)),
        bars_per_day_(bars_per_day),
        dt_seconds_(dt_seconds),
        standardized_(standardized) {
    validate();
  }

  static ReturnPanel from_rows(std::vector<std::string> assets,
                               const std::vector<std::vector<double>>& rows,
                               int bars_per_day, double dt_seconds,
                               bool standardized = false) {
    return ReturnPanel(std::move(assets), detail::stack_rows(rows, "return panel"),
                       bars_per_day, dt_seconds, standardized);
  }

  /// Unlabelled panel with assets named S0, S1, ...
  static ReturnPanel from_rows(const std::vector<std::vector<double>>& rows,
                               int bars_per_day = 1, double dt_seconds = 1.0) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < rows.size(); ++i) names.push_back("S" + std::to_string(i));
    return from_rows(std::move(names), rows, bars_per_day, dt_seconds, false);
  }

  std::size_t n_assets() const { return static_cast<std::size_t>(returns_.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(returns_.cols()); }
  double q() const {
    return static_cast<double>(length()) / static_cast<double>(n_assets());
  }
  const std::vector<std::string>& assets() const { return assets_; }
  const RowMatrix& values() const { return returns_; }
  std::span<const double> row(std::size_t i) const {
    return detail::row_span(returns_, static_cast<Eigen::Index>(i));
  }
  auto column(std::size_t j) const { return returns_.col(static_cast<Eigen::Index>(j)); }
  int bars_per_day() const { return bars_per_day_; }
  double dt_seconds() const { return dt_seconds_; }
  bool standardized() const { return standardized_; }

  /// Same metadata, new values.
  ReturnPanel with_values(RowMatrix values, bool standardized) const {
    return ReturnPanel(assets_, std::move(values), bars_per_day_, dt_seconds_, standardized);
  }

  /// Keeps the listed rows in the given order.
  ReturnPanel select_rows(const std::vector<std::size_t>& keep) const {
    RowMatrix m(static_cast<Eigen::Index>(keep.size()), returns_.cols());
    std::vector<std::string> names;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      m.row(static_cast<Eigen::Index>(k)) = returns_.row(static_cast<Eigen::Index>(keep[k]));
      names.push_back(assets_[keep[k]]);
    }
    return ReturnPanel(std::move(names), std::move(m), bars_per_day_, dt_seconds_,
                       standardized_);
  }

 private:
  void validate() const {
    if (assets_.size() != n_assets())
      throw Error(ErrorKind::structural, "return panel: asset count does not match rows");
    if (returns_.cols() < 2)
      throw Error(ErrorKind::structural, "return panel: need T >= 2");
    if (bars_per_day_ <= 0)
      throw Error(ErrorKind::invalid_input, "return panel: bars_per_day must be positive");
    if (!(dt_seconds_ > 0.0))
      throw Error(ErrorKind::invalid_input, "return panel: dt_seconds must be positive");
    if (!returns_.allFinite())
      throw Error(ErrorKind::invalid_input, "return panel: non-finite return");
    if (!standardized_) return;
    for (std::size_t i = 0; i < n_assets(); ++i) {
      const auto r = row(i);
      const double m = detail::mean(r);
      const double v = detail::variance_pop(r);
      if (std::abs(m) >= kMeanTolerance || std::abs(v - 1.0) >= kVarianceTolerance)
        throw Error(ErrorKind::invalid_input,
                    "return panel flagged standardized but row " + assets_[i] +
                        " has mean " + std::to_string(m) + ", variance " +
                        std::to_string(v));
    }
  }

  std::vector<std::string> assets_;
  RowMatrix returns_;
  int bars_per_day_;
  double dt_seconds_;
  bool standardized_;
};

/// sign_s(j) and v_s(j) with g = sign * v; sgn(0) = 0.
struct SignMagnitudePanel {
  RowMatrix signs;
  RowMatrix magnitudes;
};

/// g_s(j) = ln p_s(t_{j+1}) - ln p_s(t_j). Price positivity is enforced by
/// PricePanel itself.
inline ReturnPanel log_returns(const PricePanel& p) {
  const RowMatrix logs = p.values().array().log().matrix();
  const Eigen::Index t = logs.cols() - 1;
  RowMatrix r = logs.rightCols(t) - logs.leftCols(t);
  const auto& ts = p.timestamps();
  return ReturnPanel(p.assets(), std::move(r), p.bars_per_day(), ts[1] - ts[0], false);
}

/// Index list of rows with nonzero population variance.
inline std::vector<std::size_t> varying_rows(const RowMatrix& m) {
  std::vector<std::size_t> keep;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (detail::variance_pop(detail::row_span(m, i)) > 0.0)
      keep.push_back(static_cast<std::size_t>(i));
  return keep;
}

inline void standardize_rows(RowMatrix& m, const std::vector<std::string>& names) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto r = detail::row_span(m, i);
    const double mu = detail::mean(r);
    const double var = detail::variance_pop(r);
    if (!(var > 0.0))
      throw Error(ErrorKind::degenerate,
                  "zero-variance series for asset " + names[static_cast<std::size_t>(i)]);
    const double sd = std::sqrt(var);
    m.row(i) = ((m.row(i).array() - mu) / sd).matrix();
  }
}

/// (x - mean) / std_pop per row.
inline ReturnPanel standardize(const ReturnPanel& r) {
  RowMatrix m = r.values();
  standardize_rows(m, r.assets());
  return r.with_values(std::move(m), true);
}

inline SignMagnitudePanel decompose(const ReturnPanel& r) {
  const auto& g = r.values();
  SignMagnitudePanel out{RowMatrix(g.rows(), g.cols()), g.cwiseAbs()};
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const double x = g(i, j);
      out.signs(i, j) = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    }
  return out;
}

/// Sums non-overlapping blocks of `factor` returns; a trailing partial block
/// is dropped. The factor must divide bars_per_day so blocks never straddle
/// a day boundary.
inline ReturnPanel coarsen(const ReturnPanel& r, int factor) {
  if (factor < 1)
    throw Error(ErrorKind::invalid_input, "coarsen: factor must be >= 1");
  if (r.bars_per_day() % factor != 0)
    throw Error(ErrorKind::invalid_input,
                "coarsen: factor " + std::to_string(factor) +
                    " does not divide bars_per_day " + std::to_string(r.bars_per_day()));
  if (factor == 1) return r;
  const auto f = static_cast<Eigen::Index>(factor);
  const Eigen::Index t_new = static_cast<Eigen::Index>(r.length()) / f;
  if (t_new < 2)
    throw Error(ErrorKind::invalid_input, "coarsen: fewer than two blocks remain");
  RowMatrix out(r.values().rows(), t_new);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index b = 0; b < t_new; ++b) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < f; ++k) s += r.values()(i, b * f + k);
      out(i, b) = s;
    }
  return ReturnPanel(r.assets(), std::move(out), r.bars_per_day() / factor,
                     r.dt_seconds() * factor, false);
}

}  // namespace xcorr
