#pragma once

// Eigensignals (principal-portfolio return series) and regression-based
// removal of collective modes.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xcorr/error.hpp"
#include "xcorr/panel.hpp"
#include "xcorr/spectrum.hpp"

namespace xcorr {

struct Eigensignal {
  std::size_t index = 0;  // 0 = largest eigenvalue
  std::vector<double> series;
  double eigenvalue = 0.0;
};

/// Coefficients of one removal pass: g_k = alpha_k + beta_k z + eps_k.
struct RemovalPass {
  std::size_t mode = 0;
  std::vector<std::string> assets;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<std::string> dropped;
  double regressor_eigenvalue = 0.0;
  // max_k |<eps_k, z>| / (T std(eps_k) std(z)) over the raw residuals.
  double orthogonality_error = 0.0;
};

struct ResidualPanel {
  ReturnPanel panel;  // re-standardized residuals
  std::vector<std::size_t> removed_modes;
  std::vector<RemovalPass> passes;
  Warnings warnings;
};

enum class ModeSelection {
  sequential,  // each pass removes the top mode of the current residual matrix
  original,    // pass k removes eigensignal k of the input panel
};

/// G(j) = sum_s w_s g_s(j).
inline std::vector<double> portfolio_return(const ReturnPanel& r, std::span<const double> weights) {
  if (weights.size() != r.n_assets())
    throw Error(ErrorKind::structural,
                "portfolio_return: " + std::to_string(weights.size()) + " weights for " +
                    std::to_string(r.n_assets()) + " assets");
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const Eigen::VectorXd g = r.values().transpose() * w;
  return {g.data(), g.data() + g.size()};
}

/// z_i(j) = sum_k x_i^(k) g_k(j); var_pop(z_i) equals lambda_i.
inline std::vector<Eigensignal> eigensignals(const ReturnPanel& r, const EigenSpectrum& s,
                                             std::span<const std::size_t> indices) {
  if (!r.standardized())
    throw Error(ErrorKind::invalid_input, "eigensignals require a standardized panel");
  if (s.size() != r.n_assets())
    throw Error(ErrorKind::structural,
                "eigensignals: spectrum of size " + std::to_string(s.size()) +
                    " does not match panel with " + std::to_string(r.n_assets()) + " assets");
  std::vector<Eigensignal> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= s.size())
      throw Error(ErrorKind::structural, "eigensignals: mode index out of range");
    const Eigen::VectorXd x = s.vector(i);
    out.push_back({i, portfolio_return(r, std::span<const double>(x.data(), s.size())),
                   s.lambda(i)});
  }
  return out;
}

inline std::vector<Eigensignal> eigensignals(const ReturnPanel& r, const EigenSpectrum& s) {
  std::vector<std::size_t> all(s.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return eigensignals(r, s, all);
}

namespace detail {

// Residual variance below this fraction of the asset's own variance counts as
// a perfect fit.
inline constexpr double kPerfectFitRatio = 1e-20;

inline ResidualPanel regress_out(const ReturnPanel& r, const Eigensignal& z,
                                 std::vector<std::size_t> removed, std::vector<RemovalPass> passes,
                                 Warnings warnings) {
  const std::size_t t = r.length();
  if (z.series.size() != t)
    throw Error(ErrorKind::structural, "remove_mode: regressor length " +
                                           std::to_string(z.series.size()) +
                                           " does not match T = " + std::to_string(t));
  const double z_mean = mean(z.series);
  std::vector<double> zc(t);
  double szz = 0.0;
  for (std::size_t j = 0; j < t; ++j) {
    zc[j] = z.series[j] - z_mean;
    szz += zc[j] * zc[j];
  }
  if (!(szz > 0.0))
    throw Error(ErrorKind::degenerate, "remove_mode: regressor has zero variance");
  const double z_sd = std::sqrt(szz / static_cast<double>(t));

  RemovalPass pass;
  pass.mode = z.index;
  pass.regressor_eigenvalue = z.eigenvalue;
  RowMatrix resid(r.values().rows(), r.values().cols());
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < r.n_assets(); ++k) {
    const auto g = r.row(k);
    const double g_mean = mean(g);
    double sgz = 0.0;
    for (std::size_t j = 0; j < t; ++j) sgz += (g[j] - g_mean) * zc[j];
    const double beta = sgz / szz;
    const double alpha = g_mean - beta * z_mean;
    pass.assets.push_back(r.assets()[k]);
    pass.alpha.push_back(alpha);
    pass.beta.push_back(beta);

    auto e = resid.row(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < t; ++j)
      e(static_cast<Eigen::Index>(j)) = g[j] - alpha - beta * z.series[j];
    const auto e_span = detail::row_span(resid, static_cast<Eigen::Index>(k));
    const double e_var = variance_pop(e_span);
    if (!(e_var > kPerfectFitRatio * variance_pop(g))) {
      pass.dropped.push_back(r.assets()[k]);
      warnings.push_back("asset " + r.assets()[k] + " perfectly explained by mode " +
                         std::to_string(z.index) + " (zero-variance residual); dropped");
      continue;
    }
    double sez = 0.0;
    for (std::size_t j = 0; j < t; ++j) sez += e_span[j] * zc[j];
    pass.orthogonality_error =
        std::max(pass.orthogonality_error,
                 std::abs(sez) / (static_cast<double>(t) * std::sqrt(e_var) * z_sd));
    keep.push_back(k);
  }
  if (keep.empty())
    throw Error(ErrorKind::degenerate,
                "remove_mode: every asset is perfectly explained by the regressor");

  RowMatrix kept(static_cast<Eigen::Index>(keep.size()), resid.cols());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    kept.row(static_cast<Eigen::Index>(i)) = resid.row(static_cast<Eigen::Index>(keep[i]));
    names.push_back(r.assets()[keep[i]]);
  }
  standardize_rows(kept, names);
  removed.push_back(z.index);
  passes.push_back(std::move(pass));
  return {ReturnPanel(std::move(names), std::move(kept), r.bars_per_day(), r.dt_seconds(), true),
          std::move(removed), std::move(passes), std::move(warnings)};
}

}  // namespace detail

/// OLS of every asset on (1, z); residuals are re-standardized. Assets whose
/// residual has zero variance are dropped with a warning.
inline ResidualPanel remove_mode(const ReturnPanel& r, const Eigensignal& z) {
  return detail::regress_out(r, z, {}, {}, {});
}

/// Removes one more mode from an existing residual panel, keeping provenance.
inline ResidualPanel remove_mode(const ResidualPanel& prev, const Eigensignal& z) {
  return detail::regress_out(prev.panel, z, prev.removed_modes, prev.passes, prev.warnings);
}

/// `count` removal passes. In sequential mode each pass re-diagonalizes the
/// current residual matrix and removes its top eigensignal; in original mode
/// pass k removes eigensignal k of the input panel.
inline ResidualPanel remove_modes_iterative(
    const ReturnPanel& r, std::size_t count, ModeSelection selection = ModeSelection::sequential,
    const std::function<void(const ResidualPanel&)>& on_pass = {}) {
  if (count < 1)
    throw Error(ErrorKind::invalid_input, "remove_modes_iterative: count must be >= 1");
  const ReturnPanel base = r.standardized() ? r : standardize(r);
  const EigenSpectrum base_spectrum = eigendecompose(correlation_matrix(base));
  if (selection == ModeSelection::original && count > base_spectrum.size())
    throw Error(ErrorKind::invalid_input,
                "remove_modes_iterative: count exceeds number of modes");

  auto regressor = [&](const ReturnPanel& current, std::size_t pass) {
    if (selection == ModeSelection::original) {
      const std::size_t idx[] = {pass};
      return eigensignals(base, base_spectrum, idx).front();
    }
    const std::size_t top[] = {0};
    if (pass == 0) return eigensignals(base, base_spectrum, top).front();
    const auto s = eigendecompose(correlation_matrix(current));
    auto z = eigensignals(current, s, top).front();
    z.index = pass;
    return z;
  };

  ResidualPanel out = remove_mode(base, regressor(base, 0));
  if (on_pass) on_pass(out);
  for (std::size_t pass = 1; pass < count; ++pass) {
    if (out.panel.n_assets() < 2) {
      out.warnings.push_back("stopped after " + std::to_string(pass) +
                             " passes: fewer than two assets remain");
      break;
    }
    out = remove_mode(out, regressor(out.panel, pass));
    if (on_pass) on_pass(out);
  }
  return out;
}

}  // namespace xcorr
