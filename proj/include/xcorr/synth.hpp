#pragma once

// Seeded synthetic market: market and sector factors, idiosyncratic noise, an
// optional intraday volatility profile and optional log-AR(1) stochastic
// volatility.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xcorr/error.hpp"
#include "xcorr/panel.hpp"
#include "xcorr/rng.hpp"

namespace xcorr {

struct Sector {
  std::size_t members = 0;
  double loading = 0.0;
};

struct VolClustering {
  double persistence = 0.0;  // AR(1) coefficient of ln w, in [0, 1)
  double vol_of_vol = 0.0;   // innovation std of ln w
};

/// Sectors take consecutive asset blocks starting at asset 0.
struct MarketModel {
  std::string name = "custom";
  std::size_t n_assets = 100;
  std::size_t t_length = 40600;
  int bars_per_day = 78;
  double dt_seconds = 300.0;
  double market_loading = 0.0;
  std::vector<Sector> sectors;
  double idiosyncratic_sigma = 1.0;
  std::vector<double> intraday_profile;  // empty: flat
  std::optional<VolClustering> vol_clustering;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_assets < 1) throw Error(ErrorKind::invalid_input, "market model: n_assets must be >= 1");
    if (t_length < 2) throw Error(ErrorKind::invalid_input, "market model: t_length must be >= 2");
    if (bars_per_day < 1)
      throw Error(ErrorKind::invalid_input, "market model: bars_per_day must be positive");
    if (!(dt_seconds > 0.0))
      throw Error(ErrorKind::invalid_input, "market model: dt_seconds must be positive");
    if (!(market_loading >= 0.0))
      throw Error(ErrorKind::invalid_input, "market model: market loading must be >= 0");
    if (!(idiosyncratic_sigma > 0.0))
      throw Error(ErrorKind::invalid_input, "market model: idiosyncratic sigma must be > 0");
    std::size_t members = 0;
    for (const auto& s : sectors) {
      if (!std::isfinite(s.loading))
        throw Error(ErrorKind::invalid_input, "market model: non-finite sector loading");
      members += s.members;
    }
    if (members > n_assets)
      throw Error(ErrorKind::invalid_input, "market model: sector members exceed n_assets");
    if (!intraday_profile.empty()) {
      if (intraday_profile.size() != static_cast<std::size_t>(bars_per_day))
        throw Error(ErrorKind::invalid_input,
                    "market model: intraday profile length must equal bars_per_day");
      double log_sum = 0.0;
      for (double u : intraday_profile) {
        if (!(u > 0.0))
          throw Error(ErrorKind::invalid_input, "market model: intraday profile must be positive");
        log_sum += std::log(u);
      }
      if (std::abs(log_sum / static_cast<double>(intraday_profile.size())) > 1e-9)
        throw Error(ErrorKind::invalid_input,
                    "market model: intraday profile must have unit geometric mean");
    }
    if (vol_clustering) {
      const auto& v = *vol_clustering;
      if (!(v.persistence >= 0.0 && v.persistence < 1.0))
        throw Error(ErrorKind::invalid_input, "market model: persistence must be in [0, 1)");
      if (!(v.vol_of_vol >= 0.0))
        throw Error(ErrorKind::invalid_input, "market model: vol-of-vol must be >= 0");
    }
  }
};

/// RNG stream ids used by `generate`.
namespace streams {
inline constexpr std::uint64_t market = std::uint64_t{1} << 40;
inline constexpr std::uint64_t sector_base = market + 1;          // + sector index
inline constexpr std::uint64_t volatility_base = std::uint64_t{1} << 41;  // + asset index
// idiosyncratic noise of asset k uses stream k
}  // namespace streams

/// exp(A (x^p - <x^p>)) with x = |2b/(B-1) - 1|: high at the open and close,
/// unit geometric mean.
inline std::vector<double> u_shaped_profile(int bars_per_day, double amplitude = 2.0,
                                            double sharpness = 4.0) {
  if (bars_per_day < 2)
    throw Error(ErrorKind::invalid_input, "intraday profile: need at least two bars per day");
  const auto b = static_cast<std::size_t>(bars_per_day);
  std::vector<double> shape(b);
  double mean = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double x = std::abs(2.0 * static_cast<double>(i) / static_cast<double>(b - 1) - 1.0);
    shape[i] = std::pow(x, sharpness);
    mean += shape[i];
  }
  mean /= static_cast<double>(b);
  for (auto& s : shape) s = std::exp(amplitude * (s - mean));
  return shape;
}

inline std::string asset_label(std::size_t k, std::size_t n) {
  const int digits = n > 1 ? static_cast<int>(std::to_string(n - 1).size()) : 1;
  std::string id = std::to_string(k);
  const auto width = static_cast<std::size_t>(digits < 3 ? 3 : digits);
  if (id.size() < width) id.insert(0, width - id.size(), '0');
  return "A" + id;
}

/// g_k(j) = (b F(j) + b_sec(k) S_sec(k)(j) + sigma e_k(j)) u(j mod B) w_k(j),
/// returned standardized.
inline ReturnPanel generate(const MarketModel& m) {
  m.validate();
  const std::size_t n = m.n_assets;
  const std::size_t t = m.t_length;

  auto normal_series = [&](std::uint64_t stream) {
    CounterRng rng(m.seed, stream);
    std::vector<double> x(t);
    for (auto& v : x) v = rng.normal();
    return x;
  };
  const std::vector<double> market =
      m.market_loading > 0.0 ? normal_series(streams::market) : std::vector<double>(t, 0.0);
  std::vector<std::vector<double>> sector_factors;
  std::vector<int> sector_of(n, -1);
  std::size_t next = 0;
  for (std::size_t s = 0; s < m.sectors.size(); ++s) {
    sector_factors.push_back(normal_series(streams::sector_base + s));
    for (std::size_t k = 0; k < m.sectors[s].members; ++k) sector_of[next++] = static_cast<int>(s);
  }

  RowMatrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t));
  std::vector<std::string> names;
  const auto bpd = static_cast<std::size_t>(m.bars_per_day);
  for (std::size_t k = 0; k < n; ++k) {
    names.push_back(asset_label(k, n));
    CounterRng noise(m.seed, k);
    std::optional<CounterRng> vol;
    double log_w = 0.0;
    if (m.vol_clustering) {
      vol.emplace(m.seed, streams::volatility_base + k);
      const auto& vc = *m.vol_clustering;
      // stationary start
      log_w = vol->normal() * vc.vol_of_vol / std::sqrt(1.0 - vc.persistence * vc.persistence);
    }
    const int sec = sector_of[k];
    const double sec_loading = sec >= 0 ? m.sectors[static_cast<std::size_t>(sec)].loading : 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      double x = m.market_loading * market[j] + m.idiosyncratic_sigma * noise.normal();
      if (sec >= 0) x += sec_loading * sector_factors[static_cast<std::size_t>(sec)][j];
      if (!m.intraday_profile.empty()) x *= m.intraday_profile[j % bpd];
      if (vol) {
        if (j > 0)
          log_w = m.vol_clustering->persistence * log_w + m.vol_clustering->vol_of_vol * vol->normal();
        x *= std::exp(log_w);
      }
      g(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = x;
    }
  }
  standardize_rows(g, names);
  return ReturnPanel(std::move(names), std::move(g), m.bars_per_day, m.dt_seconds, true);
}

/// Asymptotic (T -> infinity) top eigenvalue 1 + (N-1) rho for a pure
/// one-factor model, rho = b^2 / (b^2 + sigma^2).
inline double expected_lambda1(const MarketModel& m) {
  m.validate();
  if (!m.sectors.empty() || m.vol_clustering)
    throw Error(ErrorKind::invalid_input,
                "expected_lambda1: only defined for a single market factor without sectors "
                "or volatility clustering");
  const double b2 = m.market_loading * m.market_loading;
  const double rho = b2 / (b2 + m.idiosyncratic_sigma * m.idiosyncratic_sigma);
  return 1.0 + static_cast<double>(m.n_assets - 1) * rho;
}

/// Market loading giving mean pairwise correlation rho at unit noise.
inline double loading_for_correlation(double rho, double sigma = 1.0) {
  if (!(rho >= 0.0 && rho < 1.0))
    throw Error(ErrorKind::invalid_input, "loading_for_correlation: rho must be in [0, 1)");
  return sigma * std::sqrt(rho / (1.0 - rho));
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"wishart_null", "one_factor", "sectors",
                                                 "intraday", "clustered"};
  return names;
}

/// Built-in models, N = 100 at Q = 406 (the intraday preset uses 520 whole
/// days, Q = 405.6).
inline MarketModel preset(std::string_view name) {
  MarketModel m;
  m.name = std::string(name);
  if (name == "wishart_null") return m;
  if (name == "one_factor") {
    m.market_loading = loading_for_correlation(0.18);
    return m;
  }
  if (name == "sectors") {
    m.market_loading = 0.4;
    m.sectors = {{20, 0.6}, {20, 0.6}};
    return m;
  }
  if (name == "intraday") {
    m.t_length = 40560;
    m.market_loading = loading_for_correlation(0.18);
    m.intraday_profile = u_shaped_profile(m.bars_per_day);
    return m;
  }
  if (name == "clustered") {
    m.market_loading = loading_for_correlation(0.18);
    m.vol_clustering = VolClustering{0.98, 0.1};
    return m;
  }
  throw Error(ErrorKind::invalid_input, "unknown preset '" + std::string(name) + "'");
}

/// Deterministic binomial multiplicative cascade of length 2^levels with unit
/// mean; the left half of every interval receives fraction p of its mass.
inline std::vector<double> binomial_cascade(double p, int levels) {
  if (!(p > 0.0 && p < 1.0) || levels < 1 || levels > 30)
    throw Error(ErrorKind::invalid_input, "binomial_cascade: need 0 < p < 1 and 1 <= levels <= 30");
  std::vector<double> x{1.0};
  for (int l = 0; l < levels; ++l) {
    std::vector<double> next(2 * x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      next[2 * i] = 2.0 * p * x[i];
      next[2 * i + 1] = 2.0 * (1.0 - p) * x[i];
    }
    x = std::move(next);
  }
  return x;
}

}  // namespace xcorr
