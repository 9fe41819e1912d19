#pragma once

// JSON forms of analysis results and configuration objects.
//
// Matrices are written as {"rows", "cols", "layout": "row-major", "data"}.

#include <string>
#include <vector>

#include "json.hpp"

#include "xcorr/error.hpp"
#include "xcorr/mfdfa.hpp"
#include "xcorr/modes.hpp"
#include "xcorr/spectrum.hpp"
#include "xcorr/surrogate.hpp"
#include "xcorr/synth.hpp"

namespace xcorr {

using Json = nlohmann::json;

template <typename Derived>
Json matrix_json(const Eigen::MatrixBase<Derived>& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"layout", "row-major"}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw Error(ErrorKind::structural, "matrix JSON: data length does not match rows x cols");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[static_cast<std::size_t>(i * cols + c)].get<double>();
  return m;
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Json bounds_json(const MpBounds& b) {
  return {{"q", b.q}, {"lambda_min", b.lambda_min}, {"lambda_max", b.lambda_max}};
}

/// Eigenvalues (descending), eigenvectors as columns, MP band and overlap.
inline Json spectrum_json(const EigenSpectrum& s, const MpBounds& b) {
  return {{"schema", "xcorr.spectrum/1"},
          {"n_series", s.size()},
          {"source_q", s.source_q},
          {"eigenvalues", to_vector(s.eigenvalues)},
          {"eigenvectors", matrix_json(s.eigenvectors)},
          {"bounds", bounds_json(b)},
          {"overlap_fraction", overlap_fraction(s, b)}};
}

inline EigenSpectrum spectrum_from_json(const Json& j) {
  EigenSpectrum s;
  const auto ev = j.at("eigenvalues").get<std::vector<double>>();
  s.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
  s.eigenvectors = matrix_from_json(j.at("eigenvectors"));
  s.source_q = j.at("source_q").get<double>();
  return s;
}

inline Json distribution_json(const ElementDistribution& d) {
  return {{"schema", "xcorr.elements/1"},
          {"bin_edges", d.bin_edges},
          {"densities", d.densities},
          {"gaussian_mu", d.gaussian_mu},
          {"gaussian_sigma", d.gaussian_sigma},
          {"tail_deviation", d.tail_deviation},
          {"sample_count", d.sample_count},
          {"degenerate", d.degenerate}};
}

inline Json residual_json(const ResidualPanel& r) {
  Json passes = Json::array();
  for (const auto& p : r.passes)
    passes.push_back({{"mode", p.mode},
                      {"regressor_eigenvalue", p.regressor_eigenvalue},
                      {"orthogonality_error", p.orthogonality_error},
                      {"assets", p.assets},
                      {"alpha", p.alpha},
                      {"beta", p.beta},
                      {"dropped", p.dropped}});
  return {{"schema", "xcorr.residuals/1"},
          {"removed_modes", r.removed_modes},
          {"passes", std::move(passes)},
          {"assets", r.panel.assets()},
          {"t_length", r.panel.length()},
          {"warnings", r.warnings}};
}

inline Json singularity_json(const SingularitySpectrum& s) {
  return {{"q", s.q},       {"h", s.h},         {"alpha", s.alpha}, {"f", s.f},
          {"width", s.width}, {"apex_alpha", s.apex_alpha()}, {"warnings", s.warnings}};
}

inline Json mfdfa_config_json(const MfdfaConfig& c) {
  return {{"q_grid", c.q_grid},
          {"detrend_order", c.detrend_order},
          {"scales", c.scales},
          {"fit_min", c.fit_min},
          {"fit_max", c.fit_max}};
}

inline Json mfdfa_json(const MfdfaConfig& cfg, const MfdfaResult& r) {
  return {{"schema", "xcorr.mfdfa/1"},
          {"config", mfdfa_config_json(cfg)},
          {"fluctuation", matrix_json(r.surface.values)},
          {"h", r.surface.h},
          {"fit_residual", r.surface.fit_residual},
          {"spectrum", singularity_json(r.spectrum)}};
}

inline void to_json(Json& j, const SurrogateSpec& s) {
  j = {{"kind", std::string(to_string(s.kind))}, {"seed", s.seed}};
}

inline void from_json(const Json& j, SurrogateSpec& s) {
  const auto name = j.at("kind").get<std::string>();
  const auto kind = parse_surrogate_kind(name);
  if (!kind) throw Error(ErrorKind::invalid_input, "unknown surrogate kind '" + name + "'");
  s.kind = *kind;
  s.seed = j.value("seed", std::uint64_t{0});
}

inline void to_json(Json& j, const MarketModel& m) {
  Json sectors = Json::array();
  for (const auto& s : m.sectors) sectors.push_back({{"members", s.members}, {"loading", s.loading}});
  j = {{"name", m.name},
       {"n_assets", m.n_assets},
       {"t_length", m.t_length},
       {"bars_per_day", m.bars_per_day},
       {"dt_seconds", m.dt_seconds},
       {"market_loading", m.market_loading},
       {"sectors", std::move(sectors)},
       {"idiosyncratic_sigma", m.idiosyncratic_sigma},
       {"intraday_profile", m.intraday_profile},
       {"seed", m.seed}};
  if (m.vol_clustering)
    j["vol_clustering"] = {{"persistence", m.vol_clustering->persistence},
                           {"vol_of_vol", m.vol_clustering->vol_of_vol}};
  else
    j["vol_clustering"] = nullptr;
}

/// Missing keys keep MarketModel defaults. The string "u_shaped" for
/// intraday_profile expands to u_shaped_profile(bars_per_day).
inline void from_json(const Json& j, MarketModel& m) {
  m.name = j.value("name", m.name);
  m.n_assets = j.value("n_assets", m.n_assets);
  m.t_length = j.value("t_length", m.t_length);
  m.bars_per_day = j.value("bars_per_day", m.bars_per_day);
  m.dt_seconds = j.value("dt_seconds", m.dt_seconds);
  m.market_loading = j.value("market_loading", m.market_loading);
  if (j.contains("mean_correlation"))
    m.market_loading = loading_for_correlation(j.at("mean_correlation").get<double>(),
                                               j.value("idiosyncratic_sigma", m.idiosyncratic_sigma));
  m.idiosyncratic_sigma = j.value("idiosyncratic_sigma", m.idiosyncratic_sigma);
  m.seed = j.value("seed", m.seed);
  if (j.contains("sectors")) {
    m.sectors.clear();
    for (const auto& s : j.at("sectors"))
      m.sectors.push_back({s.at("members").get<std::size_t>(), s.at("loading").get<double>()});
  }
  if (j.contains("intraday_profile")) {
    const auto& p = j.at("intraday_profile");
    if (p.is_string()) {
      if (p.get<std::string>() != "u_shaped")
        throw Error(ErrorKind::invalid_input, "unknown intraday profile '" + p.get<std::string>() + "'");
      m.intraday_profile = u_shaped_profile(m.bars_per_day);
    } else if (p.is_null()) {
      m.intraday_profile.clear();
    } else {
      m.intraday_profile = p.get<std::vector<double>>();
    }
  }
  if (j.contains("vol_clustering")) {
    const auto& v = j.at("vol_clustering");
    if (v.is_null())
      m.vol_clustering.reset();
    else
      m.vol_clustering = VolClustering{v.at("persistence").get<double>(), v.at("vol_of_vol").get<double>()};
  }
}

/// 64-bit FNV-1a, hex encoded.
inline std::string content_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return out;
}

}  // namespace xcorr
