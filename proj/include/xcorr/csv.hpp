#pragma once

// Panel ingestion and export.
//
//   long   timestamp,asset,price rows, pivoted onto the union of timestamps
//   wide   header t,AAA,BBB,... then one row of prices per timestamp
//   panel  wide layout holding log-returns, with "# key=value" metadata lines
//
// Prices with missing bars are forward-filled (leading gaps back-filled);
// an asset missing more than 5% of the grid is dropped. Missing returns are
// an error. Asset order is first-appearance order.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "xcorr/error.hpp"
#include "xcorr/panel.hpp"

namespace xcorr {

enum class PanelFormat { long_format, wide, panel };

inline std::optional<PanelFormat> parse_panel_format(std::string_view s) {
  if (s == "long") return PanelFormat::long_format;
  if (s == "wide") return PanelFormat::wide;
  if (s == "panel") return PanelFormat::panel;
  return std::nullopt;
}

inline constexpr int kDefaultBarsPerDay = 78;
inline constexpr double kMaxMissingFraction = 0.05;

struct Ingested {
  std::variant<PricePanel, ReturnPanel> panel;
  Warnings warnings;

  bool has_prices() const { return std::holds_alternative<PricePanel>(panel); }
  /// Log-returns of a price panel, or the return panel itself.
  ReturnPanel returns() const {
    if (const auto* p = std::get_if<PricePanel>(&panel)) return log_returns(*p);
    return std::get<ReturnPanel>(panel);
  }
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct CsvLine {
  std::size_t number;
  std::string text;
};

struct CsvDocument {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> header;
  std::vector<CsvLine> rows;
};

inline CsvDocument read_document(std::istream& in, const std::string& source) {
  CsvDocument doc;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto body = trim(t.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos)
        doc.metadata[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
      continue;
    }
    if (!have_header) {
      for (auto f : split(t)) doc.header.emplace_back(f);
      have_header = true;
      continue;
    }
    doc.rows.push_back({number, std::string(t)});
  }
  if (!have_header) throw Error(ErrorKind::io, source + ": missing header row");
  return doc;
}

inline double parse_number(std::string_view field, std::size_t line, const std::string& source) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw Error(ErrorKind::io, source + ":" + std::to_string(line) + ": cannot parse number '" +
                                   std::string(field) + "'");
  return v;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Fills gaps in per-asset price columns on a common grid, dropping assets
/// with too many gaps.
inline PricePanel fill_prices(std::vector<std::string> assets, std::vector<double> timestamps,
                              std::vector<std::vector<std::optional<double>>> columns,
                              int bars_per_day, Warnings& warnings) {
  std::vector<std::string> kept_names;
  std::vector<std::vector<double>> kept_rows;
  const std::size_t grid = timestamps.size();
  for (std::size_t a = 0; a < assets.size(); ++a) {
    auto& col = columns[a];
    const auto missing = static_cast<std::size_t>(
        std::count_if(col.begin(), col.end(), [](const auto& v) { return !v.has_value(); }));
    if (missing == grid || static_cast<double>(missing) > kMaxMissingFraction * static_cast<double>(grid)) {
      warnings.push_back("asset " + assets[a] + " missing " + std::to_string(missing) + " of " +
                         std::to_string(grid) + " bars (> 5%); dropped");
      continue;
    }
    if (missing > 0) {
      std::optional<double> last;
      for (auto& v : col) {
        if (v) last = v;
        else if (last) v = last;
      }
      const auto first = std::find_if(col.begin(), col.end(), [](const auto& v) { return v.has_value(); });
      for (auto it = col.begin(); it != first; ++it) *it = *first;
      warnings.push_back("asset " + assets[a] + ": forward-filled " + std::to_string(missing) +
                         " missing bar(s)");
    }
    std::vector<double> row(grid);
    for (std::size_t j = 0; j < grid; ++j) row[j] = *col[j];
    kept_names.push_back(assets[a]);
    kept_rows.push_back(std::move(row));
  }
  if (kept_rows.empty()) throw Error(ErrorKind::invalid_input, "no usable assets after ingestion");
  return PricePanel::from_rows(std::move(kept_names), std::move(timestamps), kept_rows,
                               bars_per_day);
}

inline Ingested read_long(const CsvDocument& doc, int bpd, const std::string& source) {
  std::optional<std::size_t> c_time, c_asset, c_price;
  for (std::size_t i = 0; i < doc.header.size(); ++i) {
    const auto h = lower(doc.header[i]);
    if (h == "timestamp" || h == "time" || h == "t") c_time = i;
    else if (h == "asset" || h == "symbol") c_asset = i;
    else if (h == "price") c_price = i;
  }
  if (!c_time || !c_asset || !c_price)
    throw Error(ErrorKind::io, source + ": long format needs timestamp, asset and price columns");

  std::vector<std::string> assets;
  std::map<std::string, std::size_t> index;
  std::vector<std::map<double, double>> series;
  std::vector<double> stamps;
  for (const auto& row : doc.rows) {
    const auto f = split(row.text);
    if (f.size() != doc.header.size())
      throw Error(ErrorKind::io, source + ":" + std::to_string(row.number) + ": expected " +
                                     std::to_string(doc.header.size()) + " fields");
    const double ts = parse_number(f[*c_time], row.number, source);
    const double price = parse_number(f[*c_price], row.number, source);
    const std::string name(f[*c_asset]);
    if (name.empty())
      throw Error(ErrorKind::io, source + ":" + std::to_string(row.number) + ": empty asset name");
    auto [it, fresh] = index.try_emplace(name, assets.size());
    if (fresh) {
      assets.push_back(name);
      series.emplace_back();
    }
    if (!series[it->second].emplace(ts, price).second)
      throw Error(ErrorKind::invalid_input, source + ":" + std::to_string(row.number) +
                                                ": duplicate (timestamp, asset) entry for " + name);
    stamps.push_back(ts);
  }
  std::sort(stamps.begin(), stamps.end());
  stamps.erase(std::unique(stamps.begin(), stamps.end()), stamps.end());

  std::vector<std::vector<std::optional<double>>> columns(assets.size());
  for (std::size_t a = 0; a < assets.size(); ++a) {
    columns[a].resize(stamps.size());
    for (std::size_t j = 0; j < stamps.size(); ++j) {
      const auto it = series[a].find(stamps[j]);
      if (it != series[a].end()) columns[a][j] = it->second;
    }
  }
  Warnings warnings;
  auto prices = fill_prices(std::move(assets), std::move(stamps), std::move(columns), bpd, warnings);
  return {std::move(prices), std::move(warnings)};
}

struct WideTable {
  std::vector<std::string> assets;
  std::vector<double> timestamps;
  std::vector<std::vector<std::optional<double>>> columns;
};

inline WideTable read_wide_table(const CsvDocument& doc, const std::string& source) {
  if (doc.header.size() < 2)
    throw Error(ErrorKind::io, source + ": wide format needs a time column and at least one asset");
  WideTable t;
  t.assets.assign(doc.header.begin() + 1, doc.header.end());
  for (std::size_t a = 0; a < t.assets.size(); ++a)
    for (std::size_t b = 0; b < a; ++b)
      if (t.assets[a] == t.assets[b])
        throw Error(ErrorKind::invalid_input, source + ": duplicate asset column " + t.assets[a]);
  t.columns.resize(t.assets.size());
  for (const auto& row : doc.rows) {
    const auto f = split(row.text);
    if (f.size() != doc.header.size())
      throw Error(ErrorKind::io, source + ":" + std::to_string(row.number) + ": expected " +
                                     std::to_string(doc.header.size()) + " fields");
    t.timestamps.push_back(parse_number(f[0], row.number, source));
    for (std::size_t a = 0; a < t.assets.size(); ++a) {
      const auto cell = f[a + 1];
      t.columns[a].push_back(cell.empty() ? std::nullopt
                                          : std::optional<double>(parse_number(cell, row.number, source)));
    }
  }
  return t;
}

}  // namespace detail

inline Ingested ingest(std::istream& in, PanelFormat format, std::optional<int> bars_per_day,
                       const std::string& source = "<stream>") {
  const auto doc = detail::read_document(in, source);
  auto meta_int = [&](const char* key) -> std::optional<int> {
    const auto it = doc.metadata.find(key);
    if (it == doc.metadata.end()) return std::nullopt;
    return static_cast<int>(detail::parse_number(it->second, 0, source));
  };
  const int bpd = bars_per_day.value_or(meta_int("bars_per_day").value_or(kDefaultBarsPerDay));

  switch (format) {
    case PanelFormat::long_format:
      return detail::read_long(doc, bpd, source);
    case PanelFormat::wide: {
      auto t = detail::read_wide_table(doc, source);
      Warnings warnings;
      auto prices = detail::fill_prices(std::move(t.assets), std::move(t.timestamps),
                                        std::move(t.columns), bpd, warnings);
      return {std::move(prices), std::move(warnings)};
    }
    case PanelFormat::panel: {
      auto t = detail::read_wide_table(doc, source);
      std::vector<std::vector<double>> rows(t.assets.size());
      for (std::size_t a = 0; a < t.assets.size(); ++a)
        for (std::size_t j = 0; j < t.columns[a].size(); ++j) {
          if (!t.columns[a][j])
            throw Error(ErrorKind::invalid_input, source + ": missing return for asset " +
                                                      t.assets[a] + " at row " + std::to_string(j));
          rows[a].push_back(*t.columns[a][j]);
        }
      double dt = 0.0;
      if (const auto it = doc.metadata.find("dt_seconds"); it != doc.metadata.end())
        dt = detail::parse_number(it->second, 0, source);
      else if (t.timestamps.size() >= 2)
        dt = t.timestamps[1] - t.timestamps[0];
      const bool standardized = meta_int("standardized").value_or(0) != 0;
      return {ReturnPanel::from_rows(std::move(t.assets), rows, bpd, dt, standardized), {}};
    }
  }
  throw Error(ErrorKind::invalid_input, "unknown panel format");
}

inline Ingested ingest(const std::filesystem::path& path, PanelFormat format,
                       std::optional<int> bars_per_day = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open input file " + path.string());
  return ingest(in, format, bars_per_day, path.string());
}

/// Writes the `panel` format; ingest(write_panel_csv(r)) reproduces r bit for bit.
inline void write_panel_csv(std::ostream& out, const ReturnPanel& r) {
  out << "# xcorr-panel v1\n";
  out << "# bars_per_day=" << r.bars_per_day() << '\n';
  out << "# dt_seconds=" << format_double(r.dt_seconds()) << '\n';
  out << "# standardized=" << (r.standardized() ? 1 : 0) << '\n';
  out << 't';
  for (const auto& a : r.assets()) out << ',' << a;
  out << '\n';
  for (std::size_t j = 0; j < r.length(); ++j) {
    out << format_double(static_cast<double>(j) * r.dt_seconds());
    for (std::size_t i = 0; i < r.n_assets(); ++i)
      out << ',' << format_double(r.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out << '\n';
  }
}

inline void write_panel_csv(const std::filesystem::path& path, const ReturnPanel& r) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  write_panel_csv(out, r);
}

/// Two-column plain text with a comment header naming the figure analogue.
inline void write_plot(const std::filesystem::path& path, std::string_view figure,
                       std::string_view description, const std::vector<double>& x,
                       const std::vector<double>& y, std::string_view config_hash = {}) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "# " << figure << ": " << description << '\n';
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << '\n';
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    out << format_double(x[i]) << ' ' << format_double(y[i]) << '\n';
}

}  // namespace xcorr
