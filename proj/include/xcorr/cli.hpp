#pragma once

// Command-line driver. `run` is the whole program; tools/xcorr.cpp only
// forwards argv to it.
//
// Exit codes: 0 ok, 1 analysis error, 2 usage error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "xcorr/csv.hpp"
#include "xcorr/error.hpp"
#include "xcorr/json_io.hpp"
#include "xcorr/mfdfa.hpp"
#include "xcorr/modes.hpp"
#include "xcorr/panel.hpp"
#include "xcorr/spectrum.hpp"
#include "xcorr/surrogate.hpp"
#include "xcorr/synth.hpp"

namespace xcorr::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitAnalysis = 1;
inline constexpr int kExitUsage = 2;

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"spectrum", "elements", "remove", "surrogate",
                                                 "mfdfa",    "synth",    "report"};
  return names;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Effective configuration after defaults, config file and flags are merged.
struct AnalysisConfig {
  std::string subcommand;
  std::string input;
  std::string format = "wide";
  std::optional<int> bars_per_day;
  std::optional<double> q_target;
  int remove_count = 1;
  std::string mode_selection = "sequential";
  std::string surrogate_kind;
  std::uint64_t seed = 42;
  std::string q_grid = "-4:4:0.2";
  int detrend_order = 2;
  std::string scales;  // empty: default grid for the series length
  std::string preset;
  std::string out = "xcorr_out";
  int bins = 50;
  std::string coarsen = "1,2,3,6";
  int eigensignals = 0;  // 0: all

  Json to_json() const {
    Json j = {{"subcommand", subcommand},     {"input", input},
              {"format", format},             {"remove_count", remove_count},
              {"mode_selection", mode_selection}, {"surrogate_kind", surrogate_kind},
              {"seed", seed},                 {"q_grid", q_grid},
              {"detrend_order", detrend_order}, {"scales", scales},
              {"preset", preset},             {"out", out},
              {"bins", bins},                 {"coarsen", coarsen},
              {"eigensignals", eigensignals}};
    j["bars_per_day"] = bars_per_day ? Json(*bars_per_day) : Json(nullptr);
    j["q_target"] = q_target ? Json(*q_target) : Json(nullptr);
    return j;
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline double to_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("cannot parse ") + what + " value '" + s + "'");
  }
}

/// "lo:hi:step" or a comma list.
inline std::vector<double> parse_q_grid(const std::string& spec) {
  if (spec.find(':') != std::string::npos) {
    const auto parts = split_list(spec, ':');
    if (parts.size() != 3) throw UsageError("--q-grid expects lo:hi:step");
    try {
      return uniform_q_grid(to_double(parts[0], "q"), to_double(parts[1], "q"),
                            to_double(parts[2], "q"));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  std::vector<double> q;
  for (const auto& p : split_list(spec, ',')) q.push_back(to_double(p, "q"));
  return q;
}

/// "min:max:count" or a comma list; empty means the default grid.
inline std::vector<std::size_t> parse_scales(const std::string& spec, std::size_t length) {
  if (spec.empty()) return MfdfaConfig::defaults(length).scales;
  auto as_size = [](const std::string& s) {
    const double v = to_double(s, "scale");
    if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw UsageError("scales must be positive integers");
    return static_cast<std::size_t>(v);
  };
  if (spec.find(':') != std::string::npos) {
    const auto parts = split_list(spec, ':');
    if (parts.size() != 3) throw UsageError("--scales expects min:max:count");
    try {
      return geometric_scales(as_size(parts[0]), as_size(parts[1]), as_size(parts[2]));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  std::vector<std::size_t> out;
  for (const auto& p : split_list(spec, ',')) out.push_back(as_size(p));
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const fs::path& p, const Json& j) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
  out << j.dump(2) << '\n';
}

/// Exclusive lock file for the output directory; removed on scope exit.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".xcorr.lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw Error(ErrorKind::io, "output directory " + dir.string() + " is locked by another run");
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

inline std::vector<double> iota_from_one(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
  return x;
}

inline std::string_view figure_for(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::rotate_free: return "fig3a-analogue";
    case SurrogateKind::rotate_daily: return "fig3b-analogue";
    case SurrogateKind::shuffle_signs: return "fig4a-analogue";
    case SurrogateKind::shuffle_magnitudes: return "fig4b-analogue";
    case SurrogateKind::signs_only: return "fig5a-analogue";
    case SurrogateKind::magnitudes_only: return "fig5b-analogue";
  }
  return "surrogate";
}

inline MarketModel load_model(const std::string& preset_or_path) {
  if (fs::exists(preset_or_path) && fs::is_regular_file(preset_or_path)) {
    MarketModel m;
    try {
      from_json(Json::parse(read_file(preset_or_path)), m);
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::io, "cannot parse preset file " + preset_or_path + ": " + e.what());
    }
    return m;
  }
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) == names.end())
    throw UsageError("unknown preset '" + preset_or_path + "'");
  return preset(preset_or_path);
}

struct Spectral {
  CorrelationMatrix matrix;
  EigenSpectrum spectrum;
  MpBounds bounds;
};

inline Spectral analyze(const ReturnPanel& standardized_panel) {
  auto c = correlation_matrix(standardized_panel);
  auto s = eigendecompose(c);
  const auto b = mp_bounds(standardized_panel.q());
  return {std::move(c), std::move(s), b};
}

inline Json spectral_json(const Spectral& sp) {
  Json j = spectrum_json(sp.spectrum, sp.bounds);
  j["trace"] = sp.matrix.values().trace();
  j["reconstruction_error"] = reconstruction_error(sp.matrix.values(), sp.spectrum);
  return j;
}

/// Runs one subcommand against a resolved configuration.
class Pipeline {
 public:
  Pipeline(AnalysisConfig cfg, std::string config_hash, std::ostream& out, std::ostream& err)
      : cfg_(std::move(cfg)), hash_(std::move(config_hash)), out_(out), err_(err), dir_(cfg_.out) {}

  void run() {
    const auto& s = cfg_.subcommand;
    if (s == "spectrum") spectrum();
    else if (s == "elements") elements();
    else if (s == "remove") remove();
    else if (s == "surrogate") surrogate();
    else if (s == "mfdfa") mfdfa_cmd();
    else if (s == "synth") synth();
    else if (s == "report") report();
    else throw UsageError("unknown subcommand '" + s + "'");
  }

  const Warnings& warnings() const { return warnings_; }

 private:
  // Raw (possibly unstandardized) returns from --input or --preset.
  const ReturnPanel& raw() {
    if (!raw_) {
      if (!cfg_.input.empty()) {
        const auto format = parse_panel_format(cfg_.format);
        auto ing = ingest(fs::path(cfg_.input), *format, cfg_.bars_per_day);
        for (auto& w : ing.warnings) note(std::move(w));
        raw_ = ing.returns();
      } else if (!cfg_.preset.empty()) {
        auto m = load_model(cfg_.preset);
        m.seed = cfg_.seed;
        raw_ = generate(m);
      } else {
        throw UsageError("either --input or --preset is required");
      }
    }
    return *raw_;
  }

  const ReturnPanel& standardized() {
    if (!std_) std_ = raw().standardized() ? raw() : standardize(raw());
    return *std_;
  }

  void note(std::string w) {
    err_ << "warning: " << w << '\n';
    warnings_.push_back(std::move(w));
  }

  Json stamp(Json j) const {
    j["config_hash"] = hash_;
    return j;
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void plot(const std::string& file, std::string_view figure, std::string_view what,
            const std::vector<double>& x, const std::vector<double>& y) {
    write_plot(path(file), figure, what, x, y, hash_);
  }

  void plot_eigenvalues(const std::string& file, std::string_view figure, const EigenSpectrum& s,
                        const MpBounds& b) {
    std::ostringstream what;
    what << "eigenvalue rank vs eigenvalue; MP band [" << format_double(b.lambda_min) << ", "
         << format_double(b.lambda_max) << "] at Q=" << format_double(b.q);
    plot(file, figure, what.str(), iota_from_one(s.size()), to_vector(s.eigenvalues));
  }

  void spectrum() {
    const auto sp = analyze(standardized());
    Json j = spectral_json(sp);
    j["assets"] = standardized().assets();
    j["warnings"] = warnings_;
    write_json(path("spectrum.json"), stamp(j));
    plot_eigenvalues("eigenvalues.txt", "fig2a-analogue", sp.spectrum, sp.bounds);
    out_ << "lambda_1 = " << format_double(sp.spectrum.lambda(0))
         << ", overlap = " << format_double(overlap_fraction(sp.spectrum, sp.bounds)) << '\n';
  }

  Json elements_json() {
    const auto c = correlation_matrix(standardized());
    const auto full = element_distribution(c, cfg_.bins);
    Json j = {{"full", distribution_json(full)}};
    plot("elements_hist.txt", "fig1-analogue", "matrix element vs density (full Q)",
         full.bin_centers(), full.densities);
    std::vector<double> fit;
    for (double x : full.bin_centers()) fit.push_back(full.fitted_density(x));
    plot("elements_fit.txt", "fig1-analogue", "matrix element vs moment-fitted normal density",
         full.bin_centers(), fit);
    if (cfg_.q_target) {
      const auto win = windowed_element_distribution(standardized(), *cfg_.q_target, cfg_.bins);
      j["windowed"] = distribution_json(win);
      j["windowed"]["q_target"] = *cfg_.q_target;
      plot("elements_windowed_hist.txt", "fig1-analogue",
           "matrix element vs density (windowed, Q=" + format_double(*cfg_.q_target) + ")",
           win.bin_centers(), win.densities);
    }
    return j;
  }

  void elements() {
    Json j = elements_json();
    j["warnings"] = warnings_;
    write_json(path("elements.json"), stamp(j));
    out_ << "wrote " << path("elements.json").string() << '\n';
  }

  Json removal_json() {
    const auto selection =
        cfg_.mode_selection == "original" ? ModeSelection::original : ModeSelection::sequential;
    Json spectra = Json::array();
    std::size_t pass = 0;
    const auto res = remove_modes_iterative(
        standardized(), static_cast<std::size_t>(cfg_.remove_count), selection,
        [&](const ResidualPanel& r) {
          ++pass;
          const auto sp = analyze(r.panel);
          Json entry = spectral_json(sp);
          entry["pass"] = pass;
          spectra.push_back(std::move(entry));
          const std::string fig = pass == 1 ? "fig2c-analogue" : pass == 2 ? "fig2e-analogue"
                                                                           : "fig2-analogue";
          plot_eigenvalues("removal_pass" + std::to_string(pass) + "_eigenvalues.txt", fig,
                           sp.spectrum, sp.bounds);
        });
    for (const auto& w : res.warnings) note(w);
    residual_ = res.panel;
    return {{"residuals", residual_json(res)}, {"spectra", std::move(spectra)}};
  }

  void remove() {
    Json j = removal_json();
    j["warnings"] = warnings_;
    write_json(path("removal.json"), stamp(j));
    write_panel_csv(path("residual_panel.csv"), *residual_);
    out_ << "wrote " << path("removal.json").string() << '\n';
  }

  SurrogateSpec surrogate_spec() const {
    const auto kind = parse_surrogate_kind(cfg_.surrogate_kind);
    if (!kind) throw UsageError("--surrogate-kind must be one of rotate_free, rotate_daily, "
                                "shuffle_signs, shuffle_magnitudes, signs_only, magnitudes_only");
    return {*kind, cfg_.seed};
  }

  Json surrogate_summary(const SurrogateSpec& spec, const Spectral& original, bool write_files) {
    Warnings w;
    const auto panel = make_surrogate(raw(), spec, &w);
    for (auto& x : w) note(std::move(x));
    const auto sp = analyze(panel.standardized() ? panel : standardize(panel));
    const double l1 = sp.spectrum.lambda(0);
    const double support = sp.spectrum.lambda(0) - sp.spectrum.lambda(sp.spectrum.size() - 1);
    Json j = {{"surrogate", spec},
              {"lambda1_original", original.spectrum.lambda(0)},
              {"lambda1", l1},
              {"lambda1_ratio", l1 / original.spectrum.lambda(0)},
              {"support_width", support},
              {"mp_width", sp.bounds.width()},
              {"width_ratio", support / sp.bounds.width()},
              {"overlap_fraction", overlap_fraction(sp.spectrum, sp.bounds)}};
    if (write_files) {
      j["spectrum"] = spectral_json(sp);
      plot_eigenvalues("surrogate_eigenvalues.txt", figure_for(spec.kind), sp.spectrum, sp.bounds);
      write_panel_csv(path("surrogate_panel.csv"), panel);
    }
    return j;
  }

  void surrogate() {
    const auto spec = surrogate_spec();
    const auto original = analyze(standardized());
    Json j = surrogate_summary(spec, original, true);
    j["warnings"] = warnings_;
    write_json(path("surrogate.json"), stamp(j));
    out_ << to_string(spec.kind) << ": lambda_1 = " << format_double(j["lambda1"].get<double>())
         << " (original " << format_double(original.spectrum.lambda(0)) << ")\n";
  }

  MfdfaConfig mfdfa_config(std::size_t length) const {
    MfdfaConfig c;
    c.q_grid = parse_q_grid(cfg_.q_grid);
    c.detrend_order = cfg_.detrend_order;
    c.scales = parse_scales(cfg_.scales, length);
    if (!c.scales.empty()) {
      c.fit_min = c.scales.front();
      c.fit_max = c.scales.back();
    }
    return c;
  }

  Json mfdfa_json_all(bool write_files, std::size_t limit) {
    const auto sp = analyze(standardized());
    const auto signals = eigensignals(standardized(), sp.spectrum);
    const auto cfg = mfdfa_config(standardized().length());
    const std::size_t count = limit == 0 ? signals.size() : std::min(limit, signals.size());
    Json series = Json::array();
    std::vector<SingularitySpectrum> rest;
    SingularitySpectrum first;
    for (std::size_t i = 0; i < count; ++i) {
      const auto r = mfdfa(signals[i].series, cfg);
      for (const auto& w : r.spectrum.warnings) note("eigensignal " + std::to_string(i + 1) + ": " + w);
      Json e = mfdfa_json(cfg, r);
      e["index"] = i;
      e["eigenvalue"] = signals[i].eigenvalue;
      series.push_back(std::move(e));
      if (i == 0) first = r.spectrum;
      else rest.push_back(r.spectrum);
    }
    Json j = {{"config", mfdfa_config_json(cfg)}, {"series", std::move(series)}};
    if (!rest.empty()) j["average_excluding_first"] = singularity_json(average_spectra(rest));
    if (write_files) {
      std::vector<double> idx(signals[0].series.size());
      for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<double>(k + 1);
      plot("eigensignal_1.txt", "fig6-analogue", "time index vs z_1", idx, signals[0].series);
      plot("falpha_z1.txt", "fig7-analogue", "alpha vs f(alpha) for eigensignal 1", first.alpha,
           first.f);
      if (!rest.empty()) {
        const auto avg = average_spectra(rest);
        plot("falpha_average.txt", "fig7-analogue",
             "alpha vs f(alpha) averaged over eigensignals 2..", avg.alpha, avg.f);
      }
    }
    return j;
  }

  void mfdfa_cmd() {
    Json j = mfdfa_json_all(true, static_cast<std::size_t>(cfg_.eigensignals));
    j["warnings"] = warnings_;
    write_json(path("mfdfa.json"), stamp(j));
    out_ << "wrote " << path("mfdfa.json").string() << '\n';
  }

  void synth() {
    if (cfg_.preset.empty()) throw UsageError("synth requires --preset");
    auto m = load_model(cfg_.preset);
    m.seed = cfg_.seed;
    const auto panel = generate(m);
    write_panel_csv(path("panel.csv"), panel);
    Json j = m;
    write_json(path("model.json"), stamp(j));
    out_ << "wrote " << path("panel.csv").string() << " (" << panel.n_assets() << " x "
         << panel.length() << ")\n";
  }

  void report() {
    const auto sp = analyze(standardized());
    Json j;
    j["spectrum"] = {{"n_series", sp.spectrum.size()},
                     {"t_length", standardized().length()},
                     {"eigenvalues", to_vector(sp.spectrum.eigenvalues)},
                     {"bounds", bounds_json(sp.bounds)},
                     {"overlap_fraction", overlap_fraction(sp.spectrum, sp.bounds)},
                     {"trace", sp.matrix.values().trace()},
                     {"reconstruction_error", reconstruction_error(sp.matrix.values(), sp.spectrum)}};
    j["elements"] = elements_json();
    j["removal"] = removal_json();

    Json surrogates = Json::array();
    std::vector<SurrogateKind> kinds;
    if (!cfg_.surrogate_kind.empty()) kinds.push_back(surrogate_spec().kind);
    else kinds.assign(std::begin(kAllSurrogateKinds), std::end(kAllSurrogateKinds));
    for (auto k : kinds) surrogates.push_back(surrogate_summary({k, cfg_.seed}, sp, false));
    j["surrogates"] = std::move(surrogates);

    const auto mf = mfdfa_json_all(false, 1);
    const auto& s1 = mf["series"][0];
    const auto& q = s1["spectrum"]["q"];
    double h2 = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      if (q[i].get<double>() == 2.0) h2 = s1["h"][i].get<double>();
    j["mfdfa_z1"] = {{"h2", h2},
                     {"width", s1["spectrum"]["width"]},
                     {"apex_alpha", s1["spectrum"]["apex_alpha"]}};

    Json coarse = Json::array();
    std::vector<double> factors, lambdas;
    for (const auto& f : split_list(cfg_.coarsen, ',')) {
      const int factor = static_cast<int>(to_double(f, "coarsening factor"));
      if (factor < 1 || raw().bars_per_day() % factor != 0) {
        note("coarsening factor " + f + " skipped: does not divide bars_per_day");
        continue;
      }
      if (raw().length() / static_cast<std::size_t>(factor) < 2 * raw().n_assets()) {
        note("coarsening factor " + f + " skipped: too few coarse returns");
        continue;
      }
      const auto c = coarsen(raw(), factor);
      const auto csp = analyze(standardize(c));
      coarse.push_back({{"factor", factor},
                        {"dt_seconds", c.dt_seconds()},
                        {"t_length", c.length()},
                        {"lambda1", csp.spectrum.lambda(0)}});
      factors.push_back(c.dt_seconds());
      lambdas.push_back(csp.spectrum.lambda(0));
    }
    j["lambda1_vs_coarsening"] = std::move(coarse);
    plot("lambda1_vs_dt.txt", "lambda1-vs-dt", "return horizon (s) vs lambda_1", factors, lambdas);
    j["warnings"] = warnings_;
    write_json(path("report.json"), stamp(j));
    out_ << "wrote " << path("report.json").string() << '\n';
  }

  AnalysisConfig cfg_;
  std::string hash_;
  std::ostream& out_;
  std::ostream& err_;
  fs::path dir_;
  std::optional<ReturnPanel> raw_;
  std::optional<ReturnPanel> std_;
  std::optional<ReturnPanel> residual_;
  Warnings warnings_;
};

inline Json error_json(std::string_view kind, const std::string& message, int code) {
  return {{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}};
}

}  // namespace detail

/// Merges a JSON config object into `cfg` (keys named like the long flags,
/// with underscores).
inline void apply_config(AnalysisConfig& cfg, const Json& j) {
  try {
    cfg.input = j.value("input", cfg.input);
    cfg.format = j.value("format", cfg.format);
    if (j.contains("bars_per_day") && !j["bars_per_day"].is_null())
      cfg.bars_per_day = j["bars_per_day"].get<int>();
    if (j.contains("q_target") && !j["q_target"].is_null()) cfg.q_target = j["q_target"].get<double>();
    cfg.remove_count = j.value("remove_count", cfg.remove_count);
    cfg.mode_selection = j.value("mode_selection", cfg.mode_selection);
    cfg.surrogate_kind = j.value("surrogate_kind", cfg.surrogate_kind);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("surrogate")) {
      const auto spec = j["surrogate"].get<SurrogateSpec>();
      cfg.surrogate_kind = std::string(to_string(spec.kind));
      cfg.seed = spec.seed;
    }
    cfg.q_grid = j.value("q_grid", cfg.q_grid);
    cfg.detrend_order = j.value("detrend_order", cfg.detrend_order);
    cfg.scales = j.value("scales", cfg.scales);
    cfg.preset = j.value("preset", cfg.preset);
    cfg.out = j.value("out", cfg.out);
    cfg.bins = j.value("bins", cfg.bins);
    cfg.coarsen = j.value("coarsen", cfg.coarsen);
    cfg.eigensignals = j.value("eigensignals", cfg.eigensignals);
  } catch (const Json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

inline void validate(const AnalysisConfig& cfg) {
  if (!parse_panel_format(cfg.format)) throw UsageError("--format must be long, wide or panel");
  if (!cfg.input.empty() && !fs::exists(cfg.input))
    throw UsageError("input file not found: " + cfg.input);
  if (cfg.bars_per_day && *cfg.bars_per_day <= 0) throw UsageError("--bars-per-day must be positive");
  if (cfg.q_target && !(*cfg.q_target > 0.0)) throw UsageError("--q-target must be positive");
  if (cfg.remove_count < 1) throw UsageError("--remove-count must be >= 1");
  if (cfg.mode_selection != "sequential" && cfg.mode_selection != "original")
    throw UsageError("--mode-selection must be sequential or original");
  if (!cfg.surrogate_kind.empty() && !parse_surrogate_kind(cfg.surrogate_kind))
    throw UsageError("unknown surrogate kind '" + cfg.surrogate_kind + "'");
  if (cfg.subcommand == "surrogate" && cfg.surrogate_kind.empty())
    throw UsageError("surrogate requires --surrogate-kind");
  if (cfg.detrend_order < 1) throw UsageError("--detrend-order must be >= 1");
  if (cfg.bins < 10) throw UsageError("--bins must be >= 10");
  if (cfg.eigensignals < 0) throw UsageError("--eigensignals must be >= 0");
  detail::parse_q_grid(cfg.q_grid);
  if (cfg.out.empty()) throw UsageError("--out must not be empty");
}

/// Hash over the effective configuration with the output location removed and
/// the input path replaced by a hash of the input file's bytes.
inline std::string config_hash(const AnalysisConfig& cfg) {
  Json j = cfg.to_json();
  j.erase("out");
  if (!cfg.input.empty()) j["input"] = content_hash(detail::read_file(cfg.input));
  return content_hash(j.dump());
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"xcorr: cross-correlation spectra, surrogates and MFDFA for multivariate series",
               "xcorr"};
  app.require_subcommand(1, 1);

  struct Flags {
    std::optional<std::string> config, input, format, mode_selection, surrogate_kind, q_grid,
        scales, preset, out, coarsen;
    std::optional<int> bars_per_day, remove_count, detrend_order, bins, eigensignals;
    std::optional<double> q_target;
    std::optional<std::uint64_t> seed;
  } flags;

  const std::map<std::string, std::string> help = {
      {"spectrum", "correlation matrix eigenvalues against the MP band"},
      {"elements", "distribution of matrix elements (optionally windowed)"},
      {"remove", "iterative removal of collective modes"},
      {"surrogate", "randomized surrogate panel and its spectrum"},
      {"mfdfa", "MFDFA singularity spectra of the eigensignals"},
      {"synth", "generate a synthetic panel from a preset"},
      {"report", "combined JSON summary"}};
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", flags.config, "JSON config file (flags override it)");
    sub->add_option("--input", flags.input, "input CSV");
    sub->add_option("--format", flags.format, "long, wide or panel (default wide)");
    sub->add_option("--bars-per-day", flags.bars_per_day, "grid points per trading day (default 78)");
    sub->add_option("--q-target", flags.q_target, "window Q for the element distribution");
    sub->add_option("--remove-count", flags.remove_count, "number of modes to remove");
    sub->add_option("--mode-selection", flags.mode_selection, "sequential or original");
    sub->add_option("--surrogate-kind", flags.surrogate_kind, "surrogate kind");
    sub->add_option("--seed", flags.seed, "random seed (fallback: XCORR_SEED)");
    sub->add_option("--q-grid", flags.q_grid, "lo:hi:step or comma list");
    sub->add_option("--detrend-order", flags.detrend_order, "MFDFA polynomial order");
    sub->add_option("--scales", flags.scales, "min:max:count or comma list");
    sub->add_option("--preset", flags.preset, "market model preset name or JSON file");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--bins", flags.bins, "histogram bins");
    sub->add_option("--coarsen", flags.coarsen, "comma list of coarsening factors (report)");
    sub->add_option("--eigensignals", flags.eigensignals, "limit MFDFA to the first K eigensignals");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    err << detail::error_json("usage", e.what(), kExitUsage).dump() << '\n';
    return kExitUsage;
  }

  AnalysisConfig cfg;
  for (const auto* sub : app.get_subcommands()) cfg.subcommand = sub->get_name();
  try {
    if (flags.config) {
      Json file;
      try {
        file = Json::parse(detail::read_file(*flags.config));
      } catch (const Json::exception& e) {
        throw UsageError("cannot parse config file: " + std::string(e.what()));
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      apply_config(cfg, file);
      if (!file.contains("seed") && !file.contains("surrogate"))
        if (const char* env = std::getenv("XCORR_SEED"))
          cfg.seed = static_cast<std::uint64_t>(detail::to_double(env, "XCORR_SEED"));
    } else if (const char* env = std::getenv("XCORR_SEED")) {
      cfg.seed = std::stoull(env);
    }
    if (flags.input) cfg.input = *flags.input;
    if (flags.format) cfg.format = *flags.format;
    if (flags.bars_per_day) cfg.bars_per_day = flags.bars_per_day;
    if (flags.q_target) cfg.q_target = flags.q_target;
    if (flags.remove_count) cfg.remove_count = *flags.remove_count;
    if (flags.mode_selection) cfg.mode_selection = *flags.mode_selection;
    if (flags.surrogate_kind) cfg.surrogate_kind = *flags.surrogate_kind;
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.q_grid) cfg.q_grid = *flags.q_grid;
    if (flags.detrend_order) cfg.detrend_order = *flags.detrend_order;
    if (flags.scales) cfg.scales = *flags.scales;
    if (flags.preset) cfg.preset = *flags.preset;
    if (flags.out) cfg.out = *flags.out;
    if (flags.bins) cfg.bins = *flags.bins;
    if (flags.coarsen) cfg.coarsen = *flags.coarsen;
    if (flags.eigensignals) cfg.eigensignals = *flags.eigensignals;
    validate(cfg);
  } catch (const std::exception& e) {
    err << app.help();
    err << detail::error_json("usage", e.what(), kExitUsage).dump() << '\n';
    return kExitUsage;
  }

  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    err << detail::error_json("io", "cannot create output directory " + cfg.out, kExitAnalysis).dump()
        << '\n';
    return kExitAnalysis;
  }

  auto fail = [&](std::string_view kind, const std::string& message, int code) {
    const Json e = detail::error_json(kind, message, code);
    err << e.dump() << '\n';
    std::ofstream f(dir / "error.json");
    if (f) f << e.dump(2) << '\n';
    return code;
  };

  try {
    detail::OutputLock lock(dir);
    std::error_code rm;
    fs::remove(dir / "error.json", rm);
    const std::string hash = config_hash(cfg);
    Json effective = cfg.to_json();
    effective["config_hash"] = hash;
    detail::write_json(dir / "effective_config.json", effective);
    detail::Pipeline pipeline(cfg, hash, out, err);
    pipeline.run();
  } catch (const UsageError& e) {
    err << app.help();
    return fail("usage", e.what(), kExitUsage);
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what(), kExitAnalysis);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kExitAnalysis);
  }
  return kExitOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace xcorr::cli
