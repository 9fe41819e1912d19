#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "xcorr/mfdfa.hpp"
#include "xcorr/rng.hpp"
#include "xcorr/synth.hpp"

using namespace xcorr;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

std::vector<double> fixture_series() {
  const auto rows = oracle::asset_rows(oracle::read_numeric_csv(oracle::fixture("panel_3x16.csv"), true));
  std::vector<double> x;
  for (int rep = 0; rep < 16; ++rep)
    for (const auto& r : rows) x.insert(x.end(), r.begin(), r.end());
  return x;  // 768 values
}

std::size_t index_of(const std::vector<double>& q, double value) {
  return static_cast<std::size_t>(std::find_if(q.begin(), q.end(),
                                               [&](double v) { return std::abs(v - value) < 1e-12; }) -
                                  q.begin());
}

}  // namespace

TEST_CASE("q and scale grids") {
  const auto q = uniform_q_grid();
  REQUIRE(q.size() == 41);
  CHECK(q.front() == -4.0);
  CHECK(q.back() == 4.0);
  CHECK(q[20] == 0.0);
  CHECK(q[21] == 0.2);
  const auto s = geometric_scales(16, 2000, 20);
  CHECK(s.front() == 16);
  CHECK(s.back() == 2000);
  CHECK(std::adjacent_find(s.begin(), s.end(), std::greater_equal<>()) == s.end());
  const auto d = MfdfaConfig::defaults(40000);
  CHECK(d.scales.front() == 16);
  CHECK(d.scales.back() == 2000);
  CHECK(d.detrend_order == 2);
  CHECK_NOTHROW(d.validate(40000));
}

TEST_CASE("config validation") {
  auto c = MfdfaConfig::defaults(40000);
  c.q_grid = {-1.0, 0.05, 1.0};
  CHECK_THROWS_AS(c.validate(40000), Error);
  c = MfdfaConfig::defaults(40000);
  c.scales.front() = 3;
  CHECK_THROWS_AS(c.validate(40000), Error);
  c = MfdfaConfig::defaults(40000);
  CHECK_THROWS_AS(c.validate(4000), Error);
  c.fit_min = c.scales[17];
  CHECK_THROWS_AS(c.validate(40000), Error);
}

TEST_CASE("profile") {
  for (double v : profile(std::vector<double>(8, 3.5))) CHECK(v == 0.0);
  const auto y = profile(std::vector<double>{1, -1, 1, -1});
  CHECK(y == std::vector<double>{1, 0, 1, 0});
  const auto x = fixture_series();
  const auto p = profile(x);
  const auto expect = oracle::prefix_profile(x);
  for (std::size_t j = 0; j < x.size(); ++j) CHECK_THAT(p[j], WithinAbs(expect[j], 1e-12));
  CHECK(std::abs(p.back()) < 1e-8 * static_cast<double>(x.size()));
  CHECK_THROWS_AS(profile(std::vector<double>{1, 2, 3}, 1), Error);
}

TEST_CASE("segment variances") {
  SECTION("a global polynomial detrends to zero") {
    std::vector<double> y(256);
    double norm = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double t = static_cast<double>(j);
      y[j] = 3.0 - 0.5 * t + 0.01 * t * t;
      norm += y[j] * y[j];
    }
    for (double v : segment_variances(y, 32, 2)) CHECK(v < 1e-16 * norm);
  }
  SECTION("exact division gives matching forward and backward sets") {
    const auto y = profile(fixture_series());
    auto v = segment_variances(y, 32, 2);
    REQUIRE(v.size() == 2 * 24);
    std::vector<double> fwd(v.begin(), v.begin() + 24), bwd(v.begin() + 24, v.end());
    std::sort(fwd.begin(), fwd.end());
    std::sort(bwd.begin(), bwd.end());
    for (std::size_t k = 0; k < fwd.size(); ++k) CHECK_THAT(fwd[k], WithinAbs(bwd[k], 1e-10));
  }
  SECTION("matches a per-segment normal-equations fit") {
    auto x = fixture_series();
    x.resize(750);
    const auto y = profile(x);
    const auto v = segment_variances(y, 32, 2);
    const std::size_t m = 750 / 32;
    REQUIRE(v.size() == 2 * m);
    for (std::size_t s = 0; s < m; ++s) {
      const std::vector<double> fwd(y.begin() + static_cast<long>(s * 32), y.begin() + static_cast<long>(s * 32 + 32));
      const std::vector<double> bwd(y.end() - static_cast<long>((s + 1) * 32), y.end() - static_cast<long>(s * 32));
      CHECK_THAT(v[s], WithinAbs(oracle::detrended_variance(fwd, 2), 1e-9));
      CHECK_THAT(v[m + s], WithinAbs(oracle::detrended_variance(bwd, 2), 1e-9));
    }
  }
  SECTION("under-determined and oversized scales are rejected") {
    const auto y = profile(fixture_series());
    CHECK_THROWS_AS(segment_variances(y, 3, 2), Error);
    CHECK_THROWS_AS(segment_variances(y, 200, 2), Error);
  }
}

TEST_CASE("fluctuation") {
  const std::vector<double> same = {2.25, 2.25, 2.25, 2.25};
  for (double q : {-4.0, -1.0, 0.0, 0.2, 2.0, 4.0}) CHECK_THAT(fluctuation(same, q), WithinAbs(1.5, 1e-14));

  const std::vector<double> v = {1.0, 4.0, 9.0};
  CHECK_THAT(fluctuation(v, 2.0), WithinAbs(std::sqrt((1.0 + 4.0 + 9.0) / 3.0), 1e-14));

  // ((1/2)(1^-1 + 4^-1))^(-1/2)
  const std::vector<double> two = {1.0, 4.0};
  CHECK_THAT(fluctuation(two, -2.0), WithinAbs(std::pow(0.5 * (1.0 + 0.25), -0.5), 1e-14));
  CHECK_THAT(fluctuation(two, 0.0), WithinAbs(std::sqrt(2.0), 1e-14));

  const std::vector<double> with_zero = {0.0, 1.0};
  CHECK_THROWS_AS(fluctuation(with_zero, -2.0), Error);
  CHECK_NOTHROW(fluctuation(with_zero, 2.0));

  // generalized-mean monotonicity
  const auto y = profile(fixture_series());
  const auto var = segment_variances(y, 24, 2);
  const auto q = uniform_q_grid();
  for (std::size_t i = 1; i < q.size(); ++i) CHECK(fluctuation(var, q[i]) >= fluctuation(var, q[i - 1]) * (1 - 1e-12));
}

TEST_CASE("hurst exponents of an exact power law") {
  FluctuationSurface s;
  s.q = {-2.0, 0.0, 2.0};
  s.scales = {16, 32, 64, 128, 256, 512};
  s.values.resize(3, 6);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 6; ++c) s.values(r, c) = std::pow(static_cast<double>(s.scales[c]), 0.7);
  MfdfaConfig cfg;
  cfg.q_grid = s.q;
  cfg.scales = s.scales;
  cfg.fit_min = 16;
  cfg.fit_max = 512;
  const auto fit = hurst_exponents(s, cfg);
  for (double h : fit.h) CHECK_THAT(h, WithinAbs(0.7, 1e-10));
  for (double e : fit.residual_rms) CHECK(e < 1e-10);
  s.values(1, 2) = std::nan("");
  CHECK_THROWS_AS(hurst_exponents(s, cfg), Error);
}

TEST_CASE("singularity spectrum of a constant h collapses to a point") {
  const auto q = uniform_q_grid();
  const std::vector<double> h(q.size(), 0.6);
  const auto s = singularity_spectrum(h, q);
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK_THAT(s.alpha[i], WithinAbs(0.6, 1e-12));
    CHECK_THAT(s.f[i], WithinAbs(1.0, 1e-12));
  }
  CHECK(s.width < 1e-12);
  CHECK(s.warnings.empty());
  const std::vector<double> few = {0.5, 0.5, 0.5};
  const std::vector<double> fq = {-1.0, 0.0, 1.0};
  CHECK_THROWS_AS(singularity_spectrum(few, fq), Error);
}

TEST_CASE("non-monotone alpha is reported, not fatal") {
  const auto q = uniform_q_grid(-2.0, 2.0, 0.5);
  std::vector<double> h;
  for (double v : q) h.push_back(0.5 + 0.05 * v * v);
  const auto s = singularity_spectrum(h, q);
  CHECK_FALSE(s.warnings.empty());
}

TEST_CASE("white noise is monofractal with h(2) near 1/2") {
  const auto x = white_noise(40000, 3);
  const auto r = mfdfa(x, MfdfaConfig::defaults(x.size()));
  const auto i2 = index_of(r.surface.q, 2.0);
  CHECK_THAT(r.surface.h[i2], WithinAbs(0.5, 0.03));
  CHECK(r.spectrum.width <= 0.15);
  CHECK_THAT(r.spectrum.apex_alpha(), WithinAbs(0.5, 0.05));
  for (double f : r.spectrum.f) CHECK(f <= 1.0 + 1e-6);
  CHECK(*std::max_element(r.spectrum.f.begin(), r.spectrum.f.end()) >= 0.95);
}

TEST_CASE("scale invariance and reversal symmetry") {
  const auto x = white_noise(8192, 5);
  const auto cfg = MfdfaConfig::defaults(x.size());
  const auto a = mfdfa(x, cfg);
  auto scaled = x;
  for (auto& v : scaled) v *= 37.5;
  const auto b = mfdfa(scaled, cfg);
  for (std::size_t i = 0; i < a.surface.h.size(); ++i) {
    CHECK_THAT(b.surface.h[i], WithinAbs(a.surface.h[i], 1e-10));
    CHECK_THAT(b.spectrum.alpha[i], WithinAbs(a.spectrum.alpha[i], 1e-10));
    CHECK_THAT(b.spectrum.f[i], WithinAbs(a.spectrum.f[i], 1e-10));
  }
  auto rev = x;
  std::reverse(rev.begin(), rev.end());
  const auto c = mfdfa(rev, cfg);
  const auto i2 = index_of(a.surface.q, 2.0);
  CHECK_THAT(c.surface.h[i2], WithinAbs(a.surface.h[i2], 0.02));
}

TEST_CASE("binomial cascade on the default grid keeps the analytic width") {
  const auto x = binomial_cascade(0.3, 16);
  const auto r = mfdfa(x, MfdfaConfig::defaults(x.size()));
  CHECK_THAT(r.spectrum.width, WithinAbs(std::log2(0.7 / 0.3), 0.1));
  for (double q : {2.0, 4.0}) CHECK_THAT(r.surface.h[index_of(r.surface.q, q)], WithinAbs(oracle::cascade_h(q, 0.3), 0.05));
}

TEST_CASE("binomial cascade matches the analytic multifractal spectrum") {
  const double p = 0.3;
  const auto x = binomial_cascade(p, 16);
  REQUIRE(x.size() == 65536);
  // fit above the small-scale detrending crossover
  auto cfg = MfdfaConfig::defaults(x.size());
  cfg.scales = geometric_scales(64, x.size() / 20, 20);
  cfg.fit_min = cfg.scales.front();
  const auto r = mfdfa(x, cfg);
  for (double q : {-4.0, -2.0, 2.0, 4.0}) {
    const auto i = index_of(r.surface.q, q);
    CHECK_THAT(r.surface.h[i], WithinAbs(oracle::cascade_h(q, p), 0.05));
  }
  for (std::size_t i = 1; i < r.surface.h.size(); ++i)
    CHECK(r.surface.h[i - 1] >= r.surface.h[i] - 0.02);
  CHECK_THAT(r.spectrum.width, WithinAbs(std::log2(0.7 / 0.3), 0.1));
  for (double f : r.spectrum.f) CHECK(f <= 1.0 + 1e-6);
  CHECK(*std::max_element(r.spectrum.f.begin(), r.spectrum.f.end()) >= 0.95);
}

TEST_CASE("parametric averaging of spectra at fixed q") {
  const auto q = uniform_q_grid();
  std::vector<SingularitySpectrum> s;
  for (double h0 : {0.4, 0.6}) {
    std::vector<double> h(q.size(), h0);
    s.push_back(singularity_spectrum(h, q));
  }
  const auto avg = average_spectra(s);
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK_THAT(avg.alpha[i], WithinAbs(0.5, 1e-12));
    CHECK_THAT(avg.f[i], WithinAbs(1.0, 1e-12));
  }
}
