#include <catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "xcorr/spectrum.hpp"
#include "xcorr/synth.hpp"

using namespace xcorr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ReturnPanel fixture_panel() {
  const auto rows = oracle::asset_rows(oracle::read_numeric_csv(oracle::fixture("panel_3x16.csv"), true));
  return standardize(ReturnPanel::from_rows({"X", "Y", "Z"}, rows, 4, 300.0));
}

MarketModel small_null(std::size_t n, std::size_t t, std::uint64_t seed) {
  auto m = preset("wishart_null");
  m.n_assets = n;
  m.t_length = t;
  m.seed = seed;
  return m;
}

void check_invariants(const CorrelationMatrix& c, const EigenSpectrum& s) {
  const auto n = static_cast<double>(c.n_series());
  CHECK_THAT(c.values().trace(), WithinAbs(n, 1e-8));
  CHECK_THAT(s.eigenvalues.sum(), WithinAbs(n, 1e-8));
  CHECK(reconstruction_error(c.values(), s) < 1e-8);
  CHECK(orthonormality_error(s) < 1e-8);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s.lambda(i - 1) >= s.lambda(i));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Eigen::VectorXd v = s.vector(i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    CHECK(v(arg) > 0.0);
  }
  CHECK(c.values().maxCoeff() <= 1.0 + 1e-10);
  CHECK(c.values().minCoeff() >= -1.0 - 1e-10);
  CHECK((c.values().diagonal().array() - 1.0).abs().maxCoeff() < 1e-10);
}

}  // namespace

TEST_CASE("correlation matrix of identical and negated rows") {
  const auto same = standardize(ReturnPanel::from_rows({{1, 2, 4}, {1, 2, 4}}));
  const auto c1 = correlation_matrix(same);
  CHECK((c1.values() - Eigen::MatrixXd::Ones(2, 2)).cwiseAbs().maxCoeff() < 1e-14);

  const auto neg = standardize(ReturnPanel::from_rows({{1, 2, 4}, {-1, -2, -4}}));
  const auto c2 = correlation_matrix(neg);
  CHECK_THAT(c2(0, 1), WithinAbs(-1.0, 1e-14));
  CHECK_THAT(c2(1, 0), WithinAbs(-1.0, 1e-14));
}

TEST_CASE("correlation matrix matches pairwise Pearson on the 3x16 fixture") {
  const auto rows = oracle::asset_rows(oracle::read_numeric_csv(oracle::fixture("panel_3x16.csv"), true));
  const auto c = correlation_matrix(fixture_panel());
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t n = 0; n < 3; ++n) CHECK_THAT(c(m, n), WithinAbs(oracle::pearson(rows[m], rows[n]), 1e-13));
  check_invariants(c, eigendecompose(c));
}

TEST_CASE("correlation matrix requires a standardized panel") {
  CHECK_THROWS_AS(correlation_matrix(ReturnPanel::from_rows({{1, 2, 3}, {3, 1, 2}})), Error);
}

TEST_CASE("eigendecompose small cases") {
  SECTION("rank one") {
    Eigen::MatrixXd m(2, 2);
    m << 1, 1, 1, 1;
    const auto s = eigendecompose(CorrelationMatrix(m, 10));
    CHECK_THAT(s.lambda(0), WithinAbs(2.0, 1e-14));
    CHECK_THAT(s.lambda(1), WithinAbs(0.0, 1e-14));
    CHECK_THAT(s.source_q, WithinAbs(5.0, 1e-15));
    const double v[] = {2.0, 0.0};
    CHECK(overlap_fraction(v, mp_bounds(406)) == 0.0);
  }
  SECTION("identity") {
    const auto s = eigendecompose(CorrelationMatrix(Eigen::MatrixXd::Identity(5, 5), 50));
    for (std::size_t i = 0; i < 5; ++i) CHECK_THAT(s.lambda(i), WithinAbs(1.0, 1e-14));
    CHECK(overlap_fraction(s, mp_bounds(1.0)) == 1.0);
    CHECK(overlap_fraction(s, mp_bounds(406.0)) == 1.0);
  }
  SECTION("asymmetric input is rejected") {
    Eigen::MatrixXd m(2, 2);
    m << 1, 0.5, 0.4, 1;
    CHECK_THROWS_AS(CorrelationMatrix(m, 10), Error);
    CHECK_THROWS_AS(eigendecompose_symmetric(m, 1.0), Error);
  }
}

TEST_CASE("4x4 fixture eigenvalues match characteristic-polynomial roots") {
  const auto rows = oracle::read_numeric_csv(oracle::fixture("matrix_4x4.csv"), false);
  std::array<std::array<long double, 4>, 4> a{};
  Eigen::MatrixXd m(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      a[i][j] = rows[i][j];
      m(i, j) = rows[i][j];
    }
  const auto expect = oracle::eigenvalues_4x4(a, -1, 5);
  REQUIRE(expect.size() == 4);
  const CorrelationMatrix c(m, 40);
  const auto s = eigendecompose(c);
  for (std::size_t i = 0; i < 4; ++i) CHECK_THAT(s.lambda(i), WithinAbs(expect[i], 1e-12));
  check_invariants(c, s);
}

TEST_CASE("MP bounds closed form") {
  auto b = mp_bounds(1.0);
  CHECK(b.lambda_min == 0.0);
  CHECK(b.lambda_max == 4.0);
  b = mp_bounds(406.0);
  CHECK_THAT(b.lambda_min, WithinAbs(0.90320, 1e-5));
  CHECK_THAT(b.lambda_max, WithinAbs(1.10172, 1e-5));
  b = mp_bounds(3.0);
  CHECK_THAT(b.lambda_min, WithinAbs(0.17863, 5e-6));
  CHECK_THAT(b.lambda_max, WithinAbs(2.48803, 5e-6));
  for (double q : {1.0, 2.5, 3.0, 17.0, 406.0, 1e4}) {
    const auto bb = mp_bounds(q);
    CHECK_THAT(bb.width(), WithinAbs(4.0 / std::sqrt(q), 1e-12));
    CHECK(bb.lambda_min <= bb.lambda_max);
    CHECK(bb.lambda_min >= 0.0);
  }
  CHECK_THROWS_AS(mp_bounds(0.0), Error);
  CHECK_THROWS_AS(mp_bounds(-1.0), Error);
}

TEST_CASE("overlap fraction ignores eigenvalue order") {
  std::vector<double> v = {0.5, 0.95, 1.0, 1.05, 1.2, 0.99, 3.0};
  const auto b = mp_bounds(406);
  const double ref = overlap_fraction(v, b);
  CHECK_THAT(ref, WithinAbs(4.0 / 7.0, 1e-15));
  std::mt19937 gen(3);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(v.begin(), v.end(), gen);
    CHECK(overlap_fraction(v, b) == ref);
  }
}

TEST_CASE("i.i.d. Gaussian spectra stay inside the MP band") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto g = generate(small_null(50, 5000, seed));
    const auto c = correlation_matrix(g);
    const auto s = eigendecompose(c);
    check_invariants(c, s);
    const auto b = mp_bounds(g.q());
    CHECK(s.lambda(0) <= b.lambda_max + 5.0 * std::pow(50.0, -2.0 / 3.0));
    CHECK(overlap_fraction(s, b) >= 0.9);
  }
}

TEST_CASE("element distribution") {
  SECTION("identity matrix is a degenerate spike at zero") {
    const auto d = element_distribution(CorrelationMatrix(Eigen::MatrixXd::Identity(6, 6), 60), 20);
    CHECK(d.degenerate);
    CHECK(d.gaussian_sigma == 0.0);
    CHECK(d.gaussian_mu == 0.0);
    CHECK(d.sample_count == 15);
  }
  SECTION("too few series") {
    CHECK_THROWS_AS(element_distribution(CorrelationMatrix(Eigen::MatrixXd::Identity(2, 2), 10)), Error);
  }
  SECTION("too few bins") {
    CHECK_THROWS_AS(element_distribution(CorrelationMatrix(Eigen::MatrixXd::Identity(4, 4), 10), 5), Error);
  }
  SECTION("histogram has unit area") {
    const auto g = generate(small_null(40, 2000, 4));
    const auto d = element_distribution(correlation_matrix(g), 30);
    double area = 0.0;
    for (std::size_t k = 0; k < d.densities.size(); ++k)
      area += d.densities[k] * (d.bin_edges[k + 1] - d.bin_edges[k]);
    CHECK_THAT(area, WithinAbs(1.0, 1e-12));
    CHECK(d.sample_count == 40 * 39 / 2);
  }
  SECTION("null sigma follows 1/sqrt(T)") {
    const auto g = generate(small_null(100, 10000, 5));
    const auto d = element_distribution(correlation_matrix(g));
    CHECK_THAT(d.gaussian_sigma, WithinRel(1.0 / std::sqrt(10000.0), 0.10));
  }
  SECTION("one-factor mean correlation") {
    auto m = preset("one_factor");
    m.t_length = 10000;
    m.seed = 6;
    const auto d = element_distribution(correlation_matrix(generate(m)));
    CHECK_THAT(d.gaussian_mu, WithinRel(0.18, 0.15));
  }
}

TEST_CASE("windowed element distribution") {
  const auto g = generate(small_null(100, 12000, 7));
  SECTION("a single full window equals the full-matrix distribution") {
    const auto full = element_distribution(correlation_matrix(g));
    const auto win = windowed_element_distribution(g, g.q());
    REQUIRE(win.bin_edges.size() == full.bin_edges.size());
    for (std::size_t k = 0; k < full.bin_edges.size(); ++k)
      CHECK_THAT(win.bin_edges[k], WithinAbs(full.bin_edges[k], 1e-12));
    CHECK(win.sample_count == full.sample_count);
    CHECK_THAT(win.gaussian_sigma, WithinAbs(full.gaussian_sigma, 1e-12));
    CHECK_THAT(win.gaussian_mu, WithinAbs(full.gaussian_mu, 1e-12));
  }
  SECTION("Q = 3 on noise has sigma near 1/sqrt(300)") {
    const auto win = windowed_element_distribution(g, 3.0);
    CHECK_THAT(win.gaussian_sigma, WithinRel(1.0 / std::sqrt(300.0), 0.10));
    CHECK(win.sample_count == 40 * 100 * 99 / 2);
  }
  SECTION("Q = 3 is wider than full Q on a correlated panel") {
    auto m = preset("one_factor");
    m.t_length = 6000;
    m.seed = 8;
    const auto f = generate(m);
    const auto full = element_distribution(correlation_matrix(f));
    const auto win = windowed_element_distribution(f, 3.0);
    CHECK(win.gaussian_sigma > full.gaussian_sigma);
  }
  SECTION("windows longer than the panel are rejected") {
    CHECK_THROWS_AS(windowed_element_distribution(g, 500.0), Error);
  }
}
