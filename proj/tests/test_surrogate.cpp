#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "xcorr/modes.hpp"
#include "xcorr/surrogate.hpp"
#include "xcorr/synth.hpp"

using namespace xcorr;
using Catch::Matchers::WithinAbs;

namespace {

ReturnPanel model(const char* name, std::size_t n, std::size_t t, std::uint64_t seed) {
  auto m = preset(name);
  m.n_assets = n;
  m.t_length = t;
  m.seed = seed;
  return generate(m);
}

std::vector<double> sorted_row(const ReturnPanel& r, std::size_t i) {
  std::vector<double> v(r.row(i).begin(), r.row(i).end());
  std::sort(v.begin(), v.end());
  return v;
}

double lag1_acf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    den += (x[j] - m) * (x[j] - m);
    if (j + 1 < x.size()) num += (x[j] - m) * (x[j + 1] - m);
  }
  return num / den;
}

double lambda1(const ReturnPanel& r) {
  return eigendecompose(correlation_matrix(r.standardized() ? r : standardize(r))).lambda(0);
}

}  // namespace

TEST_CASE("surrogate kind names round-trip") {
  for (auto k : kAllSurrogateKinds) CHECK(parse_surrogate_kind(to_string(k)) == k);
  CHECK_FALSE(parse_surrogate_kind("phase_randomize").has_value());
}

TEST_CASE("rotations") {
  const auto r = model("one_factor", 12, 390, 1);
  SECTION("single series has spectrum {1}") {
    const auto one = r.select_rows({0});
    const auto s = eigendecompose(correlation_matrix(rotate_free(one, 5)));
    REQUIRE(s.size() == 1);
    CHECK_THAT(s.lambda(0), WithinAbs(1.0, 1e-12));
  }
  SECTION("zero offsets give the identical panel") {
    const std::vector<std::size_t> zeros(r.n_assets(), 0);
    CHECK(rotate_rows(r, zeros).values() == r.values());
  }
  SECTION("per-row multisets are preserved") {
    const auto f = rotate_free(r, 3);
    const auto d = rotate_daily(r, 3);
    for (std::size_t i = 0; i < r.n_assets(); ++i) {
      CHECK(sorted_row(f, i) == sorted_row(r, i));
      CHECK(sorted_row(d, i) == sorted_row(r, i));
    }
  }
  SECTION("lag-1 autocorrelation is preserved up to wrap-around") {
    const auto f = rotate_free(r, 4);
    for (std::size_t i = 0; i < r.n_assets(); ++i)
      CHECK(std::abs(lag1_acf(f.row(i)) - lag1_acf(r.row(i))) < 10.0 / static_cast<double>(r.length()));
  }
  SECTION("daily offsets are whole days") {
    const auto d = rotate_daily(r, 9);
    const auto bpd = static_cast<std::size_t>(r.bars_per_day());
    for (std::size_t i = 0; i < r.n_assets(); ++i) {
      bool found = false;
      for (std::size_t day = 0; day < r.length() / bpd && !found; ++day)
        found = d.row(i)[0] == r.row(i)[day * bpd];
      CHECK(found);
    }
  }
  SECTION("a single day admits only the identity") {
    const auto one_day = ReturnPanel(r.assets(), r.values(), static_cast<int>(r.length()), 1.0, true);
    CHECK(rotate_daily(one_day, 17).values() == r.values());
  }
  SECTION("partial day is trimmed with a warning") {
    auto m = preset("wishart_null");
    m.n_assets = 3;
    m.t_length = 78 * 2 + 10;
    Warnings w;
    const auto d = rotate_daily(generate(m), 1, &w);
    CHECK(d.length() == 156);
    REQUIRE(w.size() == 1);
    CHECK(w[0].find("10") != std::string::npos);
  }
  SECTION("day-periodic panel has an unchanged correlation matrix") {
    const int bpd = 6;
    RowMatrix m(3, bpd * 5);
    const double pattern[3][6] = {{1, -2, 0.5, 3, -1, 0}, {2, 1, -1, 0, 0.3, -2}, {-1, 0, 2, 1, 1, -3}};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < bpd * 5; ++j) m(i, j) = pattern[i][j % bpd];
    const auto p = standardize(ReturnPanel({"A", "B", "C"}, m, bpd, 60.0));
    const auto before = correlation_matrix(p).values();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto after = correlation_matrix(rotate_daily(p, seed)).values();
      CHECK((after - before).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SECTION("deterministic under seed") {
    CHECK(rotate_free(r, 42).values() == rotate_free(r, 42).values());
    CHECK_FALSE(rotate_free(r, 42).values() == rotate_free(r, 43).values());
  }
}

TEST_CASE("rotate_free destroys cross-correlation") {
  const auto r = model("one_factor", 30, 4000, 2);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto c = correlation_matrix(rotate_free(r, seed)).values();
    double s = 0.0;
    int k = 0;
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      for (Eigen::Index j = i + 1; j < c.cols(); ++j, ++k) s += std::abs(c(i, j));
    CHECK(s / k <= 3.0 / std::sqrt(4000.0));
  }
}

TEST_CASE("rotate_free on a correlated panel matches the MP band") {
  auto m = preset("one_factor");
  m.seed = 21;
  const auto r = generate(m);
  const auto s = eigendecompose(correlation_matrix(rotate_free(r, 5)));
  const auto b = mp_bounds(r.q());
  CHECK(s.lambda(0) <= b.lambda_max + 0.05);
  CHECK(s.lambda(s.size() - 1) >= b.lambda_min - 0.05);
}

TEST_CASE("sign and magnitude shuffles") {
  const auto r = model("one_factor", 15, 500, 7);
  SECTION("all-positive row is unchanged by sign shuffle") {
    RowMatrix m = r.values().cwiseAbs();
    m.array() += 0.1;
    const ReturnPanel pos(r.assets(), m, r.bars_per_day(), r.dt_seconds());
    CHECK(shuffle_signs(pos, 3).values() == pos.values());
  }
  SECTION("sign shuffle keeps magnitudes in place and the sign multiset per row") {
    const auto s = shuffle_signs(r, 4);
    CHECK(s.values().cwiseAbs() == r.values().cwiseAbs());
    const auto a = decompose(s), b = decompose(r);
    for (Eigen::Index i = 0; i < a.signs.rows(); ++i) CHECK(a.signs.row(i).sum() == b.signs.row(i).sum());
  }
  SECTION("equal magnitudes are unchanged by magnitude shuffle") {
    RowMatrix m = r.values().unaryExpr([](double x) { return x >= 0 ? 2.0 : -2.0; });
    const ReturnPanel eq(r.assets(), m, r.bars_per_day(), r.dt_seconds());
    CHECK(shuffle_magnitudes(eq, 3).values() == eq.values());
  }
  SECTION("magnitude shuffle keeps signs and the magnitude multiset per row") {
    const auto s = shuffle_magnitudes(r, 4);
    CHECK(decompose(s).signs == decompose(r).signs);
    for (std::size_t i = 0; i < r.n_assets(); ++i) {
      std::vector<double> a(s.row(i).begin(), s.row(i).end()), b(r.row(i).begin(), r.row(i).end());
      for (auto& v : a) v = std::abs(v);
      for (auto& v : b) v = std::abs(v);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }
  SECTION("a zero sign is shuffled like any other value") {
    RowMatrix m = r.values();
    m(0, 3) = 0.0;
    const ReturnPanel z(r.assets(), m, r.bars_per_day(), r.dt_seconds());
    const auto s = shuffle_signs(z, 8);
    // the zero magnitude stays at 3; the zero sign lands somewhere
    CHECK(s.values()(0, 3) == 0.0);
    const auto zeros = (s.values().row(0).array() == 0.0).count();
    CHECK((zeros == 1 || zeros == 2));
  }
  SECTION("shuffles do not mutate their input and are deterministic") {
    const RowMatrix before = r.values();
    CHECK(shuffle_signs(r, 1).values() == shuffle_signs(r, 1).values());
    CHECK(r.values() == before);
  }
}

TEST_CASE("signs_only and magnitudes_only") {
  SECTION("all-positive panel drops every row") {
    RowMatrix m(3, 10);
    m.setConstant(0.5);
    m(0, 0) = 0.7;
    Warnings w;
    const auto s = signs_only(ReturnPanel({"A", "B", "C"}, m, 1, 1.0), &w);
    CHECK(s.n_assets() == 0);
    CHECK(w.size() == 3);
  }
  SECTION("idempotent") {
    const auto r = model("one_factor", 10, 300, 3);
    const auto once = signs_only(r);
    const auto twice = signs_only(once);
    CHECK((once.values() - twice.values()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(once.standardized());
  }
  SECTION("both keep collective modes on the one-factor model") {
    auto m = preset("one_factor");
    m.seed = 13;
    m.t_length = 20000;
    const auto r = generate(m);
    const auto b = mp_bounds(r.q());
    CHECK(lambda1(signs_only(r)) > b.lambda_max);
    CHECK(lambda1(magnitudes_only(r)) > b.lambda_max);
  }
}

TEST_CASE("make_surrogate dispatches on kind") {
  const auto r = model("one_factor", 8, 312, 1);
  CHECK(make_surrogate(r, {SurrogateKind::rotate_free, 5}).values() == rotate_free(r, 5).values());
  CHECK(make_surrogate(r, {SurrogateKind::shuffle_signs, 5}).values() == shuffle_signs(r, 5).values());
  CHECK(make_surrogate(r, {SurrogateKind::magnitudes_only, 5}).values() == magnitudes_only(r).values());
}
