#include "support.hpp"
#include "warpsync/densities.hpp"
#include "warpsync/kde.hpp"

#include <numbers>

using namespace warpsync;
using testing_support::rel_close;

namespace {
double log_phi(double z) { return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi); }

// Ensemble whose draws put proxy value proxy[i] at age ages[i] in every column.
TargetEnsemble fixed_ensemble(std::vector<double> ages, std::vector<double> proxy, Index columns) {
  TargetEnsemble e;
  const auto n = static_cast<Index>(ages.size());
  e.positions = Vector::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  e.proxy = Eigen::Map<Vector>(proxy.data(), n);
  e.draws.resize(n, columns);
  for (Index j = 0; j < columns; ++j) e.draws.col(j) = Eigen::Map<Vector>(ages.data(), n);
  return e;
}
}  // namespace

TEST_SUITE("equations") {
TEST_CASE("two-sample mixture at zero with unit bandwidth is log phi(1)") {
  const double want = std::log(0.5 * (std::exp(log_phi(1.0)) + std::exp(log_phi(-1.0))));
  CHECK(rel_close(gaussian_kde_log_density(0.0, {-1.0, 1.0}, 1.0), want));
  CHECK(rel_close(want, log_phi(1.0)));
  CHECK(want == doctest::Approx(-1.4189).epsilon(1e-4));
}

TEST_CASE("table window holding {-1, 1} with unit bandwidth gives log phi(1) at zero") {
  KdeOptions opt;
  opt.min_samples = 1;
  opt.windows = 1;
  opt.bandwidth = 1.0;
  opt.grid_resolution = 0;
  opt.age_range = std::make_pair(0.0, 10.0);
  auto table = build_kde_table(fixed_ensemble({2.0, 3.0}, {-1.0, 1.0}, 1), opt);
  CHECK(rel_close(table.log_density(0.0, 5.0), log_phi(1.0)));
  CHECK(rel_close(table.log_density_exact(0.0, 0), log_phi(1.0)));
}
}

TEST_SUITE("kde") {
TEST_CASE("a one-sample window is a single Gaussian") {
  for (double u : {-2.0, 0.3, 1.7}) CHECK(gaussian_kde_log_density(u, {0.3}, 0.5) == doctest::Approx(log_phi((u - 0.3) / 0.5) - std::log(0.5)));
}

TEST_CASE("Silverman bandwidth formula") {
  std::vector<double> s;
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int i = 0; i < 500; ++i) s.push_back(n(rng));
  double mean = 0.0;
  for (double x : s) mean += x;
  mean /= 500.0;
  double ss = 0.0;
  for (double x : s) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / 499.0);
  Vector v = Eigen::Map<Vector>(s.data(), 500);
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double h = 499.0 * p;
    const auto lo = static_cast<Index>(h);
    return v(lo) + (h - static_cast<double>(lo)) * (v(lo + 1) - v(lo));
  };
  const double want = 0.9 * std::min(sd, (q(0.75) - q(0.25)) / 1.34) * std::pow(500.0, -0.2);
  CHECK(silverman_bandwidth(s, 1e-9) == doctest::Approx(want).epsilon(1e-12));
  CHECK(silverman_bandwidth({1.0, 1.0, 1.0}, 0.05) == doctest::Approx(0.9 * std::pow(3.0, -0.2)));
  CHECK(silverman_bandwidth({0.0, 0.0}, 0.05) == doctest::Approx(0.9 * std::pow(2.0, -0.2)));
  CHECK(silverman_bandwidth({0.0, 1e-9}, 0.05) == 0.05);
}

TEST_CASE("windows partition the range and default to one per distinct position") {
  std::vector<double> ages, proxy;
  for (int i = 0; i < 40; ++i) {
    ages.push_back(10.0 * i);
    proxy.push_back(std::sin(0.3 * i));
  }
  KdeOptions opt;
  opt.min_samples = 30;
  auto table = build_kde_table(fixed_ensemble(ages, proxy, 100), opt);
  CHECK(table.window_count() == 40);
  CHECK(table.lower() == 0.0);
  CHECK(table.upper() == 390.0);
  for (double a : {0.0, 9.74, 200.0, 389.9, 390.0}) {
    const int w = table.window_of(a);
    REQUIRE(w >= 0);
    CHECK(w < table.window_count());
  }
  CHECK(table.window_of(-0.01) == -1);
  CHECK(table.log_density(0.0, 391.0) == kNegInf<double>);
}

TEST_CASE("sparse windows borrow the nearest populated window") {
  KdeOptions opt;
  opt.windows = 10;
  opt.min_samples = 30;
  opt.grid_resolution = 0;
  opt.age_range = std::make_pair(0.0, 100.0);
  // Draws only in windows 0 and 9.
  auto table = build_kde_table(fixed_ensemble({1.0, 99.0}, {-0.5, 0.5}, 40), opt);
  CHECK(table.window(0).source == 0);
  CHECK(table.window(9).source == 9);
  CHECK(table.window(3).source == 0);
  CHECK(table.window(7).source == 9);
  CHECK(table.window(4).source == 0);
  CHECK(table.window(5).source == 9);
  CHECK(table.log_density(-0.5, 35.0) == table.log_density(-0.5, 5.0));
}

TEST_CASE("no populated window is a data error") {
  KdeOptions opt;
  opt.min_samples = 30;
  CHECK_THROWS_AS(build_kde_table(fixed_ensemble({0.0, 1.0, 2.0}, {0.0, 1.0, 2.0}, 5), opt), DataError);
}

TEST_CASE("density is floored and maximal at the mode of a unimodal window") {
  KdeOptions opt;
  opt.windows = 1;
  opt.min_samples = 1;
  opt.bandwidth = 0.1;
  opt.log_floor = -30.0;
  opt.age_range = std::make_pair(0.0, 1.0);
  auto table = build_kde_table(fixed_ensemble({0.5, 0.6}, {0.2, 0.2}, 3), opt);
  CHECK(table.log_density(50.0, 0.5) == -30.0);
  const double peak = table.log_density(0.2, 0.5);
  for (double u : {0.1, 0.15, 0.19, 0.21, 0.3}) CHECK(table.log_density(u, 0.5) < peak);
}

TEST_CASE("tabulated density tracks the exact mixture") {
  std::vector<double> ages, proxy;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n;
  for (int i = 0; i < 60; ++i) {
    ages.push_back(5.0 * i);
    proxy.push_back(n(rng));
  }
  TargetEnsemble e = fixed_ensemble(ages, proxy, 120);
  for (Index j = 0; j < 120; ++j)
    for (Index i = 0; i < 60; ++i) e.draws(i, j) += 3.0 * static_cast<double>(j % 7);
  KdeOptions opt;
  opt.windows = 12;
  auto table = build_kde_table(e, opt);
  std::uniform_real_distribution<double> u(-3.0, 3.0), a(table.lower(), table.upper());
  for (int k = 0; k < 2000; ++k) {
    const double x = u(rng), t = a(rng);
    const double exact = table.log_density_exact(x, table.window_of(t));
    CHECK(table.log_density(x, t) == doctest::Approx(exact).epsilon(2e-3 * std::max(1.0, std::abs(exact))));
  }
}
}
