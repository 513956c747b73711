#include "support.hpp"
#include "warpsync/metrics.hpp"

using namespace warpsync;
using testing_support::rel_close;

namespace {
Matrix shifted(const Vector& truth, const Vector& offsets, Index samples, double spread) {
  Matrix e(truth.size(), samples);
  for (Index i = 0; i < truth.size(); ++i)
    for (Index j = 0; j < samples; ++j)
      e(i, j) = truth(i) + offsets(i) + spread * (static_cast<double>(j) / static_cast<double>(samples - 1) - 0.5);
  return e;
}
}  // namespace

TEST_SUITE("equations") {
TEST_CASE("truth inside exactly half the intervals gives coverage one half") {
  Vector truth = Vector::LinSpaced(10, 0.0, 900.0);
  Vector off(10);
  off << 0, 500, 0, 500, 0, 500, 0, 500, 0, 500;
  CHECK(rel_close(coverage(shifted(truth, off, 101, 100.0), truth), 0.5));
}

TEST_CASE("offsets {0, 100, 200} give mean error 100") {
  Vector truth(3);
  truth << 10, 20, 30;
  Vector off(3);
  off << 0, 100, 200;
  CHECK(rel_close(mean_abs_error(shifted(truth, off, 11, 4.0), truth), 100.0));
}

TEST_CASE("median 110, truth 100, sd 5 is two standard deviations") {
  AgeSummary s;
  s.median = Vector::Constant(1, 110.0);
  s.sd = Vector::Constant(1, 5.0);
  s.lower = s.upper = s.mean = s.median;
  CHECK(rel_close(delta_t_sd(s, Vector::Constant(1, 100.0))(0), 2.0));
}

TEST_CASE("uniform samples on [0, 1] have a 95% interval of width about 0.95") {
  Matrix e(1, 100001);
  for (Index j = 0; j < e.cols(); ++j) e(0, j) = static_cast<double>(j) / 100000.0;
  CHECK(rel_close(mean_interval_width(e, 0.95), 0.95, 1e-9));
}
}

TEST_SUITE("metrics") {
TEST_CASE("coverage extremes") {
  Vector truth = Vector::LinSpaced(5, 0.0, 4.0);
  Matrix e = shifted(truth, Vector::Zero(5), 21, 1.0);
  CHECK(coverage(e, truth) == 1.0);
  CHECK(coverage(shifted(truth, Vector::Constant(5, 100.0), 21, 1.0), truth) == 0.0);
}

TEST_CASE("error and width basics") {
  Vector truth = Vector::LinSpaced(4, 0.0, 3.0);
  CHECK(mean_abs_error(shifted(truth, Vector::Zero(4), 5, 1.0), truth) == 0.0);
  CHECK(mean_abs_error(shifted(truth, Vector::Constant(4, 100.0), 5, 1.0), truth) == doctest::Approx(100.0));
  Matrix flat = Matrix::Constant(3, 7, 2.5);
  CHECK(mean_interval_width(flat) == 0.0);
  AgeSummary s;
  s.lower = Vector::Zero(2);
  s.upper = Vector(2);
  s.upper << 2, 4;
  CHECK(mean_interval_width(s) == 3.0);
}

TEST_CASE("standardized deviation: zero, one, undefined") {
  AgeSummary s;
  s.median = Vector(3);
  s.median << 100, 105, 7;
  s.sd = Vector(3);
  s.sd << 5, 5, 0;
  s.mean = s.lower = s.upper = s.median;
  Vector truth(3);
  truth << 100, 100, 7;
  Vector d = delta_t_sd(s, truth);
  CHECK(d(0) == 0.0);
  CHECK(d(1) == 1.0);
  CHECK(std::isnan(d(2)));
  auto card = score(s, truth);
  CHECK(card.undefined_delta_t == 1);
  CHECK(card.mean_abs_delta_t == doctest::Approx(0.5));
}

TEST_CASE("errors: empty ensemble, length mismatch, bad level") {
  CHECK_THROWS_AS(coverage(Matrix(0, 0), Vector()), DataError);
  CHECK_THROWS_AS(mean_abs_error(Matrix::Zero(3, 4), Vector::Zero(2)), DataError);
  CHECK_THROWS_AS(mean_interval_width(Matrix::Zero(3, 4), 1.5), ConfigError);
}

TEST_CASE("coverage is invariant under a joint monotone transform") {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> n;
  Matrix e(40, 200);
  Vector truth(40);
  for (Index i = 0; i < 40; ++i) {
    truth(i) = 100.0 * i + 30.0 * n(rng);
    for (Index j = 0; j < 200; ++j) e(i, j) = 100.0 * i + 25.0 * n(rng);
  }
  auto f = [](double x) { return std::exp(x / 1000.0) + x; };
  Matrix fe = e.unaryExpr(f);
  Vector ft = truth.unaryExpr(f);
  CHECK(coverage(fe, ft) == coverage(e, truth));
}

TEST_CASE("error and width are translation invariant and scale equivariant") {
  std::mt19937_64 rng(52);
  std::normal_distribution<double> n;
  Matrix e(20, 101);
  Vector truth(20);
  for (Index i = 0; i < 20; ++i) {
    truth(i) = 10.0 * i;
    for (Index j = 0; j < 101; ++j) e(i, j) = 10.0 * i + 3.0 + n(rng);
  }
  const double mae = mean_abs_error(e, truth), w = mean_interval_width(e);
  Matrix moved = e.array() + 1234.5;
  Vector tmoved = truth.array() + 1234.5;
  CHECK(mean_abs_error(moved, tmoved) == doctest::Approx(mae).epsilon(1e-9));
  CHECK(mean_interval_width(moved) == doctest::Approx(w).epsilon(1e-9));
  CHECK(mean_abs_error(e * 3.0, truth * 3.0) == doctest::Approx(3.0 * mae).epsilon(1e-12));
  CHECK(mean_interval_width(e * 3.0) == doctest::Approx(3.0 * w).epsilon(1e-12));
}

TEST_CASE("summary intervals are equal tailed") {
  Matrix e(1, 201);
  for (Index j = 0; j < 201; ++j) e(0, j) = static_cast<double>(j);
  auto s = summarize(e, 0.9);
  CHECK(s.median(0) == 100.0);
  CHECK(s.lower(0) == doctest::Approx(10.0));
  CHECK(s.upper(0) == doctest::Approx(190.0));
}
}
