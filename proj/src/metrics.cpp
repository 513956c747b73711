#include "warpsync/metrics.hpp"

#include "warpsync/preprocess.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace warpsync {

namespace {

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
}

void check_sizes(Index summary_rows, Index truth_rows) {
  if (summary_rows == 0) throw DataError("empty age ensemble");
  if (summary_rows != truth_rows)
    throw DataError("ensemble has " + std::to_string(summary_rows) + " positions but truth has " +
                    std::to_string(truth_rows));
}

}  // namespace

AgeSummary summarize(const Eigen::Ref<const Matrix>& ensemble, double level) {
  check_level(level);
  const Index n = ensemble.rows(), s = ensemble.cols();
  if (n == 0 || s == 0) throw DataError("empty age ensemble");
  const double tail = 0.5 * (1.0 - level);
  AgeSummary out;
  out.median.resize(n);
  out.lower.resize(n);
  out.upper.resize(n);
  out.mean.resize(n);
  out.sd.resize(n);
  Vector row(s);
  for (Index i = 0; i < n; ++i) {
    row = ensemble.row(i).transpose();
    out.mean(i) = row.mean();
    out.sd(i) = s > 1 ? std::sqrt((row.array() - out.mean(i)).square().sum() / static_cast<double>(s - 1)) : 0.0;
    out.median(i) = quantile_inplace(row, 0.5);
    out.lower(i) = quantile_inplace(row, tail);
    out.upper(i) = quantile_inplace(row, 1.0 - tail);
  }
  return out;
}

double coverage(const AgeSummary& summary, const Eigen::Ref<const Vector>& truth) {
  check_sizes(summary.median.size(), truth.size());
  Index hits = 0;
  for (Index i = 0; i < truth.size(); ++i)
    if (summary.lower(i) <= truth(i) && truth(i) <= summary.upper(i)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double coverage(const Eigen::Ref<const Matrix>& ensemble, const Eigen::Ref<const Vector>& truth, double level) {
  return coverage(summarize(ensemble, level), truth);
}

double mean_abs_error(const AgeSummary& summary, const Eigen::Ref<const Vector>& truth) {
  check_sizes(summary.median.size(), truth.size());
  return (summary.median - truth).cwiseAbs().mean();
}

double mean_abs_error(const Eigen::Ref<const Matrix>& ensemble, const Eigen::Ref<const Vector>& truth) {
  return mean_abs_error(summarize(ensemble), truth);
}

double mean_interval_width(const AgeSummary& summary) {
  if (summary.upper.size() == 0) throw DataError("empty age ensemble");
  return (summary.upper - summary.lower).mean();
}

double mean_interval_width(const Eigen::Ref<const Matrix>& ensemble, double level) {
  return mean_interval_width(summarize(ensemble, level));
}

Vector delta_t_sd(const AgeSummary& summary, const Eigen::Ref<const Vector>& truth) {
  check_sizes(summary.median.size(), truth.size());
  Vector out(truth.size());
  for (Index i = 0; i < truth.size(); ++i)
    out(i) = summary.sd(i) > 0.0 ? (summary.median(i) - truth(i)) / summary.sd(i)
                                 : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Vector delta_t_sd(const Eigen::Ref<const Matrix>& ensemble, const Eigen::Ref<const Vector>& truth) {
  return delta_t_sd(summarize(ensemble), truth);
}

ScoreCard score(const AgeSummary& summary, const Eigen::Ref<const Vector>& truth) {
  ScoreCard card;
  card.coverage = coverage(summary, truth);
  card.mean_abs_error = mean_abs_error(summary, truth);
  card.mean_interval_width = mean_interval_width(summary);
  card.delta_t_sd = delta_t_sd(summary, truth);
  double sum = 0.0;
  Index defined = 0;
  for (Index i = 0; i < card.delta_t_sd.size(); ++i) {
    if (std::isnan(card.delta_t_sd(i))) {
      ++card.undefined_delta_t;
      continue;
    }
    sum += std::abs(card.delta_t_sd(i));
    ++defined;
  }
  card.mean_abs_delta_t = defined ? sum / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
  return card;
}

}  // namespace warpsync
