#pragma once

#include "warpsync/types.hpp"

namespace warpsync {

/// Pointwise posterior summary of an age ensemble (positions x samples).
struct AgeSummary {
  Vector median, lower, upper, mean, sd;
};

/// Equal-tailed interval at `level` plus median, mean and sample sd per row.
AgeSummary summarize(const Eigen::Ref<const Matrix>& ensemble, double level = 0.95);

/// Fraction of positions whose equal-tailed interval contains the true age.
double coverage(const Eigen::Ref<const Matrix>& ensemble, const Eigen::Ref<const Vector>& truth, double level = 0.95);
double coverage(const AgeSummary& summary, const Eigen::Ref<const Vector>& truth);

/// Mean of |median - truth|.
double mean_abs_error(const Eigen::Ref<const Matrix>& ensemble, const Eigen::Ref<const Vector>& truth);
double mean_abs_error(const AgeSummary& summary, const Eigen::Ref<const Vector>& truth);

/// Mean of upper - lower.
double mean_interval_width(const Eigen::Ref<const Matrix>& ensemble, double level = 0.95);
double mean_interval_width(const AgeSummary& summary);

/// (median - truth) / sd per position; NaN where the sd is zero.
Vector delta_t_sd(const Eigen::Ref<const Matrix>& ensemble, const Eigen::Ref<const Vector>& truth);
Vector delta_t_sd(const AgeSummary& summary, const Eigen::Ref<const Vector>& truth);

struct ScoreCard {
  double coverage = 0.0;
  double mean_abs_error = 0.0;
  double mean_interval_width = 0.0;
  Vector delta_t_sd;
  double mean_abs_delta_t = 0.0;  ///< mean |delta_t| over defined positions
  Index undefined_delta_t = 0;
};

ScoreCard score(const AgeSummary& summary, const Eigen::Ref<const Vector>& truth);

}  // namespace warpsync
