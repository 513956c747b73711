#pragma once

#include "warpsync/io.hpp"
#include "warpsync/types.hpp"

#include <vector>

namespace warpsync {

/// Affine map sending the value `lower` to -1 and `upper` to +1.
struct RescaleMap {
  double lower = -1.0;
  double upper = 1.0;

  [[nodiscard]] double operator()(double x) const { return 2.0 * (x - lower) / (upper - lower) - 1.0; }
};

/// Empirical quantile with linear interpolation between order statistics (type 7).
double quantile(const Eigen::Ref<const Vector>& values, double q);

/// Same as quantile() but reorders `scratch` in place; O(n) via nth_element.
double quantile_inplace(Eigen::Ref<Vector> scratch, double q);

RescaleMap fit_rescale(const Eigen::Ref<const Vector>& values, double q_lower, double q_upper);

inline double apply_rescale(double x, const RescaleMap& map) { return map(x); }

/// Elementwise rescale; returns an expression, not a temporary.
template <typename Derived>
auto apply_rescale(const Eigen::ArrayBase<Derived>& x, const RescaleMap& map) {
  using Scalar = typename Derived::Scalar;
  const Scalar scale = Scalar(2) / Scalar(map.upper - map.lower);
  return (x - Scalar(map.lower)) * scale - Scalar(1);
}

ProxyRecord rescaled(const ProxyRecord& record, const RescaleMap& map);

/// Piecewise-linear interpolation of a record along its positions.
class LinearInterpolant {
 public:
  LinearInterpolant() = default;
  LinearInterpolant(Vector knots, Vector values);
  explicit LinearInterpolant(const ProxyRecord& record)
      : LinearInterpolant(record.positions, record.values) {}

  [[nodiscard]] double lower() const { return knots_(0); }
  [[nodiscard]] double upper() const { return knots_(knots_.size() - 1); }
  [[nodiscard]] bool contains(double x) const { return x >= lower() && x <= upper(); }
  [[nodiscard]] const Vector& knots() const { return knots_; }
  [[nodiscard]] const Vector& values() const { return values_; }

  /// Index i such that knots[i] <= x <= knots[i+1]; requires contains(x).
  [[nodiscard]] Index segment(double x) const;

  /// Interpolated value; throws DataError when x lies outside the knot range.
  [[nodiscard]] double operator()(double x) const;

  /// No range check; x must lie inside the knot range.
  [[nodiscard]] double eval_unchecked(double x) const;

 private:
  Vector knots_;
  Vector values_;
  // Uniform buckets over the knot range, each holding the segment at its left edge.
  std::vector<Index> bucket_start_;
  double bucket_scale_ = 0.0;
};

/// Target value at an arbitrary age. Throws DataError outside the target's age range.
double interp_target(const ProxyRecord& target, double age);

inline double mix_targets(double v1, double v2, double w) { return w * v1 + (1.0 - w) * v2; }

}  // namespace warpsync
