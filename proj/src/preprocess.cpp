#include "warpsync/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace warpsync {

double quantile_inplace(Eigen::Ref<Vector> scratch, double q) {
  const Index n = scratch.size();
  if (n == 0) throw DataError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile level must lie in [0, 1]");
  const double h = (static_cast<double>(n) - 1.0) * q;
  const auto lo = static_cast<Index>(std::floor(h));
  const Index hi = std::min(lo + 1, n - 1);
  double* begin = scratch.data();
  std::nth_element(begin, begin + lo, begin + n);
  const double x_lo = begin[lo];
  if (hi == lo) return x_lo;
  const double x_hi = *std::min_element(begin + lo + 1, begin + n);
  return x_lo + (h - static_cast<double>(lo)) * (x_hi - x_lo);
}

double quantile(const Eigen::Ref<const Vector>& values, double q) {
  Vector scratch = values;
  return quantile_inplace(scratch, q);
}

RescaleMap fit_rescale(const Eigen::Ref<const Vector>& values, double q_lower, double q_upper) {
  if (!(q_lower >= 0.0 && q_lower < q_upper && q_upper <= 1.0))
    throw ConfigError("rescale quantiles must satisfy 0 <= q_l < q_u <= 1");
  if (values.size() < 4) throw DataError("rescaling needs at least 4 values");
  if (!values.allFinite()) throw DataError("rescaling input contains non-finite values");
  Vector scratch = values;
  RescaleMap map{quantile_inplace(scratch, q_lower), quantile_inplace(scratch, q_upper)};
  if (!(map.lower < map.upper))
    throw DataError("degenerate rescale: lower and upper quantiles coincide");
  return map;
}

ProxyRecord rescaled(const ProxyRecord& record, const RescaleMap& map) {
  ProxyRecord out = record;
  out.values = apply_rescale(record.values.array(), map).matrix();
  return out;
}

LinearInterpolant::LinearInterpolant(Vector knots, Vector values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() < 2 || knots_.size() != values_.size())
    throw DataError("interpolant needs at least two matching knots and values");
  const Index segments = knots_.size() - 1;
  const double span = upper() - lower();
  if (!(span > 0.0)) return;
  const Index buckets = 2 * segments;
  bucket_scale_ = static_cast<double>(buckets) / span;
  bucket_start_.resize(static_cast<std::size_t>(buckets));
  const double* begin = knots_.data();
  const double* end = begin + knots_.size();
  for (Index b = 0; b < buckets; ++b) {
    const double edge = lower() + static_cast<double>(b) / bucket_scale_;
    const auto i = static_cast<Index>(std::upper_bound(begin, end, edge) - begin) - 1;
    bucket_start_[static_cast<std::size_t>(b)] = std::clamp<Index>(i, 0, segments - 1);
  }
}

Index LinearInterpolant::segment(double x) const {
  const Index last = knots_.size() - 2;
  if (bucket_start_.empty() || !(x >= lower() && x <= upper())) {
    const double* begin = knots_.data();
    const double* end = begin + knots_.size();
    const auto i = static_cast<Index>(std::upper_bound(begin, end, x) - begin) - 1;
    return std::clamp<Index>(i, 0, last);
  }
  const auto b = std::min(static_cast<std::size_t>((x - lower()) * bucket_scale_), bucket_start_.size() - 1);
  Index i = bucket_start_[b];
  while (i > 0 && knots_(i) > x) --i;
  while (i < last && knots_(i + 1) <= x) ++i;
  return i;
}

double LinearInterpolant::eval_unchecked(double x) const {
  const Index i = segment(x);
  const double x0 = knots_(i), x1 = knots_(i + 1);
  const double t = (x - x0) / (x1 - x0);
  if (t == 0.0) return values_(i);
  if (t == 1.0) return values_(i + 1);
  return values_(i) + t * (values_(i + 1) - values_(i));
}

double LinearInterpolant::operator()(double x) const {
  if (!contains(x))
    throw DataError("age " + format_number(x) + " outside target range [" + format_number(lower()) +
                    ", " + format_number(upper()) + "]");
  return eval_unchecked(x);
}

double interp_target(const ProxyRecord& target, double age) {
  return LinearInterpolant(target.positions, target.values)(age);
}

}  // namespace warpsync
