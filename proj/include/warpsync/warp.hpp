#pragma once

// Monotone piecewise-linear link between the input scale and the target age scale.
//
// The input range [c0, cK] is cut into K equal sections of length delta. Section j carries a
// rate m_j (yr/cm for depth inputs, a dimensionless stretch for age inputs), and
//   tau(x) = tau0 + delta * (m_1 + ... + m_j) + m_{j+1} * (x - c_j)   for c_j <= x < c_{j+1}.
// Rates come from positive increments alpha through a backward memory recursion
//   m_K = alpha_K,   m_j = omega * m_{j+1} + (1 - omega) * alpha_j.

#include "warpsync/types.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace warpsync {

struct SectionGrid {
  double c0 = 0.0;
  double delta = 1.0;
  int sections = 1;

  [[nodiscard]] double knot(int i) const { return i == sections ? end_ : c0 + i * delta; }
  [[nodiscard]] double end() const { return end_; }

  /// Section holding x, with x == end() assigned to the last section.
  [[nodiscard]] int section_of(double x) const {
    const auto j = static_cast<int>(std::floor((x - c0) / delta));
    return std::clamp(j, 0, sections - 1);
  }

  double end_ = 1.0;
};

/// Equal sections spanning [min(positions), max(positions)]; the last knot equals the max exactly.
inline SectionGrid make_grid(double lo, double hi, int sections) {
  if (sections < 2) throw ConfigError("section count K must be at least 2");
  if (!(hi > lo)) throw DataError("input positions must span a positive range");
  SectionGrid grid;
  grid.c0 = lo;
  grid.sections = sections;
  grid.delta = (hi - lo) / sections;
  grid.end_ = hi;
  return grid;
}

inline SectionGrid make_grid(const Eigen::Ref<const Vector>& positions, int sections) {
  if (positions.size() == 0) throw DataError("cannot build a section grid from no positions");
  return make_grid(positions.minCoeff(), positions.maxCoeff(), sections);
}

/// Backward memory recursion from increments to rates, anchored at m_K = alpha_K.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> rates_from_increments(
    const Eigen::MatrixBase<Derived>& alpha, typename Derived::Scalar omega) {
  using Scalar = typename Derived::Scalar;
  const Index k = alpha.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m(k);
  if (k == 0) return m;
  m(k - 1) = alpha(k - 1);
  for (Index j = k - 2; j >= 0; --j) m(j) = omega * m(j + 1) + (Scalar(1) - omega) * alpha(j);
  return m;
}

/// Age at position x. Throws DataError when x lies outside the grid.
template <typename Scalar, typename Derived>
Scalar tau_at(Scalar x, Scalar tau0, const Eigen::MatrixBase<Derived>& m, const SectionGrid& grid) {
  if (m.size() != grid.sections) throw DataError("rate vector length differs from section count");
  if (!(x >= grid.c0 && x <= grid.end()))
    throw DataError("position outside the section grid");
  const int j = grid.section_of(x);
  Scalar cum = 0;
  for (int i = 0; i < j; ++i) cum += m(i);
  return tau0 + cum * grid.delta + m(j) * (x - grid.knot(j));
}

/// Ages at every position (any order), each inside the grid. O(N + K).
template <typename DerivedX, typename DerivedM>
Eigen::Matrix<typename DerivedM::Scalar, Eigen::Dynamic, 1> tau_all(
    const Eigen::MatrixBase<DerivedX>& positions, typename DerivedM::Scalar tau0,
    const Eigen::MatrixBase<DerivedM>& m, const SectionGrid& grid) {
  using Scalar = typename DerivedM::Scalar;
  if (m.size() != grid.sections) throw DataError("rate vector length differs from section count");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> knot_age(grid.sections + 1);
  knot_age(0) = tau0;
  for (int i = 0; i < grid.sections; ++i) knot_age(i + 1) = knot_age(i) + m(i) * grid.delta;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ages(positions.size());
  for (Index i = 0; i < positions.size(); ++i) {
    const double x = positions(i);
    if (!(x >= grid.c0 && x <= grid.end())) throw DataError("position outside the section grid");
    const int j = grid.section_of(x);
    ages(i) = knot_age(j) + m(j) * (x - grid.knot(j));
  }
  return ages;
}

/// Age of the deepest knot, tau(c_K).
template <typename Derived>
typename Derived::Scalar tau_end(typename Derived::Scalar tau0, const Eigen::MatrixBase<Derived>& m,
                                 const SectionGrid& grid) {
  return tau0 + m.sum() * grid.delta;
}

/// Smallest and largest admissible stretch in AgeToAge mode (open interval).
inline constexpr double kMinStretch = 0.25;
inline constexpr double kMaxStretch = 4.0;

/// True when the warp keeps every input position inside the target age range and its rates are
/// admissible for the mode.
template <typename Derived>
bool in_support(double tau0, const Eigen::MatrixBase<Derived>& m, const SectionGrid& grid,
                std::pair<double, double> target_range, Mode mode) {
  const auto [lo, hi] = target_range;
  if (!(tau0 >= lo && tau0 <= hi)) return false;
  for (Index j = 0; j < m.size(); ++j) {
    if (!(m(j) > 0.0)) return false;
    if (mode == Mode::AgeToAge && !(m(j) > kMinStretch && m(j) < kMaxStretch)) return false;
  }
  return tau_end(tau0, m, grid) <= hi;
}

/// Position mapped to `age` by the warp, by bisection on the monotone map.
template <typename Derived>
double tau_inverse(double age, double tau0, const Eigen::MatrixBase<Derived>& m, const SectionGrid& grid,
                   double tolerance = 1e-14) {
  double lo = grid.c0, hi = grid.end();
  const double a_lo = tau_at(lo, tau0, m, grid), a_hi = tau_at(hi, tau0, m, grid);
  if (!(age >= a_lo && age <= a_hi)) throw DataError("age outside the warped range");
  for (int it = 0; it < 200 && hi - lo > tolerance * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tau_at(mid, tau0, m, grid) < age)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace warpsync
