#pragma once

#include "warpsync/io.hpp"
#include "warpsync/types.hpp"

#include <cstdint>
#include <utility>

namespace warpsync {

/// Known age-depth function with deposition time
///   dt(x) = (d / b) * x * (0.9 - cos(pi * x / b)) + a.
struct TrueChronology {
  double a = 20.0;    ///< surface deposition time, yr/cm
  double b = 250.0;   ///< half-cycle periodicity, cm
  double d = 12.0;    ///< amplitude
  double x_max = 1000.0;

  /// Throws ConfigError unless dt > 0 over [0, x_max] (dense scan) and b, x_max > 0.
  void validate() const;
};

double true_dt(double x, const TrueChronology& chron);

/// t(x), the integral of dt from 0 to x, by adaptive Simpson quadrature.
double true_t(double x, const TrueChronology& chron);

/// Closed-form antiderivative of dt with t(0) = 0, kept as a cross-check of the quadrature.
double true_t_closed_form(double x, const TrueChronology& chron);

struct PseudoTargetSpec {
  double span = 45000.0;  ///< ages run from 0 to span
  double step = 50.0;     ///< sampling interval, yr
};

/// Two age-indexed pseudo-targets built from distinct multi-scale sinusoids plus seeded AR(1)
/// noise; phases are redrawn until the sample correlation is below 0.3 in magnitude.
std::pair<ProxyRecord, ProxyRecord> make_pseudo_targets(std::uint64_t seed, const PseudoTargetSpec& spec = {});

struct SyntheticSpec {
  double weight = 0.7;           ///< share of target 1 in the mixed signal
  double noise_fraction = 0.05;  ///< delta: noise sd as a fraction of the smoother residual sd
  double c1 = 1.0, c2 = 0.0;
  Index points = 1000;           ///< uniformly spaced depths over [0, x_max]
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticRecord {
  ProxyRecord record;  ///< noisy, depth-indexed
  Vector true_ages;    ///< t(depth) per point
  Vector clean;        ///< noise-free warped mixture per point
  double residual_sd = 0.0;
};

/// Local-linear smoother with tricube weights over the nearest span * n points.
Vector local_linear_smooth(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y, double span);

/// Mixes the targets, warps them through t(x), samples at uniform depths and adds noise
/// N(c1 * p + c2, delta * sd_resid), where sd_resid is the residual sd of a span-0.25
/// local-linear smooth of the clean series.
SyntheticRecord make_synthetic_record(const std::pair<ProxyRecord, ProxyRecord>& targets, const SyntheticSpec& spec,
                                      const TrueChronology& chron = {});

/// Keeps ceil(fraction * n) points at uniform index spacing, including both ends.
ProxyRecord downsample(const ProxyRecord& record, double fraction);
/// Indices kept by downsample().
std::vector<Index> downsample_indices(Index n, double fraction);

/// Adds independent N(0, level * sd(values)) noise.
ProxyRecord add_noise(const ProxyRecord& record, double level, std::uint64_t seed);

struct EnsembleSpec {
  Index draws = 200;
  double spread = 0.1;     ///< log-sd of the multiplicative increment perturbation
  double memory = 0.9;     ///< AR(1) coefficient of the perturbation along the record
  double depth_step = 1.0; ///< pseudo-depth spacing of the target samples, cm
};

/// Recasts an age-indexed target as a depth record with monotone posterior age draws centred
/// on its true ages (multiplicative AR(1) perturbation of the age increments).
TargetEnsemble make_target_ensemble(const ProxyRecord& target, const EnsembleSpec& spec, std::uint64_t seed);

}  // namespace warpsync
