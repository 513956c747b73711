#pragma once

// Normalised log densities used by the priors and likelihoods. Out-of-support arguments give
// -infinity rather than throwing; the sampler treats that as rejection.

#include <cmath>
#include <limits>
#include <numbers>

namespace warpsync {

template <typename T>
inline constexpr T kNegInf = -std::numeric_limits<T>::infinity();

/// log Phi(z), accurate in the lower tail.
template <typename T>
T log_normal_cdf(T z) {
  using std::erfc;
  using std::log;
  if (z < T(-30)) {
    // erfc underflows here; use the Mills-ratio expansion.
    const T z2 = z * z;
    T series = T(1) - T(1) / z2 + T(3) / (z2 * z2) - T(15) / (z2 * z2 * z2);
    return -T(0.5) * z2 - log(-z) - T(0.5) * std::log(T(2) * std::numbers::pi_v<T>) + log(series);
  }
  return log(T(0.5) * erfc(-z / std::numbers::sqrt2_v<T>));
}

/// log(Phi(b) - Phi(a)) for a < b.
template <typename T>
T log_normal_mass(T a, T b) {
  using std::log;
  using std::erfc;
  if (a > T(0)) return log_normal_mass(-b, -a);
  const T pa = T(0.5) * erfc(-a / std::numbers::sqrt2_v<T>);
  const T pb = T(0.5) * erfc(-b / std::numbers::sqrt2_v<T>);
  if (pb - pa > T(1e-300)) return log(pb - pa);
  // Both deep in the lower tail.
  const T la = log_normal_cdf(a), lb = log_normal_cdf(b);
  return lb + std::log1p(-std::exp(la - lb));
}

/// Gamma(shape, rate = shape / mean) evaluated at x.
template <typename T>
T log_gamma_density(T x, T shape, T mean) {
  using std::log;
  if (!(x > T(0)) || !(shape > T(0)) || !(mean > T(0))) return kNegInf<T>;
  const T rate = shape / mean;
  return shape * log(rate) - std::lgamma(shape) + (shape - T(1)) * log(x) - rate * x;
}

template <typename T>
T log_beta_density(T x, T a, T b) {
  using std::log;
  if (!(x > T(0) && x < T(1)) || !(a > T(0)) || !(b > T(0))) return kNegInf<T>;
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - T(1)) * log(x) +
         (b - T(1)) * std::log1p(-x);
}

/// Normal(mean, sd^2) renormalised over [lo, hi].
template <typename T>
T log_truncated_normal(T x, T mean, T sd, T lo, T hi) {
  if (!(x >= lo && x <= hi) || !(sd > T(0)) || !(lo < hi)) return kNegInf<T>;
  const T z = (x - mean) / sd;
  return -T(0.5) * z * z - std::log(sd) - T(0.5) * std::log(T(2) * std::numbers::pi_v<T>) -
         log_normal_mass((lo - mean) / sd, (hi - mean) / sd);
}

/// Scaled t density with shapes (a, b), location v and scale sigma:
///   f(u) = Gamma(a+1/2) / (Gamma(a) sigma sqrt(2 pi)) * b^a * (b + (u-v)^2 / (2 sigma^2))^-(a+1/2)
template <typename T>
T log_scaled_t(T u, T v, T sigma, T a, T b) {
  using std::log;
  if (!(sigma > T(0))) return kNegInf<T>;
  const T r = (u - v) / sigma;
  return std::lgamma(a + T(0.5)) - std::lgamma(a) - log(sigma) -
         T(0.5) * std::log(T(2) * std::numbers::pi_v<T>) + a * log(b) -
         (a + T(0.5)) * log(b + T(0.5) * r * r);
}

}  // namespace warpsync
