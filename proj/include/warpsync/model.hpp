#pragma once

#include "warpsync/densities.hpp"
#include "warpsync/io.hpp"
#include "warpsync/kde.hpp"
#include "warpsync/preprocess.hpp"
#include "warpsync/warp.hpp"

#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace warpsync {

/// Shape parameters of the alignment t-likelihood.
struct TShape {
  double a = 3.0;
  double b = 4.0;
};

struct TruncNormalPrior {
  double mean = 0.0;
  double sd = 1.0;
};

struct PriorSpec {
  double alpha_shape = 1.5;
  Vector alpha_mean;  ///< one mean per section
  double omega_a = 5.0, omega_b = 5.0;
  TruncNormalPrior tau0;
  double sigma_shape = 1.5, sigma_mean = 0.01;
  double mix_a = 1.0, mix_b = 1.0;
  std::optional<TruncNormalPrior> taun;  ///< soft prior on the induced bottom age
  double t_lo = 0.0, t_hi = 1.0;          ///< target age range

  /// Throws ConfigError for non-positive shapes/scales or a tau0 mean outside the target range.
  void validate(int sections) const;
};

/// Flat parameter layout: [tau0, alpha_1..alpha_K, omega, (sigma), (mix)].
class ParameterLayout {
 public:
  ParameterLayout(Strategy strategy, int sections) : strategy_(strategy), sections_(sections) {}

  [[nodiscard]] int size() const {
    return sections_ + 2 + (has_sigma() ? 1 : 0) + (has_mix() ? 1 : 0);
  }
  [[nodiscard]] int sections() const { return sections_; }
  [[nodiscard]] Strategy strategy() const { return strategy_; }
  [[nodiscard]] bool has_sigma() const { return strategy_ != Strategy::UQ; }
  [[nodiscard]] bool has_mix() const { return strategy_ == Strategy::Double; }

  static constexpr int tau0() { return 0; }
  static constexpr int alpha(int j) { return 1 + j; }
  [[nodiscard]] int omega() const { return sections_ + 1; }
  [[nodiscard]] int sigma() const { return sections_ + 2; }
  [[nodiscard]] int mix() const { return sections_ + 2 + (has_sigma() ? 1 : 0); }

  [[nodiscard]] std::vector<std::string> names() const;

 private:
  Strategy strategy_;
  int sections_;
};

// Individual prior terms.
inline double log_prior_alpha(double alpha, double shape, double mean) {
  return log_gamma_density(alpha, shape, mean);
}
inline double log_prior_omega(double omega, double a, double b) { return log_beta_density(omega, a, b); }
inline double log_prior_tau0(double tau0, double mean, double sd, double lo, double hi) {
  return log_truncated_normal(tau0, mean, sd, lo, hi);
}
inline double log_prior_sigma(double sigma, double shape, double mean) {
  return log_gamma_density(sigma, shape, mean);
}
inline double log_prior_mix(double w, double a, double b) { return log_beta_density(w, a, b); }
/// Zero when the prior is disabled.
inline double log_prior_taun(double induced, const std::optional<TruncNormalPrior>& prior, double lo,
                             double hi) {
  if (!prior) return 0.0;
  return log_truncated_normal(induced, prior->mean, prior->sd, lo, hi);
}

inline double loglik_t(double u, double v, double sigma, const TShape& shape) {
  return log_scaled_t(u, v, sigma, shape.a, shape.b);
}
inline double loglik_double(double u, double v1, double v2, double w, double sigma, const TShape& shape) {
  return loglik_t(u, mix_targets(v1, v2, w), sigma, shape);
}

/// Prior means of the increments per section. With an age model (position -> age on the input
/// scale) each section gets the model's mean slope across it; otherwise AgeDepth uses the global
/// rate (t_hi - t_lo) / (cK - c0) and AgeToAge uses 1.
Vector elicit_alpha_means(const std::optional<ProxyRecord>& age_model, const SectionGrid& grid, Mode mode,
                          std::pair<double, double> target_range);

/// Median age per position, turning an ensemble into a point age model.
ProxyRecord median_age_model(const TargetEnsemble& ensemble);

/// Single target: rescaled proxy on its age grid.
struct SingleTarget {
  LinearInterpolant target;
};

/// Two raw targets on a shared age grid; the mixture is rescaled for every mixing weight.
struct MixedTarget {
  Vector ages;
  Vector v1, v2;
  double q_lower = 0.05, q_upper = 0.95;
};

struct EnsembleTarget {
  KdeTable table;
};

using TargetModel = std::variant<SingleTarget, MixedTarget, EnsembleTarget>;

/// Builds a MixedTarget from two raw targets on the first target's ages inside the overlap.
MixedTarget make_mixed_target(const ProxyRecord& t1, const ProxyRecord& t2, double q_lower, double q_upper);

/// Rescale map of the mixture w*v1 + (1-w)*v2 over the shared grid.
RescaleMap mixed_rescale(const MixedTarget& target, double w);

/// Log posterior over the flat parameter vector. Immutable after construction; evaluations
/// are thread-safe.
class Posterior {
 public:
  struct Data {
    Vector positions;  ///< input positions
    Vector u;          ///< rescaled input proxy
    SectionGrid grid;
    Mode mode = Mode::AgeDepth;
    TargetModel target;
    std::pair<double, double> target_range;
  };

  Posterior(Data data, PriorSpec prior, TShape shape, Strategy strategy);

  [[nodiscard]] const ParameterLayout& layout() const { return layout_; }
  [[nodiscard]] const PriorSpec& prior() const { return prior_; }
  [[nodiscard]] const Data& data() const { return data_; }
  [[nodiscard]] const TShape& shape() const { return shape_; }

  [[nodiscard]] Vector rates(const Eigen::Ref<const Vector>& theta) const;
  [[nodiscard]] bool in_support(const Eigen::Ref<const Vector>& theta) const;
  /// Ages of the input positions under theta.
  [[nodiscard]] Vector ages(const Eigen::Ref<const Vector>& theta) const;

  [[nodiscard]] double log_prior(const Eigen::Ref<const Vector>& theta) const;
  /// Log likelihood; requires in_support(theta).
  [[nodiscard]] double log_likelihood(const Eigen::Ref<const Vector>& theta) const;
  /// Per-observation log likelihood terms; requires in_support(theta).
  [[nodiscard]] Vector log_likelihood_terms(const Eigen::Ref<const Vector>& theta) const;
  /// -inf outside the support. Equals log_prior + log_likelihood, evaluated in one pass with
  /// the normalising constants hoisted.
  [[nodiscard]] double log_posterior(const Eigen::Ref<const Vector>& theta) const;
  [[nodiscard]] double energy(const Eigen::Ref<const Vector>& theta) const { return -log_posterior(theta); }

  /// Draws a parameter vector from the independent priors (AgeToAge increments near 1).
  [[nodiscard]] Vector sample_prior(std::mt19937_64& rng) const;

 private:
  void precompute();
  double fast_log_likelihood(const Vector& age, const Eigen::Ref<const Vector>& theta) const;

  Data data_;
  PriorSpec prior_;
  TShape shape_;
  ParameterLayout layout_;

  LinearInterpolant mixed_locator_;  // segment lookup on the shared grid of a MixedTarget
  std::vector<int> section_;  // grid section of each input position
  Vector offset_;             // position minus the section's upper-left knot
  Vector alpha_rate_;
  double alpha_const_ = 0.0, omega_const_ = 0.0, sigma_const_ = 0.0, mix_const_ = 0.0, tau0_const_ = 0.0;
  double t_const_ = 0.0;
};

/// Sum of the independent prior terms of the layout, ignoring the warp support; used to check
/// the sampler against a known target.
double log_prior_only(const Eigen::Ref<const Vector>& theta, const PriorSpec& prior, const ParameterLayout& layout);

}  // namespace warpsync
