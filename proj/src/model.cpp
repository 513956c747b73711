#include "warpsync/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace warpsync {

void PriorSpec::validate(int sections) const {
  if (!(alpha_shape > 0.0)) throw ConfigError("prior alpha_shape must be positive");
  if (alpha_mean.size() != sections)
    throw ConfigError("prior alpha means: expected " + std::to_string(sections) + " values");
  if (!(alpha_mean.array() > 0.0).all() || !alpha_mean.allFinite())
    throw ConfigError("prior alpha means must be positive and finite");
  if (!(omega_a > 0.0 && omega_b > 0.0)) throw ConfigError("prior omega shapes must be positive");
  if (!(sigma_shape > 0.0 && sigma_mean > 0.0)) throw ConfigError("prior sigma shape and mean must be positive");
  if (!(mix_a > 0.0 && mix_b > 0.0)) throw ConfigError("prior mix shapes must be positive");
  if (!(t_lo < t_hi)) throw ConfigError("target age range is empty");
  if (!(tau0.sd > 0.0)) throw ConfigError("prior tau0_sd must be positive");
  if (!(tau0.mean > t_lo && tau0.mean < t_hi))
    throw ConfigError("prior tau0_mean must lie strictly inside the target age range [" +
                      format_number(t_lo) + ", " + format_number(t_hi) + "]");
  if (taun && !(taun->sd > 0.0)) throw ConfigError("prior taun_sd must be positive");
}

std::vector<std::string> ParameterLayout::names() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(size()));
  out.emplace_back("tau0");
  for (int j = 0; j < sections_; ++j) out.push_back("alpha" + std::to_string(j + 1));
  out.emplace_back("omega");
  if (has_sigma()) out.emplace_back("sigma");
  if (has_mix()) out.emplace_back("mix");
  return out;
}

Vector elicit_alpha_means(const std::optional<ProxyRecord>& age_model, const SectionGrid& grid, Mode mode,
                          std::pair<double, double> target_range) {
  const int k = grid.sections;
  if (!age_model) {
    if (mode == Mode::AgeToAge) return Vector::Ones(k);
    const double rate = (target_range.second - target_range.first) / (grid.end() - grid.c0);
    if (!(rate > 0.0)) throw DataError("target age range is empty; cannot set a default rate");
    return Vector::Constant(k, rate);
  }
  const auto& model = *age_model;
  for (Index i = 1; i < model.size(); ++i)
    if (!(model.values(i) > model.values(i - 1)))
      throw DataError("prior age model is not monotone (row " + std::to_string(i + 1) + ")");
  LinearInterpolant f(model.positions, model.values);
  if (!(f.lower() <= grid.c0 && f.upper() >= grid.end()))
    throw DataError("prior age model does not cover the input range");
  Vector means(k);
  for (int j = 0; j < k; ++j) means(j) = (f.eval_unchecked(grid.knot(j + 1)) - f.eval_unchecked(grid.knot(j))) / grid.delta;
  return means;
}

ProxyRecord median_age_model(const TargetEnsemble& ensemble) {
  ProxyRecord model;
  model.positions = ensemble.positions;
  model.values.resize(ensemble.size());
  model.scale = ScaleKind::Depth;
  for (Index i = 0; i < ensemble.size(); ++i) model.values(i) = quantile(ensemble.draws.row(i).transpose(), 0.5);
  return model;
}

MixedTarget make_mixed_target(const ProxyRecord& t1, const ProxyRecord& t2, double q_lower, double q_upper) {
  const double lo = std::max(t1.front(), t2.front());
  const double hi = std::min(t1.back(), t2.back());
  if (!(hi > lo)) throw DataError("the two targets do not overlap in age");
  LinearInterpolant f1(t1), f2(t2);
  std::vector<double> ages;
  ages.push_back(lo);
  for (Index i = 0; i < t1.size(); ++i)
    if (t1.positions(i) > lo && t1.positions(i) < hi) ages.push_back(t1.positions(i));
  ages.push_back(hi);
  MixedTarget out;
  out.q_lower = q_lower;
  out.q_upper = q_upper;
  out.ages = Eigen::Map<Vector>(ages.data(), static_cast<Index>(ages.size()));
  out.v1.resize(out.ages.size());
  out.v2.resize(out.ages.size());
  for (Index i = 0; i < out.ages.size(); ++i) {
    out.v1(i) = f1.eval_unchecked(out.ages(i));
    out.v2(i) = f2.eval_unchecked(out.ages(i));
  }
  if (out.ages.size() < 4) throw DataError("target overlap holds fewer than 4 ages");
  return out;
}

RescaleMap mixed_rescale(const MixedTarget& target, double w) {
  Vector mixed = w * target.v1 + (1.0 - w) * target.v2;
  RescaleMap map{quantile_inplace(mixed, target.q_lower), quantile_inplace(mixed, target.q_upper)};
  return map;
}

Posterior::Posterior(Data data, PriorSpec prior, TShape shape, Strategy strategy)
    : data_(std::move(data)), prior_(std::move(prior)), shape_(shape), layout_(strategy, data_.grid.sections) {
  prior_.validate(layout_.sections());
  if (data_.positions.size() != data_.u.size()) throw DataError("input positions and values differ in length");
  const bool ok = std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SingleTarget>) return strategy == Strategy::Single;
        if constexpr (std::is_same_v<T, MixedTarget>) return strategy == Strategy::Double;
        if constexpr (std::is_same_v<T, EnsembleTarget>) return strategy == Strategy::UQ;
      },
      data_.target);
  if (!ok) throw ConfigError("target model does not match the strategy");
  precompute();
}

void Posterior::precompute() {
  if (const auto* mixed = std::get_if<MixedTarget>(&data_.target)) {
    if (mixed->ages.size() < 2 || mixed->v1.size() != mixed->ages.size() || mixed->v2.size() != mixed->ages.size())
      throw DataError("mixed target needs matching ages and values");
    mixed_locator_ = LinearInterpolant(mixed->ages, mixed->v1);
  }
  const SectionGrid& g = data_.grid;
  const Index n = data_.positions.size();
  section_.resize(static_cast<std::size_t>(n));
  offset_.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double x = data_.positions(i);
    if (!(x >= g.c0 && x <= g.end())) throw DataError("input position outside the section grid");
    section_[static_cast<std::size_t>(i)] = g.section_of(x);
    offset_(i) = x - g.knot(g.section_of(x));
  }
  const double shape = prior_.alpha_shape;
  alpha_rate_ = shape / prior_.alpha_mean.array();
  alpha_const_ = (shape * alpha_rate_.array().log()).sum() - static_cast<double>(layout_.sections()) * std::lgamma(shape);
  omega_const_ = std::lgamma(prior_.omega_a + prior_.omega_b) - std::lgamma(prior_.omega_a) - std::lgamma(prior_.omega_b);
  mix_const_ = std::lgamma(prior_.mix_a + prior_.mix_b) - std::lgamma(prior_.mix_a) - std::lgamma(prior_.mix_b);
  const double srate = prior_.sigma_shape / prior_.sigma_mean;
  sigma_const_ = prior_.sigma_shape * std::log(srate) - std::lgamma(prior_.sigma_shape);
  const double sd = prior_.tau0.sd;
  tau0_const_ = -std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi) -
                log_normal_mass((prior_.t_lo - prior_.tau0.mean) / sd, (prior_.t_hi - prior_.tau0.mean) / sd);
  t_const_ = std::lgamma(shape_.a + 0.5) - std::lgamma(shape_.a) - 0.5 * std::log(2.0 * std::numbers::pi) +
             shape_.a * std::log(shape_.b);
}

namespace {

// Sum of log(x_i) for positive x_i, taking one log per block of four products.
template <typename F>
double sum_logs(Index n, F&& term) {
  double total = 0.0;
  Index i = 0;
  for (; i + 4 <= n; i += 4) {
    const double p = term(i) * term(i + 1) * term(i + 2) * term(i + 3);
    if (p > 1e-280 && p < 1e280) {
      total += std::log(p);
    } else {
      for (Index k = i; k < i + 4; ++k) total += std::log(term(k));
    }
  }
  for (; i < n; ++i) total += std::log(term(i));
  return total;
}

}  // namespace

double Posterior::fast_log_likelihood(const Vector& age, const Eigen::Ref<const Vector>& theta) const {
  const Index n = age.size();
  return std::visit(
      [&](const auto& t) -> double {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, EnsembleTarget>) {
          double ll = 0.0;
          for (Index i = 0; i < n; ++i) ll += t.table.log_density(data_.u(i), age(i));
          return ll;
        } else {
          const double sigma = theta(layout_.sigma());
          const double half_inv_s2 = 0.5 / (sigma * sigma);
          const double b = shape_.b;
          double logs = 0.0;
          if constexpr (std::is_same_v<T, SingleTarget>) {
            logs = sum_logs(n, [&](Index i) {
              const double r = data_.u(i) - t.target.eval_unchecked(age(i));
              return b + half_inv_s2 * r * r;
            });
          } else {
            const double w = theta(layout_.mix());
            const RescaleMap map = mixed_rescale(t, w);
            logs = sum_logs(n, [&](Index i) {
              const Index s = mixed_locator_.segment(age(i));
              const double f = std::clamp((age(i) - t.ages(s)) / (t.ages(s + 1) - t.ages(s)), 0.0, 1.0);
              const double v1 = t.v1(s) + f * (t.v1(s + 1) - t.v1(s));
              const double v2 = t.v2(s) + f * (t.v2(s + 1) - t.v2(s));
              const double r = data_.u(i) - map(mix_targets(v1, v2, w));
              return b + half_inv_s2 * r * r;
            });
          }
          return static_cast<double>(n) * (t_const_ - std::log(sigma)) - (shape_.a + 0.5) * logs;
        }
      },
      data_.target);
}

Vector Posterior::rates(const Eigen::Ref<const Vector>& theta) const {
  return rates_from_increments(theta.segment(ParameterLayout::alpha(0), layout_.sections()),
                               theta(layout_.omega()));
}

bool Posterior::in_support(const Eigen::Ref<const Vector>& theta) const {
  if (theta.size() != layout_.size() || !theta.allFinite()) return false;
  const double omega = theta(layout_.omega());
  if (!(omega >= 0.0 && omega <= 1.0)) return false;
  if (!(theta.segment(ParameterLayout::alpha(0), layout_.sections()).array() > 0.0).all()) return false;
  if (layout_.has_sigma() && !(theta(layout_.sigma()) > 0.0)) return false;
  if (layout_.has_mix() && !(theta(layout_.mix()) >= 0.0 && theta(layout_.mix()) <= 1.0)) return false;
  return warpsync::in_support(theta(ParameterLayout::tau0()), rates(theta), data_.grid, data_.target_range,
                              data_.mode);
}

Vector Posterior::ages(const Eigen::Ref<const Vector>& theta) const {
  return tau_all(data_.positions, theta(ParameterLayout::tau0()), rates(theta), data_.grid);
}

double Posterior::log_prior(const Eigen::Ref<const Vector>& theta) const {
  double lp = log_prior_only(theta, prior_, layout_);
  if (prior_.taun && std::isfinite(lp))
    lp += log_prior_taun(tau_end(theta(ParameterLayout::tau0()), rates(theta), data_.grid), prior_.taun,
                         prior_.t_lo, prior_.t_hi);
  return lp;
}

double log_prior_only(const Eigen::Ref<const Vector>& theta, const PriorSpec& prior, const ParameterLayout& layout) {
  double lp = log_prior_tau0(theta(ParameterLayout::tau0()), prior.tau0.mean, prior.tau0.sd, prior.t_lo, prior.t_hi);
  for (int j = 0; j < layout.sections(); ++j)
    lp += log_prior_alpha(theta(ParameterLayout::alpha(j)), prior.alpha_shape, prior.alpha_mean(j));
  lp += log_prior_omega(theta(layout.omega()), prior.omega_a, prior.omega_b);
  if (layout.has_sigma()) lp += log_prior_sigma(theta(layout.sigma()), prior.sigma_shape, prior.sigma_mean);
  if (layout.has_mix()) lp += log_prior_mix(theta(layout.mix()), prior.mix_a, prior.mix_b);
  return lp;
}

Vector Posterior::log_likelihood_terms(const Eigen::Ref<const Vector>& theta) const {
  const Vector age = ages(theta);
  Vector terms(age.size());
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SingleTarget>) {
          const double sigma = theta(layout_.sigma());
          for (Index i = 0; i < age.size(); ++i)
            terms(i) = loglik_t(data_.u(i), t.target.eval_unchecked(age(i)), sigma, shape_);
        } else if constexpr (std::is_same_v<T, MixedTarget>) {
          const double sigma = theta(layout_.sigma());
          const double w = theta(layout_.mix());
          const RescaleMap map = mixed_rescale(t, w);
          const double* knots = t.ages.data();
          const Index last = t.ages.size() - 2;
          for (Index i = 0; i < age.size(); ++i) {
            const auto s = std::clamp<Index>(
                static_cast<Index>(std::upper_bound(knots, knots + t.ages.size(), age(i)) - knots) - 1, 0, last);
            const double f = std::clamp((age(i) - t.ages(s)) / (t.ages(s + 1) - t.ages(s)), 0.0, 1.0);
            const double v1 = t.v1(s) + f * (t.v1(s + 1) - t.v1(s));
            const double v2 = t.v2(s) + f * (t.v2(s + 1) - t.v2(s));
            terms(i) = loglik_t(data_.u(i), map(mix_targets(v1, v2, w)), sigma, shape_);
          }
        } else {
          for (Index i = 0; i < age.size(); ++i) terms(i) = loglik_kde(data_.u(i), age(i), t.table);
        }
      },
      data_.target);
  return terms;
}

double Posterior::log_likelihood(const Eigen::Ref<const Vector>& theta) const {
  return log_likelihood_terms(theta).sum();
}

double Posterior::log_posterior(const Eigen::Ref<const Vector>& theta) const {
  const int k = layout_.sections();
  if (theta.size() != layout_.size() || !theta.allFinite()) return kNegInf<double>;
  const double tau0 = theta(ParameterLayout::tau0());
  const double omega = theta(layout_.omega());
  // Open intervals: the Beta priors vanish at 0 and 1.
  if (!(omega > 0.0 && omega < 1.0)) return kNegInf<double>;
  const auto alpha = theta.segment(ParameterLayout::alpha(0), k);
  if (!(alpha.array() > 0.0).all()) return kNegInf<double>;
  if (layout_.has_sigma() && !(theta(layout_.sigma()) > 0.0)) return kNegInf<double>;
  if (layout_.has_mix() && !(theta(layout_.mix()) > 0.0 && theta(layout_.mix()) < 1.0)) return kNegInf<double>;

  const Vector m = rates_from_increments(alpha, omega);
  const auto [lo, hi] = data_.target_range;
  if (!warpsync::in_support(tau0, m, data_.grid, data_.target_range, data_.mode)) return kNegInf<double>;

  const double z = (tau0 - prior_.tau0.mean) / prior_.tau0.sd;
  double lp = tau0_const_ - 0.5 * z * z;
  const double shape = prior_.alpha_shape;
  lp += alpha_const_ + (shape - 1.0) * sum_logs(k, [&](Index j) { return alpha(j); }) -
        alpha_rate_.dot(alpha);
  lp += omega_const_ + (prior_.omega_a - 1.0) * std::log(omega) + (prior_.omega_b - 1.0) * std::log1p(-omega);
  if (layout_.has_sigma()) {
    const double s = theta(layout_.sigma());
    lp += sigma_const_ + (prior_.sigma_shape - 1.0) * std::log(s) - (prior_.sigma_shape / prior_.sigma_mean) * s;
  }
  if (layout_.has_mix()) {
    const double w = theta(layout_.mix());
    lp += mix_const_ + (prior_.mix_a - 1.0) * std::log(w) + (prior_.mix_b - 1.0) * std::log1p(-w);
  }
  if (prior_.taun) lp += log_prior_taun(tau_end(tau0, m, data_.grid), prior_.taun, prior_.t_lo, prior_.t_hi);
  if (!std::isfinite(lp)) return kNegInf<double>;

  const SectionGrid& g = data_.grid;
  Vector knot_age(k + 1);
  knot_age(0) = tau0;
  for (int j = 0; j < k; ++j) knot_age(j + 1) = knot_age(j) + m(j) * g.delta;
  const Index n = data_.positions.size();
  Vector age(n);
  for (Index i = 0; i < n; ++i) {
    const int s = section_[static_cast<std::size_t>(i)];
    age(i) = knot_age(s) + m(s) * offset_(i);
    if (!(age(i) >= lo && age(i) <= hi)) return kNegInf<double>;
  }
  const double ll = fast_log_likelihood(age, theta);
  if (std::isnan(ll)) return kNegInf<double>;
  return lp + ll;
}

namespace {

double draw_truncated_normal(double mean, double sd, double lo, double hi, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(mean, sd);
  for (int i = 0; i < 1000; ++i) {
    const double x = normal(rng);
    if (x >= lo && x <= hi) return x;
  }
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double draw_beta(double a, double b, std::mt19937_64& rng) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

}  // namespace

Vector Posterior::sample_prior(std::mt19937_64& rng) const {
  Vector theta(layout_.size());
  theta(ParameterLayout::tau0()) = draw_truncated_normal(prior_.tau0.mean, prior_.tau0.sd, prior_.t_lo, prior_.t_hi, rng);
  for (int j = 0; j < layout_.sections(); ++j) {
    const double mean = prior_.alpha_mean(j);
    if (data_.mode == Mode::AgeToAge)
      theta(ParameterLayout::alpha(j)) = mean * std::uniform_real_distribution<double>(0.9, 1.1)(rng);
    else
      theta(ParameterLayout::alpha(j)) = std::gamma_distribution<double>(prior_.alpha_shape, mean / prior_.alpha_shape)(rng);
  }
  theta(layout_.omega()) = draw_beta(prior_.omega_a, prior_.omega_b, rng);
  if (layout_.has_sigma())
    theta(layout_.sigma()) = std::gamma_distribution<double>(prior_.sigma_shape, prior_.sigma_mean / prior_.sigma_shape)(rng);
  if (layout_.has_mix()) theta(layout_.mix()) = draw_beta(prior_.mix_a, prior_.mix_b, rng);
  return theta;
}

}  // namespace warpsync
