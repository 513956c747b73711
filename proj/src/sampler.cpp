#include "warpsync/sampler.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace warpsync {

namespace {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

bool all_differ(const Vector& a, const Vector& b) { return (a.array() != b.array()).all(); }

double max_masked_abs(const Vector& a, const Vector& b, const Mask& phi) {
  double m = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    if (phi(i)) m = std::max(m, std::abs(a(i) - b(i)));
  return m;
}

double masked_sq_norm(const Vector& a, const Vector& b, const Mask& phi) {
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    if (phi(i)) s += (a(i) - b(i)) * (a(i) - b(i));
  return s;
}

// -log density of a Gaussian proposal h ~ N(centre, sigma^2) on the masked coordinates.
double gaussian_proposal_energy(const Vector& h, const Vector& centre, double sigma, const Mask& phi, Index nphi) {
  const auto k = static_cast<double>(nphi);
  return 0.5 * k * std::log(2.0 * std::numbers::pi) + k * std::log(sigma) +
         0.5 * masked_sq_norm(h, centre, phi) / (sigma * sigma);
}

}  // namespace

TWalk::TWalk(EnergyFn energy, Index dim, TwalkConstants constants)
    : energy_(std::move(energy)), dim_(dim), c_(constants) {
  if (dim_ < 1) throw ConfigError("t-walk needs at least one dimension");
  p_phi_ = std::min(static_cast<double>(dim_), c_.expected_moved) / static_cast<double>(dim_);
}

double TWalk::uniform(Rng& rng) const {
  // 53 random bits in [0, 1).
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double TWalk::draw_beta(Rng& rng) const {
  const double at = c_.traverse_scale;
  const double u = uniform(rng);
  const double v = 1.0 - uniform(rng);  // (0, 1]
  if (u < (at - 1.0) / (2.0 * at)) return std::pow(v, 1.0 / (at + 1.0));
  return std::pow(v, 1.0 / (1.0 - at));
}

Mask TWalk::draw_subset(Rng& rng) const {
  Mask phi(dim_);
  for (Index i = 0; i < dim_; ++i) phi(i) = uniform(rng) < p_phi_;
  return phi;
}

StepInfo TWalk::step(ChainState& s, Rng& rng) const {
  StepInfo info;
  const double ker = uniform(rng);
  const double total = c_.p_traverse + c_.p_walk + c_.p_blow + c_.p_hop;
  const double k = ker * total;
  if (k < c_.p_traverse) info.kernel = Kernel::Traverse;
  else if (k < c_.p_traverse + c_.p_walk) info.kernel = Kernel::Walk;
  else if (k < c_.p_traverse + c_.p_walk + c_.p_blow) info.kernel = Kernel::Blow;
  else info.kernel = Kernel::Hop;

  // Move x (pivot x') or x' (pivot x) with equal probability.
  info.moved_x = uniform(rng) >= 0.5;
  Vector& moving = info.moved_x ? s.x : s.xp;
  const Vector& pivot = info.moved_x ? s.xp : s.x;
  double& moving_energy = info.moved_x ? s.energy_x : s.energy_xp;

  ++s.iteration;
  const Mask phi = draw_subset(rng);
  const Index nphi = phi.count();
  if (nphi == 0) return info;

  Vector proposal = moving;
  double log_ratio_extra = 0.0;
  switch (info.kernel) {
    case Kernel::Traverse: {
      const double beta = draw_beta(rng);
      for (Index i = 0; i < dim_; ++i)
        if (phi(i)) proposal(i) = pivot(i) + beta * (pivot(i) - moving(i));
      log_ratio_extra = (static_cast<double>(nphi) - 2.0) * std::log(beta);
      break;
    }
    case Kernel::Walk: {
      const double aw = c_.walk_scale;
      for (Index i = 0; i < dim_; ++i)
        if (phi(i)) {
          const double u = uniform(rng);
          const double z = (aw / (1.0 + aw)) * (aw * u * u + 2.0 * u - 1.0);
          proposal(i) = moving(i) + z * (moving(i) - pivot(i));
        }
      break;
    }
    case Kernel::Blow: {
      const double sigma = max_masked_abs(pivot, moving, phi);
      if (!(sigma > 0.0)) return info;
      std::normal_distribution<double> normal;
      for (Index i = 0; i < dim_; ++i)
        if (phi(i)) proposal(i) = pivot(i) + sigma * normal(rng);
      const double sigma_back = max_masked_abs(pivot, proposal, phi);
      const double w_forward = gaussian_proposal_energy(proposal, pivot, sigma, phi, nphi);
      const double w_back = gaussian_proposal_energy(moving, pivot, sigma_back, phi, nphi);
      log_ratio_extra = w_back - w_forward;
      break;
    }
    case Kernel::Hop: {
      const double sigma = max_masked_abs(pivot, moving, phi) / 3.0;
      if (!(sigma > 0.0)) return info;
      std::normal_distribution<double> normal;
      for (Index i = 0; i < dim_; ++i)
        if (phi(i)) proposal(i) = moving(i) + sigma * normal(rng);
      const double sigma_back = max_masked_abs(pivot, proposal, phi) / 3.0;
      const double w_forward = gaussian_proposal_energy(proposal, moving, sigma, phi, nphi);
      const double w_back = gaussian_proposal_energy(moving, proposal, sigma_back, phi, nphi);
      log_ratio_extra = w_back - w_forward;
      break;
    }
  }

  if (!all_differ(proposal, pivot)) return info;
  const double proposal_energy = energy_(proposal);
  if (!std::isfinite(proposal_energy)) return info;
  const double log_a = (moving_energy - proposal_energy) + log_ratio_extra;
  if (std::isnan(log_a)) return info;
  if (log_a >= 0.0 || std::log(uniform(rng)) < log_a) {
    moving = std::move(proposal);
    moving_energy = proposal_energy;
    info.accepted = true;
  }
  return info;
}

Chain run_mcmc(const EnergyFn& energy, std::pair<Vector, Vector> init, const McmcControls& controls, Rng& rng,
               const TwalkConstants& constants) {
  const Index n = init.first.size();
  if (init.second.size() != n) throw ConfigError("initial points differ in dimension");
  if (controls.samples < 1) throw ConfigError("mcmc samples must be at least 1");
  if (controls.thinning < 1) throw ConfigError("mcmc thinning must be at least 1");
  ChainState state{std::move(init.first), std::move(init.second), 0.0, 0.0, 0};
  state.energy_x = energy(state.x);
  state.energy_xp = energy(state.xp);
  if (!std::isfinite(state.energy_x) || !std::isfinite(state.energy_xp))
    throw RuntimeFailure("initial points must have finite energy");

  TWalk walk(energy, n, constants);
  Chain chain;
  chain.seed = controls.seed;
  chain.burn_in = controls.burn_in_for(n);
  chain.thin_interval = std::max<std::uint64_t>(1, controls.interval_for(n));
  chain.samples.resize(controls.samples, n);
  chain.log_objective.resize(controls.samples);

  for (std::uint64_t it = 0; it < chain.burn_in; ++it)
    if (walk.step(state, rng).accepted) ++chain.accepted;
  for (Index k = 0; k < controls.samples; ++k) {
    for (std::uint64_t it = 0; it < chain.thin_interval; ++it)
      if (walk.step(state, rng).accepted) ++chain.accepted;
    chain.samples.row(k) = state.x.transpose();
    chain.log_objective(k) = -state.energy_x;
  }
  chain.iterations = state.iteration;
  return chain;
}

std::pair<Vector, Vector> init_points(const std::function<Vector(Rng&)>& draw, const EnergyFn& energy, Rng& rng,
                                      int budget) {
  std::optional<Vector> first;
  for (int attempt = 0; attempt < budget; ++attempt) {
    Vector candidate = draw(rng);
    if (!std::isfinite(energy(candidate))) continue;
    if (!first) {
      first = std::move(candidate);
      continue;
    }
    if (all_differ(*first, candidate)) return {std::move(*first), std::move(candidate)};
  }
  throw RuntimeFailure("could not find two in-support starting points in " + std::to_string(budget) +
                       " prior draws; check the target age range and priors");
}

double iat(const Eigen::Ref<const Vector>& series, Index min_length) {
  const Index n = series.size();
  if (n < min_length)
    throw DataError("chain too short for IAT (" + std::to_string(n) + " values, need " +
                    std::to_string(min_length) + ")");
  const Vector centred = series.array() - series.mean();
  const double gamma0 = centred.squaredNorm() / static_cast<double>(n);
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) return 1.0;
  auto rho = [&](Index lag) {
    return centred.head(n - lag).dot(centred.tail(n - lag)) / static_cast<double>(n) / gamma0;
  };
  double sum = 0.0;
  for (Index m = 0; 2 * m + 1 < n; ++m) {
    const double pair = rho(2 * m) + rho(2 * m + 1);
    if (!(pair > 0.0)) break;
    sum += pair;
  }
  return std::max(-1.0 + 2.0 * sum, 1.0 / static_cast<double>(n));
}

}  // namespace warpsync
