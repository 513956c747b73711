#include "warpsync/synthetic.hpp"

#include "warpsync/preprocess.hpp"
#include "warpsync/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace warpsync {

namespace {

constexpr double kPi = std::numbers::pi;

double simpson(double a, double fa, double b, double fb, double fm) { return (b - a) / 6.0 * (fa + 4.0 * fm + fb); }

double adaptive_simpson(const std::function<double(double)>& f, double a, double fa, double b, double fb,
                        double m, double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  // Split into panels no longer than 50 so each holds at most a fraction of a cosine period.
  const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / 50.0)));
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h, hi = (p + 1 == panels) ? b : a + (p + 1) * h;
    const double m = 0.5 * (lo + hi);
    const double flo = f(lo), fhi = f(hi), fm = f(m);
    total += adaptive_simpson(f, lo, flo, hi, fhi, m, fm, simpson(lo, flo, hi, fhi, fm), tol / panels, 40);
  }
  return total;
}

double sample_correlation(const Vector& x, const Vector& y) {
  const Vector xc = x.array() - x.mean(), yc = y.array() - y.mean();
  return xc.dot(yc) / std::sqrt(xc.squaredNorm() * yc.squaredNorm());
}

double sample_sd(const Vector& v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
}

struct Component {
  double period, amplitude;
};

}  // namespace

void TrueChronology::validate() const {
  if (!(b > 0.0)) throw ConfigError("chronology periodicity b must be positive");
  if (!(x_max > 0.0)) throw ConfigError("chronology x_max must be positive");
  constexpr int kScan = 100000;
  for (int i = 0; i <= kScan; ++i) {
    const double x = x_max * i / kScan;
    if (!(true_dt(x, *this) > 0.0))
      throw ConfigError("deposition time is not positive at depth " + format_number(x));
  }
}

double true_dt(double x, const TrueChronology& c) { return (c.d / c.b) * x * (0.9 - std::cos(kPi * x / c.b)) + c.a; }

double true_t(double x, const TrueChronology& c) {
  return integrate([&](double s) { return true_dt(s, c); }, 0.0, x, 1e-10);
}

double true_t_closed_form(double x, const TrueChronology& c) {
  const double k = kPi / c.b;
  return c.a * x + 0.9 * c.d * x * x / (2.0 * c.b) - c.d * x * std::sin(k * x) / kPi -
         c.d * c.b * std::cos(k * x) / (kPi * kPi) + c.d * c.b / (kPi * kPi);
}

std::pair<ProxyRecord, ProxyRecord> make_pseudo_targets(std::uint64_t seed, const PseudoTargetSpec& spec) {
  if (!(spec.span > 0.0 && spec.step > 0.0 && spec.step < spec.span))
    throw ConfigError("pseudo-target span and step must be positive with step < span");
  const auto n = static_cast<Index>(std::floor(spec.span / spec.step + 1e-9)) + 1;
  Vector ages(n);
  for (Index i = 0; i < n; ++i) ages(i) = std::min(spec.span, static_cast<double>(i) * spec.step);

  // Incommensurate period sets keep the two spectra apart. The first series carries strong
  // millennial red noise (abrupt, non-repeating structure); the second is smoother and weaker.
  const std::array<Component, 4> first{{{23000, 0.7}, {8500, 0.42}, {3300, 0.28}, {1400, 0.175}}};
  const std::array<Component, 4> second{{{31000, 0.5}, {12500, 0.275}, {5200, 0.175}, {2100, 0.1}}};

  Rng rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::normal_distribution<double> normal;

  auto ar1 = [&](double phi, double sd) {
    Vector e(n);
    const double innov = sd * std::sqrt(1.0 - phi * phi);
    e(0) = sd * normal(rng);
    for (Index i = 1; i < n; ++i) e(i) = phi * e(i - 1) + innov * normal(rng);
    return e;
  };
  auto signal = [&](const std::array<Component, 4>& comps, const std::array<double, 4>& phases) {
    Vector v = Vector::Zero(n);
    for (std::size_t k = 0; k < comps.size(); ++k)
      v.array() += comps[k].amplitude * (2.0 * kPi * ages.array() / comps[k].period + phases[k]).sin();
    return v;
  };

  const Vector noise1 = ar1(0.95, 0.5);
  const Vector noise2 = ar1(0.98, 0.2);
  Vector v1, v2;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::array<double, 4> p1{}, p2{};
    for (auto& p : p1) p = phase(rng);
    for (auto& p : p2) p = phase(rng);
    v1 = signal(first, p1) + noise1;
    v2 = signal(second, p2) + noise2;
    if (std::abs(sample_correlation(v1, v2)) < 0.3) break;
  }
  ProxyRecord a{ages, v1, ScaleKind::Age}, b{ages, v2, ScaleKind::Age};
  return {std::move(a), std::move(b)};
}

void SyntheticSpec::validate() const {
  if (!(weight >= 0.0 && weight <= 1.0)) throw ConfigError("mixture weight must lie in [0, 1]");
  if (!(noise_fraction >= 0.0)) throw ConfigError("noise fraction must be non-negative");
  if (points < 4) throw ConfigError("synthetic record needs at least 4 points");
}

Vector local_linear_smooth(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y, double span) {
  const Index n = x.size();
  if (n < 3 || y.size() != n) throw DataError("smoother needs at least three matching points");
  const Index q = std::clamp<Index>(static_cast<Index>(std::ceil(span * static_cast<double>(n))), 3, n);
  Vector fit(n);
  for (Index i = 0; i < n; ++i) {
    // x is sorted: grow the q-nearest window around i.
    Index lo = i, hi = i;
    while (hi - lo + 1 < q) {
      if (lo == 0) ++hi;
      else if (hi == n - 1) --lo;
      else if (x(i) - x(lo - 1) <= x(hi + 1) - x(i)) --lo;
      else ++hi;
    }
    const double radius = std::max(x(i) - x(lo), x(hi) - x(i)) * (1.0 + 1e-10);
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (Index k = lo; k <= hi; ++k) {
      const double r = std::abs(x(k) - x(i)) / radius;
      const double w = std::pow(1.0 - r * r * r, 3);
      const double dx = x(k) - x(i);
      sw += w;
      swx += w * dx;
      swy += w * y(k);
      swxx += w * dx * dx;
      swxy += w * dx * y(k);
    }
    const double det = sw * swxx - swx * swx;
    fit(i) = std::abs(det) > 1e-300 ? (swxx * swy - swx * swxy) / det : swy / sw;
  }
  return fit;
}

SyntheticRecord make_synthetic_record(const std::pair<ProxyRecord, ProxyRecord>& targets, const SyntheticSpec& spec,
                                      const TrueChronology& chron) {
  spec.validate();
  chron.validate();
  const Index n = spec.points;
  SyntheticRecord out;
  out.record.scale = ScaleKind::Depth;
  out.record.positions = Vector::LinSpaced(n, 0.0, chron.x_max);
  out.true_ages.resize(n);
  double prev_x = 0.0, prev_t = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double x = out.record.positions(i);
    prev_t += integrate([&](double s) { return true_dt(s, chron); }, prev_x, x, 1e-10);
    prev_x = x;
    out.true_ages(i) = prev_t;
  }
  const LinearInterpolant f1(targets.first), f2(targets.second);
  const double t_end = out.true_ages(n - 1);
  if (!(f1.contains(0.0) && f1.contains(t_end) && f2.contains(0.0) && f2.contains(t_end)))
    throw DataError("targets do not cover the synthetic age range [0, " + format_number(t_end) + "]");

  out.clean.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double p = mix_targets(f1.eval_unchecked(out.true_ages(i)), f2.eval_unchecked(out.true_ages(i)), spec.weight);
    out.clean(i) = spec.c1 * p + spec.c2;
  }
  const Vector smooth = local_linear_smooth(out.record.positions, out.clean, 0.25);
  out.residual_sd = sample_sd(out.clean - smooth);

  Rng rng(spec.seed);
  std::normal_distribution<double> normal;
  const double sd = spec.noise_fraction * out.residual_sd;
  out.record.values = out.clean;
  if (sd > 0.0)
    for (Index i = 0; i < n; ++i) out.record.values(i) += sd * normal(rng);
  return out;
}

std::vector<Index> downsample_indices(Index n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("sampling fraction must lie in (0, 1]");
  const auto m = static_cast<Index>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  if (m < 4) throw DataError("downsampling keeps " + std::to_string(m) + " points; at least 4 required");
  std::vector<Index> idx(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k)
    idx[static_cast<std::size_t>(k)] =
        static_cast<Index>(std::llround(static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(m - 1)));
  return idx;
}

ProxyRecord downsample(const ProxyRecord& record, double fraction) {
  const auto idx = downsample_indices(record.size(), fraction);
  ProxyRecord out;
  out.scale = record.scale;
  out.positions.resize(static_cast<Index>(idx.size()));
  out.values.resize(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.positions(static_cast<Index>(k)) = record.positions(idx[k]);
    out.values(static_cast<Index>(k)) = record.values(idx[k]);
  }
  return out;
}

ProxyRecord add_noise(const ProxyRecord& record, double level, std::uint64_t seed) {
  if (!(level >= 0.0)) throw ConfigError("noise level must be non-negative");
  ProxyRecord out = record;
  if (level == 0.0) return out;
  const double sd = level * sample_sd(record.values);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < out.size(); ++i) out.values(i) += sd * normal(rng);
  return out;
}

TargetEnsemble make_target_ensemble(const ProxyRecord& target, const EnsembleSpec& spec, std::uint64_t seed) {
  if (spec.draws < 1) throw ConfigError("ensemble needs at least one draw");
  if (!(spec.spread >= 0.0) || !(spec.memory >= 0.0 && spec.memory < 1.0))
    throw ConfigError("ensemble spread must be non-negative and memory in [0, 1)");
  const Index n = target.size();
  TargetEnsemble ens;
  ens.positions = Vector::LinSpaced(n, 0.0, spec.depth_step * static_cast<double>(n - 1));
  ens.proxy = target.values;
  ens.draws.resize(n, spec.draws);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const double innov = spec.spread * std::sqrt(1.0 - spec.memory * spec.memory);
  const double bias = 0.5 * spec.spread * spec.spread;
  for (Index j = 0; j < spec.draws; ++j) {
    double e = spec.spread * normal(rng);
    double age = target.positions(0);
    ens.draws(0, j) = age;
    for (Index i = 1; i < n; ++i) {
      age += (target.positions(i) - target.positions(i - 1)) * std::exp(e - bias);
      ens.draws(i, j) = age;
      e = spec.memory * e + innov * normal(rng);
    }
  }
  return ens;
}

}  // namespace warpsync
