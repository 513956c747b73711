#include "warpsync/kde.hpp"

#include "warpsync/densities.hpp"
#include "warpsync/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace warpsync {

double silverman_bandwidth(const std::vector<double>& samples, double min_bandwidth) {
  const auto n = samples.size();
  if (n == 0) return min_bandwidth;
  double sd = 0.0;
  if (n > 1) {
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);
    sd = std::sqrt(ss / static_cast<double>(n - 1));
  }
  double iqr = 0.0;
  if (n > 1) {
    Vector v = Eigen::Map<const Vector>(samples.data(), static_cast<Index>(n));
    iqr = quantile_inplace(v, 0.75) - quantile_inplace(v, 0.25);
  }
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) spread = std::abs(samples.front());
  if (!(spread > 0.0)) spread = 1.0;
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  return std::max(h, min_bandwidth);
}

double gaussian_kde_log_density(double u, const std::vector<double>& samples, double h) {
  if (samples.empty() || !(h > 0.0)) return kNegInf<double>;
  double max_term = kNegInf<double>;
  for (double s : samples) {
    const double z = (u - s) / h;
    max_term = std::max(max_term, -0.5 * z * z);
  }
  double acc = 0.0;
  for (double s : samples) {
    const double z = (u - s) / h;
    acc += std::exp(-0.5 * z * z - max_term);
  }
  return max_term + std::log(acc) - std::log(static_cast<double>(samples.size()) * h) -
         0.5 * std::log(2.0 * std::numbers::pi);
}

namespace {

double mixture_log_density(double u, const KdeTable::Window& w) {
  return gaussian_kde_log_density(u, w.samples, w.bandwidth);
}

// Same mixture over sorted samples, skipping kernels beyond 12 bandwidths (relative weight
// below exp(-72) of the nearest one).
double sorted_mixture_log_density(double u, const std::vector<double>& sorted, double h) {
  auto first = std::lower_bound(sorted.begin(), sorted.end(), u - 12.0 * h);
  auto last = std::upper_bound(first, sorted.end(), u + 12.0 * h);
  if (first == last) {
    // Nothing nearby: the nearest sample dominates.
    const double nearest = (first == sorted.end()) ? sorted.back()
                           : (first == sorted.begin()) ? sorted.front()
                           : (u - *(first - 1) < *first - u ? *(first - 1) : *first);
    first = std::lower_bound(sorted.begin(), sorted.end(), nearest);
    last = std::upper_bound(first, sorted.end(), nearest);
  }
  double max_term = kNegInf<double>;
  for (auto it = first; it != last; ++it) {
    const double z = (u - *it) / h;
    max_term = std::max(max_term, -0.5 * z * z);
  }
  double acc = 0.0;
  for (auto it = first; it != last; ++it) {
    const double z = (u - *it) / h;
    acc += std::exp(-0.5 * z * z - max_term);
  }
  return max_term + std::log(acc) - std::log(static_cast<double>(sorted.size()) * h) -
         0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace

int KdeTable::window_of(double age) const {
  if (!(age >= lower_ && age <= upper_)) return -1;
  const auto i = static_cast<int>(std::floor((age - lower_) / width_));
  return std::clamp(i, 0, window_count() - 1);
}

double KdeTable::log_density_exact(double u, int window) const {
  const auto& src = windows_[static_cast<std::size_t>(windows_[static_cast<std::size_t>(window)].source)];
  return std::max(mixture_log_density(u, src), log_floor_);
}

double KdeTable::lookup(double u, int source) const {
  const auto& t = tables_[static_cast<std::size_t>(source)];
  const double pos = (u - t.u0) / t.step;
  if (!(pos >= 0.0) || pos > static_cast<double>(t.count - 1)) return log_floor_;
  const auto i = std::min(static_cast<std::size_t>(pos), t.count - 2);
  const double f = pos - static_cast<double>(i);
  const double* g = grid_values_.data() + t.offset + i;
  return g[0] + f * (g[1] - g[0]);
}

double KdeTable::log_density(double u, double age) const {
  const int w = window_of(age);
  if (w < 0) return kNegInf<double>;
  const int src = windows_[static_cast<std::size_t>(w)].source;
  if (tabulated_) return lookup(u, src);
  return log_density_exact(u, w);
}

KdeTable build_kde_table(const TargetEnsemble& ensemble, const KdeOptions& options) {
  if (ensemble.size() < 2 || ensemble.draw_count() < 1) throw DataError("ensemble too small for KDE");
  if (options.min_samples < 1) throw ConfigError("kde min_samples must be positive");
  if (options.bandwidth && !(*options.bandwidth > 0.0)) throw ConfigError("kde bandwidth must be positive");
  KdeTable table;
  table.log_floor_ = options.log_floor;

  if (options.age_range) {
    std::tie(table.lower_, table.upper_) = *options.age_range;
  } else {
    Vector medians(ensemble.size());
    for (Index i = 0; i < ensemble.size(); ++i) medians(i) = quantile(ensemble.draws.row(i).transpose(), 0.5);
    table.lower_ = medians.minCoeff();
    table.upper_ = medians.maxCoeff();
  }
  if (!(table.upper_ > table.lower_)) {
    // Degenerate: every draw at one age. Widen to a unit interval around it.
    table.lower_ -= 0.5;
    table.upper_ += 0.5;
  }

  int n_windows = options.windows;
  if (n_windows <= 0) {
    std::set<double> distinct(ensemble.positions.data(), ensemble.positions.data() + ensemble.size());
    n_windows = static_cast<int>(distinct.size());
  }
  table.width_ = (table.upper_ - table.lower_) / n_windows;
  table.windows_.resize(static_cast<std::size_t>(n_windows));

  for (Index j = 0; j < ensemble.draw_count(); ++j)
    for (Index i = 0; i < ensemble.size(); ++i) {
      const int w = table.window_of(ensemble.draws(i, j));
      if (w >= 0) table.windows_[static_cast<std::size_t>(w)].samples.push_back(ensemble.proxy(i));
    }

  std::vector<int> populated;
  for (int w = 0; w < n_windows; ++w)
    if (static_cast<int>(table.windows_[static_cast<std::size_t>(w)].samples.size()) >= options.min_samples)
      populated.push_back(w);
  if (populated.empty())
    throw DataError("no KDE window holds at least " + std::to_string(options.min_samples) + " draws");

  // Nearest populated window by index distance; ties go to the younger window.
  for (int w = 0; w < n_windows; ++w) {
    auto it = std::lower_bound(populated.begin(), populated.end(), w);
    int best;
    if (it == populated.end()) best = populated.back();
    else if (*it == w || it == populated.begin()) best = *it;
    else best = (w - *(it - 1) <= *it - w) ? *(it - 1) : *it;
    auto& win = table.windows_[static_cast<std::size_t>(w)];
    win.source = best;
  }
  for (int w : populated) {
    auto& win = table.windows_[static_cast<std::size_t>(w)];
    win.bandwidth = options.bandwidth ? *options.bandwidth : silverman_bandwidth(win.samples, options.min_bandwidth);
  }
  // Borrowing windows copy the bandwidth so window(i) reports what is used.
  for (auto& win : table.windows_)
    if (win.bandwidth == 0.0) win.bandwidth = table.windows_[static_cast<std::size_t>(win.source)].bandwidth;

  if (options.grid_resolution > 0) {
    constexpr std::size_t kMaxGrid = 8192;
    table.tables_.resize(static_cast<std::size_t>(n_windows));
    for (int w : populated) {
      const auto& win = table.windows_[static_cast<std::size_t>(w)];
      std::vector<double> sorted = win.samples;
      std::sort(sorted.begin(), sorted.end());
      const double* mn = &sorted.front();
      const double* mx = &sorted.back();
      // Beyond 10 bandwidths the mixture is below exp(-50) / h, i.e. under any sensible floor.
      const double a = *mn - 10.0 * win.bandwidth, b = *mx + 10.0 * win.bandwidth;
      double step = win.bandwidth / options.grid_resolution;
      auto count = static_cast<std::size_t>(std::ceil((b - a) / step)) + 1;
      if (count > kMaxGrid) {
        count = kMaxGrid;
        step = (b - a) / static_cast<double>(count - 1);
      }
      auto& t = table.tables_[static_cast<std::size_t>(w)];
      t.u0 = a;
      t.step = step;
      t.count = count;
      t.offset = table.grid_values_.size();
      for (std::size_t k = 0; k < count; ++k)
        table.grid_values_.push_back(
            std::max(sorted_mixture_log_density(a + static_cast<double>(k) * step, sorted, win.bandwidth),
                     options.log_floor));
    }
    table.tabulated_ = true;
  }
  return table;
}

}  // namespace warpsync
