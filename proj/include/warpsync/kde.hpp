#pragma once

#include "warpsync/io.hpp"
#include "warpsync/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace warpsync {

struct KdeOptions {
  int windows = 0;           ///< 0: one window per distinct target position
  int min_samples = 30;      ///< windows with fewer draws borrow the nearest populated window
  double log_floor = -30.0;  ///< lower bound on the returned log density
  double min_bandwidth = 1e-3;
  std::optional<double> bandwidth;  ///< same bandwidth in every window; Silverman when absent
  /// Grid points per bandwidth for the tabulated density; 0 evaluates the mixture exactly.
  int grid_resolution = 16;
  /// Age range to partition; defaults to the span of the per-position median ages.
  std::optional<std::pair<double, double>> age_range;
};

/// Silverman's rule, 0.9 * min(sd, IQR / 1.34) * n^(-1/5), falling back to the sd (or |x|)
/// when the IQR vanishes and clamped below at `min_bandwidth`.
double silverman_bandwidth(const std::vector<double>& samples, double min_bandwidth);

/// log of (1/n) sum_i N(u; s_i, h^2).
double gaussian_kde_log_density(double u, const std::vector<double>& samples, double h);

/// Per-age-window Gaussian kernel density estimates of the target proxy, frozen after build.
class KdeTable {
 public:
  struct Window {
    std::vector<double> samples;
    double bandwidth = 0.0;
    int source = -1;  ///< window whose samples are used (itself when populated)
  };

  KdeTable() = default;

  [[nodiscard]] double lower() const { return lower_; }
  [[nodiscard]] double upper() const { return upper_; }
  [[nodiscard]] int window_count() const { return static_cast<int>(windows_.size()); }
  [[nodiscard]] const Window& window(int i) const { return windows_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] double log_floor() const { return log_floor_; }

  /// Window containing `age`, or -1 outside [lower, upper].
  [[nodiscard]] int window_of(double age) const;

  /// Floored log density of the window that serves `age`; -inf outside the age range.
  [[nodiscard]] double log_density(double u, double age) const;

  /// Floored log density of window i's source, summing every kernel.
  [[nodiscard]] double log_density_exact(double u, int window) const;

  friend KdeTable build_kde_table(const TargetEnsemble&, const KdeOptions&);

 private:
  double lookup(double u, int source) const;

  double lower_ = 0.0, upper_ = 1.0, width_ = 1.0;
  double log_floor_ = -30.0;
  std::vector<Window> windows_;
  // Tabulated log density per populated window.
  struct Table {
    double u0 = 0.0, step = 0.0;
    std::size_t offset = 0, count = 0;
  };
  std::vector<Table> tables_;
  std::vector<double> grid_values_;
  bool tabulated_ = false;
};

/// Partitions the age range into equal windows and assigns every (age draw, proxy) pair to the
/// window holding the draw. Throws DataError when no window reaches `min_samples`.
KdeTable build_kde_table(const TargetEnsemble& ensemble, const KdeOptions& options = {});

/// Floored log density at u of the window serving `age`.
inline double loglik_kde(double u, double age, const KdeTable& table) { return table.log_density(u, age); }

}  // namespace warpsync
