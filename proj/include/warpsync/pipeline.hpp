#pragma once

// Run orchestration behind the CLI subcommands.

#include "warpsync/config.hpp"
#include "warpsync/io.hpp"
#include "warpsync/metrics.hpp"
#include "warpsync/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace warpsync {

/// Loaded data and the assembled posterior of one alignment.
struct PreparedAlignment {
  ProxyRecord input;                  ///< raw input record
  RescaleMap input_map;
  std::unique_ptr<Posterior> posterior;
  ProxyRecord target_display;         ///< rescaled target on its ages, for plot data
  std::vector<Index> dropped_columns; ///< ensemble columns rejected at load
};

/// Loads inputs, rescales, builds the grid, elicits priors and assembles the posterior.
PreparedAlignment prepare_alignment(const RunConfig& config, std::ostream* log = nullptr);

/// Runs the sampler and summarizes the chain. `config_echo` is stored in the result.
AlignmentResult align(const RunConfig& config, std::ostream* log = nullptr);

/// align() plus write_result(); removes partial outputs when anything fails.
AlignmentResult run_align(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream* log = nullptr);

/// Name of the directory holding the grid cell for (noise, fraction).
std::string grid_cell_name(double noise, double fraction);

/// Writes input.csv, truth.csv, target1.csv, target2.csv, the target ensemble and an align.ini
/// template; in grid mode also one directory per (noise, fraction) cell plus grid.csv.
void run_simulate(const SimulateConfig& config, const std::filesystem::path& out_dir, std::ostream* log = nullptr);

/// Aligns every cell listed in grid.csv into <cell>/result. Each cell reads `base`, then its
/// align.ini, then `overrides`; cells are spread across `jobs` worker threads.
void run_align_grid(const std::filesystem::path& grid_dir, const IniDocument& base, const IniDocument& overrides,
                    int jobs, std::ostream* log = nullptr);

/// Scores ages.csv against truth.csv and writes scorecard.csv.
ScoreCard run_evaluate(const EvaluateConfig& config, const std::filesystem::path& out_dir);

/// Scores every grid cell and writes heatmap.csv in long format: noise, fraction, metric, value.
void run_evaluate_grid(const EvaluateConfig& config, const std::filesystem::path& out_dir);

struct DiagnosticReport {
  double iat = 0.0;
  double acceptance_rate = 0.0;
  Index samples = 0;
  bool pass = false;
};

/// IAT of the log-objective column of chain.csv and, when diagnostics.csv sits next to it,
/// the recorded acceptance rate.
DiagnosticReport run_diagnose(const DiagnoseConfig& config);

/// Reads grid.csv: one (noise, fraction) pair per row.
std::vector<std::pair<double, double>> read_grid_index(const std::filesystem::path& grid_dir);

}  // namespace warpsync
