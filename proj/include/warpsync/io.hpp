#pragma once

#include "warpsync/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace warpsync {

/// Ordered (position, value) series. Positions are strictly increasing.
struct ProxyRecord {
  Vector positions;
  Vector values;
  ScaleKind scale = ScaleKind::Depth;

  [[nodiscard]] Index size() const { return positions.size(); }
  [[nodiscard]] double front() const { return positions(0); }
  [[nodiscard]] double back() const { return positions(positions.size() - 1); }
};

/// Throws DataError unless the record is finite, strictly increasing and has at least
/// `min_length` points.
void validate_record(const ProxyRecord& record, Index min_length = 4);

/// Posterior age draws of a dated target: one row per position, one column per draw.
struct TargetEnsemble {
  Vector positions;
  Vector proxy;
  Matrix draws;
  std::vector<Index> dropped_columns;  ///< original draw indices rejected for age inversions

  [[nodiscard]] Index size() const { return positions.size(); }
  [[nodiscard]] Index draw_count() const { return draws.cols(); }
};

/// Columns (0-based) holding position and value in a record CSV.
struct ColumnSchema {
  int position_column = 0;
  int value_column = 1;
};

/// A parsed CSV: optional header and a dense numeric body.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Parses comma-delimited numeric data. A first line containing a non-numeric cell is
/// taken as the header; non-numeric cells anywhere else raise DataError naming the row.
CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv(const std::filesystem::path& path);

/// Formats with 17 significant digits so that reading back reproduces the double exactly.
std::string format_number(double value);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

ProxyRecord record_from_table(const CsvTable& table, const ColumnSchema& schema,
                              ScaleKind scale, const std::string& source);
ProxyRecord load_record(const std::filesystem::path& path, const ColumnSchema& schema = {},
                        ScaleKind scale = ScaleKind::Depth);
void write_record(const std::filesystem::path& path, const ProxyRecord& record,
                  const std::string& position_name = "position",
                  const std::string& value_name = "value");

/// Wide CSV: position, proxy, then one column per posterior age draw. Columns with an age
/// inversion are dropped and reported on `log` (when given) with their index.
TargetEnsemble load_ensemble(const std::filesystem::path& path, Index min_columns = 100,
                             std::ostream* log = nullptr);
TargetEnsemble ensemble_from_table(const CsvTable& table, Index min_columns,
                                   std::ostream* log, const std::string& source);
void write_ensemble(const std::filesystem::path& path, const TargetEnsemble& ensemble);

/// Everything retained from an alignment run.
struct AlignmentResult {
  std::vector<std::string> parameter_names;
  Matrix samples;        ///< retained samples x parameters
  Vector log_objective;  ///< log posterior at each retained sample
  Vector positions;      ///< input positions
  Matrix age_ensemble;   ///< positions x retained samples
  Vector age_median, age_lower, age_upper, age_mean, age_sd;
  double acceptance_rate = 0.0;
  double iat = 0.0;
  std::uint64_t iterations = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t thin_interval = 0;
  bool write_ensemble = false;
  std::map<std::string, CsvTable> plot_data;  ///< file stem -> table, under plotdata/
  std::string config_echo;
};

/// Writes chain.csv, ages.csv, diagnostics.csv, plotdata/*.csv and config.ini under `dir`.
void write_result(const AlignmentResult& result, const std::filesystem::path& dir);

/// Reads back the numeric content of a result directory (plot data excluded).
AlignmentResult read_result(const std::filesystem::path& dir);

}  // namespace warpsync
