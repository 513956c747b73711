#include "warpsync/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace warpsync {

namespace fs = std::filesystem;

std::string_view to_string(Mode mode) {
  return mode == Mode::AgeDepth ? "age-depth" : "age-to-age";
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::Single: return "single";
    case Strategy::Double: return "double";
    case Strategy::UQ: return "uq";
  }
  return "single";
}

std::string_view to_string(ScaleKind kind) { return kind == ScaleKind::Depth ? "depth" : "age"; }

Mode parse_mode(std::string_view text) {
  if (text == "age-depth" || text == "agedepth") return Mode::AgeDepth;
  if (text == "age-to-age" || text == "agetoage") return Mode::AgeToAge;
  throw ConfigError("unknown mode '" + std::string(text) + "' (expected age-depth or age-to-age)");
}

Strategy parse_strategy(std::string_view text) {
  if (text == "single") return Strategy::Single;
  if (text == "double") return Strategy::Double;
  if (text == "uq") return Strategy::UQ;
  throw ConfigError("unknown strategy '" + std::string(text) + "' (expected single, double or uq)");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view cell, double& out) {
  cell = trim(cell);
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  return out;
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto cells = split_commas(view);
    std::vector<double> row;
    row.reserve(cells.size());
    bool numeric = true;
    std::size_t bad_cell = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double value = 0.0;
      if (!parse_double(cells[i], value)) {
        numeric = false;
        bad_cell = i;
        break;
      }
      row.push_back(value);
    }
    if (!numeric) {
      if (first_content) {
        for (auto c : cells) table.header.emplace_back(trim(c));
        first_content = false;
        continue;
      }
      throw DataError(source + ": line " + std::to_string(line_no) + ", column " +
                      std::to_string(bad_cell + 1) + ": non-numeric cell '" +
                      std::string(trim(cells[bad_cell])) + "'");
    }
    first_content = false;
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_csv(in, path.string());
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  auto out = open_for_write(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  if (!header.empty()) out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
  if (!out) throw RuntimeFailure("failed writing " + path.string());
}

void validate_record(const ProxyRecord& record, Index min_length) {
  if (record.positions.size() != record.values.size())
    throw DataError("record has mismatched position and value counts");
  if (record.size() < min_length)
    throw DataError("record has " + std::to_string(record.size()) + " points; at least " +
                    std::to_string(min_length) + " required");
  for (Index i = 0; i < record.size(); ++i) {
    if (!std::isfinite(record.positions(i)) || !std::isfinite(record.values(i)))
      throw DataError("record has a non-finite entry at row " + std::to_string(i + 1));
    if (i > 0 && !(record.positions(i) > record.positions(i - 1)))
      throw DataError("record positions not strictly increasing at rows " + std::to_string(i) +
                      " and " + std::to_string(i + 1));
  }
}

ProxyRecord record_from_table(const CsvTable& table, const ColumnSchema& schema, ScaleKind scale,
                              const std::string& source) {
  const auto n = table.rows.size();
  const auto need = static_cast<std::size_t>(std::max(schema.position_column, schema.value_column)) + 1;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t r = 0; r < n; ++r) {
    if (table.rows[r].size() < need)
      throw DataError(source + ": data row " + std::to_string(r + 1) + " has " +
                      std::to_string(table.rows[r].size()) + " columns, need " + std::to_string(need));
  }
  auto pos = [&](std::size_t r) { return table.rows[r][schema.position_column]; };
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pos(a) < pos(b); });
  for (std::size_t i = 1; i < n; ++i) {
    if (pos(order[i]) == pos(order[i - 1])) {
      auto a = std::min(order[i], order[i - 1]) + 1, b = std::max(order[i], order[i - 1]) + 1;
      throw DataError(source + ": duplicate position " + format_number(pos(order[i])) +
                      " at data rows " + std::to_string(a) + " and " + std::to_string(b));
    }
  }
  ProxyRecord record;
  record.scale = scale;
  record.positions.resize(static_cast<Index>(n));
  record.values.resize(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    record.positions(static_cast<Index>(i)) = pos(order[i]);
    record.values(static_cast<Index>(i)) = table.rows[order[i]][schema.value_column];
  }
  try {
    validate_record(record);
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
  return record;
}

ProxyRecord load_record(const fs::path& path, const ColumnSchema& schema, ScaleKind scale) {
  return record_from_table(read_csv(path), schema, scale, path.string());
}

void write_record(const fs::path& path, const ProxyRecord& record, const std::string& position_name,
                  const std::string& value_name) {
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(record.size()));
  for (Index i = 0; i < record.size(); ++i) rows.push_back({record.positions(i), record.values(i)});
  write_csv(path, {position_name, value_name}, rows);
}

TargetEnsemble ensemble_from_table(const CsvTable& table, Index min_columns, std::ostream* log,
                                   const std::string& source) {
  if (table.rows.empty()) throw DataError(source + ": empty ensemble file");
  const auto width = table.rows.front().size();
  if (width < 3) throw DataError(source + ": ensemble needs position, proxy and draw columns");
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    if (table.rows[r].size() != width)
      throw DataError(source + ": ragged row " + std::to_string(r + 1) + " (" +
                      std::to_string(table.rows[r].size()) + " columns, expected " +
                      std::to_string(width) + ")");

  const auto n = static_cast<Index>(table.rows.size());
  const auto m = static_cast<Index>(width - 2);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return table.rows[a][0] < table.rows[b][0]; });

  TargetEnsemble ens;
  ens.positions.resize(n);
  ens.proxy.resize(n);
  Matrix all(n, m);
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    ens.positions(i) = row[0];
    ens.proxy(i) = row[1];
    for (Index j = 0; j < m; ++j) all(i, j) = row[static_cast<std::size_t>(j + 2)];
  }
  for (Index i = 1; i < n; ++i)
    if (!(ens.positions(i) > ens.positions(i - 1)))
      throw DataError(source + ": duplicate ensemble position " + format_number(ens.positions(i)));

  std::vector<Index> keep;
  for (Index j = 0; j < m; ++j) {
    bool ok = all.col(j).allFinite();
    for (Index i = 1; ok && i < n; ++i) ok = all(i, j) >= all(i - 1, j);
    if (ok) {
      keep.push_back(j);
    } else {
      ens.dropped_columns.push_back(j);
      if (log) *log << "warning: " << source << ": dropped draw column " << j
                    << " (age inversion)\n";
    }
  }
  if (static_cast<Index>(keep.size()) < min_columns)
    throw DataError(source + ": insufficient ensemble size (" + std::to_string(keep.size()) +
                    " valid draw columns, " + std::to_string(min_columns) + " required)");
  ens.draws.resize(n, static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) ens.draws.col(static_cast<Index>(k)) = all.col(keep[k]);
  return ens;
}

TargetEnsemble load_ensemble(const fs::path& path, Index min_columns, std::ostream* log) {
  return ensemble_from_table(read_csv(path), min_columns, log, path.string());
}

void write_ensemble(const fs::path& path, const TargetEnsemble& ensemble) {
  std::vector<std::string> header{"position", "proxy"};
  for (Index j = 0; j < ensemble.draw_count(); ++j) header.push_back("draw" + std::to_string(j));
  std::vector<std::vector<double>> rows;
  for (Index i = 0; i < ensemble.size(); ++i) {
    std::vector<double> row{ensemble.positions(i), ensemble.proxy(i)};
    for (Index j = 0; j < ensemble.draw_count(); ++j) row.push_back(ensemble.draws(i, j));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

void write_result(const AlignmentResult& result, const fs::path& dir) {
  if (result.samples.rows() == 0) throw RuntimeFailure("no retained samples");
  std::error_code ec;
  fs::create_directories(dir / "plotdata", ec);
  if (ec) throw RuntimeFailure("cannot create output directory " + dir.string() + ": " + ec.message());

  std::vector<std::string> header = result.parameter_names;
  header.push_back("log_objective");
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(result.samples.rows()));
  for (Index r = 0; r < result.samples.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(result.samples.cols()));
    for (Index c = 0; c < result.samples.cols(); ++c) row[static_cast<std::size_t>(c)] = result.samples(r, c);
    row.push_back(result.log_objective(r));
    rows.push_back(std::move(row));
  }
  write_csv(dir / "chain.csv", header, rows);

  rows.clear();
  for (Index i = 0; i < result.positions.size(); ++i)
    rows.push_back({result.positions(i), result.age_median(i), result.age_lower(i), result.age_upper(i),
                    result.age_mean(i), result.age_sd(i)});
  write_csv(dir / "ages.csv", {"position", "median", "lower95", "upper95", "mean", "sd"}, rows);

  if (result.write_ensemble) {
    std::vector<std::string> eh{"position"};
    for (Index j = 0; j < result.age_ensemble.cols(); ++j) eh.push_back("s" + std::to_string(j));
    rows.clear();
    for (Index i = 0; i < result.age_ensemble.rows(); ++i) {
      std::vector<double> row{result.positions(i)};
      for (Index j = 0; j < result.age_ensemble.cols(); ++j) row.push_back(result.age_ensemble(i, j));
      rows.push_back(std::move(row));
    }
    write_csv(dir / "ages_ensemble.csv", eh, rows);
  }

  write_csv(dir / "diagnostics.csv",
            {"iat", "acceptance_rate", "iterations", "burn_in", "thin_interval", "samples"},
            {{result.iat, result.acceptance_rate, static_cast<double>(result.iterations),
              static_cast<double>(result.burn_in), static_cast<double>(result.thin_interval),
              static_cast<double>(result.samples.rows())}});

  for (const auto& [stem, table] : result.plot_data)
    write_csv(dir / "plotdata" / (stem + ".csv"), table.header, table.rows);

  if (!result.config_echo.empty()) {
    auto out = open_for_write(dir / "config.ini");
    out << result.config_echo;
  }
}

AlignmentResult read_result(const fs::path& dir) {
  AlignmentResult result;
  auto chain = read_csv(dir / "chain.csv");
  if (chain.rows.empty()) throw DataError(dir.string() + ": chain.csv has no samples");
  const auto width = chain.rows.front().size();
  if (width < 2) throw DataError(dir.string() + ": chain.csv has too few columns");
  result.parameter_names.assign(chain.header.begin(),
                                chain.header.empty() ? chain.header.end() : chain.header.end() - 1);
  const auto n = static_cast<Index>(chain.rows.size());
  result.samples.resize(n, static_cast<Index>(width - 1));
  result.log_objective.resize(n);
  for (Index r = 0; r < n; ++r) {
    const auto& row = chain.rows[static_cast<std::size_t>(r)];
    if (row.size() != width) throw DataError(dir.string() + ": chain.csv ragged at row " + std::to_string(r + 1));
    for (Index c = 0; c + 1 < static_cast<Index>(width); ++c) result.samples(r, c) = row[static_cast<std::size_t>(c)];
    result.log_objective(r) = row.back();
  }

  if (fs::exists(dir / "ages.csv")) {
    auto ages = read_csv(dir / "ages.csv");
    const auto m = static_cast<Index>(ages.rows.size());
    result.positions.resize(m);
    result.age_median.resize(m);
    result.age_lower.resize(m);
    result.age_upper.resize(m);
    result.age_mean.resize(m);
    result.age_sd.resize(m);
    for (Index i = 0; i < m; ++i) {
      const auto& row = ages.rows[static_cast<std::size_t>(i)];
      if (row.size() < 6) throw DataError(dir.string() + ": ages.csv row " + std::to_string(i + 1) + " too short");
      result.positions(i) = row[0];
      result.age_median(i) = row[1];
      result.age_lower(i) = row[2];
      result.age_upper(i) = row[3];
      result.age_mean(i) = row[4];
      result.age_sd(i) = row[5];
    }
  }
  if (fs::exists(dir / "ages_ensemble.csv")) {
    auto ens = read_csv(dir / "ages_ensemble.csv");
    const auto m = static_cast<Index>(ens.rows.size());
    const auto w = m ? static_cast<Index>(ens.rows.front().size()) - 1 : 0;
    result.age_ensemble.resize(m, w);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < w; ++j) result.age_ensemble(i, j) = ens.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j + 1)];
    result.write_ensemble = true;
  }
  if (fs::exists(dir / "diagnostics.csv")) {
    auto diag = read_csv(dir / "diagnostics.csv");
    if (!diag.rows.empty() && diag.rows.front().size() >= 5) {
      const auto& row = diag.rows.front();
      result.iat = row[0];
      result.acceptance_rate = row[1];
      result.iterations = static_cast<std::uint64_t>(row[2]);
      result.burn_in = static_cast<std::uint64_t>(row[3]);
      result.thin_interval = static_cast<std::uint64_t>(row[4]);
    }
  }
  if (fs::exists(dir / "config.ini")) {
    std::ifstream in(dir / "config.ini", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    result.config_echo = ss.str();
  }
  return result;
}

}  // namespace warpsync
