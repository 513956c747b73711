#include "warpsync/pipeline.hpp"

#include "warpsync/preprocess.hpp"
#include "warpsync/sampler.hpp"
#include "warpsync/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace warpsync {

namespace {

void note(std::ostream* log, const std::string& message) {
  if (log) *log << message << '\n';
}

ProxyRecord load_target(const fs::path& path, const ColumnSchema& schema) {
  return load_record(path, schema, ScaleKind::Age);
}

RescaleMap fit_record(const ProxyRecord& record, const RunConfig& c) {
  return fit_rescale(record.values, c.q_lower, c.q_upper);
}

CsvTable histogram(const Eigen::Ref<const Vector>& samples, const std::function<double(double)>& prior_density,
                   int bins = 40) {
  CsvTable table;
  table.header = {"bin_lower", "bin_upper", "posterior_density", "prior_density"};
  double lo = samples.minCoeff(), hi = samples.maxCoeff();
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (Index i = 0; i < samples.size(); ++i) {
    const auto b = std::clamp(static_cast<int>((samples(i) - lo) / width), 0, bins - 1);
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  for (int b = 0; b < bins; ++b) {
    const double a = lo + b * width, z = (b + 1 == bins) ? hi : lo + (b + 1) * width;
    table.rows.push_back({a, z, counts[static_cast<std::size_t>(b)] / (static_cast<double>(samples.size()) * width),
                          prior_density(0.5 * (a + z))});
  }
  return table;
}

void add_plot_data(AlignmentResult& result, const PreparedAlignment& prep) {
  const Posterior& post = *prep.posterior;
  const ParameterLayout& layout = post.layout();
  const PriorSpec& prior = post.prior();

  CsvTable trace;
  trace.header = {"sample", "log_objective"};
  for (Index k = 0; k < result.log_objective.size(); ++k)
    trace.rows.push_back({static_cast<double>(k), result.log_objective(k)});
  result.plot_data["trace"] = std::move(trace);

  const Matrix& s = result.samples;
  result.plot_data["hist_tau0"] = histogram(s.col(ParameterLayout::tau0()), [&](double x) {
    return std::exp(log_prior_tau0(x, prior.tau0.mean, prior.tau0.sd, prior.t_lo, prior.t_hi));
  });
  result.plot_data["hist_omega"] = histogram(s.col(layout.omega()), [&](double x) {
    return std::exp(log_prior_omega(x, prior.omega_a, prior.omega_b));
  });
  if (layout.has_sigma())
    result.plot_data["hist_sigma"] = histogram(s.col(layout.sigma()), [&](double x) {
      return std::exp(log_prior_sigma(x, prior.sigma_shape, prior.sigma_mean));
    });
  if (layout.has_mix())
    result.plot_data["hist_mix"] = histogram(s.col(layout.mix()), [&](double x) {
      return std::exp(log_prior_mix(x, prior.mix_a, prior.mix_b));
    });
  // Pooled increments against the prior at the mean elicited rate.
  const Matrix alphas = s.middleCols(ParameterLayout::alpha(0), layout.sections());
  const Vector pooled = alphas.reshaped();
  const double mean_rate = prior.alpha_mean.mean();
  result.plot_data["hist_alpha"] = histogram(pooled, [&](double x) {
    return std::exp(log_prior_alpha(x, prior.alpha_shape, mean_rate));
  });

  CsvTable aligned;
  aligned.header = {"age_median", "age_lower95", "age_upper95", "proxy_rescaled"};
  const Vector& u = post.data().u;
  for (Index i = 0; i < result.positions.size(); ++i)
    aligned.rows.push_back({result.age_median(i), result.age_lower(i), result.age_upper(i), u(i)});
  result.plot_data["aligned_proxy"] = std::move(aligned);

  CsvTable target;
  target.header = {"age", "proxy_rescaled"};
  for (Index i = 0; i < prep.target_display.size(); ++i)
    target.rows.push_back({prep.target_display.positions(i), prep.target_display.values(i)});
  result.plot_data["target"] = std::move(target);

  CsvTable band;
  band.header = {"position", "median", "lower95", "upper95"};
  for (Index i = 0; i < result.positions.size(); ++i)
    band.rows.push_back({result.positions(i), result.age_median(i), result.age_lower(i), result.age_upper(i)});
  result.plot_data["age_depth"] = std::move(band);
}

void remove_partial(const fs::path& dir, bool created) {
  std::error_code ec;
  if (created) {
    fs::remove_all(dir, ec);
    return;
  }
  for (const char* name : {"chain.csv", "ages.csv", "ages_ensemble.csv", "diagnostics.csv", "config.ini"})
    fs::remove(dir / name, ec);
  fs::remove_all(dir / "plotdata", ec);
}

std::string cell_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeFailure("failed writing " + path.string());
}

IniDocument align_template(const std::string& up) {
  IniDocument doc;
  doc.set("run", "mode", "age-depth");
  doc.set("run", "strategy", "single");
  doc.set("data", "input", "input.csv");
  doc.set("data", "target1", up + "target1.csv");
  doc.set("data", "target2", up + "target2.csv");
  doc.set("data", "ensemble", up + "target1_ensemble.csv");
  // The synthetic chronology starts at age 0.
  doc.set("prior", "tau0_mean", "100");
  doc.set("prior", "tau0_sd", "1000");
  return doc;
}

ProxyRecord truth_record(const ProxyRecord& record, const Vector& ages) {
  return ProxyRecord{record.positions, ages, record.scale};
}

}  // namespace

PreparedAlignment prepare_alignment(const RunConfig& c, std::ostream* log) {
  c.validate();
  PreparedAlignment prep;
  const ScaleKind input_scale = c.mode == Mode::AgeDepth ? ScaleKind::Depth : ScaleKind::Age;
  prep.input = load_record(c.input, c.input_columns, input_scale);
  prep.input_map = fit_record(prep.input, c);

  Posterior::Data data;
  data.positions = prep.input.positions;
  data.u = apply_rescale(prep.input.values.array(), prep.input_map).matrix();
  data.grid = make_grid(prep.input.positions, c.sections);
  data.mode = c.mode;

  switch (c.strategy) {
    case Strategy::Single: {
      const ProxyRecord t1 = load_target(c.target1, c.target_columns);
      prep.target_display = rescaled(t1, fit_record(t1, c));
      data.target = SingleTarget{LinearInterpolant(prep.target_display)};
      data.target_range = {t1.front(), t1.back()};
      break;
    }
    case Strategy::Double: {
      const ProxyRecord t1 = load_target(c.target1, c.target_columns);
      const ProxyRecord t2 = load_target(c.target2, c.target_columns);
      MixedTarget mixed = make_mixed_target(t1, t2, c.q_lower, c.q_upper);
      data.target_range = {mixed.ages(0), mixed.ages(mixed.ages.size() - 1)};
      // Displayed at an equal mix; the fitted weight is in the chain.
      const RescaleMap map = mixed_rescale(mixed, 0.5);
      prep.target_display.scale = ScaleKind::Age;
      prep.target_display.positions = mixed.ages;
      prep.target_display.values.resize(mixed.ages.size());
      for (Index i = 0; i < mixed.ages.size(); ++i)
        prep.target_display.values(i) = map(mix_targets(mixed.v1(i), mixed.v2(i), 0.5));
      data.target = std::move(mixed);
      break;
    }
    case Strategy::UQ: {
      TargetEnsemble ens = load_ensemble(c.ensemble, c.ensemble_min_columns, log);
      prep.dropped_columns = ens.dropped_columns;
      const RescaleMap map = fit_rescale(ens.proxy, c.q_lower, c.q_upper);
      ens.proxy = apply_rescale(ens.proxy.array(), map).matrix();
      KdeTable table = build_kde_table(ens, c.kde);
      data.target_range = {table.lower(), table.upper()};
      const ProxyRecord median = median_age_model(ens);
      prep.target_display = ProxyRecord{median.values, ens.proxy, ScaleKind::Age};
      data.target = EnsembleTarget{std::move(table)};
      break;
    }
  }

  const auto [lo, hi] = data.target_range;
  PriorSpec prior;
  prior.t_lo = lo;
  prior.t_hi = hi;
  prior.alpha_shape = c.alpha_shape;
  std::optional<ProxyRecord> age_model;
  if (!c.age_model.empty()) age_model = load_record(c.age_model, {}, input_scale);
  prior.alpha_mean = c.alpha_mean ? Vector::Constant(c.sections, *c.alpha_mean)
                                  : elicit_alpha_means(age_model, data.grid, c.mode, data.target_range);
  prior.omega_a = c.omega_a;
  prior.omega_b = c.omega_b;
  const double width = hi - lo;
  double tau0_mean = 0.5 * (lo + hi);
  if (c.mode == Mode::AgeToAge) tau0_mean = std::clamp(prep.input.front(), lo + 1e-6 * width, hi - 1e-6 * width);
  prior.tau0 = {c.tau0_mean.value_or(tau0_mean), c.tau0_sd.value_or(width)};
  prior.sigma_shape = c.sigma_shape;
  prior.sigma_mean = c.sigma_mean;
  prior.mix_a = c.mix_a;
  prior.mix_b = c.mix_b;
  if (c.taun_mean) prior.taun = TruncNormalPrior{*c.taun_mean, *c.taun_sd};

  prep.posterior = std::make_unique<Posterior>(std::move(data), std::move(prior), c.shape, c.strategy);
  return prep;
}

AlignmentResult align(const RunConfig& c, std::ostream* log) {
  PreparedAlignment prep = prepare_alignment(c, log);
  const Posterior& post = *prep.posterior;
  const EnergyFn energy = [&post](const Vector& theta) { return post.energy(theta); };

  Rng rng(c.mcmc.seed);
  auto init = init_points([&post](Rng& r) { return post.sample_prior(r); }, energy, rng);
  Chain chain = run_mcmc(energy, std::move(init), c.mcmc, rng);

  AlignmentResult result;
  result.parameter_names = post.layout().names();
  result.samples = std::move(chain.samples);
  result.log_objective = std::move(chain.log_objective);
  result.positions = prep.input.positions;
  result.acceptance_rate = chain.acceptance_rate();
  result.iterations = chain.iterations;
  result.burn_in = chain.burn_in;
  result.thin_interval = chain.thin_interval;
  result.write_ensemble = c.write_ensemble;

  const Index n = result.positions.size(), s = result.samples.rows();
  result.age_ensemble.resize(n, s);
  for (Index k = 0; k < s; ++k) result.age_ensemble.col(k) = post.ages(result.samples.row(k).transpose());
  const AgeSummary summary = summarize(result.age_ensemble);
  result.age_median = summary.median;
  result.age_lower = summary.lower;
  result.age_upper = summary.upper;
  result.age_mean = summary.mean;
  result.age_sd = summary.sd;

  if (s >= 100) {
    result.iat = iat(result.log_objective);
  } else {
    result.iat = std::nan("");
    note(log, "warning: fewer than 100 retained samples; IAT not estimated");
  }
  if (std::isfinite(result.iat) && result.iat >= 50.0)
    note(log, "warning: log-objective IAT " + format_number(result.iat) + " is not below 50; increase thinning");

  add_plot_data(result, prep);
  result.config_echo = echo(c).to_string();
  return result;
}

AlignmentResult run_align(const RunConfig& c, const fs::path& out_dir, std::ostream* log) {
  const bool existed = fs::exists(out_dir);
  try {
    AlignmentResult result = align(c, log);
    write_result(result, out_dir);
    return result;
  } catch (...) {
    remove_partial(out_dir, !existed);
    throw;
  }
}

std::string grid_cell_name(double noise, double fraction) {
  return "noise_" + cell_number(noise) + "_frac_" + cell_number(fraction);
}

void run_simulate(const SimulateConfig& c, const fs::path& out_dir, std::ostream* log) {
  c.validate();
  const auto targets = make_pseudo_targets(c.target_seed, c.targets);
  const SyntheticRecord synth = make_synthetic_record(targets, c.spec, c.chronology);
  const TargetEnsemble ens =
      c.write_ensemble ? make_target_ensemble(targets.first, c.ensemble, c.target_seed + 1) : TargetEnsemble{};

  const bool existed = fs::exists(out_dir);
  try {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw RuntimeFailure("cannot create output directory " + out_dir.string() + ": " + ec.message());
    write_record(out_dir / "input.csv", synth.record, "depth", "proxy");
    write_record(out_dir / "truth.csv", truth_record(synth.record, synth.true_ages), "depth", "age");
    write_record(out_dir / "target1.csv", targets.first, "age", "proxy");
    write_record(out_dir / "target2.csv", targets.second, "age", "proxy");
    if (c.write_ensemble) write_ensemble(out_dir / "target1_ensemble.csv", ens);
    write_text(out_dir / "align.ini", align_template("").to_string());

    if (c.grid) {
      ProxyRecord clean = synth.record;
      clean.values = synth.clean;
      std::vector<std::vector<double>> index;
      std::uint64_t cell = 0;
      for (double fraction : c.grid_fractions) {
        const auto keep = downsample_indices(clean.size(), fraction);
        const ProxyRecord thin = downsample(clean, fraction);
        Vector ages(static_cast<Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) ages(static_cast<Index>(k)) = synth.true_ages(keep[k]);
        for (double noise : c.grid_noise) {
          ++cell;
          const fs::path dir = out_dir / grid_cell_name(noise, fraction);
          fs::create_directories(dir, ec);
          if (ec) throw RuntimeFailure("cannot create " + dir.string() + ": " + ec.message());
          const ProxyRecord noisy = add_noise(thin, noise, c.spec.seed * 1000003ULL + cell);
          write_record(dir / "input.csv", noisy, "depth", "proxy");
          write_record(dir / "truth.csv", truth_record(noisy, ages), "depth", "age");
          write_text(dir / "align.ini", align_template("../").to_string());
          index.push_back({noise, fraction});
        }
      }
      write_csv(out_dir / "grid.csv", {"noise", "fraction"}, index);
    }
  } catch (...) {
    if (!existed) {
      std::error_code ec;
      fs::remove_all(out_dir, ec);
    }
    throw;
  }
  note(log, "simulated " + std::to_string(synth.record.size()) + " points; bottom age " +
                format_number(synth.true_ages(synth.true_ages.size() - 1)));
}

std::vector<std::pair<double, double>> read_grid_index(const fs::path& grid_dir) {
  const CsvTable table = read_csv(grid_dir / "grid.csv");
  std::vector<std::pair<double, double>> cells;
  for (const auto& row : table.rows) {
    if (row.size() < 2) throw DataError((grid_dir / "grid.csv").string() + ": expected noise,fraction rows");
    cells.emplace_back(row[0], row[1]);
  }
  if (cells.empty()) throw DataError((grid_dir / "grid.csv").string() + ": no grid cells");
  return cells;
}

void run_align_grid(const fs::path& grid_dir, const IniDocument& base, const IniDocument& overrides, int jobs,
                    std::ostream* log) {
  const auto cells = read_grid_index(grid_dir);
  // Validate every cell configuration before any compute.
  std::vector<RunConfig> configs;
  for (const auto& [noise, fraction] : cells) {
    const fs::path dir = grid_dir / grid_cell_name(noise, fraction);
    IniDocument doc = base;
    doc.merge(IniDocument::load(dir / "align.ini"));
    doc.merge(overrides);
    configs.push_back(run_config_from(doc, dir));
  }
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      {
        std::lock_guard lock(log_mutex);
        if (failure) return;
      }
      const fs::path dir = grid_dir / grid_cell_name(cells[i].first, cells[i].second);
      std::ostringstream cell_log;
      try {
        run_align(configs[i], dir / "result", &cell_log);
      } catch (...) {
        std::lock_guard lock(log_mutex);
        if (!failure) failure = std::current_exception();
      }
      std::lock_guard lock(log_mutex);
      if (log) *log << dir.filename().string() << ": done\n" << cell_log.str();
    }
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(configs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

Vector column(const CsvTable& table, std::size_t col, const std::string& source) {
  Vector v(static_cast<Index>(table.rows.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() <= col) throw DataError(source + ": missing column " + std::to_string(col + 1));
    v(static_cast<Index>(r)) = table.rows[r][col];
  }
  return v;
}

std::size_t find_column(const CsvTable& table, const std::string& name, std::size_t fallback) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  return it == table.header.end() ? fallback : static_cast<std::size_t>(it - table.header.begin());
}

ScoreCard score_files(const fs::path& ages_path, const fs::path& truth_path) {
  const CsvTable ages = read_csv(ages_path);
  const CsvTable truth = read_csv(truth_path);
  const std::string src = ages_path.string();
  if (ages.rows.empty()) throw DataError(src + ": empty age summary");
  if (ages.rows.size() != truth.rows.size())
    throw DataError(src + " has " + std::to_string(ages.rows.size()) + " positions but " + truth_path.string() +
                    " has " + std::to_string(truth.rows.size()));
  const Vector pos = column(ages, 0, src);
  const Vector truth_pos = column(truth, 0, truth_path.string());
  for (Index i = 0; i < pos.size(); ++i)
    if (std::abs(pos(i) - truth_pos(i)) > 1e-9 * std::max(1.0, std::abs(pos(i))))
      throw DataError("position mismatch at row " + std::to_string(i + 1) + ": " + format_number(pos(i)) + " vs " +
                      format_number(truth_pos(i)));
  AgeSummary summary;
  summary.median = column(ages, find_column(ages, "median", 1), src);
  summary.lower = column(ages, find_column(ages, "lower95", 2), src);
  summary.upper = column(ages, find_column(ages, "upper95", 3), src);
  summary.mean = column(ages, find_column(ages, "mean", 4), src);
  summary.sd = column(ages, find_column(ages, "sd", 5), src);
  return score(summary, column(truth, 1, truth_path.string()));
}

}  // namespace

ScoreCard run_evaluate(const EvaluateConfig& c, const fs::path& out_dir) {
  ScoreCard card;
  if (c.level != 0.95) {
    // Intervals at other levels need the full ensemble next to the summary.
    const fs::path ens_path = c.ages.parent_path() / "ages_ensemble.csv";
    const CsvTable ens = read_csv(ens_path);
    const CsvTable truth = read_csv(c.truth);
    if (ens.rows.size() != truth.rows.size()) throw DataError("ensemble and truth differ in length");
    Matrix m(static_cast<Index>(ens.rows.size()), static_cast<Index>(ens.rows.front().size() - 1));
    for (std::size_t r = 0; r < ens.rows.size(); ++r)
      for (std::size_t k = 1; k < ens.rows[r].size(); ++k)
        m(static_cast<Index>(r), static_cast<Index>(k - 1)) = ens.rows[r][k];
    card = score(summarize(m, c.level), column(truth, 1, c.truth.string()));
  } else {
    card = score_files(c.ages, c.truth);
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory " + out_dir.string() + ": " + ec.message());
  write_csv(out_dir / "scorecard.csv",
            {"coverage", "mean_abs_error", "mean_interval_width", "mean_abs_delta_t", "undefined_delta_t"},
            {{card.coverage, card.mean_abs_error, card.mean_interval_width, card.mean_abs_delta_t,
              static_cast<double>(card.undefined_delta_t)}});
  std::vector<std::vector<double>> rows;
  const CsvTable ages = read_csv(c.ages);
  for (Index i = 0; i < card.delta_t_sd.size(); ++i)
    rows.push_back({ages.rows[static_cast<std::size_t>(i)][0], card.delta_t_sd(i)});
  write_csv(out_dir / "delta_t.csv", {"position", "delta_t_sd"}, rows);
  return card;
}

void run_evaluate_grid(const EvaluateConfig& c, const fs::path& out_dir) {
  const auto cells = read_grid_index(c.grid);
  std::ostringstream out;
  out << "noise,fraction,metric,value\n";
  for (const auto& [noise, fraction] : cells) {
    const fs::path dir = c.grid / grid_cell_name(noise, fraction);
    const ScoreCard card = score_files(dir / "result" / "ages.csv", dir / "truth.csv");
    const std::string key = format_number(noise) + "," + format_number(fraction) + ",";
    out << key << "coverage," << format_number(card.coverage) << '\n';
    out << key << "mean_abs_error," << format_number(card.mean_abs_error) << '\n';
    out << key << "mean_interval_width," << format_number(card.mean_interval_width) << '\n';
    out << key << "mean_abs_delta_t," << format_number(card.mean_abs_delta_t) << '\n';
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory " + out_dir.string() + ": " + ec.message());
  write_text(out_dir / "heatmap.csv", out.str());
}

DiagnosticReport run_diagnose(const DiagnoseConfig& c) {
  const CsvTable chain = read_csv(c.chain);
  const std::string src = c.chain.string();
  if (chain.rows.empty()) throw DataError(src + ": chain too short for IAT (0 values)");
  const std::size_t col = find_column(chain, "log_objective", chain.rows.front().size() - 1);
  const Vector lo = column(chain, col, src);
  DiagnosticReport report;
  report.samples = lo.size();
  report.iat = iat(lo, c.min_length);
  report.pass = report.iat < c.iat_threshold;
  report.acceptance_rate = std::nan("");
  const fs::path diag = c.chain.parent_path() / "diagnostics.csv";
  if (fs::exists(diag)) {
    const CsvTable d = read_csv(diag);
    if (!d.rows.empty()) report.acceptance_rate = d.rows.front()[find_column(d, "acceptance_rate", 1)];
  }
  return report;
}

}  // namespace warpsync
