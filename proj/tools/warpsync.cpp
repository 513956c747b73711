#include "warpsync/config.hpp"
#include "warpsync/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace warpsync;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string preset;
  std::string output;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "Config file (sectioned key = value)");
  app->add_option("-s,--set", c.sets, "Override, e.g. mcmc.seed=3 (repeatable)");
  app->add_option("-o,--output", c.output, "Output directory");
}

fs::path output_dir(const Common& c, const std::string& sub) {
  if (!c.output.empty()) return c.output;
  const char* root = std::getenv("WARPSYNC_OUTPUT_ROOT");
  return fs::path(root && *root ? root : ".") / sub;
}

// Preset layer, then the file, then --set overrides.
IniDocument layered(const Common& c, fs::path& base_dir) {
  IniDocument doc = preset(c.preset);
  base_dir = fs::current_path();
  if (!c.config.empty()) {
    const fs::path path = fs::absolute(c.config);
    doc.merge(IniDocument::load(path));
    base_dir = path.parent_path();
  }
  for (const auto& s : c.sets) doc.set_dotted(s);
  return doc;
}

std::string absolute_text(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"warpsync: Bayesian synchronization of proxy records"};
  app.require_subcommand(1);

  Common align_opts, sim_opts, eval_opts, diag_opts;
  std::string align_grid;
  int jobs = 1;
  auto* align = app.add_subcommand("align", "Align an input record to its target(s)");
  add_common(align, align_opts);
  align->add_option("--preset", align_opts.preset, "Budget preset: default or desk");
  align->add_option("--grid", align_grid, "Simulated grid directory: align every cell");
  align->add_option("-j,--jobs", jobs, "Worker threads for grid cells")->check(CLI::PositiveNumber);

  bool sim_grid = false;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic benchmark fixture");
  add_common(simulate, sim_opts);
  simulate->add_flag("--grid", sim_grid, "Also emit the noise x fraction grid");

  std::string ages, truth, eval_grid;
  auto* evaluate = app.add_subcommand("evaluate", "Score alignment ages against known truth");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--ages", ages, "ages.csv of a result");
  evaluate->add_option("--truth", truth, "truth.csv (position, true age)");
  evaluate->add_option("--grid", eval_grid, "Aligned grid directory: write heatmap.csv");

  std::string chain;
  auto* diagnose = app.add_subcommand("diagnose", "Report IAT and acceptance of a chain");
  add_common(diagnose, diag_opts);
  diagnose->add_option("--chain", chain, "chain.csv of a result");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    fs::path base;
    if (*align) {
      if (!align_grid.empty()) {
        IniDocument overrides;
        for (const auto& s : align_opts.sets) overrides.set_dotted(s);
        IniDocument first = preset(align_opts.preset);
        if (!align_opts.config.empty()) first.merge(IniDocument::load(align_opts.config));
        check_known_keys(first);
        check_known_keys(overrides);
        run_align_grid(align_grid, first, overrides, jobs, &std::cerr);
        return 0;
      }
      const RunConfig cfg = run_config_from(layered(align_opts, base), base);
      const fs::path out = output_dir(align_opts, "align");
      const AlignmentResult r = run_align(cfg, out, &std::cerr);
      std::cout << "wrote " << out.string() << " (" << r.samples.rows() << " samples, acceptance "
                << format_number(r.acceptance_rate) << ", iat " << format_number(r.iat) << ")\n";
    } else if (*simulate) {
      IniDocument doc = layered(sim_opts, base);
      if (sim_grid) doc.set("simulate", "grid", "true");
      const SimulateConfig cfg = simulate_config_from(doc);
      const fs::path out = output_dir(sim_opts, "simulate");
      run_simulate(cfg, out, &std::cerr);
      std::cout << "wrote " << out.string() << "\n";
    } else if (*evaluate) {
      IniDocument doc = layered(eval_opts, base);
      if (!ages.empty()) doc.set("evaluate", "ages", absolute_text(ages));
      if (!truth.empty()) doc.set("evaluate", "truth", absolute_text(truth));
      if (!eval_grid.empty()) doc.set("evaluate", "grid", absolute_text(eval_grid));
      const EvaluateConfig cfg = evaluate_config_from(doc, base);
      const fs::path out = eval_opts.output.empty() && !cfg.grid.empty() ? cfg.grid : output_dir(eval_opts, "evaluate");
      if (!cfg.grid.empty()) {
        run_evaluate_grid(cfg, out);
        std::cout << "wrote " << (out / "heatmap.csv").string() << "\n";
      } else {
        const ScoreCard card = run_evaluate(cfg, out);
        std::cout << "coverage " << format_number(card.coverage) << "\nmean_abs_error "
                  << format_number(card.mean_abs_error) << "\nmean_interval_width "
                  << format_number(card.mean_interval_width) << "\n";
      }
    } else if (*diagnose) {
      IniDocument doc = layered(diag_opts, base);
      if (!chain.empty()) doc.set("diagnose", "chain", absolute_text(chain));
      const DiagnosticReport rep = run_diagnose(diagnose_config_from(doc, base));
      std::cout << "samples " << rep.samples << "\niat " << format_number(rep.iat) << "\nacceptance_rate "
                << format_number(rep.acceptance_rate) << "\nstatus " << (rep.pass ? "pass" : "warn") << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
