// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

#include "warpsync/metrics.hpp"
#include "warpsync/pipeline.hpp"
#include "warpsync/sampler.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

using namespace warpsync;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int run_command(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

IniDocument doc_from(const std::string& text) {
  std::istringstream in(text);
  return IniDocument::parse(in, "acceptance");
}

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

/// Simulated fixture with 200 input points and otherwise default settings.
fs::path fixture(const fs::path& dir, const std::string& extra = "") {
  if (!fs::exists(dir / "align.ini"))
    run_simulate(simulate_config_from(doc_from("[simulate]\npoints = 200\n" + extra)), dir);
  return dir;
}

struct Run {
  AlignmentResult result;
  ScoreCard card;
  Vector truth;
  double seconds = 0.0;
};

/// Desk-preset run on a fixture; `extra` is applied last.
Run desk_run(const fs::path& fix, const fs::path& out, const std::string& extra) {
  IniDocument doc = preset("desk");
  doc.merge(IniDocument::load(fix / "align.ini"));
  doc.merge(doc_from(extra));
  const RunConfig cfg = run_config_from(doc, fix);
  const auto t0 = std::chrono::steady_clock::now();
  Run r;
  r.result = run_align(cfg, out);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ProxyRecord truth = load_record(fix / "truth.csv");
  r.truth = truth.values;
  r.card = score(summarize(r.result.age_ensemble), truth.values);
  std::cerr << "  " << out.filename().string() << ": coverage " << num(r.card.coverage) << ", error "
            << num(r.card.mean_abs_error) << " yr, width " << num(r.card.mean_interval_width) << " yr, IAT "
            << num(r.result.iat) << ", " << num(r.seconds, 3) << " s\n";
  return r;
}

bool monotone_draws(const Matrix& ages) {
  for (Index j = 0; j < ages.cols(); ++j)
    for (Index i = 1; i < ages.rows(); ++i)
      if (!(ages(i, j) > ages(i - 1, j))) return false;
  return true;
}

class Criteria {
 public:
  Criteria(fs::path work, std::string unit, std::string cli)
      : work_(std::move(work)), unit_(std::move(unit)), cli_(std::move(cli)) {}

  Outcome c1() {
    const int code = run_command(unit_ + " -ts=equations");
    return {code == 0, "equation suite exit code " + std::to_string(code)};
  }

  Outcome c2() {
    const int code = run_command(unit_ + " -ts=sampler-validation");
    return {code == 0, "sampler validation suite exit code " + std::to_string(code)};
  }

  Outcome c3() {
    single_ = desk_run(fixture(work_ / "desk"), work_ / "desk_single",
                       "[run]\nstrategy = single\n[mcmc]\nsamples = 1000\nwrite_ensemble = true\n");
    note_iat("desk single", single_->result.iat);
    const bool mono = monotone_draws(single_->result.age_ensemble);
    const bool pass = single_->card.coverage >= 0.85 && mono && single_->result.samples.rows() == 1000;
    return {pass, "coverage " + num(single_->card.coverage) + " (>= 0.85), monotone draws " + (mono ? "yes" : "no")};
  }

  Outcome c4() {
    if (!single_) c3();
    auto uq = desk_run(fixture(work_ / "desk"), work_ / "desk_uq",
                       "[run]\nstrategy = uq\n[mcmc]\nsamples = 1000\nwrite_ensemble = true\n");
    note_iat("desk uq", uq.result.iat);
    const bool pass = uq.card.mean_abs_error <= single_->card.mean_abs_error &&
                      uq.card.mean_interval_width <= single_->card.mean_interval_width;
    return {pass, "uq error " + num(uq.card.mean_abs_error) + " vs single " + num(single_->card.mean_abs_error) +
                      ", uq width " + num(uq.card.mean_interval_width) + " vs single " +
                      num(single_->card.mean_interval_width)};
  }

  Outcome c5() {
    bool pass = true;
    std::string detail;
    for (double w : {0.1, 0.5, 0.9}) {
      const std::string tag = "mix_" + num(w);
      const fs::path fix = fixture(work_ / tag, "weight = " + num(w) + "\n");
      auto r = desk_run(fix, work_ / (tag + "_double"),
                        "[run]\nstrategy = double\n[mcmc]\nsamples = 1000\nwrite_ensemble = true\n");
      note_iat(tag, r.result.iat);
      const auto names = r.result.parameter_names;
      const auto col = static_cast<Index>(std::find(names.begin(), names.end(), "mix") - names.begin());
      const double mean = r.result.samples.col(col).mean();
      const bool ok = std::abs(mean - w) <= 0.15 && r.card.coverage >= 0.85;
      pass = pass && ok;
      detail += (detail.empty() ? "" : "; ") + std::string("w=") + num(w) + ": mean " + num(mean, 3) + ", coverage " +
                num(r.card.coverage, 3);
    }
    return {pass, detail};
  }

  Outcome c6() {
    const fs::path grid = work_ / "grid";
    if (!fs::exists(grid / "grid.csv"))
      run_simulate(simulate_config_from(doc_from("[simulate]\npoints = 200\ngrid = true\n"
                                                 "grid_noise = 0.05, 0.3, 0.5\ngrid_fractions = 1, 0.5, 0.25\n")),
                   grid);
    std::map<double, std::map<double, double>> width;  // fraction -> noise -> width
    bool coverage_ok = true;
    double worst = 1.0;
    for (const auto& [noise, fraction] : read_grid_index(grid)) {
      const fs::path cell = grid / grid_cell_name(noise, fraction);
      auto r = desk_run(cell, cell / "result", "[mcmc]\nwrite_ensemble = true\n");
      note_iat(cell.filename().string(), r.result.iat);
      width[fraction][noise] = r.card.mean_interval_width;
      worst = std::min(worst, r.card.coverage);
      coverage_ok = coverage_ok && r.card.coverage >= 0.6;
    }
    bool ordered = true;
    std::string widths;
    for (const auto& [fraction, by_noise] : width) {
      double prev = -1.0;
      widths += (widths.empty() ? "" : "; ") + std::string("f=") + num(fraction) + ":";
      for (const auto& [noise, w] : by_noise) {
        ordered = ordered && w >= prev;
        prev = w;
        widths += " " + num(w, 3);
      }
    }
    return {coverage_ok && ordered, "min coverage " + num(worst, 3) + " (>= 0.6), widths by noise [" + widths +
                                        "] non-decreasing " + (ordered ? "yes" : "no")};
  }

  Outcome c7() {
    // Flag mechanism on a persistent AR(1) chain.
    const fs::path flag_dir = work_ / "ar1_flag";
    fs::create_directories(flag_dir);
    Rng rng(995);
    std::normal_distribution<double> z;
    std::vector<std::vector<double>> rows;
    double x = 0.0;
    for (int i = 0; i < 20000; ++i) {
      x = 0.995 * x + z(rng);
      rows.push_back({0.0, x});
    }
    write_csv(flag_dir / "chain.csv", {"tau0", "log_objective"}, rows);
    const auto rep = run_diagnose({flag_dir / "chain.csv", 50.0, 100});
    const bool flagged = !rep.pass && rep.iat > 50.0;

    bool all_below = !iats_.empty();
    std::string over;
    for (const auto& [name, v] : iats_)
      if (!(v < 50.0)) {
        all_below = false;
        over += " " + name + "=" + num(v, 3);
      }
    double max_iat = 0.0;
    for (const auto& [name, v] : iats_) max_iat = std::max(max_iat, v);
    return {all_below && flagged, std::to_string(iats_.size()) + " runs, max IAT " + num(max_iat, 3) +
                                      (over.empty() ? "" : ", over 50:" + over) + "; AR(1) fixture IAT " +
                                      num(rep.iat, 3) + (flagged ? " flagged" : " not flagged")};
  }

  Outcome c8() {
    const fs::path root = work_ / "determinism";
    fs::remove_all(root);
    auto twice = [&](const std::string& args_a, const std::string& args_b) {
      return run_command(cli_ + " " + args_a) == 0 && run_command(cli_ + " " + args_b) == 0;
    };
    bool ok = true;
    std::string failed;
    auto same = [&](const fs::path& a, const fs::path& b) {
      for (auto it = fs::recursive_directory_iterator(a); it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file()) continue;
        const auto rel = fs::relative(it->path(), a);
        if (!fs::exists(b / rel) || read_bytes(it->path()) != read_bytes(b / rel)) {
          ok = false;
          failed += " " + rel.string();
        }
      }
    };
    const std::string sim = " --set simulate.points=80 --set simulate.grid=true"
                            " --set simulate.grid_noise=0.1 --set simulate.grid_fractions=1";
    ok = ok && twice("simulate -o " + (root / "sim_a").string() + sim, "simulate -o " + (root / "sim_b").string() + sim);
    same(root / "sim_a", root / "sim_b");
    const std::string budget = " --set run.sections=6 --set mcmc.samples=150 --set mcmc.thinning=2"
                               " --set mcmc.write_ensemble=true";
    for (const std::string strategy : {"single", "double", "uq"}) {
      const std::string base = "align -c " + (root / "sim_a" / "align.ini").string() + budget +
                               " --set run.strategy=" + strategy + " -o ";
      ok = ok && twice(base + (root / ("align_a_" + strategy)).string(), base + (root / ("align_b_" + strategy)).string());
      same(root / ("align_a_" + strategy), root / ("align_b_" + strategy));
    }
    const std::string ev = "evaluate --ages " + (root / "align_a_single" / "ages.csv").string() + " --truth " +
                           (root / "sim_a" / "truth.csv").string() + " -o ";
    ok = ok && twice(ev + (root / "eval_a").string(), ev + (root / "eval_b").string());
    same(root / "eval_a", root / "eval_b");
    // grid: rerun in place, compare with a snapshot (echoes hold absolute paths)
    const std::string grid_align = "align --grid " + (root / "sim_a").string() + budget;
    const fs::path snapshot = root / "grid_first";
    ok = ok && run_command(cli_ + " " + grid_align) == 0;
    fs::copy(root / "sim_a", snapshot, fs::copy_options::recursive);
    ok = ok && run_command(cli_ + " " + grid_align) == 0;
    same(snapshot, root / "sim_a");
    // diagnose only prints; compare its stdout.
    const std::string diag = cli_ + " diagnose --chain " + (root / "align_a_uq" / "chain.csv").string();
    ok = ok && std::system((diag + " > " + (root / "diag_a.txt").string() + " 2>&1").c_str()) == 0 &&
         std::system((diag + " > " + (root / "diag_b.txt").string() + " 2>&1").c_str()) == 0 &&
         read_bytes(root / "diag_a.txt") == read_bytes(root / "diag_b.txt");
    return {ok, ok ? "simulate, align (single, double, uq, grid), evaluate, diagnose byte-identical"
                   : "differences:" + failed};
  }

 private:
  void note_iat(const std::string& name, double v) { iats_.emplace_back(name, v); }

  fs::path work_;
  std::string unit_, cli_;
  std::optional<Run> single_;
  std::vector<std::pair<std::string, double>> iats_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance criteria");
  std::string work = (fs::temp_directory_path() / "warpsync_acceptance").string();
  std::vector<int> only;
  bool keep = false;
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_flag("--keep", keep, "Keep results from an earlier run of the same work directory");
  CLI11_PARSE(app, argc, argv);

  if (!keep) fs::remove_all(work);
  fs::create_directories(work);
  Criteria criteria(work, WARPSYNC_UNIT, WARPSYNC_CLI);
  using Fn = Outcome (Criteria::*)();
  const std::vector<std::pair<int, Fn>> all{{1, &Criteria::c1}, {2, &Criteria::c2}, {3, &Criteria::c3},
                                            {4, &Criteria::c4}, {5, &Criteria::c5}, {6, &Criteria::c6},
                                            {7, &Criteria::c7}, {8, &Criteria::c8}};
  bool all_pass = true;
  for (const auto& [id, fn] : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = (criteria.*fn)();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "C" << id << " " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << " (" << num(secs, 3) << " s)"
              << std::endl;
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
