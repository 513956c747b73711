#include "support.hpp"
#include "warpsync/pipeline.hpp"

#include <cstdlib>
#include <sstream>

using namespace warpsync;
using testing_support::read_text;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {
IniDocument parse(const std::string& text) {
  std::istringstream in(text);
  return IniDocument::parse(in, "mem.ini");
}

void simulate_small(const fs::path& out, const std::string& extra = "") {
  run_simulate(simulate_config_from(parse("[simulate]\npoints = 60\n" + extra)), out);
}

RunConfig tiny_run(const fs::path& fixture, const std::string& extra = "") {
  auto doc = IniDocument::load(fixture / "align.ini");
  doc.merge(parse("[run]\nsections = 5\n[mcmc]\nsamples = 120\nthinning = 1\nseed = 4\nwrite_ensemble = true\n" + extra));
  return run_config_from(doc, fixture);
}

int cli(const std::string& args) {
  const std::string cmd = std::string(WARPSYNC_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_chain(const fs::path& path, const Vector& log_objective) {
  std::vector<std::vector<double>> rows;
  for (Index i = 0; i < log_objective.size(); ++i) rows.push_back({0.0, log_objective(i)});
  write_csv(path, {"tau0", "log_objective"}, rows);
}
}  // namespace

TEST_SUITE("pipeline") {
TEST_CASE("simulate with defaults writes the fixture files") {
  TempDir dir("sim");
  run_simulate(simulate_config_from(IniDocument{}), dir.path());
  for (const char* f : {"input.csv", "truth.csv", "target1.csv", "target2.csv", "target1_ensemble.csv", "align.ini"})
    CHECK(fs::exists(dir / f));
  auto truth = load_record(dir / "truth.csv");
  CHECK(truth.size() == 1000);
  CHECK(truth.values(truth.size() - 1) == doctest::Approx(41600.0).epsilon(1e-9));
  auto input = load_record(dir / "input.csv");
  CHECK(input.positions == truth.positions);
}

TEST_CASE("simulate is byte-identical across reruns") {
  TempDir a("sim"), b("sim");
  simulate_small(a.path());
  simulate_small(b.path());
  for (const char* f : {"input.csv", "truth.csv", "target1.csv", "target2.csv", "target1_ensemble.csv"})
    CHECK(read_text(a / f) == read_text(b / f));
}

TEST_CASE("grid mode writes one directory per cell") {
  TempDir dir("grid");
  simulate_small(dir.path(), "grid = true\n");
  auto cells = read_grid_index(dir.path());
  CHECK(cells.size() == 25);
  for (const auto& [noise, fraction] : cells) {
    const auto cell = dir / grid_cell_name(noise, fraction);
    CHECK(fs::exists(cell / "input.csv"));
    CHECK(fs::exists(cell / "truth.csv"));
    CHECK(fs::exists(cell / "align.ini"));
  }
}

TEST_CASE("tiny alignment completes with monotone age draws and reproduces bytes") {
  TempDir fix("fix"), out1("out"), out2("out");
  simulate_small(fix.path());
  auto cfg = tiny_run(fix.path());
  auto result = run_align(cfg, out1.path());
  CHECK(result.samples.rows() == 120);
  for (Index j = 0; j < result.age_ensemble.cols(); ++j)
    for (Index i = 1; i < result.age_ensemble.rows(); ++i) REQUIRE(result.age_ensemble(i, j) > result.age_ensemble(i - 1, j));
  run_align(cfg, out2.path());
  for (const char* f : {"chain.csv", "ages.csv", "diagnostics.csv", "config.ini", "ages_ensemble.csv",
                        "plotdata/trace.csv", "plotdata/age_depth.csv"})
    CHECK(read_text(out1 / f) == read_text(out2 / f));
  // The echo alone reproduces the run.
  TempDir out3("out");
  auto echo_doc = IniDocument::load(out1 / "config.ini");
  run_align(run_config_from(echo_doc, out1.path()), out3.path());
  CHECK(read_text(out1 / "chain.csv") == read_text(out3 / "chain.csv"));
}

TEST_CASE("tiny double and uq runs complete") {
  TempDir fix("fix"), out("out");
  simulate_small(fix.path());
  auto d = run_align(tiny_run(fix.path(), "[run]\nstrategy = double\nsections = 5\n"), out / "d");
  CHECK(d.parameter_names.back() == "mix");
  auto u = run_align(tiny_run(fix.path(), "[run]\nstrategy = uq\nsections = 5\n"), out / "u");
  CHECK(std::find(u.parameter_names.begin(), u.parameter_names.end(), "sigma") == u.parameter_names.end());
}

TEST_CASE("uq with a 50-column ensemble fails in loading") {
  TempDir fix("fix");
  simulate_small(fix.path(), "ensemble_draws = 50\n");
  CHECK_THROWS_AS(align(tiny_run(fix.path(), "[run]\nstrategy = uq\nsections = 5\n")), DataError);
}

TEST_CASE("failed runs leave no partial output") {
  TempDir fix("fix");
  simulate_small(fix.path());
  auto cfg = tiny_run(fix.path());
  cfg.tau0_mean = 1e7;  // outside the target range, caught while building the priors
  CHECK_THROWS(run_align(cfg, fix / "bad"));
  CHECK_FALSE(fs::exists(fix / "bad"));
}

TEST_CASE("evaluate: identity fixture and mismatched lengths") {
  TempDir dir("eval");
  std::vector<std::vector<double>> ages, truth;
  for (int i = 0; i < 10; ++i) {
    ages.push_back({double(i), 100.0 * i, 100.0 * i - 5, 100.0 * i + 5, 100.0 * i, 2.0});
    truth.push_back({double(i), 100.0 * i});
  }
  write_csv(dir / "ages.csv", {"position", "median", "lower95", "upper95", "mean", "sd"}, ages);
  write_csv(dir / "truth.csv", {"depth", "age"}, truth);
  auto card = run_evaluate({dir / "ages.csv", dir / "truth.csv", {}, 0.95}, dir / "ev");
  CHECK(card.coverage == 1.0);
  CHECK(card.mean_abs_error == 0.0);
  CHECK(card.mean_interval_width == 10.0);
  CHECK(fs::exists(dir / "ev" / "scorecard.csv"));
  truth.pop_back();
  write_csv(dir / "short.csv", {"depth", "age"}, truth);
  CHECK_THROWS_AS(run_evaluate({dir / "ages.csv", dir / "short.csv", {}, 0.95}, dir / "ev2"), DataError);
}

TEST_CASE("diagnose: iid passes, persistent AR(1) is flagged, short chains fail") {
  TempDir dir("diag");
  std::mt19937_64 rng(61);
  std::normal_distribution<double> z;
  Vector iid(5000), ar(20000);
  for (auto& v : iid) v = z(rng);
  ar(0) = z(rng) * 10.0;
  for (Index i = 1; i < ar.size(); ++i) ar(i) = 0.995 * ar(i - 1) + z(rng);
  write_chain(dir / "iid.csv", iid);
  write_chain(dir / "ar.csv", ar);
  write_chain(dir / "short.csv", Vector::Zero(10));
  auto a = run_diagnose({dir / "iid.csv", 50.0, 100});
  CHECK(a.pass);
  CHECK(a.iat == doctest::Approx(1.0).epsilon(0.25));
  auto b = run_diagnose({dir / "ar.csv", 50.0, 100});
  CHECK_FALSE(b.pass);
  CHECK(b.iat > 50.0);
  try {
    run_diagnose({dir / "short.csv", 50.0, 100});
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("chain too short") != std::string::npos);
  }
}
}

TEST_SUITE("cli") {
TEST_CASE("exit codes: success, config error, data error") {
  TempDir dir("cli");
  CHECK(cli("simulate -o " + (dir / "fix").string() + " --set simulate.points=40") == 0);
  CHECK(cli("align -c " + (dir / "fix" / "align.ini").string() + " --set mcmc.bogus=1 -o " + (dir / "a").string()) == 2);
  CHECK(cli("align -c " + (dir / "fix" / "align.ini").string() + " --set run.strategy=double --set data.target2= -o " +
            (dir / "b").string()) == 2);
  testing_support::write_text(dir / "broken.csv", "0,1\n1,x\n");
  CHECK(cli("align -c " + (dir / "fix" / "align.ini").string() + " --set data.input=" + (dir / "broken.csv").string() +
            " -o " + (dir / "c").string()) == 3);
  CHECK_FALSE(fs::exists(dir / "c"));
  CHECK(cli("nosuchcommand") == 2);
}

TEST_CASE("align, evaluate and diagnose chain through the command line") {
  TempDir dir("cli");
  const auto fix = dir / "fix";
  REQUIRE(cli("simulate -o " + fix.string() + " --set simulate.points=40") == 0);
  REQUIRE(cli("align -c " + (fix / "align.ini").string() + " -o " + (dir / "r").string() +
              " --set run.sections=4 --set mcmc.samples=110 --set mcmc.thinning=1") == 0);
  CHECK(cli("evaluate --ages " + (dir / "r" / "ages.csv").string() + " --truth " + (fix / "truth.csv").string() +
            " -o " + (dir / "e").string()) == 0);
  CHECK(fs::exists(dir / "e" / "scorecard.csv"));
  const int diag = cli("diagnose --chain " + (dir / "r" / "chain.csv").string());
  CHECK(diag == 0);
}
}
