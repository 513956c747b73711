#pragma once

// Sectioned key=value configuration. Layers are applied in order: built-in defaults, an
// optional preset, the config file, then `section.key=value` overrides from the command line.

#include "warpsync/io.hpp"
#include "warpsync/kde.hpp"
#include "warpsync/model.hpp"
#include "warpsync/sampler.hpp"
#include "warpsync/synthetic.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace warpsync {

/// Raw sections of key=value pairs, kept sorted for a stable echo.
class IniDocument {
 public:
  using Section = std::map<std::string, std::string>;

  /// Parses `[section]` headers, `key = value` lines and `#`/`;` comments.
  static IniDocument parse(std::istream& in, const std::string& source);
  static IniDocument load(const std::filesystem::path& path);

  void set(const std::string& section, const std::string& key, const std::string& value);
  /// Applies "section.key=value".
  void set_dotted(const std::string& assignment);
  /// Copies every entry of `other` over this document.
  void merge(const IniDocument& other);

  [[nodiscard]] std::optional<std::string> get(const std::string& section, const std::string& key) const;
  [[nodiscard]] const std::map<std::string, Section>& sections() const { return sections_; }

  [[nodiscard]] std::string to_string() const;

 private:
  std::map<std::string, Section> sections_;
};

/// Knobs of one alignment run, validated before any compute.
struct RunConfig {
  Mode mode = Mode::AgeDepth;
  Strategy strategy = Strategy::Single;
  int sections = 50;

  std::filesystem::path input, target1, target2, ensemble, age_model;
  ColumnSchema input_columns, target_columns;
  Index ensemble_min_columns = 100;

  double q_lower = 0.05, q_upper = 0.95;

  double alpha_shape = 1.5;
  std::optional<double> alpha_mean;  ///< uniform prior mean; elicited when absent
  double omega_a = 5.0, omega_b = 5.0;
  std::optional<double> tau0_mean, tau0_sd;
  double sigma_shape = 1.5, sigma_mean = 0.01;
  double mix_a = 1.0, mix_b = 1.0;
  std::optional<double> taun_mean, taun_sd;
  TShape shape;

  McmcControls mcmc = default_mcmc();
  bool write_ensemble = false;
  KdeOptions kde;

  void validate() const;

  static McmcControls default_mcmc() {
    McmcControls m;
    m.thinning = 2500;
    return m;
  }
};

/// Synthetic fixture generation; the `align` keys of the template are taken from RunConfig.
struct SimulateConfig {
  TrueChronology chronology;
  SyntheticSpec spec;
  PseudoTargetSpec targets;
  std::uint64_t target_seed = 7;
  EnsembleSpec ensemble;
  bool write_ensemble = true;
  bool grid = false;
  std::vector<double> grid_noise{0.01, 0.05, 0.1, 0.3, 0.5};
  std::vector<double> grid_fractions{1.0, 0.75, 0.5, 0.25, 0.1};

  void validate() const;
};

struct EvaluateConfig {
  std::filesystem::path ages, truth, grid;
  double level = 0.95;
};

struct DiagnoseConfig {
  std::filesystem::path chain;
  double iat_threshold = 50.0;
  Index min_length = 100;
};

/// Built-in presets; "desk" is a scaled-down budget (20 sections, 500 samples, thinning 1000).
IniDocument preset(const std::string& name);

/// Reads a document into typed settings. Relative paths are resolved against `base_dir`;
/// unknown sections or keys raise ConfigError.
RunConfig run_config_from(const IniDocument& doc, const std::filesystem::path& base_dir);
SimulateConfig simulate_config_from(const IniDocument& doc);
EvaluateConfig evaluate_config_from(const IniDocument& doc, const std::filesystem::path& base_dir);
DiagnoseConfig diagnose_config_from(const IniDocument& doc, const std::filesystem::path& base_dir);

/// Normalized echo of the resolved run settings; loading it reproduces the run.
IniDocument echo(const RunConfig& config);

/// Rejects keys that no reader understands.
void check_known_keys(const IniDocument& doc);

}  // namespace warpsync
