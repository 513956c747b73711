#include "warpsync/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace warpsync {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"mode", "strategy", "sections", "jobs"}},
      {"data",
       {"input", "target1", "target2", "ensemble", "age_model", "input_position_column", "input_value_column",
        "target_position_column", "target_value_column", "ensemble_min_columns"}},
      {"rescale", {"q_lower", "q_upper"}},
      {"prior",
       {"alpha_shape", "alpha_mean", "omega_a", "omega_b", "tau0_mean", "tau0_sd", "sigma_shape", "sigma_mean",
        "mix_a", "mix_b", "taun_mean", "taun_sd", "t_a", "t_b"}},
      {"mcmc", {"samples", "thinning", "burn_in", "thin_interval", "seed", "write_ensemble"}},
      {"kde", {"windows", "min_samples", "log_floor", "min_bandwidth", "bandwidth", "grid_resolution", "age_min", "age_max"}},
      {"simulate",
       {"seed", "target_seed", "points", "weight", "noise", "c1", "c2", "a", "b", "d", "x_max", "span", "step",
        "ensemble_draws", "ensemble_spread", "ensemble_memory", "write_ensemble", "grid", "grid_noise",
        "grid_fractions"}},
      {"evaluate", {"ages", "truth", "grid", "level"}},
      {"diagnose", {"chain", "iat_threshold", "min_length"}},
  };
  return keys;
}

// Typed accessors that name the offending key on failure.
class Reader {
 public:
  Reader(const IniDocument& doc, std::filesystem::path base) : doc_(doc), base_(std::move(base)) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    return doc_.get(section, key);
  }

  template <typename T>
  std::optional<T> number(const std::string& section, const std::string& key) const {
    const auto text = raw(section, key);
    if (!text) return std::nullopt;
    return parse_number<T>(*text, section + "." + key);
  }

  template <typename T>
  void into(T& target, const std::string& section, const std::string& key) const {
    if (auto v = number<T>(section, key)) target = *v;
  }

  template <typename T>
  void into(std::optional<T>& target, const std::string& section, const std::string& key) const {
    if (auto v = number<T>(section, key)) target = *v;
  }

  void flag(bool& target, const std::string& section, const std::string& key) const {
    const auto text = raw(section, key);
    if (!text) return;
    if (*text == "true" || *text == "1" || *text == "yes") target = true;
    else if (*text == "false" || *text == "0" || *text == "no") target = false;
    else throw ConfigError(section + "." + key + ": expected true or false, got '" + *text + "'");
  }

  void path(std::filesystem::path& target, const std::string& section, const std::string& key) const {
    const auto text = raw(section, key);
    if (!text || text->empty()) return;
    std::filesystem::path p(*text);
    target = p.is_absolute() ? p : (base_ / p).lexically_normal();
  }

  std::vector<double> list(const std::string& section, const std::string& key, std::vector<double> fallback) const {
    const auto text = raw(section, key);
    if (!text) return fallback;
    std::vector<double> out;
    std::stringstream ss(*text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(trim(item), section + "." + key));
    if (out.empty()) throw ConfigError(section + "." + key + ": empty list");
    return out;
  }

  template <typename T>
  static T parse_number(const std::string& text, const std::string& name) {
    T value{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end)
      throw ConfigError(name + ": expected a number, got '" + text + "'");
    if constexpr (std::is_floating_point_v<T>)
      if (!std::isfinite(value)) throw ConfigError(name + ": value must be finite");
    return value;
  }

 private:
  const IniDocument& doc_;
  std::filesystem::path base_;
};

std::string path_text(const std::filesystem::path& p) { return p.empty() ? std::string() : p.string(); }

}  // namespace

IniDocument IniDocument::parse(std::istream& in, const std::string& source) {
  IniDocument doc;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(source + ":" + std::to_string(line_no) + ": malformed section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      if (section.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty section name");
      doc.sections_[section];
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError(source + ":" + std::to_string(line_no) + ": key outside of any [section]");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    doc.sections_[section][key] = trim(std::string_view(text).substr(eq + 1));
  }
  return doc;
}

IniDocument IniDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

void IniDocument::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

void IniDocument::set_dotted(const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  const std::string section = trim(std::string_view(assignment).substr(0, dot));
  const std::string key = trim(std::string_view(assignment).substr(dot + 1, eq - dot - 1));
  if (section.empty() || key.empty()) throw ConfigError("override '" + assignment + "' has an empty section or key");
  set(section, key, trim(std::string_view(assignment).substr(eq + 1)));
}

void IniDocument::merge(const IniDocument& other) {
  for (const auto& [section, entries] : other.sections_)
    for (const auto& [key, value] : entries) sections_[section][key] = value;
}

std::optional<std::string> IniDocument::get(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

std::string IniDocument::to_string() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, entries] : sections_) {
    if (entries.empty()) continue;
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
  }
  return out.str();
}

void check_known_keys(const IniDocument& doc) {
  const auto& keys = known_keys();
  for (const auto& [section, entries] : doc.sections()) {
    const auto s = keys.find(section);
    if (s == keys.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : entries)
      if (!s->second.count(key)) throw ConfigError("unknown config key " + section + "." + key);
  }
}

IniDocument preset(const std::string& name) {
  IniDocument doc;
  if (name == "desk") {
    doc.set("run", "sections", "20");
    doc.set("mcmc", "samples", "500");
    doc.set("mcmc", "thinning", "1000");
  } else if (name != "default" && !name.empty()) {
    throw ConfigError("unknown preset '" + name + "' (known: default, desk)");
  }
  return doc;
}

void RunConfig::validate() const {
  if (sections < 2) throw ConfigError("run.sections must be at least 2");
  if (!(q_lower >= 0.0 && q_lower < q_upper && q_upper <= 1.0))
    throw ConfigError("rescale quantiles must satisfy 0 <= q_lower < q_upper <= 1");
  if (input.empty()) throw ConfigError("data.input is required");
  switch (strategy) {
    case Strategy::Single:
      if (target1.empty()) throw ConfigError("single strategy requires data.target1");
      break;
    case Strategy::Double:
      if (target1.empty() || target2.empty())
        throw ConfigError("double strategy requires data.target1 and data.target2");
      break;
    case Strategy::UQ:
      if (ensemble.empty()) throw ConfigError("uq strategy requires data.ensemble");
      break;
  }
  if (mcmc.samples < 1) throw ConfigError("mcmc.samples must be at least 1");
  if (mcmc.thinning < 1) throw ConfigError("mcmc.thinning must be at least 1");
  if (mcmc.thin_interval && *mcmc.thin_interval < 1) throw ConfigError("mcmc.thin_interval must be at least 1");
  if (!(alpha_shape > 0.0) || (alpha_mean && !(*alpha_mean > 0.0)))
    throw ConfigError("prior.alpha_shape and prior.alpha_mean must be positive");
  if (!(omega_a > 0.0 && omega_b > 0.0)) throw ConfigError("prior.omega_a and prior.omega_b must be positive");
  if (!(sigma_shape > 0.0 && sigma_mean > 0.0))
    throw ConfigError("prior.sigma_shape and prior.sigma_mean must be positive");
  if (!(mix_a > 0.0 && mix_b > 0.0)) throw ConfigError("prior.mix_a and prior.mix_b must be positive");
  if (tau0_sd && !(*tau0_sd > 0.0)) throw ConfigError("prior.tau0_sd must be positive");
  if (taun_mean.has_value() != taun_sd.has_value())
    throw ConfigError("prior.taun_mean and prior.taun_sd must be given together");
  if (taun_sd && !(*taun_sd > 0.0)) throw ConfigError("prior.taun_sd must be positive");
  if (!(shape.a > 0.0 && shape.b > 0.0)) throw ConfigError("prior.t_a and prior.t_b must be positive");
  if (kde.min_samples < 1) throw ConfigError("kde.min_samples must be at least 1");
  if (kde.windows < 0) throw ConfigError("kde.windows must be non-negative");
  if (kde.grid_resolution < 0) throw ConfigError("kde.grid_resolution must be non-negative");
  if (!(kde.min_bandwidth > 0.0)) throw ConfigError("kde.min_bandwidth must be positive");
  if (kde.bandwidth && !(*kde.bandwidth > 0.0)) throw ConfigError("kde.bandwidth must be positive");
  if (kde.age_range && !(kde.age_range->first < kde.age_range->second))
    throw ConfigError("kde.age_min must be below kde.age_max");
  if (ensemble_min_columns < 1) throw ConfigError("data.ensemble_min_columns must be at least 1");
}

RunConfig run_config_from(const IniDocument& doc, const std::filesystem::path& base_dir) {
  check_known_keys(doc);
  const Reader r(doc, base_dir);
  RunConfig c;
  if (auto v = r.raw("run", "mode")) c.mode = parse_mode(*v);
  if (auto v = r.raw("run", "strategy")) c.strategy = parse_strategy(*v);
  r.into(c.sections, "run", "sections");

  r.path(c.input, "data", "input");
  r.path(c.target1, "data", "target1");
  r.path(c.target2, "data", "target2");
  r.path(c.ensemble, "data", "ensemble");
  r.path(c.age_model, "data", "age_model");
  r.into(c.input_columns.position_column, "data", "input_position_column");
  r.into(c.input_columns.value_column, "data", "input_value_column");
  r.into(c.target_columns.position_column, "data", "target_position_column");
  r.into(c.target_columns.value_column, "data", "target_value_column");
  r.into(c.ensemble_min_columns, "data", "ensemble_min_columns");

  r.into(c.q_lower, "rescale", "q_lower");
  r.into(c.q_upper, "rescale", "q_upper");

  r.into(c.alpha_shape, "prior", "alpha_shape");
  r.into(c.alpha_mean, "prior", "alpha_mean");
  r.into(c.omega_a, "prior", "omega_a");
  r.into(c.omega_b, "prior", "omega_b");
  r.into(c.tau0_mean, "prior", "tau0_mean");
  r.into(c.tau0_sd, "prior", "tau0_sd");
  r.into(c.sigma_shape, "prior", "sigma_shape");
  r.into(c.sigma_mean, "prior", "sigma_mean");
  r.into(c.mix_a, "prior", "mix_a");
  r.into(c.mix_b, "prior", "mix_b");
  r.into(c.taun_mean, "prior", "taun_mean");
  r.into(c.taun_sd, "prior", "taun_sd");
  r.into(c.shape.a, "prior", "t_a");
  r.into(c.shape.b, "prior", "t_b");

  r.into(c.mcmc.samples, "mcmc", "samples");
  r.into(c.mcmc.thinning, "mcmc", "thinning");
  r.into(c.mcmc.burn_in, "mcmc", "burn_in");
  r.into(c.mcmc.thin_interval, "mcmc", "thin_interval");
  r.into(c.mcmc.seed, "mcmc", "seed");
  r.flag(c.write_ensemble, "mcmc", "write_ensemble");

  r.into(c.kde.windows, "kde", "windows");
  r.into(c.kde.min_samples, "kde", "min_samples");
  r.into(c.kde.log_floor, "kde", "log_floor");
  r.into(c.kde.min_bandwidth, "kde", "min_bandwidth");
  r.into(c.kde.grid_resolution, "kde", "grid_resolution");
  r.into(c.kde.bandwidth, "kde", "bandwidth");
  const auto age_min = r.number<double>("kde", "age_min");
  const auto age_max = r.number<double>("kde", "age_max");
  if (age_min.has_value() != age_max.has_value())
    throw ConfigError("kde.age_min and kde.age_max must be given together");
  if (age_min) c.kde.age_range = std::make_pair(*age_min, *age_max);

  c.validate();
  return c;
}

void SimulateConfig::validate() const {
  chronology.validate();
  spec.validate();
  if (!(targets.span > 0.0 && targets.step > 0.0 && targets.step < targets.span))
    throw ConfigError("simulate.span and simulate.step must be positive with step < span");
  if (ensemble.draws < 1 || !(ensemble.spread >= 0.0) || !(ensemble.memory >= 0.0 && ensemble.memory < 1.0))
    throw ConfigError("simulate ensemble settings out of range");
  for (double n : grid_noise)
    if (!(n >= 0.0)) throw ConfigError("simulate.grid_noise levels must be non-negative");
  for (double f : grid_fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("simulate.grid_fractions must lie in (0, 1]");
}

SimulateConfig simulate_config_from(const IniDocument& doc) {
  check_known_keys(doc);
  const Reader r(doc, {});
  SimulateConfig c;
  r.into(c.spec.seed, "simulate", "seed");
  r.into(c.target_seed, "simulate", "target_seed");
  r.into(c.spec.points, "simulate", "points");
  r.into(c.spec.weight, "simulate", "weight");
  r.into(c.spec.noise_fraction, "simulate", "noise");
  r.into(c.spec.c1, "simulate", "c1");
  r.into(c.spec.c2, "simulate", "c2");
  r.into(c.chronology.a, "simulate", "a");
  r.into(c.chronology.b, "simulate", "b");
  r.into(c.chronology.d, "simulate", "d");
  r.into(c.chronology.x_max, "simulate", "x_max");
  r.into(c.targets.span, "simulate", "span");
  r.into(c.targets.step, "simulate", "step");
  r.into(c.ensemble.draws, "simulate", "ensemble_draws");
  r.into(c.ensemble.spread, "simulate", "ensemble_spread");
  r.into(c.ensemble.memory, "simulate", "ensemble_memory");
  r.flag(c.write_ensemble, "simulate", "write_ensemble");
  r.flag(c.grid, "simulate", "grid");
  c.grid_noise = r.list("simulate", "grid_noise", c.grid_noise);
  c.grid_fractions = r.list("simulate", "grid_fractions", c.grid_fractions);
  c.validate();
  return c;
}

EvaluateConfig evaluate_config_from(const IniDocument& doc, const std::filesystem::path& base_dir) {
  check_known_keys(doc);
  const Reader r(doc, base_dir);
  EvaluateConfig c;
  r.path(c.ages, "evaluate", "ages");
  r.path(c.truth, "evaluate", "truth");
  r.path(c.grid, "evaluate", "grid");
  r.into(c.level, "evaluate", "level");
  if (!(c.level > 0.0 && c.level < 1.0)) throw ConfigError("evaluate.level must lie in (0, 1)");
  if (c.grid.empty() && (c.ages.empty() || c.truth.empty()))
    throw ConfigError("evaluate needs evaluate.ages and evaluate.truth, or evaluate.grid");
  return c;
}

DiagnoseConfig diagnose_config_from(const IniDocument& doc, const std::filesystem::path& base_dir) {
  check_known_keys(doc);
  const Reader r(doc, base_dir);
  DiagnoseConfig c;
  r.path(c.chain, "diagnose", "chain");
  r.into(c.iat_threshold, "diagnose", "iat_threshold");
  r.into(c.min_length, "diagnose", "min_length");
  if (c.chain.empty()) throw ConfigError("diagnose needs diagnose.chain");
  if (!(c.iat_threshold > 0.0)) throw ConfigError("diagnose.iat_threshold must be positive");
  return c;
}

IniDocument echo(const RunConfig& c) {
  IniDocument doc;
  auto num = [](double v) { return format_number(v); };
  auto opt = [&](IniDocument& d, const std::string& s, const std::string& k, const std::optional<double>& v) {
    if (v) d.set(s, k, num(*v));
  };
  doc.set("run", "mode", std::string(to_string(c.mode)));
  doc.set("run", "strategy", std::string(to_string(c.strategy)));
  doc.set("run", "sections", std::to_string(c.sections));

  auto path_key = [&](const std::string& k, const std::filesystem::path& p) {
    if (!p.empty()) doc.set("data", k, path_text(p));
  };
  path_key("input", c.input);
  path_key("target1", c.target1);
  path_key("target2", c.target2);
  path_key("ensemble", c.ensemble);
  path_key("age_model", c.age_model);
  doc.set("data", "input_position_column", std::to_string(c.input_columns.position_column));
  doc.set("data", "input_value_column", std::to_string(c.input_columns.value_column));
  doc.set("data", "target_position_column", std::to_string(c.target_columns.position_column));
  doc.set("data", "target_value_column", std::to_string(c.target_columns.value_column));
  doc.set("data", "ensemble_min_columns", std::to_string(c.ensemble_min_columns));

  doc.set("rescale", "q_lower", num(c.q_lower));
  doc.set("rescale", "q_upper", num(c.q_upper));

  doc.set("prior", "alpha_shape", num(c.alpha_shape));
  opt(doc, "prior", "alpha_mean", c.alpha_mean);
  doc.set("prior", "omega_a", num(c.omega_a));
  doc.set("prior", "omega_b", num(c.omega_b));
  opt(doc, "prior", "tau0_mean", c.tau0_mean);
  opt(doc, "prior", "tau0_sd", c.tau0_sd);
  doc.set("prior", "sigma_shape", num(c.sigma_shape));
  doc.set("prior", "sigma_mean", num(c.sigma_mean));
  doc.set("prior", "mix_a", num(c.mix_a));
  doc.set("prior", "mix_b", num(c.mix_b));
  opt(doc, "prior", "taun_mean", c.taun_mean);
  opt(doc, "prior", "taun_sd", c.taun_sd);
  doc.set("prior", "t_a", num(c.shape.a));
  doc.set("prior", "t_b", num(c.shape.b));

  doc.set("mcmc", "samples", std::to_string(c.mcmc.samples));
  doc.set("mcmc", "thinning", std::to_string(c.mcmc.thinning));
  if (c.mcmc.burn_in) doc.set("mcmc", "burn_in", std::to_string(*c.mcmc.burn_in));
  if (c.mcmc.thin_interval) doc.set("mcmc", "thin_interval", std::to_string(*c.mcmc.thin_interval));
  doc.set("mcmc", "seed", std::to_string(c.mcmc.seed));
  doc.set("mcmc", "write_ensemble", c.write_ensemble ? "true" : "false");

  if (c.strategy == Strategy::UQ) {
    doc.set("kde", "windows", std::to_string(c.kde.windows));
    doc.set("kde", "min_samples", std::to_string(c.kde.min_samples));
    doc.set("kde", "log_floor", num(c.kde.log_floor));
    doc.set("kde", "min_bandwidth", num(c.kde.min_bandwidth));
    doc.set("kde", "grid_resolution", std::to_string(c.kde.grid_resolution));
    if (c.kde.bandwidth) doc.set("kde", "bandwidth", num(*c.kde.bandwidth));
    if (c.kde.age_range) {
      doc.set("kde", "age_min", num(c.kde.age_range->first));
      doc.set("kde", "age_max", num(c.kde.age_range->second));
    }
  }
  return doc;
}

}  // namespace warpsync
