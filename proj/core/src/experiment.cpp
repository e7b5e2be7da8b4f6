#include "hclt/experiment.hpp"

#include "hclt/conditions.hpp"
#include "hclt/error.hpp"
#include "hclt/imputation.hpp"
#include "hclt/io.hpp"
#include "hclt/normality.hpp"
#include "hclt/parallel.hpp"

#include <json.hpp>
#include <toml.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

namespace hclt::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> estimator_names() {
  return {kLindeberg, kLyapunov, kSecondMoment, kCovarianceConvergence, kClt, kEq1Audit, kPartialClt};
}

std::vector<std::string> default_estimators() { return {kLindeberg, kLyapunov, kSecondMoment, kCovarianceConvergence}; }

std::string MechanismConfig::label() const {
  auto f = io::format_double;
  if (kind == "mcar-bernoulli") return kind + "(p=" + f(p) + ")";
  if (kind == "mcar-interval") return kind + "(length=" + f(length) + ")";
  if (kind == "mar-threshold")
    return kind + "(probe=" + f(probe_fraction) + ";threshold=" + f(threshold) + ";above=" + f(p_above) +
           ";below=" + f(p_below) + ")";
  return kind;
}

Mechanism MechanismConfig::build(GridPtr grid) const {
  if (kind == "mcar-bernoulli") return Mechanism::mcar_bernoulli(std::move(grid), p);
  if (kind == "mcar-interval") return Mechanism::mcar_interval(std::move(grid), length);
  if (kind == "mar-threshold") return Mechanism::mar_threshold(std::move(grid), probe_fraction, threshold, p_above, p_below);
  throw ConfigError("unknown mechanism kind '" + kind + "'");
}

// Parsing

namespace {

/// Source lines of config fields, keyed by dotted path.
struct Locator {
  std::map<std::string, std::size_t> lines;
  const std::string* json_text = nullptr;

  std::optional<std::size_t> line(const std::string& path) const {
    if (auto it = lines.find(path); it != lines.end()) return it->second;
    if (json_text) {
      // JSON keys are located by their first occurrence in the text.
      const auto leaf = path.substr(path.find_last_of('.') + 1);
      const auto pos = json_text->find('"' + leaf.substr(0, leaf.find('[')) + '"');
      if (pos != std::string::npos)
        return static_cast<std::size_t>(std::count(json_text->begin(), json_text->begin() + static_cast<std::ptrdiff_t>(pos), '\n')) + 1;
    }
    return std::nullopt;
  }
};

[[noreturn]] void fail(const Locator& where, const std::string& path, const std::string& message) {
  std::string text = "field '" + path + "'";
  if (auto l = where.line(path)) text += " (line " + std::to_string(*l) + ")";
  throw ConfigError(text + ": " + message);
}

json from_toml(const toml::node& node, const std::string& path, Locator& where) {
  if (node.source().begin.line > 0) where.lines[path] = node.source().begin.line;
  if (const auto* table = node.as_table()) {
    json out = json::object();
    for (auto&& [key, value] : *table) {
      const std::string k(key.str());
      out[k] = from_toml(value, path.empty() ? k : path + "." + k, where);
    }
    return out;
  }
  if (const auto* array = node.as_array()) {
    json out = json::array();
    for (std::size_t i = 0; i < array->size(); ++i)
      out.push_back(from_toml(*array->get(i), path + "[" + std::to_string(i) + "]", where));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  fail(where, path, "unsupported value type");
}

std::uint64_t as_uint(const json& v, const Locator& where, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i < 0) fail(where, path, "must be nonnegative");
    return static_cast<std::uint64_t>(i);
  }
  fail(where, path, "must be an integer");
}

double as_double(const json& v, const Locator& where, const std::string& path) {
  if (!v.is_number()) fail(where, path, "must be a number");
  return v.get<double>();
}

std::string as_string(const json& v, const Locator& where, const std::string& path) {
  if (!v.is_string()) fail(where, path, "must be a string");
  return v.get<std::string>();
}

const json& as_array(const json& v, const Locator& where, const std::string& path) {
  if (!v.is_array()) fail(where, path, "must be an array");
  return v;
}

std::uint64_t parse_seed(const json& v, const Locator& where) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    try {
      std::size_t used = 0;
      const auto value = std::stoull(s, &used, 0);
      if (used == s.size()) return value;
    } catch (const std::exception&) {
    }
    fail(where, "seed", "string seeds must be decimal or 0x-prefixed hex");
  }
  return as_uint(v, where, "seed");
}

MechanismConfig parse_mechanism(const json& j, const Locator& where, const std::string& path) {
  if (!j.is_object()) fail(where, path, "must be a table");
  MechanismConfig m;
  static const std::set<std::string> allowed{"kind", "p", "length", "probe_fraction", "threshold", "p_above", "p_below"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail(where, path + "." + it.key(), "unknown mechanism field");
  if (!j.contains("kind")) fail(where, path + ".kind", "missing");
  m.kind = as_string(j.at("kind"), where, path + ".kind");
  if (m.kind == "self-masking")
    fail(where, path + ".kind", "self-masking reads missing values and is not missing at random; it is audit-only");
  if (m.kind != "mcar-bernoulli" && m.kind != "mcar-interval" && m.kind != "mar-threshold")
    fail(where, path + ".kind", "unknown mechanism kind '" + m.kind + "'");
  auto number = [&](const char* key, double& target) {
    if (j.contains(key)) target = as_double(j.at(key), where, path + "." + key);
  };
  number("p", m.p);
  number("length", m.length);
  number("probe_fraction", m.probe_fraction);
  number("threshold", m.threshold);
  number("p_above", m.p_above);
  number("p_below", m.p_below);
  for (auto [key, value] : {std::pair{"p", m.p}, {"length", m.length}, {"probe_fraction", m.probe_fraction},
                            {"p_above", m.p_above}, {"p_below", m.p_below}})
    if (!(value >= 0.0 && value <= 1.0)) fail(where, path + "." + key, "must lie in [0, 1]");
  return m;
}

ExperimentConfig from_json(const json& j, const Locator& where) {
  if (!j.is_object()) throw ConfigError("config root must be a table/object");
  static const std::set<std::string> allowed{"schema_version", "scenario", "scenarios", "grid_size", "basis_size",
                                             "mechanism", "mechanisms", "n_list", "epsilon", "delta", "reps",
                                             "seed", "out", "workers", "estimators"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail(where, it.key(), "unknown field");

  ExperimentConfig c;
  c.estimators.clear();
  if (!j.contains("schema_version")) fail(where, "schema_version", "missing");
  c.schema_version = static_cast<int>(as_uint(j.at("schema_version"), where, "schema_version"));

  if (j.contains("scenario") == j.contains("scenarios")) fail(where, "scenario", "give exactly one of scenario or scenarios");
  if (j.contains("scenario")) {
    c.scenarios.push_back(as_string(j.at("scenario"), where, "scenario"));
  } else {
    const auto& list = as_array(j.at("scenarios"), where, "scenarios");
    for (std::size_t i = 0; i < list.size(); ++i)
      c.scenarios.push_back(as_string(list[i], where, "scenarios[" + std::to_string(i) + "]"));
  }

  if (j.contains("grid_size")) c.grid_size = as_uint(j.at("grid_size"), where, "grid_size");
  if (j.contains("basis_size")) c.basis_size = as_uint(j.at("basis_size"), where, "basis_size");

  if (j.contains("mechanism") && j.contains("mechanisms")) fail(where, "mechanism", "give at most one of mechanism or mechanisms");
  if (j.contains("mechanism")) c.mechanisms.push_back(parse_mechanism(j.at("mechanism"), where, "mechanism"));
  if (j.contains("mechanisms")) {
    const auto& list = as_array(j.at("mechanisms"), where, "mechanisms");
    for (std::size_t i = 0; i < list.size(); ++i)
      c.mechanisms.push_back(parse_mechanism(list[i], where, "mechanisms[" + std::to_string(i) + "]"));
  }

  if (!j.contains("n_list")) fail(where, "n_list", "missing");
  {
    const auto& list = as_array(j.at("n_list"), where, "n_list");
    for (std::size_t i = 0; i < list.size(); ++i)
      c.n_list.push_back(as_uint(list[i], where, "n_list[" + std::to_string(i) + "]"));
  }
  auto doubles = [&](const char* key, std::vector<double>& target) {
    if (!j.contains(key)) return;
    target.clear();
    const auto& list = as_array(j.at(key), where, key);
    for (std::size_t i = 0; i < list.size(); ++i)
      target.push_back(as_double(list[i], where, std::string(key) + "[" + std::to_string(i) + "]"));
  };
  doubles("epsilon", c.epsilon);
  doubles("delta", c.delta);

  if (!j.contains("reps")) fail(where, "reps", "missing");
  c.reps = as_uint(j.at("reps"), where, "reps");
  if (j.contains("seed")) c.seed = parse_seed(j.at("seed"), where);
  if (j.contains("out")) c.out = as_string(j.at("out"), where, "out");
  if (j.contains("workers")) c.workers = static_cast<unsigned>(as_uint(j.at("workers"), where, "workers"));
  if (j.contains("estimators")) {
    const auto& list = as_array(j.at("estimators"), where, "estimators");
    for (std::size_t i = 0; i < list.size(); ++i)
      c.estimators.push_back(as_string(list[i], where, "estimators[" + std::to_string(i) + "]"));
  } else {
    c.estimators = default_estimators();
  }

  try {
    validate(c);
  } catch (const ConfigError& e) {
    // Re-raise with a source line when the message names a field.
    std::string message = e.what();
    const auto open = message.find('\'');
    const auto close = message.find('\'', open + 1);
    if (message.rfind("field '", 0) == 0 && close != std::string::npos && message.find("(line") == std::string::npos) {
      const auto path = message.substr(open + 1, close - open - 1);
      if (auto l = where.line(path)) message.insert(close + 1, " (line " + std::to_string(*l) + ")");
    }
    throw ConfigError(message);
  }
  return c;
}

[[noreturn]] void invalid(const std::string& path, const std::string& message) {
  throw ConfigError("field '" + path + "': " + message);
}

bool scenario_is_gaussian(const ArraySpec& spec);

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.schema_version != kSchemaVersion)
    invalid("schema_version", "unsupported version " + std::to_string(c.schema_version) + " (expected " +
                                  std::to_string(kSchemaVersion) + ")");
  if (c.scenarios.empty()) invalid("scenarios", "at least one scenario is required");
  std::set<std::string> seen;
  for (const auto& s : c.scenarios) {
    if (!presets::exists(s)) invalid("scenario", "unknown scenario '" + s + "'");
    if (!seen.insert(s).second) invalid("scenarios", "scenario '" + s + "' listed twice");
  }
  if (c.grid_size < 8) invalid("grid_size", "must be >= 8");
  if (c.basis_size > c.grid_size / 2) invalid("basis_size", "must not exceed grid_size / 2");
  if (c.n_list.empty()) invalid("n_list", "must be nonempty");
  for (std::size_t i = 0; i < c.n_list.size(); ++i) {
    if (c.n_list[i] < 1) invalid("n_list", "entries must be >= 1");
    if (i > 0 && c.n_list[i] <= c.n_list[i - 1]) invalid("n_list", "must be strictly ascending");
  }
  if (c.epsilon.empty()) invalid("epsilon", "must be nonempty");
  for (double e : c.epsilon)
    if (!(e > 0.0)) invalid("epsilon", "entries must be positive");
  if (c.delta.empty()) invalid("delta", "must be nonempty");
  for (double d : c.delta)
    if (!(d > 0.0)) invalid("delta", "entries must be positive");
  if (c.reps < 100) invalid("reps", "must be >= 100");
  if (c.out.empty()) invalid("out", "must be nonempty");
  if (c.estimators.empty()) invalid("estimators", "must be nonempty");
  const auto known = estimator_names();
  std::set<std::string> chosen;
  for (const auto& e : c.estimators) {
    if (std::find(known.begin(), known.end(), e) == known.end()) invalid("estimators", "unknown estimator '" + e + "'");
    if (!chosen.insert(e).second) invalid("estimators", "estimator '" + e + "' listed twice");
  }
  const bool needs_mechanism = chosen.count(kEq1Audit) || chosen.count(kPartialClt);
  if (needs_mechanism && c.mechanisms.empty()) invalid("mechanisms", "eq1-audit and partial-clt need a mechanism");
  for (std::size_t i = 0; i < c.mechanisms.size(); ++i) {
    const auto& m = c.mechanisms[i];
    if (m.kind != "mcar-bernoulli" && m.kind != "mcar-interval" && m.kind != "mar-threshold")
      invalid("mechanisms[" + std::to_string(i) + "].kind", "unknown or non-MAR mechanism kind '" + m.kind + "'");
  }
  const auto grid = Grid::uniform(c.grid_size);
  for (const auto& s : c.scenarios) {
    try {
      const auto spec = presets::make(s, grid, c.basis_size);
      if (needs_mechanism && !scenario_is_gaussian(spec))
        invalid("scenarios", "'" + s + "' is not Gaussian; eq1-audit and partial-clt need Gaussian coefficient laws");
    } catch (const ArgumentError& e) {
      invalid("basis_size", e.what());
    }
  }
}

ExperimentConfig parse_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n') + 1;
    throw ConfigError("JSON syntax error at line " + std::to_string(line) + ": " + e.what());
  }
  Locator where;
  where.json_text = &text;
  return from_json(j, where);
}

ExperimentConfig parse_toml(const std::string& text) {
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError("TOML syntax error at line " + std::to_string(e.source().begin.line) + ": " +
                      std::string(e.description()));
  }
  Locator where;
  const json j = from_toml(table, "", where);
  return from_json(j, where);
}

ExperimentConfig load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return path.extension() == ".toml" ? parse_toml(buffer.str()) : parse_json(buffer.str());
}

namespace {

json to_json(const ExperimentConfig& c, bool with_runtime_fields) {
  json j;
  j["schema_version"] = c.schema_version;
  j["scenarios"] = c.scenarios;
  j["grid_size"] = c.grid_size;
  j["basis_size"] = c.basis_size;
  json mechanisms = json::array();
  for (const auto& m : c.mechanisms)
    mechanisms.push_back({{"kind", m.kind},
                          {"p", m.p},
                          {"length", m.length},
                          {"probe_fraction", m.probe_fraction},
                          {"threshold", m.threshold},
                          {"p_above", m.p_above},
                          {"p_below", m.p_below}});
  j["mechanisms"] = mechanisms;
  j["n_list"] = c.n_list;
  j["epsilon"] = c.epsilon;
  j["delta"] = c.delta;
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["estimators"] = c.estimators;
  if (with_runtime_fields) {
    j["out"] = c.out;
    j["workers"] = c.workers;
  }
  return j;
}

}  // namespace

std::string serialize(const ExperimentConfig& config) { return to_json(config, true).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& config) {
  const auto text = to_json(config, false).dump();
  return io::hex(detail::hash_tag(text));
}

// Scenario descriptions

namespace {

std::vector<CoefficientLaw> all_laws(const ArraySpec& spec) {
  std::vector<CoefficientLaw> out;
  for (const auto& laws : spec.plan().cycle) out.insert(out.end(), laws.begin(), laws.end());
  for (const auto& [m, laws] : spec.plan().overrides) out.insert(out.end(), laws.begin(), laws.end());
  return out;
}

bool scenario_is_gaussian(const ArraySpec& spec) {
  for (const auto& law : all_laws(spec))
    if (!law.is_degenerate() && law.kind() != LawKind::gaussian) return false;
  return true;
}

}  // namespace

ScenarioInfo describe(const ArraySpec& spec) {
  ScenarioInfo info;
  info.name = spec.name();
  info.basis_size = spec.truncation();
  std::vector<std::string> kinds;
  const auto laws = all_laws(spec);
  for (const auto& law : laws) {
    if (law.is_degenerate()) continue;
    const auto k = to_string(law.kind());
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
  }
  for (std::size_t i = 0; i < kinds.size(); ++i) info.law += (i ? "+" : "") + kinds[i];

  info.variance_finite = std::all_of(laws.begin(), laws.end(), [](const auto& l) { return l.has_finite_abs_moment(2.0); });
  // A member whose multiplier does not shrink with n contributes a fixed,
  // non-vanishing truncated second moment for small epsilon.
  bool fixed_mass = false;
  for (const auto& [m, a] : spec.scaling().fixed)
    for (const auto& law : spec.laws(m))
      if (a != 0.0 && law.variance() > 0.0) fixed_mass = true;
  const bool shrinking = spec.scaling().kind == RowScaling::Kind::inverse_sqrt_n;
  info.lindeberg = shrinking && !fixed_mass && info.variance_finite;
  info.lyapunov1 =
      info.lindeberg && std::all_of(laws.begin(), laws.end(), [](const auto& l) { return l.has_finite_abs_moment(3.0); });
  info.gaussian = scenario_is_gaussian(spec);
  return info;
}

std::vector<ScenarioInfo> list_scenarios() {
  const auto grid = Grid::uniform(presets::kDefaultGridSize);
  std::vector<ScenarioInfo> out;
  for (const auto& name : presets::names()) out.push_back(describe(presets::make(name, grid)));
  return out;
}

std::vector<MechanismInfo> list_mechanisms() {
  return {{"mcar-bernoulli", true, true, true},
          {"mcar-interval", true, true, true},
          {"mar-threshold", true, false, true},
          {"self-masking", false, false, false}};
}

// Running

namespace {

using Row = std::vector<std::string>;

const std::map<std::string, std::vector<std::string>>& headers() {
  static const std::map<std::string, std::vector<std::string>> h{
      {"lindeberg.csv", {"scenario", "n", "epsilon", "estimate", "stderr", "reps", "seed"}},
      {"lyapunov.csv", {"scenario", "n", "delta", "estimate", "stderr", "reps", "seed", "moment_finite"}},
      {"second_moment.csv", {"scenario", "n", "estimate", "stderr", "analytic", "reps", "seed"}},
      {"covariance_convergence.csv", {"scenario", "n", "distance"}},
      {"trend.csv", {"scenario", "functional", "parameter", "slope", "p_value", "vanished", "holds"}},
      {"normality.csv", {"scenario", "n", "test_function", "metric", "value"}},
      {"eq1_audit.csv",
       {"scenario", "mechanism", "n", "m", "cov_distance", "cov_stderr", "moment_gap", "moment_stderr", "pass", "reps",
        "seed"}},
      {"partial_normality.csv", {"scenario", "mechanism", "n", "test_function", "metric", "value"}},
      {"partial_lindeberg.csv",
       {"scenario", "mechanism", "n", "epsilon", "complete", "partial", "combined_stderr", "pass", "reps", "seed"}},
  };
  return h;
}

std::vector<std::string> files_for(const std::string& estimator) {
  if (estimator == kLindeberg) return {"lindeberg.csv", "trend.csv"};
  if (estimator == kLyapunov) return {"lyapunov.csv", "trend.csv"};
  if (estimator == kSecondMoment) return {"second_moment.csv"};
  if (estimator == kCovarianceConvergence) return {"covariance_convergence.csv"};
  if (estimator == kClt) return {"normality.csv"};
  if (estimator == kEq1Audit) return {"eq1_audit.csv"};
  if (estimator == kPartialClt) return {"partial_normality.csv", "partial_lindeberg.csv"};
  return {};
}

struct Task {
  std::string key;
  std::size_t scenario = 0;
  std::string estimator;
  std::size_t n = 0;
  std::optional<std::size_t> mechanism;
  Seed seed;
};

struct TaskOutput {
  std::map<std::string, std::vector<Row>> rows;
  std::vector<ConditionReport> lindeberg;
  std::vector<ConditionReport> lyapunov;
  bool audit_failed = false;
  bool verification_failed = false;
};

std::string num(double v) { return io::format_double(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "true" : "false"; }

void normality_rows(std::vector<Row>& rows, const Row& prefix, const NormalityReport& report) {
  for (const auto& p : report.projections) {
    auto add = [&](const char* metric, const std::string& value) {
      Row row = prefix;
      row.push_back(num(p.index));
      row.push_back(metric);
      row.push_back(value);
      rows.push_back(std::move(row));
    };
    add("pairing", num(p.pairing));
    add("cf_re", num(p.cf.real()));
    add("cf_im", num(p.cf.imag()));
    add("cf_stderr", num(p.cf_stderr));
    add("target", num(p.target.real()));
    add("cf_gap", num(p.cf_gap));
    add("ks", num(p.ks));
    add("ks_band", num(p.ks_band));
    add("skewness", num(p.skewness));
    add("excess_kurtosis", num(p.excess_kurtosis));
    add("skipped", flag(p.skipped));
    add("cf_pass", flag(p.cf_pass));
    add("ks_pass", flag(p.ks_pass));
  }
}

TaskOutput execute(const Task& task, const ExperimentConfig& config, const std::vector<ArraySpec>& specs,
                   const std::vector<ScenarioInfo>& infos, const std::vector<Kernel>& limits,
                   const std::vector<Mechanism>& mechanisms, const std::vector<GridFunction>& tests) {
  constexpr unsigned inner_workers = 1;
  const ArraySpec& spec = specs[task.scenario];
  const std::string& name = spec.name();
  const std::size_t n = task.n;
  const std::string seed_hex = io::hex(task.seed.key());
  const bool largest = n == config.n_list.back();
  TaskOutput out;

  if (task.estimator == kLindeberg) {
    for (std::size_t e = 0; e < config.epsilon.size(); ++e) {
      const double eps = config.epsilon[e];
      const auto r = lindeberg_functional(spec, n, eps, config.reps, task.seed.derive(e), inner_workers);
      out.lindeberg.push_back(r);
      out.rows["lindeberg.csv"].push_back(
          {name, num(n), num(eps), num(r.estimate), num(r.std_error), num(r.reps), io::hex(r.seed.key())});
    }
  } else if (task.estimator == kLyapunov) {
    for (std::size_t d = 0; d < config.delta.size(); ++d) {
      const double delta = config.delta[d];
      const auto r = lyapunov_functional(spec, n, delta, config.reps, task.seed.derive(d), inner_workers);
      bool finite = true;
      for (std::size_t m = 1; m <= std::min<std::size_t>(n, 64); ++m)
        for (const auto& law : spec.laws(m)) finite = finite && law.has_finite_abs_moment(2.0 + delta);
      out.lyapunov.push_back(r);
      out.rows["lyapunov.csv"].push_back({name, num(n), num(delta), num(r.estimate), num(r.std_error), num(r.reps),
                                          io::hex(r.seed.key()), flag(finite)});
    }
  } else if (task.estimator == kSecondMoment) {
    const auto r = second_moment_sum(spec, n, config.reps, task.seed, inner_workers);
    out.rows["second_moment.csv"].push_back({name, num(n), num(r.monte_carlo.estimate), num(r.monte_carlo.std_error),
                                             num(r.analytic), num(config.reps), seed_hex});
  } else if (task.estimator == kCovarianceConvergence) {
    const double distance = kernel_l2_norm(row_covariance_sum(spec, n) - limits[task.scenario]);
    out.rows["covariance_convergence.csv"].push_back({name, num(n), num(distance)});
  } else if (task.estimator == kClt) {
    const std::size_t ns[] = {n};
    const auto reports = clt_verify(spec, limits[task.scenario], ns, tests, config.reps, task.seed, inner_workers);
    normality_rows(out.rows["normality.csv"], {name, num(n)}, reports.front());
    if (largest && infos[task.scenario].lindeberg && !reports.front().pass()) out.verification_failed = true;
  } else if (task.estimator == kEq1Audit) {
    const auto& mech = mechanisms[*task.mechanism];
    const auto label = config.mechanisms[*task.mechanism].label();
    std::vector<std::size_t> members{1};
    if (n > 1) members.push_back(n);
    for (std::size_t m : members) {
      Eq1AuditOptions options;
      options.workers = inner_workers;
      const Seed cell_seed = task.seed.derive(m);
      const auto a = lemma_eq1_audit(spec, n, m, mech, config.reps, cell_seed, options);
      out.audit_failed = out.audit_failed || !a.pass;
      out.rows["eq1_audit.csv"].push_back({name, label, num(n), num(m), num(a.cov_distance), num(a.cov_stderr),
                                           num(a.moment_gap), num(a.moment_stderr), flag(a.pass), num(config.reps),
                                           io::hex(cell_seed.key())});
    }
  } else if (task.estimator == kPartialClt) {
    const auto& mech = mechanisms[*task.mechanism];
    const auto label = config.mechanisms[*task.mechanism].label();
    const std::size_t ns[] = {n};
    const auto paired =
        partial_clt_verify(spec, mech, limits[task.scenario], ns, tests, config.reps, task.seed, inner_workers);
    auto& rows = out.rows["partial_normality.csv"];
    const auto& report = paired.front();
    for (std::size_t t = 0; t < report.differences.size(); ++t) {
      const auto& d = report.differences[t];
      const auto& pc = report.complete.projections[t];
      const auto& pp = report.partial.projections[t];
      auto add = [&](const char* metric, const std::string& value) {
        rows.push_back({name, label, num(n), num(t), metric, value});
      };
      add("complete_cf_gap", num(pc.cf_gap));
      add("partial_cf_gap", num(pp.cf_gap));
      add("complete_ks", num(pc.ks));
      add("partial_ks", num(pp.ks));
      add("ks_band", num(pp.ks_band));
      add("cf_difference", num(d.cf_difference));
      add("combined_stderr", num(d.combined_stderr));
      add("paired_stderr", num(d.paired_stderr));
      add("pass", flag(d.pass));
      if (!d.skipped && !d.pass) out.verification_failed = true;
    }
    for (std::size_t e = 0; e < config.epsilon.size(); ++e) {
      const Seed lf_seed = task.seed.derive("lindeberg").derive(e);
      const auto lf = paired_lindeberg(spec, mech, ns, config.epsilon[e], config.reps, lf_seed, inner_workers);
      const auto& row = lf.front();
      if (!row.pass) out.verification_failed = true;
      out.rows["partial_lindeberg.csv"].push_back({name, label, num(n), num(config.epsilon[e]),
                                                   num(row.complete.estimate), num(row.partial.estimate),
                                                   num(row.combined_stderr), flag(row.pass), num(config.reps),
                                                   io::hex(lf_seed.derive(n).key())});
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace

RunResult run(const ExperimentConfig& config, const RunOptions& options) {
  validate(config);
  const auto started = std::chrono::steady_clock::now();
  const auto grid = Grid::uniform(config.grid_size);
  const Seed root(config.seed);

  std::vector<ArraySpec> specs;
  std::vector<ScenarioInfo> infos;
  std::vector<Kernel> limits;
  for (const auto& s : config.scenarios) {
    specs.push_back(presets::make(s, grid, config.basis_size));
    infos.push_back(describe(specs.back()));
    limits.push_back(presets::limit_covariance(specs.back()));
  }
  std::vector<Mechanism> mechanisms;
  for (const auto& m : config.mechanisms) mechanisms.push_back(m.build(grid));
  const auto tests = standard_test_functions(grid);

  std::vector<Task> tasks;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const Seed scenario_seed = root.derive(config.scenarios[s]);
    for (const auto& estimator : config.estimators) {
      const Seed estimator_seed = scenario_seed.derive(estimator);
      const bool per_mechanism = estimator == kEq1Audit || estimator == kPartialClt;
      const std::size_t mech_count = per_mechanism ? mechanisms.size() : 1;
      for (std::size_t k = 0; k < mech_count; ++k) {
        for (std::size_t n : config.n_list) {
          Task t;
          t.scenario = s;
          t.estimator = estimator;
          t.n = n;
          t.key = config.scenarios[s] + "/" + estimator;
          Seed base = estimator_seed;
          if (per_mechanism) {
            t.mechanism = k;
            t.key += "/" + config.mechanisms[k].label();
            base = base.derive(config.mechanisms[k].label());
          }
          t.key += "/n=" + std::to_string(n);
          t.seed = base.derive(n);
          tasks.push_back(std::move(t));
        }
      }
    }
  }

  std::vector<TaskOutput> outputs(tasks.size());
  parallel_for(tasks.size(), resolve_workers(config.workers), [&](std::size_t i) {
    if (options.before_task) options.before_task(tasks[i].key);
    outputs[i] = execute(tasks[i], config, specs, infos, limits, mechanisms, tests);
  });

  // Deterministic merge in task order.
  std::vector<std::string> files;
  for (const auto& e : config.estimators)
    for (const auto& f : files_for(e))
      if (std::find(files.begin(), files.end(), f) == files.end()) files.push_back(f);
  std::map<std::string, io::CsvTable> tables;
  for (const auto& f : files) tables.emplace(f, io::CsvTable(headers().at(f)));
  RunResult result;
  for (const auto& o : outputs) {
    for (const auto& [file, rows] : o.rows)
      for (const auto& r : rows) {
        auto& table = tables.at(file);
        table.row();
        for (const auto& cell : r) table.add(std::string_view(cell));
      }
    result.audit_failed = result.audit_failed || o.audit_failed;
    result.verification_failed = result.verification_failed || o.verification_failed;
  }
  if (tables.count("trend.csv")) {
    auto& trend = tables.at("trend.csv");
    auto add_trend = [&](const std::string& name, const char* functional, double parameter,
                         const std::vector<ConditionReport>& reports) {
      const auto v = assess_trend(reports);
      trend.row().add(std::string_view(name)).add(functional).add(parameter).add(v.slope).add(v.p_value).add(v.vanished).add(v.holds);
    };
    for (std::size_t s = 0; s < specs.size(); ++s) {
      for (const auto& [functional, params] :
           {std::pair{kLindeberg, &config.epsilon}, std::pair{kLyapunov, &config.delta}}) {
        if (std::find(config.estimators.begin(), config.estimators.end(), functional) == config.estimators.end()) continue;
        for (std::size_t p = 0; p < params->size(); ++p) {
          std::vector<ConditionReport> series;
          for (std::size_t i = 0; i < tasks.size(); ++i)
            if (tasks[i].scenario == s && tasks[i].estimator == functional) {
              const auto& list = functional == std::string(kLindeberg) ? outputs[i].lindeberg : outputs[i].lyapunov;
              series.push_back(list[p]);
            }
          add_trend(config.scenarios[s], functional, (*params)[p], series);
        }
      }
    }
  }

  RunManifest& manifest = result.manifest;
  manifest.config_hash = config_hash(config);
  for (const auto& t : tasks) manifest.tasks.push_back({t.key, t.seed.key()});
  manifest.outputs = files;
  manifest.outputs.push_back("manifest.json");

  const fs::path out_dir(config.out);
  fs::path parent = out_dir.parent_path();
  if (parent.empty()) parent = ".";
  const fs::path staging = parent / ("." + out_dir.filename().string() + ".staging-" + std::to_string(::getpid()));
  std::error_code ignored;
  fs::remove_all(staging, ignored);
  try {
    fs::create_directories(staging);
    for (const auto& [file, table] : tables) write_file(staging / file, table.str());
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json m;
    m["config_hash"] = manifest.config_hash;
    m["tool_version"] = manifest.tool_version;
    m["schema_version"] = kSchemaVersion;
    m["wall_clock_seconds"] = manifest.wall_clock_seconds;
    m["outputs"] = manifest.outputs;
    json task_list = json::array();
    for (const auto& t : manifest.tasks) task_list.push_back({{"key", t.key}, {"seed", io::hex(t.seed)}});
    m["tasks"] = task_list;
    m["config"] = json::parse(serialize(config));
    m["audit_failed"] = result.audit_failed;
    m["verification_failed"] = result.verification_failed;
    write_file(staging / "manifest.json", m.dump(2) + "\n");
    fs::create_directories(out_dir);
    for (const auto& f : manifest.outputs) fs::rename(staging / f, out_dir / f);
    fs::remove_all(staging, ignored);
  } catch (...) {
    fs::remove_all(staging, ignored);
    throw;
  }
  return result;
}

}  // namespace hclt::experiment
