#pragma once

// Batch experiments: declarative configs, the scenario x n task matrix, and
// atomic result output.

#include "hclt/missingness.hpp"
#include "hclt/triangular_array.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hclt::experiment {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Config keys of the estimators that `run` can execute.
inline constexpr const char* kLindeberg = "lindeberg";
inline constexpr const char* kLyapunov = "lyapunov";
inline constexpr const char* kSecondMoment = "second-moment";
inline constexpr const char* kCovarianceConvergence = "covariance-convergence";
inline constexpr const char* kClt = "clt";
inline constexpr const char* kEq1Audit = "eq1-audit";
inline constexpr const char* kPartialClt = "partial-clt";

std::vector<std::string> estimator_names();
std::vector<std::string> default_estimators();

struct MechanismConfig {
  /// mcar-bernoulli, mcar-interval or mar-threshold.
  std::string kind = "mcar-bernoulli";
  double p = 0.5;
  double length = 0.3;
  double probe_fraction = 0.25;
  double threshold = 0.0;
  double p_above = 0.9;
  double p_below = 0.4;

  std::string label() const;
  Mechanism build(GridPtr grid) const;

  friend bool operator==(const MechanismConfig&, const MechanismConfig&) = default;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::vector<std::string> scenarios;
  std::size_t grid_size = presets::kDefaultGridSize;
  /// 0 keeps each preset's own truncation.
  std::size_t basis_size = 0;
  std::vector<MechanismConfig> mechanisms;
  std::vector<std::size_t> n_list;
  std::vector<double> epsilon{0.5};
  std::vector<double> delta{1.0};
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  std::string out = "results";
  /// 0 defers to HCLT_WORKERS.
  unsigned workers = 0;
  std::vector<std::string> estimators = default_estimators();

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parse and validate. Errors are ConfigError with the offending field and,
/// when known, the source line.
ExperimentConfig parse_json(const std::string& text);
ExperimentConfig parse_toml(const std::string& text);
/// Format chosen by extension: .toml, otherwise JSON.
ExperimentConfig load(const std::filesystem::path& path);

/// Throws ConfigError on any invariant violation.
void validate(const ExperimentConfig& config);

/// Canonical JSON (sorted keys, every field present).
std::string serialize(const ExperimentConfig& config);

/// FNV-1a over the canonical JSON without `out` and `workers`, which do not
/// affect results. 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct TaskRecord {
  std::string key;
  std::uint64_t seed = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::vector<TaskRecord> tasks;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> outputs;
};

struct RunResult {
  RunManifest manifest;
  /// Some eq1 audit did not pass.
  bool audit_failed = false;
  /// A scenario flagged as satisfying Lindeberg-Feller failed the normality
  /// check at the largest n.
  bool verification_failed = false;
};

struct RunOptions {
  /// Called before each task with its key; a throw simulates a mid-run failure.
  std::function<void(const std::string&)> before_task;
};

/// Executes every (scenario, estimator, n) task and writes CSV tables plus
/// manifest.json into config.out. Files are staged in a sibling directory
/// and renamed into place only after every task succeeded; on failure the
/// staging directory is removed and the exception propagates.
RunResult run(const ExperimentConfig& config, const RunOptions& options = {});

struct ScenarioInfo {
  std::string name;
  std::size_t basis_size = 0;
  std::string law;
  bool lindeberg = false;
  bool lyapunov1 = false;
  bool variance_finite = false;
  bool gaussian = false;
};

ScenarioInfo describe(const ArraySpec& spec);
std::vector<ScenarioInfo> list_scenarios();

struct MechanismInfo {
  std::string name;
  bool mar = false;
  bool mcar = false;
  bool configurable = false;
};
std::vector<MechanismInfo> list_mechanisms();

}  // namespace hclt::experiment
