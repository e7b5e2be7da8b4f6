// hclt: batch driver for the triangular-array experiments.

#include <hclt/error.hpp>
#include <hclt/experiment.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace ex = hclt::experiment;

enum Exit : int { kOk = 0, kConfigError = 1, kRuntimeError = 2, kCheckFailed = 3 };

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::size_t> reps;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config (.json or .toml)")->required();
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--seed", o.seed, "Root seed (unsigned 64-bit)");
  cmd->add_option("--workers", o.workers, "Worker threads (default: $HCLT_WORKERS or 1)");
  cmd->add_option("--reps", o.reps, "Monte Carlo replications per estimate");
}

ex::ExperimentConfig resolve(const Overrides& o) {
  auto config = ex::load(o.config);
  if (o.out) config.out = *o.out;
  if (o.seed) config.seed = *o.seed;
  if (o.workers) config.workers = *o.workers;
  if (o.reps) config.reps = *o.reps;
  ex::validate(config);
  return config;
}

int report(const ex::RunResult& result, const ex::ExperimentConfig& config) {
  std::cout << "config " << result.manifest.config_hash << ": wrote " << result.manifest.outputs.size()
            << " files to " << config.out << " in " << std::fixed << std::setprecision(2)
            << result.manifest.wall_clock_seconds << " s\n";
  if (result.audit_failed) std::cout << "FAIL: covariance audit outside tolerance\n";
  if (result.verification_failed) std::cout << "FAIL: normality check failed for a scenario expected to pass\n";
  return result.audit_failed || result.verification_failed ? kCheckFailed : kOk;
}

void print_scenarios() {
  auto yes = [](bool b) { return b ? "yes" : "no"; };
  std::cout << std::left << std::setw(16) << "scenario" << std::setw(4) << "J" << std::setw(20) << "law"
            << std::setw(5) << "LF" << std::setw(14) << "Lyapunov(1)" << std::setw(10) << "variance" << "gaussian\n";
  for (const auto& s : ex::list_scenarios())
    std::cout << std::setw(16) << s.name << std::setw(4) << s.basis_size << std::setw(20) << s.law << std::setw(5)
              << yes(s.lindeberg) << std::setw(14) << yes(s.lyapunov1) << std::setw(10)
              << (s.variance_finite ? "finite" : "infinite") << yes(s.gaussian) << '\n';
  std::cout << '\n' << std::setw(16) << "mechanism" << std::setw(6) << "MAR" << std::setw(6) << "MCAR" << "config\n";
  for (const auto& m : ex::list_mechanisms())
    std::cout << std::setw(16) << m.name << std::setw(6) << yes(m.mar) << std::setw(6) << yes(m.mcar)
              << (m.configurable ? "yes" : "audit-only") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo checks for central limit theorems of functional triangular arrays"};
  app.require_subcommand(1);

  Overrides run_flags, audit_flags, verify_flags;
  auto* run = app.add_subcommand("run", "Run every estimator listed in the config");
  add_run_flags(run, run_flags);
  auto* list = app.add_subcommand("list-scenarios", "List presets and mechanisms with their hypothesis flags");
  auto* audit = app.add_subcommand("audit-eq1", "Covariance and second-moment audit of the imputed elements");
  add_run_flags(audit, audit_flags);
  auto* verify = app.add_subcommand("verify-clt", "Projection normality checks of the row sums");
  add_run_flags(verify, verify_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (list->parsed()) {
      print_scenarios();
      return kOk;
    }
    if (run->parsed()) {
      const auto config = resolve(run_flags);
      return report(ex::run(config), config);
    }
    if (audit->parsed()) {
      auto config = ex::load(audit_flags.config);
      config.estimators = {ex::kEq1Audit};
      if (config.mechanisms.empty()) {
        ex::MechanismConfig bernoulli, interval, threshold;
        interval.kind = "mcar-interval";
        threshold.kind = "mar-threshold";
        config.mechanisms = {bernoulli, interval, threshold};
      }
      Overrides o = audit_flags;
      if (o.out) config.out = *o.out;
      if (o.seed) config.seed = *o.seed;
      if (o.workers) config.workers = *o.workers;
      if (o.reps) config.reps = *o.reps;
      ex::validate(config);
      return report(ex::run(config), config);
    }
    if (verify->parsed()) {
      auto config = resolve(verify_flags);
      config.estimators = {ex::kClt};
      return report(ex::run(config), config);
    }
  } catch (const hclt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
