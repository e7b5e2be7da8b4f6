#pragma once

// Monte Carlo estimators of the Lindeberg-Feller and Lyapunov functionals,
// the pathwise inequality linking them, and finite-n trend certification.

#include "hclt/l2.hpp"
#include "hclt/rng.hpp"
#include "hclt/triangular_array.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace hclt {

struct ConditionReport {
  std::size_t n = 0;
  /// epsilon for Lindeberg-Feller, delta for Lyapunov, 0 for plain moments.
  double parameter = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t reps = 0;
  Seed seed;
};

/// ||chi_{n,m}||^2 for replication `rep` of member m. Estimators only see
/// elements through this interface, so complete and imputed elements share
/// one implementation.
using SquaredNormSampler = std::function<double(std::size_t m, std::size_t rep)>;

/// Squared norms of the complete elements: replication r of member m is
/// sample_element(spec, n, m, seed.derive(r)).
SquaredNormSampler complete_norms(const ArraySpec& spec, std::size_t n, Seed seed);

/// Sum over m of E[||chi||^2 ; ||chi|| > epsilon]; requires epsilon > 0 and reps >= 100.
ConditionReport lindeberg_functional(const ArraySpec& spec, std::size_t n, double epsilon, std::size_t reps, Seed seed,
                                     unsigned workers = 0);
ConditionReport lindeberg_functional(const SquaredNormSampler& norms, std::size_t n, double epsilon, std::size_t reps,
                                     Seed seed, unsigned workers = 0);

/// Sum over m of E[||chi||^(2+delta)]; requires delta > 0.
ConditionReport lyapunov_functional(const ArraySpec& spec, std::size_t n, double delta, std::size_t reps, Seed seed,
                                    unsigned workers = 0);
ConditionReport lyapunov_functional(const SquaredNormSampler& norms, std::size_t n, double delta, std::size_t reps,
                                    Seed seed, unsigned workers = 0);

struct DominationCheck {
  ConditionReport lindeberg;
  ConditionReport lyapunov;
  /// lyapunov.estimate / epsilon^delta.
  double bound = 0.0;
  /// Samples where ||x||^2 1{||x|| > eps} > ||x||^(2+delta) / eps^delta + 1e-12.
  std::size_t violations = 0;
  std::size_t samples = 0;
  bool holds = false;
};

/// Evaluates both functionals on the same draws and checks the dominating
/// inequality sample by sample.
DominationCheck lyapunov_dominates_lindeberg(const ArraySpec& spec, std::size_t n, double epsilon, double delta,
                                             std::size_t reps, Seed seed, unsigned workers = 0);

/// Pathwise: ||x||^2 1{||x|| > eps} <= ||x||^(2+delta) / eps^delta.
bool domination_holds(double norm, double epsilon, double delta, double tolerance = 1e-12);

/// kernel_l2_norm(row_covariance_sum(spec, n) - sigma) for each n.
std::vector<std::pair<std::size_t, double>> covariance_sum_convergence(const ArraySpec& spec, const Kernel& sigma,
                                                                       std::span<const std::size_t> n_list);

struct SecondMomentReport {
  ConditionReport monte_carlo;
  /// sum_m sum_j a_{n,m}^2 var(Z_{m,j}).
  double analytic = 0.0;
};

SecondMomentReport second_moment_sum(const ArraySpec& spec, std::size_t n, std::size_t reps, Seed seed,
                                     unsigned workers = 0);
ConditionReport second_moment_sum(const SquaredNormSampler& norms, std::size_t n, std::size_t reps, Seed seed,
                                  unsigned workers = 0);

double analytic_second_moment_sum(const ArraySpec& spec, std::size_t n);

/// Finite-n stand-in for "the limit is zero": either the functional is
/// exactly zero at the largest n, or log-estimate decreases in log-n with a
/// negative least-squares slope and a one-sided Mann-Kendall p-value < 0.01.
struct TrendVerdict {
  double slope = 0.0;
  double p_value = 1.0;
  bool vanished = false;
  bool holds = false;
};

TrendVerdict assess_trend(std::span<const ConditionReport> reports, double alpha = 0.01);

/// Per-n sweeps; the report for n uses seed.derive(n).
std::vector<ConditionReport> sweep_lindeberg(const ArraySpec& spec, std::span<const std::size_t> n_list,
                                             double epsilon, std::size_t reps, Seed seed, unsigned workers = 0);
std::vector<ConditionReport> sweep_lyapunov(const ArraySpec& spec, std::span<const std::size_t> n_list, double delta,
                                            std::size_t reps, Seed seed, unsigned workers = 0);

/// Default n grid 2^2 .. 2^12.
std::vector<std::size_t> default_n_list();

}  // namespace hclt
