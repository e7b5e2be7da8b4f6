#pragma once

// Partially observed elements: exact Gaussian conditioning on the observed
// part, conditional noise on the missing part, and Monte Carlo audits of the
// resulting covariance and second moment.

#include "hclt/conditions.hpp"
#include "hclt/l2.hpp"
#include "hclt/missingness.hpp"
#include "hclt/rng.hpp"
#include "hclt/triangular_array.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace hclt {

/// How the missing part is perturbed around its conditional mean.
enum class NoiseMode {
  /// N(0, C) with C the Schur complement.
  conditional_covariance,
  /// N(0, mu mu' + C): the conditional second moment. Audit-only.
  deliberate_break,
};

/// Gaussian law of the values on X0(M) given the values on X1(M).
struct ConditionalLaw {
  std::vector<std::size_t> missing_indices;
  Eigen::VectorXd mean_missing;
  Eigen::MatrixXd cov_missing;

  bool empty() const { return missing_indices.empty(); }
};

/// Kernel route. The prior is checked once for symmetry and PSD (relative 1e-8).
class GaussianConditioner {
 public:
  explicit GaussianConditioner(Kernel prior);

  const Kernel& prior() const { return prior_; }
  /// 1e-10 * trace / G, added to the observed block before factorization.
  double ridge() const { return ridge_; }

  /// `observed` lists the values at pattern.observed_indices() in order.
  ConditionalLaw condition(const MissingnessPattern& pattern, const Eigen::VectorXd& observed) const;

 private:
  Kernel prior_;
  double ridge_;
};

/// mean = S01 (S11 + r I)^{-1} y, cov = S00 - S01 (S11 + r I)^{-1} S10.
/// Throws CovarianceError for a non-PSD prior and GridMismatchError on grid mismatch.
ConditionalLaw condition_gaussian(const Kernel& prior_cov, const MissingnessPattern& pattern,
                                  const Eigen::VectorXd& observed);

/// Factor route for priors F F' with F of size G x J. With A = F1'F1 + r I,
/// the conditional mean is F0 A^{-1} F1' y and the conditional covariance
/// r F0 A^{-1} F0', which equal the kernel-route values for the same ridge.
/// Costs O(G J^2) per call instead of O(|X1|^3).
class FactorConditioner {
 public:
  FactorConditioner(GridPtr grid, Eigen::MatrixXd factor);

  double ridge() const { return ridge_; }
  const Eigen::MatrixXd& factor() const { return factor_; }

  ConditionalLaw condition(const MissingnessPattern& pattern, const Eigen::VectorXd& observed) const;

  /// Overwrites the missing entries of `values` (full grid) with one
  /// imputation drawn from `noise`; observed entries are left untouched.
  /// `mean_only` skips the noise term.
  void impute(const std::vector<bool>& mask, Eigen::VectorXd& values, Stream& noise, NoiseMode mode,
              bool mean_only = false) const;

 private:
  GridPtr grid_;
  Eigen::MatrixXd factor_;
  double ridge_;
};

struct PartialElement {
  GridFunction assembled;
  MissingnessPattern pattern;
  Seed source_seed;
};

/// Observed part copied verbatim; missing part = conditional mean plus one
/// draw from N(0, cov_missing) using the LDL' factor of cov_missing and
/// standard normals from Stream(seed).
PartialElement assemble_partial(const GridFunction& element, const MissingnessPattern& pattern,
                                const Kernel& prior_cov, Seed seed,
                                NoiseMode mode = NoiseMode::conditional_covariance);

/// Seed streams of one (element, pattern, noise) triple. The element stream
/// is the one the complete-data estimators use for the same replication.
struct TripleSeeds {
  Seed element;
  Seed pattern;
  Seed noise;
};
TripleSeeds triple_seeds(Seed replication, std::size_t n, std::size_t m);

/// Draws chi'_{n,m} through the factor route. Refuses non-MAR mechanisms and
/// mechanisms on another grid.
class PartialSampler {
 public:
  PartialSampler(const ArraySpec& spec, Mechanism mech, NoiseMode mode = NoiseMode::conditional_covariance);

  const ArraySpec& spec() const { return spec_; }
  const Mechanism& mechanism() const { return mech_; }

  /// Grid values of chi'_{n,m} for one replication seed. The complete element
  /// for the same seed is written to `complete` when given.
  void draw(std::size_t n, std::size_t m, Seed replication, Eigen::VectorXd& out, Eigen::VectorXd* complete = nullptr,
            std::vector<bool>* mask = nullptr, bool mean_only = false) const;

  PartialElement draw(std::size_t n, std::size_t m, Seed replication) const;

 private:
  const ArraySpec& spec_;
  Mechanism mech_;
  NoiseMode mode_;
};

/// Replication r uses seed.derive(r), matching complete_draws.
ElementDraw partial_draws(const PartialSampler& sampler, std::size_t n, std::size_t m, Seed seed);

/// ||chi'_{n,m}||^2 with the replication seeds of complete_norms.
SquaredNormSampler partial_norms(const PartialSampler& sampler, std::size_t n, Seed seed);

/// Monte Carlo K'_{n,m} over fresh (element, pattern, noise) triples.
KernelEstimate partial_covariance_empirical(const ArraySpec& spec, std::size_t n, std::size_t m, const Mechanism& mech,
                                            std::size_t reps, Seed seed, unsigned workers = 0,
                                            NoiseMode mode = NoiseMode::conditional_covariance);

struct Eq1AuditOptions {
  /// Use the same replication seeds for the complete and partial sample sets.
  bool shared_seeds = false;
  NoiseMode mode = NoiseMode::conditional_covariance;
  unsigned workers = 0;
};

struct Eq1Audit {
  double cov_distance = 0.0;
  double cov_stderr = 0.0;
  double moment_gap = 0.0;
  double moment_stderr = 0.0;
  double partial_moment = 0.0;
  double complete_moment = 0.0;
  bool cov_pass = false;
  bool moment_pass = false;
  bool pass = false;
  std::size_t reps = 0;
};

/// Compares K'_emp with K_emp and mean ||chi'||^2 with mean ||chi||^2. Each
/// comparison passes when within 4 combined standard errors. Throws
/// UnsupportedLawError unless the member's coefficient laws are Gaussian.
Eq1Audit lemma_eq1_audit(const ArraySpec& spec, std::size_t n, std::size_t m, const Mechanism& mech, std::size_t reps,
                         Seed seed, const Eq1AuditOptions& options = {});

/// Mean over (w, M) of the noise-free imputation (data on X1, conditional
/// mean on X0). Its norm should be within a few stderr_bound of zero.
MeanEstimate conditional_mean_check(const ArraySpec& spec, std::size_t n, std::size_t m, const Mechanism& mech,
                                    std::size_t reps, Seed seed, unsigned workers = 0);

/// kernel_l2_norm(sum_m K'_emp - sigma) at equal reps per member, next to the
/// complete-data residual computed from the same replication seeds.
struct RowCovarianceResidual {
  double partial = 0.0;
  double complete = 0.0;
  double partial_stderr = 0.0;
  double complete_stderr = 0.0;
};
RowCovarianceResidual row_covariance_residual(const ArraySpec& spec, std::size_t n, const Mechanism& mech,
                                              const Kernel& sigma, std::size_t reps, Seed seed, unsigned workers = 0);

}  // namespace hclt
