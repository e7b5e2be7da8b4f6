#pragma once

// Empirical characteristic functionals of row sums, the Gaussian target, and
// projection-based normality reports for complete and partially observed data.

#include "hclt/conditions.hpp"
#include "hclt/imputation.hpp"
#include "hclt/l2.hpp"
#include "hclt/missingness.hpp"
#include "hclt/rng.hpp"
#include "hclt/triangular_array.hpp"

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hclt {

using Complex = std::complex<double>;

struct CharEstimate {
  GridFunction test_function;
  Complex value;
  /// sqrt((var cos + var sin) / reps).
  double std_error = 0.0;
  std::size_t reps = 0;
};

/// reps independent draws of S_n; draw r sums sample_element(spec, n, m, seed.derive(r)) over m.
std::vector<GridFunction> row_sum_samples(const ArraySpec& spec, std::size_t n, std::size_t reps, Seed seed,
                                          unsigned workers = 0);

/// Mean of exp(i <g, s>) over the samples; needs at least two.
CharEstimate empirical_cf(std::span<const GridFunction> samples, const GridFunction& g);

/// Same estimate from precomputed projections <g, s>.
CharEstimate empirical_cf(std::span<const double> projections, const GridFunction& g);

/// exp(-pairing(sigma, g) / 2). Throws CovarianceError if the pairing is below -1e-10.
Complex gaussian_target_cf(const Kernel& sigma, const GridFunction& g);

/// The constant function and the first two cosine/sine pairs.
std::vector<GridFunction> standard_test_functions(const GridPtr& grid);

/// Kolmogorov-Smirnov distance between the sample and N(0, 1).
double ks_statistic(std::vector<double> sample);

/// Quantile of the KS statistic for samples of the given size under the
/// null, from `sims` simulated samples. Results are cached per argument set.
double ks_null_quantile(std::size_t sample_size, double level = 0.99, std::size_t sims = 10000);

struct ProjectionReport {
  std::size_t index = 0;
  double pairing = 0.0;
  bool skipped = false;
  Complex cf;
  double cf_stderr = 0.0;
  Complex target;
  double cf_gap = 0.0;
  double ks = 0.0;
  double ks_band = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  bool cf_pass = false;
  bool ks_pass = false;
};

struct NormalityReport {
  std::size_t n = 0;
  std::size_t reps = 0;
  std::vector<ProjectionReport> projections;
  std::vector<std::string> warnings;

  /// Every non-skipped projection passes both the cf and the KS check.
  bool pass() const;
};

/// Builds a report from projections[t][r] = <g_t, S^(r)>.
NormalityReport normality_report(std::size_t n, const Kernel& sigma, std::span<const GridFunction> test_functions,
                                 const std::vector<std::vector<double>>& projections);

/// Row n uses seed.derive(n). Projections are accumulated in coefficient space.
std::vector<NormalityReport> clt_verify(const ArraySpec& spec, const Kernel& sigma, std::span<const std::size_t> n_list,
                                        std::span<const GridFunction> test_functions, std::size_t reps, Seed seed,
                                        unsigned workers = 0);

struct PairedProjection {
  double cf_difference = 0.0;
  /// sqrt(se_partial^2 + se_complete^2).
  double combined_stderr = 0.0;
  /// Standard error of the per-replication difference.
  double paired_stderr = 0.0;
  bool skipped = false;
  bool pass = false;
};

struct PairedNormalityReport {
  NormalityReport complete;
  NormalityReport partial;
  std::vector<PairedProjection> differences;
};

/// S_n and S'_n from the same element seeds, both summed on the grid so an
/// all-observed mechanism reproduces the complete report bit for bit.
/// Throws UnsupportedLawError for non-Gaussian coefficient laws.
std::vector<PairedNormalityReport> partial_clt_verify(const ArraySpec& spec, const Mechanism& mech, const Kernel& sigma,
                                                      std::span<const std::size_t> n_list,
                                                      std::span<const GridFunction> test_functions, std::size_t reps,
                                                      Seed seed, unsigned workers = 0);

struct PairedLindeberg {
  std::size_t n = 0;
  ConditionReport complete;
  ConditionReport partial;
  double combined_stderr = 0.0;
  bool pass = false;
};

/// Lindeberg-Feller functional on chi and on chi' with shared seeds; row n uses seed.derive(n).
std::vector<PairedLindeberg> paired_lindeberg(const ArraySpec& spec, const Mechanism& mech,
                                              std::span<const std::size_t> n_list, double epsilon, std::size_t reps,
                                              Seed seed, unsigned workers = 0);

}  // namespace hclt
