#include "hclt/normality.hpp"

#include "hclt/error.hpp"
#include "hclt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace hclt {

namespace {

constexpr std::size_t kRepChunk = 64;
constexpr double kSkipPairing = 1e-14;

/// Runs body(r) for r in [0, reps) in fixed chunks.
template <typename Body>
void over_reps(std::size_t reps, unsigned workers, Body&& body) {
  const Chunking chunks{reps, kRepChunk};
  parallel_for(chunks.chunks(), workers, [&](std::size_t c) {
    for (std::size_t r = chunks.begin(c); r < chunks.end(c); ++r) body(r);
  });
}

Eigen::MatrixXd weighted_tests(std::span<const GridFunction> test_functions, const GridPtr& grid) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid->size()), static_cast<Eigen::Index>(test_functions.size()));
  for (std::size_t t = 0; t < test_functions.size(); ++t) {
    require_same_grid(grid, test_functions[t].grid());
    out.col(static_cast<Eigen::Index>(t)) = grid->weight_vector().cwiseProduct(test_functions[t].values());
  }
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double ks_sorted(const std::vector<double>& sorted, const auto& cdf) {
  const double count = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / count - f, f - static_cast<double>(i) / count});
  }
  return d;
}

struct CfAccumulator {
  double sum_c = 0.0, sum_s = 0.0, sq_c = 0.0, sq_s = 0.0;
  void add(double u) {
    const double c = std::cos(u), s = std::sin(u);
    sum_c += c;
    sum_s += s;
    sq_c += c * c;
    sq_s += s * s;
  }
};

CharEstimate finish_cf(const CfAccumulator& acc, std::size_t reps, const GridFunction& g) {
  if (reps < 2) throw ArgumentError("empirical_cf needs at least two samples");
  const double count = static_cast<double>(reps);
  const double mc = acc.sum_c / count, ms = acc.sum_s / count;
  const double var_c = std::max(acc.sq_c / count - mc * mc, 0.0) * count / (count - 1.0);
  const double var_s = std::max(acc.sq_s / count - ms * ms, 0.0) * count / (count - 1.0);
  return {g, Complex{mc, ms}, std::sqrt((var_c + var_s) / count), reps};
}

struct Moments {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

Moments standardized_moments(const std::vector<double>& z) {
  const double count = static_cast<double>(z.size());
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= count;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : z) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= count;
  m3 /= count;
  m4 /= count;
  if (m2 <= 0.0) return {};
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

}  // namespace

std::vector<GridFunction> row_sum_samples(const ArraySpec& spec, std::size_t n, std::size_t reps, Seed seed,
                                          unsigned workers) {
  if (n < 1) throw IndexError("row index n must be >= 1");
  if (reps < 1) throw ArgumentError("row_sum_samples needs reps >= 1");
  std::vector<Eigen::VectorXd> sums(reps);
  over_reps(reps, workers, [&](std::size_t r) {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.truncation()));
    Eigen::VectorXd c(total.size());
    const Seed rep_seed = seed.derive(r);
    for (std::size_t m = 1; m <= n; ++m) {
      Stream stream(element_seed(rep_seed, n, m));
      spec.draw_coefficients(n, m, stream, c);
      total += c;
    }
    sums[r] = std::move(total);
  });
  std::vector<GridFunction> out;
  out.reserve(reps);
  for (const auto& s : sums) out.push_back(spec.expand(s));
  return out;
}

CharEstimate empirical_cf(std::span<const GridFunction> samples, const GridFunction& g) {
  CfAccumulator acc;
  for (const auto& s : samples) acc.add(inner_product(g, s));
  return finish_cf(acc, samples.size(), g);
}

CharEstimate empirical_cf(std::span<const double> projections, const GridFunction& g) {
  CfAccumulator acc;
  for (double u : projections) acc.add(u);
  return finish_cf(acc, projections.size(), g);
}

Complex gaussian_target_cf(const Kernel& sigma, const GridFunction& g) {
  const double p = pairing(sigma, g);
  if (p < -1e-10) throw CovarianceError("negative pairing " + std::to_string(p) + ": kernel is not PSD");
  return {std::exp(-0.5 * std::max(p, 0.0)), 0.0};
}

std::vector<GridFunction> standard_test_functions(const GridPtr& grid) { return fourier_basis(grid, 5); }

double ks_statistic(std::vector<double> sample) {
  if (sample.empty()) throw ArgumentError("ks_statistic needs a nonempty sample");
  std::sort(sample.begin(), sample.end());
  return ks_sorted(sample, normal_cdf);
}

double ks_null_quantile(std::size_t sample_size, double level, std::size_t sims) {
  if (sample_size < 1 || sims < 2) throw ArgumentError("ks_null_quantile needs sample_size >= 1 and sims >= 2");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("level must lie in (0, 1)");
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, double, std::size_t>, double> cache;
  const auto key = std::make_tuple(sample_size, level, sims);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  // The statistic is distribution-free for continuous nulls, so uniform order
  // statistics compared with the identity cdf simulate it exactly. They are
  // drawn directly as normalized partial sums of n + 1 unit exponentials.
  const Seed root = Seed(0x4b53ULL).derive(sample_size);
  std::vector<double> stats(sims);
  std::vector<double> sample(sample_size);
  for (std::size_t s = 0; s < sims; ++s) {
    Stream stream(root.derive(s));
    double total = 0.0;
    for (auto& v : sample) {
      total -= std::log1p(-stream.uniform());
      v = total;
    }
    total -= std::log1p(-stream.uniform());
    const double inv = 1.0 / total;
    for (auto& v : sample) v *= inv;
    stats[s] = ks_sorted(sample, [](double u) { return u; });
  }
  std::sort(stats.begin(), stats.end());
  const auto idx = std::min(sims - 1, static_cast<std::size_t>(std::ceil(level * static_cast<double>(sims))) - 1);
  const double q = stats[idx];
  std::lock_guard lock(mutex);
  cache.emplace(key, q);
  return q;
}

bool NormalityReport::pass() const {
  return std::all_of(projections.begin(), projections.end(),
                     [](const ProjectionReport& p) { return p.skipped || (p.cf_pass && p.ks_pass); });
}

NormalityReport normality_report(std::size_t n, const Kernel& sigma, std::span<const GridFunction> test_functions,
                                 const std::vector<std::vector<double>>& projections) {
  if (projections.size() != test_functions.size()) throw ArgumentError("one projection set per test function");
  NormalityReport report;
  report.n = n;
  report.reps = projections.empty() ? 0 : projections.front().size();
  const double band = ks_null_quantile(report.reps);
  for (std::size_t t = 0; t < test_functions.size(); ++t) {
    ProjectionReport p;
    p.index = t;
    p.pairing = pairing(sigma, test_functions[t]);
    p.target = gaussian_target_cf(sigma, test_functions[t]);
    const auto cf = empirical_cf(std::span<const double>(projections[t]), test_functions[t]);
    p.cf = cf.value;
    p.cf_stderr = cf.std_error;
    p.cf_gap = std::abs(p.cf - p.target);
    p.cf_pass = p.cf_gap <= 4.0 * p.cf_stderr;
    p.ks_band = band;
    if (p.pairing <= kSkipPairing) {
      p.skipped = true;
      report.warnings.push_back("test function " + std::to_string(t) + " has zero limit variance; skipped");
    } else {
      std::vector<double> z(projections[t]);
      const double scale = 1.0 / std::sqrt(p.pairing);
      for (auto& v : z) v *= scale;
      const auto moments = standardized_moments(z);
      p.skewness = moments.skewness;
      p.excess_kurtosis = moments.excess_kurtosis;
      p.ks = ks_statistic(std::move(z));
      p.ks_pass = p.ks <= band;
    }
    report.projections.push_back(p);
  }
  return report;
}

std::vector<NormalityReport> clt_verify(const ArraySpec& spec, const Kernel& sigma, std::span<const std::size_t> n_list,
                                        std::span<const GridFunction> test_functions, std::size_t reps, Seed seed,
                                        unsigned workers) {
  require_same_grid(spec.grid(), sigma.grid());
  if (reps < 2) throw ArgumentError("clt_verify needs reps >= 2");
  const Eigen::MatrixXd loading = spec.basis_matrix().transpose() * weighted_tests(test_functions, spec.grid());
  const std::size_t tests = test_functions.size();
  std::vector<NormalityReport> out;
  for (std::size_t n : n_list) {
    if (n < 1) throw IndexError("row index n must be >= 1");
    const Seed row_seed = seed.derive(n);
    std::vector<std::vector<double>> projections(tests, std::vector<double>(reps));
    over_reps(reps, workers, [&](std::size_t r) {
      Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.truncation()));
      Eigen::VectorXd c(total.size());
      const Seed rep_seed = row_seed.derive(r);
      for (std::size_t m = 1; m <= n; ++m) {
        Stream stream(element_seed(rep_seed, n, m));
        spec.draw_coefficients(n, m, stream, c);
        total += c;
      }
      const Eigen::VectorXd u = loading.transpose() * total;
      for (std::size_t t = 0; t < tests; ++t) projections[t][r] = u[static_cast<Eigen::Index>(t)];
    });
    out.push_back(normality_report(n, sigma, test_functions, projections));
  }
  return out;
}

std::vector<PairedNormalityReport> partial_clt_verify(const ArraySpec& spec, const Mechanism& mech, const Kernel& sigma,
                                                      std::span<const std::size_t> n_list,
                                                      std::span<const GridFunction> test_functions, std::size_t reps,
                                                      Seed seed, unsigned workers) {
  require_same_grid(spec.grid(), sigma.grid());
  if (reps < 2) throw ArgumentError("partial_clt_verify needs reps >= 2");
  const PartialSampler sampler(spec, mech);
  const Eigen::MatrixXd weighted = weighted_tests(test_functions, spec.grid());
  const std::size_t tests = test_functions.size();
  const auto g = static_cast<Eigen::Index>(spec.grid()->size());
  std::vector<PairedNormalityReport> out;
  for (std::size_t n : n_list) {
    if (n < 1) throw IndexError("row index n must be >= 1");
    if (!spec.is_gaussian(n))
      throw UnsupportedLawError("partial-data normality needs Gaussian coefficient laws; '" + spec.name() +
                                "' is not Gaussian");
    const Seed row_seed = seed.derive(n);
    std::vector<std::vector<double>> complete(tests, std::vector<double>(reps));
    std::vector<std::vector<double>> partial(tests, std::vector<double>(reps));
    over_reps(reps, workers, [&](std::size_t r) {
      Eigen::VectorXd s_complete = Eigen::VectorXd::Zero(g);
      Eigen::VectorXd s_partial = Eigen::VectorXd::Zero(g);
      Eigen::VectorXd x(g), x_complete(g);
      const Seed rep_seed = row_seed.derive(r);
      for (std::size_t m = 1; m <= n; ++m) {
        sampler.draw(n, m, rep_seed, x, &x_complete);
        s_complete += x_complete;
        s_partial += x;
      }
      const Eigen::VectorXd uc = weighted.transpose() * s_complete;
      const Eigen::VectorXd up = weighted.transpose() * s_partial;
      for (std::size_t t = 0; t < tests; ++t) {
        complete[t][r] = uc[static_cast<Eigen::Index>(t)];
        partial[t][r] = up[static_cast<Eigen::Index>(t)];
      }
    });
    PairedNormalityReport paired;
    paired.complete = normality_report(n, sigma, test_functions, complete);
    paired.partial = normality_report(n, sigma, test_functions, partial);
    const double count = static_cast<double>(reps);
    for (std::size_t t = 0; t < tests; ++t) {
      const auto& pc = paired.complete.projections[t];
      const auto& pp = paired.partial.projections[t];
      PairedProjection d;
      d.skipped = pc.skipped;
      d.cf_difference = std::abs(pp.cf - pc.cf);
      d.combined_stderr = std::hypot(pp.cf_stderr, pc.cf_stderr);
      double sum_re = 0.0, sum_im = 0.0, sq_re = 0.0, sq_im = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        const double dr = std::cos(partial[t][r]) - std::cos(complete[t][r]);
        const double di = std::sin(partial[t][r]) - std::sin(complete[t][r]);
        sum_re += dr;
        sum_im += di;
        sq_re += dr * dr;
        sq_im += di * di;
      }
      const double var = (std::max(sq_re / count - (sum_re / count) * (sum_re / count), 0.0) +
                          std::max(sq_im / count - (sum_im / count) * (sum_im / count), 0.0)) *
                         count / (count - 1.0);
      d.paired_stderr = std::sqrt(var / count);
      d.pass = d.cf_difference <= 4.0 * d.combined_stderr;
      paired.differences.push_back(d);
    }
    out.push_back(std::move(paired));
  }
  return out;
}

std::vector<PairedLindeberg> paired_lindeberg(const ArraySpec& spec, const Mechanism& mech,
                                              std::span<const std::size_t> n_list, double epsilon, std::size_t reps,
                                              Seed seed, unsigned workers) {
  const PartialSampler sampler(spec, mech);
  std::vector<PairedLindeberg> out;
  for (std::size_t n : n_list) {
    const Seed row_seed = seed.derive(n);
    PairedLindeberg row;
    row.n = n;
    row.complete = lindeberg_functional(complete_norms(spec, n, row_seed), n, epsilon, reps, row_seed, workers);
    row.partial = lindeberg_functional(partial_norms(sampler, n, row_seed), n, epsilon, reps, row_seed, workers);
    row.combined_stderr = std::hypot(row.complete.std_error, row.partial.std_error);
    row.pass = std::abs(row.partial.estimate - row.complete.estimate) <= 4.0 * row.combined_stderr;
    out.push_back(row);
  }
  return out;
}

}  // namespace hclt
