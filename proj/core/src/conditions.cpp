#include "hclt/conditions.hpp"

#include "hclt/error.hpp"
#include "hclt/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace hclt {

namespace {

struct Welford {
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t count = 0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

/// sum_m E[f(||chi_{n,m}||^2)] with stderr sqrt(sum_m var_m / reps). Work is
/// split by member, and each member's replications run in order.
template <typename F>
ConditionReport member_sum(const SquaredNormSampler& norms, std::size_t n, double parameter, std::size_t reps,
                           Seed seed, unsigned workers, F&& transform) {
  if (n < 1) throw IndexError("row index n must be >= 1");
  std::vector<Welford> stats(n);
  parallel_for(n, workers, [&](std::size_t idx) {
    Welford w;
    for (std::size_t r = 0; r < reps; ++r) w.add(transform(norms(idx + 1, r)));
    stats[idx] = w;
  });
  ConditionReport report{n, parameter, 0.0, 0.0, reps, seed};
  double variance = 0.0;
  for (const auto& w : stats) {
    report.estimate += w.mean;
    variance += w.variance();
  }
  report.std_error = std::sqrt(variance / static_cast<double>(reps));
  return report;
}

void require_reps(std::size_t reps, std::size_t minimum, const char* what) {
  if (reps < minimum)
    throw ArgumentError(std::string(what) + " needs reps >= " + std::to_string(minimum));
}

double lindeberg_term(double sq_norm, double epsilon) {
  return std::sqrt(sq_norm) > epsilon ? sq_norm : 0.0;
}

double lyapunov_term(double sq_norm, double delta) { return std::pow(sq_norm, 1.0 + delta / 2.0); }

}  // namespace

SquaredNormSampler complete_norms(const ArraySpec& spec, std::size_t n, Seed seed) {
  return [&spec, n, seed](std::size_t m, std::size_t rep) {
    thread_local Eigen::VectorXd coefficients;
    coefficients.resize(static_cast<Eigen::Index>(spec.truncation()));
    Stream stream(element_seed(seed.derive(rep), n, m));
    spec.draw_coefficients(n, m, stream, coefficients);
    return spec.squared_norm(coefficients);
  };
}

ConditionReport lindeberg_functional(const SquaredNormSampler& norms, std::size_t n, double epsilon, std::size_t reps,
                                     Seed seed, unsigned workers) {
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  require_reps(reps, 100, "lindeberg_functional");
  return member_sum(norms, n, epsilon, reps, seed, workers, [=](double sq) { return lindeberg_term(sq, epsilon); });
}

ConditionReport lindeberg_functional(const ArraySpec& spec, std::size_t n, double epsilon, std::size_t reps, Seed seed,
                                     unsigned workers) {
  return lindeberg_functional(complete_norms(spec, n, seed), n, epsilon, reps, seed, workers);
}

ConditionReport lyapunov_functional(const SquaredNormSampler& norms, std::size_t n, double delta, std::size_t reps,
                                    Seed seed, unsigned workers) {
  if (!(delta > 0.0)) throw ArgumentError("delta must be positive");
  require_reps(reps, 2, "lyapunov_functional");
  return member_sum(norms, n, delta, reps, seed, workers, [=](double sq) { return lyapunov_term(sq, delta); });
}

ConditionReport lyapunov_functional(const ArraySpec& spec, std::size_t n, double delta, std::size_t reps, Seed seed,
                                    unsigned workers) {
  return lyapunov_functional(complete_norms(spec, n, seed), n, delta, reps, seed, workers);
}

bool domination_holds(double norm, double epsilon, double delta, double tolerance) {
  const double lhs = norm > epsilon ? norm * norm : 0.0;
  const double rhs = std::pow(norm, 2.0 + delta) / std::pow(epsilon, delta);
  return lhs <= rhs + tolerance;
}

DominationCheck lyapunov_dominates_lindeberg(const ArraySpec& spec, std::size_t n, double epsilon, double delta,
                                             std::size_t reps, Seed seed, unsigned workers) {
  if (!(epsilon > 0.0) || !(delta > 0.0)) throw ArgumentError("epsilon and delta must be positive");
  require_reps(reps, 2, "lyapunov_dominates_lindeberg");
  if (n < 1) throw IndexError("row index n must be >= 1");
  const auto norms = complete_norms(spec, n, seed);
  struct Member {
    Welford lf;
    Welford lyap;
    std::size_t violations = 0;
  };
  std::vector<Member> members(n);
  parallel_for(n, workers, [&](std::size_t idx) {
    Member local;
    for (std::size_t r = 0; r < reps; ++r) {
      const double sq = norms(idx + 1, r);
      local.lf.add(lindeberg_term(sq, epsilon));
      local.lyap.add(lyapunov_term(sq, delta));
      if (!domination_holds(std::sqrt(sq), epsilon, delta)) ++local.violations;
    }
    members[idx] = local;
  });
  DominationCheck check;
  check.lindeberg = {n, epsilon, 0.0, 0.0, reps, seed};
  check.lyapunov = {n, delta, 0.0, 0.0, reps, seed};
  double lf_var = 0.0;
  double lyap_var = 0.0;
  for (const auto& m : members) {
    check.lindeberg.estimate += m.lf.mean;
    check.lyapunov.estimate += m.lyap.mean;
    lf_var += m.lf.variance();
    lyap_var += m.lyap.variance();
    check.violations += m.violations;
  }
  check.lindeberg.std_error = std::sqrt(lf_var / static_cast<double>(reps));
  check.lyapunov.std_error = std::sqrt(lyap_var / static_cast<double>(reps));
  check.bound = check.lyapunov.estimate / std::pow(epsilon, delta);
  check.samples = n * reps;
  check.holds = check.violations == 0;
  return check;
}

std::vector<std::pair<std::size_t, double>> covariance_sum_convergence(const ArraySpec& spec, const Kernel& sigma,
                                                                       std::span<const std::size_t> n_list) {
  require_same_grid(spec.grid(), sigma.grid());
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(n_list.size());
  for (std::size_t n : n_list) out.emplace_back(n, kernel_l2_norm(row_covariance_sum(spec, n) - sigma));
  return out;
}

double analytic_second_moment_sum(const ArraySpec& spec, std::size_t n) {
  if (n < 1) throw IndexError("row index n must be >= 1");
  double total = 0.0;
  for (std::size_t m = 1; m <= n; ++m) {
    const double a = spec.multiplier(n, m);
    for (const auto& law : spec.laws(m)) total += a * a * law.variance();
  }
  return total;
}

ConditionReport second_moment_sum(const SquaredNormSampler& norms, std::size_t n, std::size_t reps, Seed seed,
                                  unsigned workers) {
  require_reps(reps, 100, "second_moment_sum");
  return member_sum(norms, n, 0.0, reps, seed, workers, [](double sq) { return sq; });
}

SecondMomentReport second_moment_sum(const ArraySpec& spec, std::size_t n, std::size_t reps, Seed seed,
                                     unsigned workers) {
  return {second_moment_sum(complete_norms(spec, n, seed), n, reps, seed, workers),
          analytic_second_moment_sum(spec, n)};
}

TrendVerdict assess_trend(std::span<const ConditionReport> reports, double alpha) {
  TrendVerdict verdict;
  if (reports.empty()) return verdict;
  std::vector<ConditionReport> sorted(reports.begin(), reports.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.n < b.n; });
  verdict.vanished = sorted.back().estimate == 0.0;

  // Least-squares slope of log estimate on log n over positive estimates.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t k = 0;
  for (const auto& r : sorted) {
    if (!(r.estimate > 0.0)) continue;
    const double x = std::log(static_cast<double>(r.n));
    const double y = std::log(r.estimate);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++k;
  }
  if (k >= 2) {
    const double denom = static_cast<double>(k) * sxx - sx * sx;
    verdict.slope = denom > 0.0 ? (static_cast<double>(k) * sxy - sx * sy) / denom : 0.0;
  }

  // One-sided Mann-Kendall test for a decreasing trend, normal approximation
  // with tie correction and continuity correction.
  const std::size_t count = sorted.size();
  if (count >= 3) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = i + 1; j < count; ++j) {
        const double d = sorted[j].estimate - sorted[i].estimate;
        s += (d > 0.0) - (d < 0.0);
      }
    std::vector<double> values;
    for (const auto& r : sorted) values.push_back(r.estimate);
    std::sort(values.begin(), values.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < count;) {
      std::size_t j = i;
      while (j < count && values[j] == values[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
      i = j;
    }
    const double nn = static_cast<double>(count);
    const double var = (nn * (nn - 1.0) * (2.0 * nn + 5.0) - tie_term) / 18.0;
    if (var > 0.0) {
      const double z = s < 0.0 ? (s + 1.0) / std::sqrt(var) : (s > 0.0 ? (s - 1.0) / std::sqrt(var) : 0.0);
      verdict.p_value = 0.5 * std::erfc(-z / std::sqrt(2.0));
    }
  }
  verdict.holds = verdict.vanished || (verdict.slope < 0.0 && verdict.p_value < alpha);
  return verdict;
}

std::vector<ConditionReport> sweep_lindeberg(const ArraySpec& spec, std::span<const std::size_t> n_list,
                                             double epsilon, std::size_t reps, Seed seed, unsigned workers) {
  std::vector<ConditionReport> out;
  for (std::size_t n : n_list) out.push_back(lindeberg_functional(spec, n, epsilon, reps, seed.derive(n), workers));
  return out;
}

std::vector<ConditionReport> sweep_lyapunov(const ArraySpec& spec, std::span<const std::size_t> n_list, double delta,
                                            std::size_t reps, Seed seed, unsigned workers) {
  std::vector<ConditionReport> out;
  for (std::size_t n : n_list) out.push_back(lyapunov_functional(spec, n, delta, reps, seed.derive(n), workers));
  return out;
}

std::vector<std::size_t> default_n_list() {
  std::vector<std::size_t> out;
  for (std::size_t k = 2; k <= 12; ++k) out.push_back(std::size_t{1} << k);
  return out;
}

}  // namespace hclt
