// Acceptance suite: one line per criterion, exit status 0 iff all pass.
//
//   hclt_acceptance [--scratch DIR] [--only N]

#include "hclt/conditions.hpp"
#include "hclt/experiment.hpp"
#include "hclt/imputation.hpp"
#include "hclt/l2.hpp"
#include "hclt/lemmas.hpp"
#include "hclt/missingness.hpp"
#include "hclt/normality.hpp"
#include "hclt/triangular_array.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace hclt;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes, fixed before any run.
constexpr double kQuadratureTol = 2e-3;
constexpr std::size_t kFuzzSamples = 100000;
constexpr std::size_t kLfFailReps = 10000;
constexpr double kLfFailFloor = 0.5;
constexpr double kLyapunovTol = 1e-12;
constexpr std::size_t kCltN = 4096;
constexpr std::size_t kCltReps = 10000;
constexpr double kBand = 4.0;
constexpr std::size_t kAuditReps = 20000;
constexpr std::size_t kPairedN = 1024;
constexpr std::size_t kPairedReps = 4000;
constexpr double kPairedEpsilon = 0.1;
constexpr std::size_t kPairedLfReps = 4000;
constexpr double kConditioningTol = 1e-10;
constexpr double kLemmaTol = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

// 1. Quadrature of min(x, y): the double integral of min(x, y) is 1/3 and the
// double integral of min(x, y)^2 is 1/6.
Outcome quadrature_oracles(const fs::path&) {
  const auto grid = Grid::uniform(512);
  const auto k = Kernel::from(grid, [](double x, double y) { return std::min(x, y); });
  const double p = pairing(k, GridFunction::constant(grid, 1.0));
  const double norm = kernel_l2_norm(k);
  const double e1 = std::abs(p - 1.0 / 3.0);
  const double e2 = std::abs(norm - std::sqrt(1.0 / 6.0));
  return {e1 <= kQuadratureTol && e2 <= kQuadratureTol,
          fmt("pairing error %.2e, norm error %.2e (tol %.0e)", e1, e2, kQuadratureTol)};
}

// 2. Pathwise domination over every preset and a spread of (epsilon, delta).
Outcome domination(const fs::path&) {
  const auto grid = Grid::uniform(128);
  const double epsilons[] = {0.05, 0.2, 0.5, 1.0};
  const double deltas[] = {0.25, 1.0, 2.0};
  const std::size_t n = 16;
  const std::size_t cells = presets::names().size() * std::size(epsilons) * std::size(deltas);
  const std::size_t reps = (kFuzzSamples + cells * n - 1) / (cells * n);
  std::size_t samples = 0, violations = 0;
  bool holds = true;
  std::uint64_t tag = 0;
  for (const auto& name : presets::names()) {
    const auto spec = presets::make(name, grid);
    for (double eps : epsilons)
      for (double delta : deltas) {
        const auto check = lyapunov_dominates_lindeberg(spec, n, eps, delta, std::max<std::size_t>(reps, 100),
                                                        Seed(0xD0).derive(tag++), 1);
        samples += check.samples;
        violations += check.violations;
        holds = holds && check.holds;
      }
  }
  return {holds && violations == 0 && samples >= kFuzzSamples,
          fmt("%zu samples, %zu violations", samples, violations)};
}

// 3. Exact zero above the closed-form threshold for LF-PASS; a persistent
// floor for LF-FAIL.
Outcome lindeberg_behaviour(const fs::path&) {
  const auto grid = Grid::uniform(256);
  const auto pass = presets::lf_pass(grid);
  const auto fail = presets::lf_fail(grid);
  const double eps = 0.5;
  const double bound = 1.0;
  const double threshold = static_cast<double>(pass.truncation()) * bound * bound / (eps * eps);
  bool ok = true;
  std::size_t checked = 0;
  double worst_pass = 0.0;
  for (std::size_t n : default_n_list()) {
    if (static_cast<double>(n) <= threshold) continue;
    const auto r = lindeberg_functional(pass, n, eps, 1000, Seed(0x3A).derive(n), 1);
    worst_pass = std::max(worst_pass, r.estimate);
    ok = ok && r.estimate == 0.0;
    ++checked;
  }
  double floor = INFINITY;
  for (std::size_t n : default_n_list()) {
    const auto r = lindeberg_functional(fail, n, eps, kLfFailReps, Seed(0x3B).derive(n), 1);
    floor = std::min(floor, r.estimate);
  }
  ok = ok && checked > 0 && floor >= kLfFailFloor;
  return {ok, fmt("LF-PASS max %.3g over %zu n > %.0f; LF-FAIL min %.4f", worst_pass, checked, threshold, floor)};
}

// 4. Rademacher J = 1 at delta = 1: every norm is n^{-1/2}, so the sum is
// n * n^{-3/2}.
Outcome lyapunov_decay(const fs::path&) {
  const auto spec = presets::rademacher_j1(Grid::uniform(256));
  double worst = 0.0;
  for (std::size_t n : {4UL, 64UL, 1024UL}) {
    const auto r = lyapunov_functional(spec, n, 1.0, 100, Seed(0x4C).derive(n), 1);
    worst = std::max(worst, std::abs(r.estimate - 1.0 / std::sqrt(static_cast<double>(n))));
  }
  return {worst <= kLyapunovTol, fmt("max error %.2e", worst)};
}

// 5. Characteristic functional and KS checks at n = 4096.
Outcome clt_desk_scale(const fs::path&) {
  const auto grid = Grid::uniform(256);
  const auto spec = presets::lf_pass(grid);
  const auto sigma = presets::limit_covariance(spec);
  const auto tests = standard_test_functions(grid);
  const std::size_t ns[] = {kCltN};
  const auto report = clt_verify(spec, sigma, ns, tests, kCltReps, Seed(0x5C), 1).front();
  bool ok = report.projections.size() == 5;
  double worst = 0.0, worst_ks = 0.0;
  for (const auto& p : report.projections) {
    ok = ok && !p.skipped && p.cf_gap <= kBand * p.cf_stderr && p.ks <= p.ks_band;
    worst = std::max(worst, p.cf_gap / p.cf_stderr);
    worst_ks = std::max(worst_ks, p.ks / p.ks_band);
  }
  return {ok, fmt("max gap/stderr %.2f, max KS/band %.2f", worst, worst_ks)};
}

// 6. Covariance and second-moment audit for the imputed elements, and its
// power against the second-moment noise reading.
Outcome eq1_audit(const fs::path&) {
  const auto grid = Grid::uniform(256);
  const auto spec = presets::gauss_j2(grid);
  const Mechanism mechs[] = {Mechanism::mcar_bernoulli(grid, 0.5), Mechanism::mcar_interval(grid, 0.3),
                             Mechanism::mar_threshold(grid, 0.25, 0.0, 0.9, 0.4)};
  const std::size_t n = 16;
  bool ok = true;
  double worst_cov = 0.0, worst_moment = 0.0, weakest_break = INFINITY;
  std::uint64_t tag = 0;
  for (const auto& mech : mechs) {
    for (std::size_t m : {1UL, n}) {
      const Seed seed = Seed(0x6E).derive(tag++);
      const auto a = lemma_eq1_audit(spec, n, m, mech, kAuditReps, seed, {.workers = 1});
      ok = ok && a.cov_distance <= kBand * a.cov_stderr && a.moment_gap <= kBand * a.moment_stderr;
      worst_cov = std::max(worst_cov, a.cov_distance / a.cov_stderr);
      worst_moment = std::max(worst_moment, a.moment_gap / a.moment_stderr);
      const auto b = lemma_eq1_audit(spec, n, m, mech, kAuditReps, seed,
                                     {.mode = NoiseMode::deliberate_break, .workers = 1});
      ok = ok && b.moment_gap > kBand * b.moment_stderr;
      weakest_break = std::min(weakest_break, b.moment_gap / b.moment_stderr);
    }
  }
  return {ok, fmt("max cov/stderr %.2f, max moment/stderr %.2f, break min moment/stderr %.1f", worst_cov,
                  worst_moment, weakest_break)};
}

// 7. Paired complete vs partial checks with shared element seeds. With J = 8
// any pattern observing eight or more points pins the coefficients, so a
// sparse Bernoulli mechanism is included to leave genuine conditional noise.
Outcome paired_partial(const fs::path&) {
  const auto grid = Grid::uniform(256);
  const auto spec = presets::lyapunov_pass(grid);
  const auto sigma = presets::limit_covariance(spec);
  const auto tests = standard_test_functions(grid);
  const Mechanism mechs[] = {Mechanism::mar_threshold(grid, 0.25, 0.0, 0.9, 0.4),
                             Mechanism::mcar_bernoulli(grid, 0.02)};
  const std::size_t ns[] = {kPairedN};
  const std::size_t n_list[] = {16, 64, 256, 1024};
  bool ok = true;
  double worst_cf = 0.0, worst_lf = 0.0, sparse_cf = 0.0;
  std::uint64_t tag = 0;
  for (const auto& mech : mechs) {
    const auto paired = partial_clt_verify(spec, mech, sigma, ns, tests, kPairedReps, Seed(0x7A).derive(tag), 1).front();
    ok = ok && paired.differences.size() == tests.size();
    for (const auto& d : paired.differences) {
      ok = ok && !d.skipped && d.cf_difference <= kBand * d.combined_stderr;
      worst_cf = std::max(worst_cf, d.cf_difference / d.combined_stderr);
      if (mech.kind() == Mechanism::Kind::mcar_bernoulli) sparse_cf = std::max(sparse_cf, d.cf_difference);
    }
    const auto lf = paired_lindeberg(spec, mech, n_list, kPairedEpsilon, kPairedLfReps, Seed(0x7B).derive(tag), 1);
    for (const auto& row : lf) {
      const double gap = std::abs(row.partial.estimate - row.complete.estimate);
      ok = ok && gap <= kBand * row.combined_stderr;
      worst_lf = std::max(worst_lf, row.combined_stderr > 0 ? gap / row.combined_stderr : (gap > 0 ? INFINITY : 0.0));
    }
    ++tag;
  }
  return {ok, fmt("max cf diff/stderr %.3g at n=%zu (sparse max |diff| %.3g), max LF diff/stderr %.3g over %zu n",
                  worst_cf, kPairedN, sparse_cf, worst_lf, std::size(n_list))};
}

// 8. Fuzzed complex-product, Taylor-remainder and min-bound inequalities, and
// the product limit for c = lambda / n.
Outcome lemma_fuzz(const fs::path&) {
  Stream s(Seed(0x8F));
  std::size_t violations = 0;
  for (std::size_t i = 0; i < kFuzzSamples; ++i) {
    const std::size_t len = 1 + static_cast<std::size_t>(s.uniform() * 24);
    const double theta = s.coin() ? 1.0 : 0.1 + 2.0 * s.uniform();
    std::vector<Complex> z(len), w(len);
    for (std::size_t k = 0; k < len; ++k) {
      z[k] = std::polar(theta * std::sqrt(s.uniform()), 2 * M_PI * s.uniform());
      w[k] = std::polar(theta * std::sqrt(s.uniform()), 2 * M_PI * s.uniform());
    }
    if (!complex_product_bound(ComplexSeq(z, theta), ComplexSeq(w, theta)).holds) ++violations;
    const double x = (s.uniform() - 0.5) * std::pow(10.0, 3.0 * s.uniform() - 1.0);
    const auto order = static_cast<std::size_t>(s.uniform() * 12);
    if (!taylor_remainder_bound(x, order).holds) ++violations;
    if (!expansion_min_bound_holds(x, kLemmaTol)) ++violations;
  }
  double worst = 0.0;
  bool limit_ok = true;
  for (double lambda : {-1.0, -0.5, 0.3}) {
    std::vector<std::vector<double>> rows;
    const std::size_t sizes[] = {10, 100, 1000, 10000, 100000};
    for (std::size_t n : sizes) rows.emplace_back(n, lambda / static_cast<double>(n));
    const auto check = product_limit_check(rows, lambda);
    for (const auto& row : check) {
      const double rel = std::abs(row.product - std::exp(lambda)) / std::exp(lambda);
      worst = std::max(worst, rel * static_cast<double>(row.n));
      limit_ok = limit_ok && rel <= 10.0 / static_cast<double>(row.n);
    }
  }
  return {violations == 0 && limit_ok,
          fmt("%zu fuzzed inputs, %zu violations; max n * relative error %.3f (limit 10)", kFuzzSamples, violations,
              worst)};
}

// 9. Two-point Gaussian conditioning: given X1 = a, X0 has mean rho * a and
// variance 1 - rho^2.
Outcome bivariate_conditioning(const fs::path&) {
  const auto grid = Grid::create({0.25, 0.75}, {0.5, 0.5});
  const MissingnessPattern pattern(grid, {true, false});
  double worst = 0.0;
  for (double rho : {0.0, 0.3, -0.3, 0.9, -0.9}) {
    Eigen::Matrix2d s;
    s << 1.0, rho, rho, 1.0;
    Eigen::MatrixXd f(2, 2);
    f << 1.0, 0.0, rho, std::sqrt(1.0 - rho * rho);
    const GaussianConditioner kernel_route(Kernel(grid, s));
    const FactorConditioner factor_route(grid, f);
    for (double a : {-1.0, 0.0, 0.4, 1.0}) {
      const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, a);
      for (const auto& law : {kernel_route.condition(pattern, y), factor_route.condition(pattern, y)}) {
        worst = std::max(worst, std::abs(law.mean_missing[0] - rho * a));
        worst = std::max(worst, std::abs(law.cov_missing(0, 0) - (1.0 - rho * rho)));
      }
    }
  }
  return {worst <= kConditioningTol, fmt("max error %.2e (tol %.0e)", worst, kConditioningTol)};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    out[entry.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

// 10. Byte-identical CSV output across repeated runs and worker counts.
Outcome determinism(const fs::path& scratch) {
  experiment::ExperimentConfig complete;
  complete.scenarios = {presets::kLfPass, presets::kLfFail, presets::kHeavyTail};
  complete.grid_size = 64;
  complete.n_list = {4, 16, 64};
  complete.epsilon = {0.1, 0.5};
  complete.delta = {0.5, 1.0};
  complete.reps = 400;
  complete.seed = 20240611;
  complete.estimators = {experiment::kLindeberg, experiment::kLyapunov, experiment::kSecondMoment,
                         experiment::kCovarianceConvergence, experiment::kClt};

  experiment::ExperimentConfig partial = complete;
  partial.scenarios = {presets::kGaussJ2, presets::kLyapunovPass};
  partial.mechanisms = {experiment::MechanismConfig{.kind = "mcar-bernoulli"},
                        experiment::MechanismConfig{.kind = "mcar-interval"},
                        experiment::MechanismConfig{.kind = "mar-threshold"}};
  partial.estimators = experiment::estimator_names();

  bool ok = true;
  std::size_t files = 0, bytes = 0;
  for (auto [name, config] : {std::pair{"complete", complete}, std::pair{"partial", partial}}) {
    std::vector<std::map<std::string, std::string>> outputs;
    for (auto [label, workers] : {std::pair{"a", 1U}, std::pair{"b", 1U}, std::pair{"c", 8U}}) {
      config.out = (scratch / fmt("determinism_%s_%s", name, label)).string();
      config.workers = workers;
      fs::remove_all(config.out);
      experiment::run(config);
      outputs.push_back(csv_files(config.out));
    }
    ok = ok && !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
    files += outputs[0].size();
    for (const auto& [file, content] : outputs[0]) bytes += content.size();
  }
  return {ok, fmt("%zu CSV files, %zu bytes, runs %s", files, bytes, ok ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome(const fs::path&)> check;
};

}  // namespace

int main(int argc, char** argv) {
  fs::path scratch = fs::temp_directory_path() / "hclt_acceptance";
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--scratch" && i + 1 < argc) {
      scratch = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--scratch DIR] [--only N]\n", argv[0]);
      return 2;
    }
  }
  fs::create_directories(scratch);

  const std::vector<Criterion> criteria = {
      {1, "quadrature oracles for min(x,y)", quadrature_oracles},
      {2, "pathwise Lyapunov domination", domination},
      {3, "Lindeberg-Feller pass/fail presets", lindeberg_behaviour},
      {4, "Lyapunov decay n^-1/2", lyapunov_decay},
      {5, "row-sum normality at n=4096", clt_desk_scale},
      {6, "imputed covariance audit and its power", eq1_audit},
      {7, "paired complete/partial normality and LF", paired_partial},
      {8, "lemma inequality fuzz and product limit", lemma_fuzz},
      {9, "bivariate Gaussian conditioning", bivariate_conditioning},
      {10, "determinism across runs and workers", determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check(scratch);
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.pass) ++failures;
    std::printf("[%s] %2d %s: %s (%.2fs)\n", outcome.pass ? "PASS" : "FAIL", c.id, c.title, outcome.detail.c_str(),
                seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
