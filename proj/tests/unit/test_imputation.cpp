#include "doctest.h"
#include "support.hpp"

#include "hclt/error.hpp"
#include "hclt/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace hclt;

namespace {

MissingnessPattern random_pattern(const GridPtr& grid, Stream& s, double p) {
  std::vector<bool> mask(grid->size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = s.uniform() < p;
  return {grid, mask};
}

Eigen::VectorXd observed_values(const GridFunction& f, const MissingnessPattern& p) {
  return split(f, p).observed_values;
}

}  // namespace

TEST_CASE("oracle: bivariate conditioning") {
  const auto grid = Grid::create({0.25, 0.75}, {0.5, 0.5});
  const MissingnessPattern pattern(grid, {true, false});
  for (double rho : {0.0, 0.3, -0.3, 0.9, -0.9}) {
    Eigen::Matrix2d s;
    s << 1.0, rho, rho, 1.0;
    for (double a : {-1.0, 0.5, 1.0}) {
      const auto law = condition_gaussian(Kernel(grid, s), pattern, Eigen::VectorXd::Constant(1, a));
      REQUIRE(law.missing_indices == std::vector<std::size_t>{1});
      CHECK(std::abs(law.mean_missing[0] - rho * a) <= 1e-10);
      CHECK(std::abs(law.cov_missing(0, 0) - (1.0 - rho * rho)) <= 1e-10);
    }
  }
}

TEST_CASE("oracle: trivariate conditioning on two points") {
  // Sigma = [[2,1,0.5],[1,2,1],[0.5,1,2]] observed at indices 0 and 2:
  // S11 = [[2,0.5],[0.5,2]], S01 = [1, 1]. S11^{-1} [1,1]' = [0.4, 0.4]'.
  const auto grid = Grid::uniform(3);
  Eigen::Matrix3d s;
  s << 2, 1, 0.5, 1, 2, 1, 0.5, 1, 2;
  const MissingnessPattern pattern(grid, {true, false, true});
  Eigen::Vector2d y(1.0, -2.0);
  const auto law = condition_gaussian(Kernel(grid, s), pattern, y);
  CHECK(law.mean_missing[0] == doctest::Approx(0.4 * 1.0 + 0.4 * -2.0).epsilon(1e-9));
  CHECK(law.cov_missing(0, 0) == doctest::Approx(2.0 - 0.8).epsilon(1e-9));
}

TEST_CASE("degenerate patterns") {
  const auto grid = Grid::uniform(16);
  Stream s(Seed(1));
  const auto prior = test::random_psd_kernel(grid, s, 5);
  const auto none = condition_gaussian(prior, MissingnessPattern::all_missing(grid), Eigen::VectorXd(0));
  CHECK(none.mean_missing.isZero());
  CHECK(none.cov_missing == prior.values());
  const auto all = condition_gaussian(prior, MissingnessPattern::all_observed(grid), Eigen::VectorXd::Ones(16));
  CHECK(all.empty());
  CHECK_THROWS_AS(condition_gaussian(prior, MissingnessPattern::all_observed(grid), Eigen::VectorXd::Ones(3)),
                  ArgumentError);
}

TEST_CASE("invalid priors") {
  const auto grid = Grid::uniform(8);
  const auto f = GridFunction::constant(grid, 1.0);
  CHECK_THROWS_AS(GaussianConditioner(Kernel(grid, -tensor_product(f, f).values())), CovarianceError);
  CHECK_THROWS_AS(GaussianConditioner(Kernel::from(grid, [](double x, double y) { return x - y + 2; })),
                  CovarianceError);
  const auto other = Grid::uniform(4);
  CHECK_THROWS_AS(condition_gaussian(tensor_product(f, f), MissingnessPattern::all_missing(other), Eigen::VectorXd(0)),
                  GridMismatchError);
}

TEST_CASE("property: Schur complements of fuzzed priors are PSD") {
  const auto grid = Grid::uniform(24);
  Stream s(Seed(2));
  for (int trial = 0; trial < 100; ++trial) {
    const auto rank = 1 + static_cast<Eigen::Index>(s.uniform() * 30);
    const auto prior = test::random_psd_kernel(grid, s, rank);
    const auto pattern = random_pattern(grid, s, s.uniform());
    const auto y = observed_values(test::random_function(grid, s), pattern);
    const auto law = condition_gaussian(prior, pattern, y);
    if (law.empty()) continue;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(law.cov_missing);
    const double scale = std::max(1.0, prior.values().diagonal().maxCoeff());
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * scale);
  }
}

TEST_CASE("property: factor route equals kernel route") {
  const auto grid = Grid::uniform(32);
  Stream s(Seed(3));
  for (int trial = 0; trial < 40; ++trial) {
    const auto j = 1 + static_cast<Eigen::Index>(s.uniform() * 10);
    Eigen::MatrixXd f(32, j);
    for (auto& v : f.reshaped()) v = s.normal();
    const Kernel prior(grid, f * f.transpose());
    const auto pattern = random_pattern(grid, s, 0.1 + 0.8 * s.uniform());
    const auto y = observed_values(GridFunction(grid, f * Eigen::VectorXd::Random(j)), pattern);
    const auto a = GaussianConditioner(prior).condition(pattern, y);
    const auto b = FactorConditioner(grid, f).condition(pattern, y);
    if (a.empty()) continue;
    const double scale = std::max(1.0, prior.values().cwiseAbs().maxCoeff());
    CHECK((a.mean_missing - b.mean_missing).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    CHECK((a.cov_missing - b.cov_missing).cwiseAbs().maxCoeff() <= 1e-6 * scale);
  }
}

TEST_CASE("finite-rank prior is recovered from enough observed points") {
  const auto grid = Grid::uniform(64);
  const auto spec = presets::gauss_j2(grid);
  const auto element = sample_element(spec, 1, 1, Seed(4)).element;
  std::vector<bool> mask(64, false);
  mask[5] = mask[20] = mask[41] = true;
  const MissingnessPattern pattern(grid, mask);
  const auto law = condition_gaussian(analytic_covariance(spec, 1, 1), pattern, observed_values(element, pattern));
  for (std::size_t k = 0; k < law.missing_indices.size(); ++k)
    CHECK(law.mean_missing[static_cast<Eigen::Index>(k)] ==
          doctest::Approx(element[law.missing_indices[k]]).epsilon(1e-7));
  CHECK(law.cov_missing.cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("observed part is copied bit for bit") {
  const auto grid = Grid::uniform(48);
  const auto spec = presets::lyapunov_pass(grid);
  const auto prior = analytic_covariance(spec, 4, 2);
  Stream s(Seed(5));
  for (int trial = 0; trial < 30; ++trial) {
    const auto element = sample_element(spec, 4, 2, Seed(6).derive(trial)).element;
    const auto pattern = random_pattern(grid, s, 0.1);
    for (auto mode : {NoiseMode::conditional_covariance, NoiseMode::deliberate_break}) {
      const auto out = assemble_partial(element, pattern, prior, Seed(7).derive(trial), mode);
      for (auto i : pattern.observed_indices()) CHECK(out.assembled[i] == element[i]);
      CHECK(out.pattern == pattern);
    }
  }
  const PartialSampler sampler(spec, Mechanism::mcar_bernoulli(grid, 0.1));
  for (std::uint64_t r = 0; r < 30; ++r) {
    Eigen::VectorXd partial, complete;
    std::vector<bool> mask;
    sampler.draw(4, 2, Seed(8).derive(r), partial, &complete, &mask);
    CHECK(complete == sample_element(spec, 4, 2, Seed(8).derive(r)).element.values());
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) CHECK(partial[static_cast<Eigen::Index>(i)] == complete[static_cast<Eigen::Index>(i)]);
  }
}

TEST_CASE("an all-observed mechanism leaves elements untouched") {
  const auto grid = Grid::uniform(32);
  const auto spec = presets::gauss_j2(grid);
  const PartialSampler sampler(spec, Mechanism::mcar_bernoulli(grid, 1.0));
  Eigen::VectorXd partial, complete;
  sampler.draw(3, 1, Seed(9), partial, &complete);
  CHECK(partial == complete);
}

TEST_CASE("triple seeds reuse the complete-data element stream") {
  const auto t = triple_seeds(Seed(10), 5, 3);
  CHECK(t.element == element_seed(Seed(10), 5, 3));
  CHECK_FALSE(t.pattern == t.noise);
  CHECK_FALSE(t.pattern == t.element);
}

TEST_CASE("tower property: imputed conditional means average to zero") {
  const auto grid = Grid::uniform(32);
  for (const auto& spec : {presets::gauss_j2(grid), presets::lyapunov_pass(grid)}) {
    for (const auto& mech : {Mechanism::mcar_bernoulli(grid, 0.05), Mechanism::mar_threshold(grid, 0.1, 0.0, 0.3, 0.05)}) {
      const auto est = conditional_mean_check(spec, 4, 1, mech, 10000, Seed(11), 1);
      CAPTURE(spec.name());
      CHECK(norm_l2(est.mean) <= 4.0 * est.stderr_bound);
    }
  }
}

TEST_CASE("covariance audit passes for Gaussian presets and every MAR mechanism") {
  const auto grid = Grid::uniform(32);
  const Mechanism mechs[] = {Mechanism::mcar_bernoulli(grid, 0.5), Mechanism::mcar_bernoulli(grid, 0.05),
                             Mechanism::mcar_interval(grid, 0.3), Mechanism::mar_threshold(grid, 0.25, 0.0, 0.9, 0.4),
                             Mechanism::mar_threshold(grid, 0.05, 0.0, 0.2, 0.05)};
  std::uint64_t tag = 0;
  for (const auto& spec : {presets::gauss_j2(grid), presets::lyapunov_pass(grid)}) {
    for (const auto& mech : mechs) {
      const auto a = lemma_eq1_audit(spec, 8, 3, mech, 5000, Seed(12).derive(tag++), {.workers = 1});
      CAPTURE(spec.name());
      CAPTURE(mech.label());
      CHECK(a.pass);
      CHECK(a.reps == 5000);
    }
  }
}

TEST_CASE("the second-moment noise reading fails the audit") {
  const auto grid = Grid::uniform(32);
  const auto spec = presets::lyapunov_pass(grid);
  const auto mech = Mechanism::mcar_bernoulli(grid, 0.05);
  const auto a = lemma_eq1_audit(spec, 8, 3, mech, 5000, Seed(13), {.mode = NoiseMode::deliberate_break, .workers = 1});
  CHECK_FALSE(a.moment_pass);
  CHECK(a.partial_moment > a.complete_moment);
}

TEST_CASE("shared seeds make the audit exact for an all-observed mechanism") {
  const auto grid = Grid::uniform(32);
  const auto spec = presets::gauss_j2(grid);
  const auto a = lemma_eq1_audit(spec, 4, 1, Mechanism::mcar_bernoulli(grid, 1.0), 500, Seed(14),
                                 {.shared_seeds = true, .workers = 1});
  CHECK(a.cov_distance == 0.0);
  CHECK(a.moment_gap == 0.0);
}

TEST_CASE("the audit refuses non-Gaussian members") {
  const auto grid = Grid::uniform(16);
  CHECK_THROWS_AS(lemma_eq1_audit(presets::lf_pass(grid), 4, 1, Mechanism::mcar_bernoulli(grid, 0.5), 500, Seed(1)),
                  UnsupportedLawError);
  CHECK_THROWS_AS(lemma_eq1_audit(presets::heavy_tail(grid), 4, 1, Mechanism::mcar_bernoulli(grid, 0.5), 500, Seed(1)),
                  UnsupportedLawError);
}

TEST_CASE("partial row covariance residual matches the complete one") {
  const auto grid = Grid::uniform(32);
  const auto spec = presets::lyapunov_pass(grid, 4);
  const auto sigma = row_covariance_sum(spec, 8);
  const auto r = row_covariance_residual(spec, 8, Mechanism::mcar_bernoulli(grid, 0.05), sigma, 4000, Seed(15), 1);
  CHECK(std::abs(r.partial - r.complete) <= 4.0 * std::hypot(r.partial_stderr, r.complete_stderr));
  CHECK(r.complete <= 4.0 * r.complete_stderr);
}

TEST_CASE("Monte Carlo K' is worker independent and matches the analytic kernel") {
  const auto grid = Grid::uniform(32);
  const auto spec = presets::lyapunov_pass(grid, 3);
  const auto mech = Mechanism::mar_threshold(grid, 0.05, 0.0, 0.2, 0.05);
  const auto one = partial_covariance_empirical(spec, 4, 2, mech, 8000, Seed(16), 1);
  const auto many = partial_covariance_empirical(spec, 4, 2, mech, 8000, Seed(16), 4);
  CHECK(one.kernel.values() == many.kernel.values());
  CHECK(kernel_l2_norm(one.kernel - analytic_covariance(spec, 4, 2)) <= 4.0 * one.stderr_bound);
}
