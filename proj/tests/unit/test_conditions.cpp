#include "doctest.h"
#include "support.hpp"

#include "hclt/conditions.hpp"
#include "hclt/error.hpp"

#include <cmath>
#include <vector>

using namespace hclt;

TEST_CASE("functionals reject bad parameters") {
  const auto spec = presets::gauss_j2(Grid::uniform(16));
  CHECK_THROWS_AS(lindeberg_functional(spec, 4, 0.0, 1000, Seed(1)), ArgumentError);
  CHECK_THROWS_AS(lindeberg_functional(spec, 4, 0.5, 99, Seed(1)), ArgumentError);
  CHECK_THROWS_AS(lyapunov_functional(spec, 4, -1.0, 1000, Seed(1)), ArgumentError);
  CHECK_THROWS_AS(lindeberg_functional(spec, 0, 0.5, 1000, Seed(1)), IndexError);
}

TEST_CASE("pathwise domination inequality") {
  for (double norm : {0.0, 0.01, 0.3, 0.5, 0.5000001, 2.0, 50.0})
    for (double eps : {0.1, 0.5, 1.0})
      for (double delta : {0.1, 1.0, 3.0}) CHECK(domination_holds(norm, eps, delta));
}

TEST_CASE("property: Lindeberg functional is non-increasing in epsilon on shared draws") {
  const auto grid = Grid::uniform(32);
  Stream s(Seed(5));
  for (int trial = 0; trial < 8; ++trial) {
    const auto spec = test::random_spec(grid, s);
    double previous = INFINITY;
    for (double eps : {0.01, 0.1, 0.3, 0.6, 1.0, 2.0, 5.0}) {
      const auto r = lindeberg_functional(spec, 6, eps, 500, Seed(6).derive(trial), 1);
      CHECK(r.estimate <= previous);
      previous = r.estimate;
    }
  }
}

TEST_CASE("property: Lyapunov dominates Lindeberg on presets and random specs") {
  const auto grid = Grid::uniform(32);
  for (const auto& name : presets::names()) {
    const auto check = lyapunov_dominates_lindeberg(presets::make(name, grid), 8, 0.3, 1.0, 500, Seed(7), 1);
    CAPTURE(name);
    CHECK(check.holds);
    CHECK(check.violations == 0);
    CHECK(check.samples == 8 * 500);
    CHECK(check.lindeberg.estimate <= check.bound + 1e-12);
  }
  Stream s(Seed(8));
  for (int trial = 0; trial < 25; ++trial) {
    const auto spec = test::random_spec(grid, s);
    const double eps = 0.05 + s.uniform();
    const double delta = 0.1 + 2.0 * s.uniform();
    const auto check = lyapunov_dominates_lindeberg(spec, 1 + trial % 10, eps, delta, 200, Seed(9).derive(trial), 1);
    CHECK(check.holds);
    CHECK(check.violations == 0);
  }
}

TEST_CASE("LF-PASS is exactly zero at four times the closed-form threshold") {
  const auto spec = presets::lf_pass(Grid::uniform(64));
  const double eps = 0.5;
  const auto n = static_cast<std::size_t>(4.0 * static_cast<double>(spec.truncation()) / (eps * eps));
  CHECK(lindeberg_functional(spec, n, eps, 1000, Seed(10), 1).estimate == 0.0);
  CHECK(lindeberg_functional(spec, 4, eps, 1000, Seed(10), 1).estimate > 0.0);
}

TEST_CASE("LF-FAIL keeps the fixed member's unit second moment") {
  const auto spec = presets::lf_fail(Grid::uniform(64));
  for (std::size_t n : {4, 100, 1000, 10000}) {
    const auto r = lindeberg_functional(spec, n, 0.5, 100, Seed(11).derive(n), 1);
    CHECK(r.estimate >= 0.5);
    CHECK(r.estimate >= 1.0 - 1e-12);
  }
}

TEST_CASE("oracle: Rademacher J=1 Lyapunov sum is n^(-delta/2)") {
  const auto spec = presets::rademacher_j1(Grid::uniform(32));
  for (double delta : {0.5, 1.0, 2.0})
    for (std::size_t n : {1, 4, 64, 1024}) {
      const auto r = lyapunov_functional(spec, n, delta, 100, Seed(12), 1);
      CHECK(std::abs(r.estimate - std::pow(static_cast<double>(n), -delta / 2.0)) <= 1e-12);
      CHECK(r.std_error <= 1e-12);
    }
}

TEST_CASE("second moment sum matches the analytic value in most seeded runs") {
  const auto grid = Grid::uniform(32);
  int within = 0;
  const int runs = 40;
  for (int r = 0; r < runs; ++r) {
    const auto spec = presets::make(presets::names()[static_cast<std::size_t>(r) % 6], grid);
    const auto report = second_moment_sum(spec, 5, 400, Seed(13).derive(r), 1);
    if (std::abs(report.monte_carlo.estimate - report.analytic) <= 4.0 * report.monte_carlo.std_error + 1e-12) ++within;
  }
  CHECK(within >= static_cast<int>(0.95 * runs));
  const auto spec = presets::lf_pass(grid);
  // Variances cycle {1, 0.6, 0.3, 0.1} over members with a^2 = 1/n and J = 8.
  CHECK(analytic_second_moment_sum(spec, 4) == doctest::Approx(8.0 * 2.0 / 4.0));
}

TEST_CASE("estimators are worker-count independent") {
  const auto spec = presets::heavy_tail(Grid::uniform(32), 4);
  const auto a = lindeberg_functional(spec, 50, 0.2, 1000, Seed(14), 1);
  const auto b = lindeberg_functional(spec, 50, 0.2, 1000, Seed(14), 7);
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_error == b.std_error);
  const auto c = lyapunov_functional(spec, 50, 0.4, 1000, Seed(14), 1);
  const auto d = lyapunov_functional(spec, 50, 0.4, 1000, Seed(14), 3);
  CHECK(c.estimate == d.estimate);
}

TEST_CASE("sampler interface agrees with the spec overload") {
  const auto spec = presets::lyapunov_pass(Grid::uniform(32), 3);
  const Seed seed(15);
  const auto a = lindeberg_functional(spec, 20, 0.3, 500, seed, 1);
  const auto b = lindeberg_functional(complete_norms(spec, 20, seed), 20, 0.3, 500, seed, 1);
  CHECK(a.estimate == b.estimate);
}

TEST_CASE("covariance sums converge to the limit") {
  const auto grid = Grid::uniform(32);
  const auto spec = presets::lf_fail(grid);
  const std::size_t ns[] = {4, 16, 64, 256};
  const auto rows = covariance_sum_convergence(spec, presets::limit_covariance(spec), ns);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].second < rows[i - 1].second);
}

TEST_CASE("trend assessment") {
  const auto report = [](std::size_t n, double estimate, double se) {
    ConditionReport r;
    r.n = n;
    r.estimate = estimate;
    r.std_error = se;
    return r;
  };
  std::vector<ConditionReport> decaying, flat, vanished;
  for (std::size_t n : default_n_list()) {
    const double x = static_cast<double>(n);
    decaying.push_back(report(n, 3.0 / std::sqrt(x), 1e-4));
    flat.push_back(report(n, 1.0 + 0.01 * std::sin(x), 1e-2));
    vanished.push_back(report(n, n > 64 ? 0.0 : 1.0 / x, 0.0));
  }
  const auto d = assess_trend(decaying);
  CHECK(d.holds);
  CHECK(d.slope == doctest::Approx(-0.5));
  CHECK(d.p_value < 0.01);
  CHECK_FALSE(assess_trend(flat).holds);
  const auto v = assess_trend(vanished);
  CHECK(v.vanished);
  CHECK(v.holds);
  CHECK(default_n_list().front() == 4);
  CHECK(default_n_list().back() == 4096);
}

TEST_CASE("Lindeberg-Feller trend on presets") {
  const auto grid = Grid::uniform(32);
  const std::size_t ns[] = {4, 8, 16, 32, 64, 128, 256};
  const auto pass = sweep_lindeberg(presets::lyapunov_pass(grid, 2), ns, 0.5, 2000, Seed(16), 1);
  CHECK(assess_trend(pass).holds);
  const auto fail = sweep_lindeberg(presets::lf_fail(grid), ns, 0.5, 500, Seed(17), 1);
  CHECK_FALSE(assess_trend(fail).holds);
  const auto lyap = sweep_lyapunov(presets::lyapunov_pass(grid, 2), ns, 1.0, 500, Seed(18), 1);
  REQUIRE(lyap.size() == std::size(ns));
  CHECK(lyap[0].seed == Seed(18).derive(4));
  CHECK(assess_trend(lyap).holds);
}
