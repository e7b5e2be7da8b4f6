#include "doctest.h"
#include "support.hpp"

#include "hclt/error.hpp"
#include "hclt/imputation.hpp"
#include "hclt/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace hclt;

namespace {

MissingnessPattern first_observed(const GridPtr& grid, std::size_t count) {
  std::vector<bool> mask(grid->size(), false);
  std::fill_n(mask.begin(), count, true);
  return {grid, mask};
}

}  // namespace

TEST_CASE("pattern basics") {
  const auto grid = Grid::uniform(8);
  const MissingnessPattern p(grid, {true, false, false, true, true, false, true, true});
  CHECK(p.observed_count() == 5);
  CHECK(p.missing_count() == 3);
  CHECK(p.observed_indices() == std::vector<std::size_t>{0, 3, 4, 6, 7});
  CHECK(p.missing_indices() == std::vector<std::size_t>{1, 2, 5});
  CHECK(MissingnessPattern::all_observed(grid).missing_count() == 0);
  CHECK(MissingnessPattern::all_missing(grid).observed_count() == 0);
  CHECK_THROWS_AS(MissingnessPattern(grid, {true, false}), GridMismatchError);
}

TEST_CASE("property: split and reassemble round-trip exactly") {
  const auto grid = Grid::uniform(40);
  Stream s(Seed(1));
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = test::random_function(grid, s);
    std::vector<bool> mask(grid->size());
    const double p = s.uniform();
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = s.uniform() < p;
    const MissingnessPattern pattern(grid, mask);
    const auto parts = split(f, pattern);
    CHECK(parts.observed_indices.size() + parts.missing_indices.size() == grid->size());
    Eigen::VectorXd missing(static_cast<Eigen::Index>(parts.missing_indices.size()));
    for (std::size_t k = 0; k < parts.missing_indices.size(); ++k)
      missing[static_cast<Eigen::Index>(k)] = f[parts.missing_indices[k]];
    CHECK(reassemble(grid, parts, missing).values() == f.values());
  }
}

TEST_CASE("MCAR patterns do not depend on the element") {
  const auto grid = Grid::uniform(64);
  const auto spec = presets::lyapunov_pass(grid);
  for (const auto& mech : {Mechanism::mcar_bernoulli(grid, 0.3), Mechanism::mcar_interval(grid, 0.25)}) {
    CHECK(mech.is_mcar());
    CHECK(mech.is_mar());
    for (std::uint64_t r = 0; r < 50; ++r) {
      const auto a = sample_element(spec, 4, 1, Seed(2).derive(r)).element;
      const auto b = sample_element(spec, 4, 2, Seed(3).derive(r)).element;
      CHECK(mech.sample(a, Seed(4).derive(r)) == mech.sample(b, Seed(4).derive(r)));
    }
  }
}

TEST_CASE("Bernoulli observation rate and interval geometry") {
  const auto grid = Grid::uniform(100);
  const auto zero = GridFunction::zero(grid);
  const auto bern = Mechanism::mcar_bernoulli(grid, 0.3);
  std::size_t observed = 0;
  const std::size_t reps = 2000;
  for (std::size_t r = 0; r < reps; ++r) observed += bern.sample(zero, Seed(5).derive(r)).observed_count();
  const double rate = static_cast<double>(observed) / (reps * 100.0);
  CHECK(std::abs(rate - 0.3) < 4.0 * std::sqrt(0.21 / (reps * 100.0)));

  const auto interval = Mechanism::mcar_interval(grid, 0.3);
  std::vector<int> missing_hits(100, 0);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto p = interval.sample(zero, Seed(6).derive(r));
    const auto miss = p.missing_indices();
    REQUIRE(miss.size() == 30);
    CHECK(miss.back() - miss.front() == 29);
    for (auto i : miss) ++missing_hits[i];
  }
  CHECK(missing_hits.front() > 0);
  CHECK(missing_hits.back() > 0);
  CHECK(Mechanism::mcar_interval(grid, 0.0).sample(zero, Seed(1)).missing_count() == 0);
  CHECK_THROWS_AS(Mechanism::mcar_bernoulli(grid, 1.5), ArgumentError);
  CHECK_THROWS_AS(Mechanism::mcar_interval(grid, 1.5), ArgumentError);
}

TEST_CASE("mar-threshold observes the probe and follows the last observed value") {
  const auto grid = Grid::uniform(40);
  const auto mech = Mechanism::mar_threshold(grid, 0.25, 0.0, 1.0, 0.0);
  CHECK(mech.is_mar());
  CHECK_FALSE(mech.is_mcar());
  // Positive probe: every later point is observed. Negative last probe value: nothing after it.
  const auto up = GridFunction::constant(grid, 1.0);
  CHECK(mech.sample(up, Seed(7)).missing_count() == 0);
  const auto down = GridFunction::constant(grid, -1.0);
  const auto p = mech.sample(down, Seed(7));
  CHECK(p.observed_count() == 10);
  CHECK(p == first_observed(grid, 10));
  CHECK(mech.observe_probability(down, p, 10) == 0.0);
  CHECK(mech.observe_probability(up, MissingnessPattern::all_observed(grid), 20) == 1.0);
  CHECK(mech.observe_probability(down, p, 3) == 1.0);
}

TEST_CASE("observed prefix refuses unobserved or future indices") {
  const auto grid = Grid::uniform(6);
  const Eigen::VectorXd values = Eigen::VectorXd::LinSpaced(6, 1.0, 6.0);
  const std::vector<bool> mask{true, false, true, true, true, true};
  const ObservedPrefix prefix(*grid, values, mask, 3);
  CHECK(prefix.value(0) == 1.0);
  CHECK(prefix.value(2) == 3.0);
  CHECK(prefix.last_observed() == 2);
  CHECK_THROWS_AS(prefix.value(1), IndexError);
  CHECK_THROWS_AS(prefix.value(3), IndexError);
  CHECK_THROWS_AS(prefix.value(5), IndexError);

  // A rule that peeks at the value being decided cannot run.
  const auto peeking = Mechanism::mar_sequential(
      grid, 1, [](const ObservedPrefix& p) { return p.value(p.position()) > 0 ? 1.0 : 0.0; }, "peek");
  CHECK_THROWS_AS(peeking.sample(GridFunction(grid, values), Seed(1)), IndexError);
  const auto bad = Mechanism::mar_sequential(grid, 1, [](const ObservedPrefix&) { return 2.0; }, "bad");
  CHECK_THROWS_AS(bad.sample(GridFunction(grid, values), Seed(1)), ArgumentError);
}

TEST_CASE("self-masking is not MAR and is refused downstream") {
  const auto grid = Grid::uniform(16);
  const auto mech = adversarial::self_masking(grid, 0.0, 0.9, 0.1);
  CHECK_FALSE(mech.is_mar());
  CHECK_THROWS_AS(require_mar(mech), ArgumentError);
  const auto spec = presets::gauss_j2(grid);
  CHECK_THROWS_AS(PartialSampler(spec, mech), ArgumentError);
  CHECK_NOTHROW(require_mar(Mechanism::mcar_bernoulli(grid, 0.5)));
}

TEST_CASE("MAR witness: MAR mechanisms pass, self-masking is caught") {
  const auto grid = Grid::uniform(32);
  const auto spec = presets::lyapunov_pass(grid);
  const auto pattern = first_observed(grid, 3);
  for (const auto& mech : {Mechanism::mcar_bernoulli(grid, 0.5), Mechanism::mcar_interval(grid, 0.3),
                           Mechanism::mar_threshold(grid, 0.05, 0.0, 0.9, 0.2)}) {
    const auto w = mar_witness_test(mech, spec, 4, 1, pattern, 2000, Seed(8));
    CAPTURE(mech.label());
    CHECK(w.pass);
    CHECK(w.pairs == 2000);
    CHECK(w.discrepancy.size() == grid->size());
  }
  const auto w = mar_witness_test(adversarial::self_masking(grid, 0.0, 0.9, 0.1), spec, 4, 1, pattern, 2000, Seed(8));
  CHECK_FALSE(w.pass);
  CHECK(w.max_discrepancy > 0.1);
}

TEST_CASE("MAR witness with rejection sampling for non-Gaussian laws") {
  const auto grid = Grid::uniform(16);
  const auto rad = presets::rademacher_j1(grid);
  const auto pattern = first_observed(grid, 1);
  const auto w = mar_witness_test(Mechanism::mar_threshold(grid, 0.1, 0.0, 0.9, 0.2), rad, 4, 1, pattern, 500, Seed(9));
  CHECK(w.pass);
  // Continuous laws never agree exactly on an observed point.
  CHECK_THROWS_AS(mar_witness_test(Mechanism::mcar_bernoulli(grid, 0.5), presets::heavy_tail(grid, 2), 4, 1, pattern,
                                   50, Seed(9), 100),
                  ConditioningError);
}

TEST_CASE("patterns are reproducible from their seed") {
  const auto grid = Grid::uniform(32);
  const auto spec = presets::lf_pass(grid);
  const auto mech = Mechanism::mar_threshold(grid, 0.25, 0.0, 0.9, 0.4);
  const auto f = sample_element(spec, 4, 1, Seed(10)).element;
  CHECK(mech.sample(f, Seed(11)) == sample_pattern(mech, f, Seed(11)));
  std::vector<bool> mask;
  mech.sample_mask(f.values(), Seed(11), mask);
  CHECK(mask == mech.sample(f, Seed(11)).mask());
}
