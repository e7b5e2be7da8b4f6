#pragma once

// Random generators shared by the unit tests.

#include "hclt/l2.hpp"
#include "hclt/rng.hpp"
#include "hclt/triangular_array.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace hclt::test {

inline GridFunction random_function(const GridPtr& grid, Stream& s) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid->size()));
  for (auto& x : v) x = s.normal();
  return GridFunction(grid, v);
}

inline Kernel random_kernel(const GridPtr& grid, Stream& s) {
  const auto g = static_cast<Eigen::Index>(grid->size());
  Eigen::MatrixXd m(g, g);
  for (Eigen::Index i = 0; i < g; ++i)
    for (Eigen::Index j = 0; j < g; ++j) m(i, j) = s.normal();
  return Kernel(grid, m);
}

/// F F' with F of size G x rank.
inline Kernel random_psd_kernel(const GridPtr& grid, Stream& s, Eigen::Index rank) {
  const auto g = static_cast<Eigen::Index>(grid->size());
  Eigen::MatrixXd f(g, rank);
  for (Eigen::Index i = 0; i < g; ++i)
    for (Eigen::Index j = 0; j < rank; ++j) f(i, j) = s.normal();
  return Kernel(grid, f * f.transpose() / static_cast<double>(rank));
}

/// Random spec for property tests: Fourier basis of random size, one
/// non-degenerate law kind per member cycle, random scales.
inline ArraySpec random_spec(const GridPtr& grid, Stream& s) {
  const std::size_t j = 1 + static_cast<std::size_t>(s.uniform() * 6);
  const std::size_t cycle = 1 + static_cast<std::size_t>(s.uniform() * 3);
  CoefficientPlan plan;
  for (std::size_t c = 0; c < cycle; ++c) {
    std::vector<CoefficientLaw> laws;
    for (std::size_t k = 0; k < j; ++k) {
      const double scale = 0.1 + 1.5 * s.uniform();
      switch (static_cast<int>(s.uniform() * 5)) {
        case 0: laws.push_back(CoefficientLaw::gaussian(scale)); break;
        case 1: laws.push_back(CoefficientLaw::uniform(scale)); break;
        case 2: laws.push_back(CoefficientLaw::rademacher(scale)); break;
        case 3: laws.push_back(CoefficientLaw::student_t(2.2 + 4.0 * s.uniform(), scale)); break;
        default: laws.push_back(CoefficientLaw::point_mass_mixture(0.8 * s.uniform(), scale)); break;
      }
    }
    plan.cycle.push_back(std::move(laws));
  }
  RowScaling scaling;
  if (s.coin()) scaling.kind = RowScaling::Kind::unit;
  return ArraySpec("random", grid, fourier_basis(grid, j), std::move(plan), scaling);
}

}  // namespace hclt::test
