#pragma once

// Numeric verifiers for the scalar and complex inequalities behind the
// characteristic-functional argument.

#include "hclt/l2.hpp"
#include "hclt/rng.hpp"
#include "hclt/triangular_array.hpp"

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hclt {

using Complex = std::complex<double>;

/// Complex sequence with an optional declared modulus bound.
class ComplexSeq {
 public:
  ComplexSeq(std::vector<Complex> values, std::optional<double> modulus_bound = std::nullopt);

  const std::vector<Complex>& values() const { return values_; }
  std::optional<double> modulus_bound() const { return modulus_bound_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<Complex> values_;
  std::optional<double> modulus_bound_;
};

/// One row of the product-limit check for a triangular sequence c_{1..n,n}.
struct ProductLimitRow {
  std::size_t n = 0;
  double max_term = 0.0;
  double sum = 0.0;
  double abs_sum = 0.0;
  double product = 0.0;
  double target = 0.0;
  double error = 0.0;
};

/// prod_j (1 + c_{j,n}) against exp(lambda) for every row supplied.
std::vector<ProductLimitRow> product_limit_check(std::span<const std::vector<double>> rows, double lambda);

/// Hypothesis diagnostics over a sweep: max|c| decreasing toward 0 and
/// sup_n sum|c| bounded by `abs_sum_cap`.
struct ProductHypotheses {
  bool max_term_vanishing = false;
  bool abs_sum_bounded = false;
  double sup_abs_sum = 0.0;
};
ProductHypotheses product_hypotheses(std::span<const ProductLimitRow> rows, double abs_sum_cap);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// |prod z - prod w| <= theta^(n-1) sum |z_m - w_m|. Both sequences must
/// declare the same modulus bound theta, or theta is taken as the largest
/// observed modulus when neither declares one. Throws ArgumentError on length
/// mismatch.
BoundCheck complex_product_bound(const ComplexSeq& z, const ComplexSeq& w);

/// |e^{ix} - sum_{k=0}^{order} (ix)^k / k!| <= min(|x|^{order+1}/(order+1)!, 2|x|^order/order!).
BoundCheck taylor_remainder_bound(double x, std::size_t order);

/// Second-order expansion of the characteristic functional along t psi.
struct ExpansionPoint {
  double t = 0.0;
  /// |phi_hat(t psi) - (1 + i t m1 - t^2 m2 / 2)| with empirical moments of
  /// u = <psi, chi> from the same draws; m1 vanishes in expectation.
  double residual = 0.0;
  double ratio = 0.0;
  /// Sample mean of min(|t u|^3 / 6, (t u)^2), which dominates the residual pathwise.
  double pathwise_bound = 0.0;
  /// exp(-t^2 s2/2) - (1 - t^2 s2/2) with s2 = pairing(K_{n,m}, psi); exact for Gaussian laws.
  double gaussian_closed_form = 0.0;
};

std::vector<ExpansionPoint> char_expansion_residual(const ArraySpec& spec, std::size_t n, std::size_t m,
                                                    const GridFunction& psi, std::span<const double> scalings,
                                                    std::size_t reps, Seed seed);

/// Pathwise form of the link inequality: for every draw,
/// |e^{iu} - (1 + iu - u^2/2)| <= min(|u|^3/6, u^2) <= min(|u|^3, 2u^2).
bool expansion_min_bound_holds(double u, double tolerance = 1e-12);

/// Chain check on one row: z_m = empirical cf of <g, chi_{n,m}>, w_m its
/// second-order expansion with empirical moments; verifies
/// |prod z - prod w| <= theta^(n-1) sum_m |z_m - w_m| <= theta^(n-1) sum_m E min(|u|^3, 2u^2).
struct ChainCheck {
  double product_gap = 0.0;
  double link_sum = 0.0;
  double moment_bound = 0.0;
  double theta = 1.0;
  bool holds = false;
};

ChainCheck cf_chain_check(const ArraySpec& spec, std::size_t n, const GridFunction& g, std::size_t reps, Seed seed);

}  // namespace hclt
