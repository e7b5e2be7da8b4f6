#include "hclt/lemmas.hpp"

#include "hclt/error.hpp"

#include <algorithm>
#include <cmath>

namespace hclt {

ComplexSeq::ComplexSeq(std::vector<Complex> values, std::optional<double> modulus_bound)
    : values_(std::move(values)), modulus_bound_(modulus_bound) {
  if (modulus_bound_) {
    if (!(*modulus_bound_ >= 0.0)) throw ArgumentError("modulus bound must be nonnegative");
    for (const auto& v : values_)
      if (std::abs(v) > *modulus_bound_ + 1e-12) throw ArgumentError("value exceeds the declared modulus bound");
  }
}

std::vector<ProductLimitRow> product_limit_check(std::span<const std::vector<double>> rows, double lambda) {
  std::vector<ProductLimitRow> out;
  out.reserve(rows.size());
  const double target = std::exp(lambda);
  for (const auto& row : rows) {
    ProductLimitRow r;
    r.n = row.size();
    r.product = 1.0;
    // Accumulate the product through log1p to keep long products accurate.
    double log_product = 0.0;
    bool sign_negative = false;
    bool zero = false;
    for (double c : row) {
      r.max_term = std::max(r.max_term, std::abs(c));
      r.sum += c;
      r.abs_sum += std::abs(c);
      const double factor = 1.0 + c;
      if (factor == 0.0) zero = true;
      if (factor < 0.0) sign_negative = !sign_negative;
      if (factor != 0.0) log_product += std::log1p(c > -1.0 ? c : -(2.0 + c)) ;
    }
    r.product = zero ? 0.0 : (sign_negative ? -1.0 : 1.0) * std::exp(log_product);
    r.target = target;
    r.error = std::abs(r.product - target);
    out.push_back(r);
  }
  return out;
}

ProductHypotheses product_hypotheses(std::span<const ProductLimitRow> rows, double abs_sum_cap) {
  ProductHypotheses h;
  if (rows.empty()) return h;
  h.max_term_vanishing = true;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].max_term > rows[i - 1].max_term) h.max_term_vanishing = false;
  if (rows.back().max_term > rows.front().max_term / 2.0 && rows.size() > 1) h.max_term_vanishing = false;
  for (const auto& r : rows) h.sup_abs_sum = std::max(h.sup_abs_sum, r.abs_sum);
  h.abs_sum_bounded = h.sup_abs_sum <= abs_sum_cap;
  return h;
}

BoundCheck complex_product_bound(const ComplexSeq& z, const ComplexSeq& w) {
  if (z.size() != w.size()) throw ArgumentError("complex sequences differ in length");
  double theta = 0.0;
  if (z.modulus_bound() || w.modulus_bound()) {
    if (z.modulus_bound() != w.modulus_bound()) throw ArgumentError("sequences must share one modulus bound");
    theta = *z.modulus_bound();
  } else {
    for (const auto& v : z.values()) theta = std::max(theta, std::abs(v));
    for (const auto& v : w.values()) theta = std::max(theta, std::abs(v));
  }
  Complex pz{1.0, 0.0};
  Complex pw{1.0, 0.0};
  double diff_sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    pz *= z.values()[i];
    pw *= w.values()[i];
    diff_sum += std::abs(z.values()[i] - w.values()[i]);
  }
  BoundCheck check;
  check.lhs = z.size() == 0 ? 0.0 : std::abs(pz - pw);
  check.rhs = z.size() == 0 ? 0.0 : std::pow(theta, static_cast<double>(z.size() - 1)) * diff_sum;
  check.holds = check.lhs <= check.rhs + 1e-12;
  return check;
}

BoundCheck taylor_remainder_bound(double x, std::size_t order) {
  Complex partial{0.0, 0.0};
  Complex term{1.0, 0.0};
  const Complex ix{0.0, x};
  for (std::size_t k = 0; k <= order; ++k) {
    if (k > 0) term *= ix / static_cast<double>(k);
    partial += term;
  }
  const Complex exact{std::cos(x), std::sin(x)};
  const double ax = std::abs(x);
  const double k = static_cast<double>(order);
  const double first = std::exp((k + 1.0) * std::log(ax) - std::lgamma(k + 2.0));
  const double second = order == 0 ? 2.0 : 2.0 * std::exp(k * std::log(ax) - std::lgamma(k + 1.0));
  BoundCheck check;
  check.lhs = std::abs(exact - partial);
  check.rhs = ax == 0.0 ? 0.0 : std::min(first, second);
  check.holds = check.lhs <= check.rhs + 1e-12;
  return check;
}

namespace {

/// e^{iy} - 1 - iy + y^2/2 evaluated without cancellation in the real part.
Complex second_order_remainder(double y) {
  const double s = std::sin(0.5 * y);
  return {-2.0 * s * s + 0.5 * y * y, std::sin(y) - y};
}

std::vector<double> projections(const ArraySpec& spec, std::size_t n, std::size_t m, const GridFunction& psi,
                                std::size_t reps, Seed seed) {
  require_same_grid(spec.grid(), psi.grid());
  const Eigen::VectorXd loading =
      spec.basis_matrix().transpose() * spec.grid()->weight_vector().cwiseProduct(psi.values());
  std::vector<double> u(reps);
  Eigen::VectorXd c(static_cast<Eigen::Index>(spec.truncation()));
  for (std::size_t r = 0; r < reps; ++r) {
    Stream stream(element_seed(seed.derive(r), n, m));
    spec.draw_coefficients(n, m, stream, c);
    u[r] = loading.dot(c);
  }
  return u;
}

}  // namespace

std::vector<ExpansionPoint> char_expansion_residual(const ArraySpec& spec, std::size_t n, std::size_t m,
                                                    const GridFunction& psi, std::span<const double> scalings,
                                                    std::size_t reps, Seed seed) {
  ArraySpec::check_index(n, m);
  if (reps < 1) throw ArgumentError("char_expansion_residual needs reps >= 1");
  const auto u = projections(spec, n, m, psi, reps, seed);
  const double s2 = pairing(analytic_covariance(spec, n, m), psi);
  const double count = static_cast<double>(reps);
  std::vector<ExpansionPoint> out;
  for (double t : scalings) {
    ExpansionPoint p;
    p.t = t;
    Complex remainder{0.0, 0.0};
    double bound = 0.0;
    for (double v : u) {
      const double y = t * v;
      remainder += second_order_remainder(y);
      bound += std::min(std::abs(y * y * y) / 6.0, y * y);
    }
    p.residual = std::abs(remainder / count);
    p.pathwise_bound = bound / count;
    p.ratio = t == 0.0 ? 0.0 : p.residual / (t * t);
    const double half = 0.5 * t * t * s2;
    p.gaussian_closed_form = std::expm1(-half) + half;
    out.push_back(p);
  }
  return out;
}

bool expansion_min_bound_holds(double u, double tolerance) {
  const double lhs = std::abs(second_order_remainder(u));
  const double tight = std::min(std::abs(u * u * u) / 6.0, u * u);
  const double loose = std::min(std::abs(u * u * u), 2.0 * u * u);
  return lhs <= tight + tolerance && tight <= loose + tolerance;
}

ChainCheck cf_chain_check(const ArraySpec& spec, std::size_t n, const GridFunction& g, std::size_t reps, Seed seed) {
  if (n < 1) throw IndexError("row index n must be >= 1");
  if (reps < 1) throw ArgumentError("cf_chain_check needs reps >= 1");
  std::vector<Complex> z(n), w(n);
  ChainCheck check;
  double theta = 1.0;
  const double count = static_cast<double>(reps);
  for (std::size_t m = 1; m <= n; ++m) {
    const auto u = projections(spec, n, m, g, reps, seed);
    Complex cf{0.0, 0.0};
    double m1 = 0.0, m2 = 0.0, bound = 0.0;
    for (double v : u) {
      cf += Complex{std::cos(v), std::sin(v)};
      m1 += v;
      m2 += v * v;
      bound += std::min(std::abs(v * v * v), 2.0 * v * v);
    }
    z[m - 1] = cf / count;
    w[m - 1] = Complex{1.0 - 0.5 * m2 / count, m1 / count};
    check.link_sum += std::abs(z[m - 1] - w[m - 1]);
    check.moment_bound += bound / count;
    theta = std::max({theta, std::abs(z[m - 1]), std::abs(w[m - 1])});
  }
  Complex pz{1.0, 0.0}, pw{1.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    pz *= z[i];
    pw *= w[i];
  }
  check.theta = theta;
  check.product_gap = std::abs(pz - pw);
  const double scale = std::pow(theta, static_cast<double>(n - 1));
  const double tol = 1e-12;
  check.holds = check.product_gap <= scale * check.link_sum + tol && check.link_sum <= check.moment_bound + tol;
  return check;
}

}  // namespace hclt
