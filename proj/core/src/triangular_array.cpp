#include "hclt/triangular_array.hpp"

#include "hclt/error.hpp"
#include "hclt/parallel.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace hclt {

std::string to_string(LawKind kind) {
  switch (kind) {
    case LawKind::gaussian: return "gaussian";
    case LawKind::uniform: return "uniform";
    case LawKind::rademacher: return "rademacher";
    case LawKind::student_t: return "student-t";
    case LawKind::point_mass_mixture: return "point-mass-mixture";
  }
  return "unknown";
}

LawKind law_kind_from_string(const std::string& name) {
  if (name == "gaussian") return LawKind::gaussian;
  if (name == "uniform") return LawKind::uniform;
  if (name == "rademacher") return LawKind::rademacher;
  if (name == "student-t") return LawKind::student_t;
  if (name == "point-mass-mixture") return LawKind::point_mass_mixture;
  throw ArgumentError("unknown coefficient law '" + name + "'");
}

// CoefficientLaw

CoefficientLaw::CoefficientLaw(LawKind kind, double scale, double nu, double zero_prob)
    : kind_(kind), scale_(scale), nu_(nu), zero_prob_(zero_prob) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ArgumentError("coefficient scale must be finite and >= 0");
  if (kind == LawKind::student_t) {
    if (!(nu > 2.0)) throw ArgumentError("student-t needs nu > 2 for a finite variance");
    t_normalizer_ = std::sqrt((nu - 2.0) / nu);
  }
  if (kind == LawKind::point_mass_mixture && !(zero_prob >= 0.0 && zero_prob <= 1.0))
    throw ArgumentError("zero_prob must lie in [0,1]");
  if (kind == LawKind::point_mass_mixture && zero_prob == 1.0 && scale != 0.0)
    throw ArgumentError("a point mass at zero has zero scale");
}

CoefficientLaw CoefficientLaw::gaussian(double scale) { return {LawKind::gaussian, scale, 0.0, 0.0}; }
CoefficientLaw CoefficientLaw::uniform(double scale) { return {LawKind::uniform, scale, 0.0, 0.0}; }
CoefficientLaw CoefficientLaw::rademacher(double scale) { return {LawKind::rademacher, scale, 0.0, 0.0}; }
CoefficientLaw CoefficientLaw::student_t(double nu, double scale) { return {LawKind::student_t, scale, nu, 0.0}; }
CoefficientLaw CoefficientLaw::point_mass_mixture(double zero_prob, double scale) {
  return {LawKind::point_mass_mixture, scale, 0.0, zero_prob};
}

std::optional<double> CoefficientLaw::bound() const {
  if (is_degenerate()) return 0.0;
  switch (kind_) {
    case LawKind::rademacher: return scale_;
    case LawKind::uniform: return std::sqrt(3.0) * scale_;
    case LawKind::point_mass_mixture: return scale_ / std::sqrt(1.0 - zero_prob_);
    case LawKind::gaussian:
    case LawKind::student_t: return std::nullopt;
  }
  return std::nullopt;
}

bool CoefficientLaw::has_finite_abs_moment(double p) const {
  if (is_degenerate() || kind_ != LawKind::student_t) return true;
  return p < nu_;
}

double CoefficientLaw::abs_moment(double p) const {
  if (is_degenerate()) return p == 0.0 ? 1.0 : 0.0;
  const double s = scale_;
  switch (kind_) {
    case LawKind::gaussian:
      return std::pow(2.0, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(std::numbers::pi) * std::pow(s, p);
    case LawKind::uniform: return std::pow(std::sqrt(3.0) * s, p) / (p + 1.0);
    case LawKind::rademacher: return std::pow(s, p);
    case LawKind::point_mass_mixture: return (1.0 - zero_prob_) * std::pow(s / std::sqrt(1.0 - zero_prob_), p);
    case LawKind::student_t: {
      if (p >= nu_) return std::numeric_limits<double>::infinity();
      const double t_moment = std::pow(nu_, p / 2.0) * std::tgamma((p + 1.0) / 2.0) * std::tgamma((nu_ - p) / 2.0) /
                              (std::sqrt(std::numbers::pi) * std::tgamma(nu_ / 2.0));
      return std::pow(t_normalizer_ * s, p) * t_moment;
    }
  }
  return 0.0;
}

double CoefficientLaw::draw(Stream& stream) const {
  if (is_degenerate()) return 0.0;
  switch (kind_) {
    case LawKind::gaussian: return scale_ * stream.normal();
    case LawKind::uniform: return std::sqrt(3.0) * scale_ * (2.0 * stream.uniform() - 1.0);
    case LawKind::rademacher: return stream.coin() ? scale_ : -scale_;
    case LawKind::student_t: {
      std::student_t_distribution<double> t(nu_);
      return t_normalizer_ * scale_ * t(stream);
    }
    case LawKind::point_mass_mixture: {
      if (stream.uniform() < zero_prob_) return 0.0;
      const double magnitude = scale_ / std::sqrt(1.0 - zero_prob_);
      return stream.coin() ? magnitude : -magnitude;
    }
  }
  return 0.0;
}

// RowScaling / CoefficientPlan

double RowScaling::multiplier(std::size_t n, std::size_t m) const {
  if (auto it = fixed.find(m); it != fixed.end()) return it->second;
  switch (kind) {
    case Kind::inverse_sqrt_n: return 1.0 / std::sqrt(static_cast<double>(n));
    case Kind::unit: return 1.0;
  }
  return 1.0;
}

const std::vector<CoefficientLaw>& CoefficientPlan::laws(std::size_t m) const {
  if (auto it = overrides.find(m); it != overrides.end()) return it->second;
  return cycle[(m - 1) % cycle.size()];
}

// ArraySpec

ArraySpec::ArraySpec(std::string name, GridPtr grid, std::vector<GridFunction> basis, CoefficientPlan plan,
                     RowScaling scaling)
    : name_(std::move(name)),
      grid_(std::move(grid)),
      basis_(std::move(basis)),
      plan_(std::move(plan)),
      scaling_(std::move(scaling)) {
  if (basis_.empty()) throw ArgumentError("array spec needs at least one basis function");
  for (const auto& b : basis_) require_same_grid(grid_, b.grid());
  gram_ = gram_matrix(basis_);
  const auto j = static_cast<Eigen::Index>(basis_.size());
  if ((gram_ - Eigen::MatrixXd::Identity(j, j)).cwiseAbs().maxCoeff() > 1e-8)
    throw ArgumentError("basis is not orthonormal to 1e-8");
  if (plan_.cycle.empty()) throw ArgumentError("coefficient plan needs at least one member law set");
  auto check = [&](const std::vector<CoefficientLaw>& laws) {
    if (laws.size() != basis_.size()) throw ArgumentError("one coefficient law per basis function is required");
  };
  for (const auto& laws : plan_.cycle) check(laws);
  for (const auto& [m, laws] : plan_.overrides) {
    if (m == 0) throw ArgumentError("members are numbered from 1");
    check(laws);
  }
  basis_matrix_.resize(static_cast<Eigen::Index>(grid_->size()), j);
  for (Eigen::Index k = 0; k < j; ++k) basis_matrix_.col(k) = basis_[static_cast<std::size_t>(k)].values();
}

ArraySpec ArraySpec::homogeneous(std::string name, GridPtr grid, std::size_t basis_size, CoefficientLaw law,
                                 RowScaling scaling) {
  auto basis = fourier_basis(grid, basis_size);
  CoefficientPlan plan;
  plan.cycle.push_back(std::vector<CoefficientLaw>(basis_size, law));
  return ArraySpec(std::move(name), std::move(grid), std::move(basis), std::move(plan), std::move(scaling));
}

bool ArraySpec::is_gaussian(std::size_t n) const {
  auto gaussian = [](const std::vector<CoefficientLaw>& laws) {
    for (const auto& law : laws)
      if (!law.is_degenerate() && law.kind() != LawKind::gaussian) return false;
    return true;
  };
  const std::size_t cycle_members = std::min(n, plan_.cycle.size());
  for (std::size_t c = 0; c < cycle_members; ++c)
    if (!gaussian(plan_.cycle[c])) return false;
  for (const auto& [m, laws] : plan_.overrides)
    if (m <= n && !gaussian(laws)) return false;
  return true;
}

void ArraySpec::check_index(std::size_t n, std::size_t m) {
  if (m < 1 || m > n)
    throw IndexError("member index m=" + std::to_string(m) + " outside 1..n with n=" + std::to_string(n));
}

void ArraySpec::draw_coefficients(std::size_t n, std::size_t m, Stream& stream,
                                  Eigen::Ref<Eigen::VectorXd> out) const {
  const auto& member_laws = laws(m);
  const double a = multiplier(n, m);
  for (std::size_t j = 0; j < member_laws.size(); ++j) out[static_cast<Eigen::Index>(j)] = a * member_laws[j].draw(stream);
}

GridFunction ArraySpec::expand(const Eigen::VectorXd& coefficients) const {
  return GridFunction(grid_, basis_matrix_ * coefficients);
}

Eigen::MatrixXd ArraySpec::covariance_factor(std::size_t n, std::size_t m) const {
  check_index(n, m);
  const auto& member_laws = laws(m);
  const double a = multiplier(n, m);
  Eigen::VectorXd sd(static_cast<Eigen::Index>(member_laws.size()));
  for (std::size_t j = 0; j < member_laws.size(); ++j) sd[static_cast<Eigen::Index>(j)] = a * member_laws[j].scale();
  return basis_matrix_ * sd.asDiagonal();
}

std::optional<double> ArraySpec::norm_bound(std::size_t n, std::size_t m) const {
  check_index(n, m);
  Eigen::VectorXd bounds(static_cast<Eigen::Index>(truncation()));
  const auto& member_laws = laws(m);
  for (std::size_t j = 0; j < member_laws.size(); ++j) {
    auto b = member_laws[j].bound();
    if (!b) return std::nullopt;
    bounds[static_cast<Eigen::Index>(j)] = *b;
  }
  // ||c' B|| <= sqrt(lambda_max(Gram)) ||c||, and |c_j| <= a b_j.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram_, Eigen::EigenvaluesOnly);
  return multiplier(n, m) * std::sqrt(solver.eigenvalues().maxCoeff()) * bounds.norm();
}

// Sampling

Eigen::VectorXd sample_coefficients(const ArraySpec& spec, std::size_t n, std::size_t m, Seed seed) {
  ArraySpec::check_index(n, m);
  Eigen::VectorXd c(static_cast<Eigen::Index>(spec.truncation()));
  Stream stream(element_seed(seed, n, m));
  spec.draw_coefficients(n, m, stream, c);
  return c;
}

Sample sample_element(const ArraySpec& spec, std::size_t n, std::size_t m, Seed seed) {
  return Sample{spec.expand(sample_coefficients(spec, n, m, seed)), n, m, seed};
}

Kernel analytic_covariance(const ArraySpec& spec, std::size_t n, std::size_t m) {
  const Eigen::MatrixXd factor = spec.covariance_factor(n, m);
  return Kernel(spec.grid(), factor * factor.transpose());
}

Kernel row_covariance_sum(const ArraySpec& spec, std::size_t n) {
  if (n < 1) throw IndexError("row index n must be >= 1");
  Kernel total = Kernel::zero(spec.grid());
  for (std::size_t m = 1; m <= n; ++m) total += analytic_covariance(spec, n, m);
  return total;
}

namespace {

constexpr std::size_t kRepChunk = 256;

struct SecondMomentAccumulator {
  Eigen::MatrixXd outer;
  double second = 0.0;
  double fourth = 0.0;
};

}  // namespace

KernelEstimate covariance_from_draws(const GridPtr& grid, std::size_t reps, const ElementDraw& draw,
                                    unsigned workers) {
  if (reps < 2) throw ArgumentError("covariance estimation needs reps >= 2");
  const auto g = static_cast<Eigen::Index>(grid->size());
  const Eigen::ArrayXd w = grid->weight_vector().array();
  SecondMomentAccumulator init{Eigen::MatrixXd::Zero(g, g), 0.0, 0.0};
  auto acc = chunked_reduce(
      Chunking{reps, kRepChunk}, workers, init,
      [&](std::size_t begin, std::size_t end) {
        SecondMomentAccumulator local{Eigen::MatrixXd::Zero(g, g), 0.0, 0.0};
        Eigen::VectorXd x(g);
        for (std::size_t r = begin; r < end; ++r) {
          draw(r, x);
          local.outer.selfadjointView<Eigen::Lower>().rankUpdate(x);
          const double sq = (x.array().square() * w).sum();
          local.second += sq;
          local.fourth += sq * sq;
        }
        return local;
      },
      [](SecondMomentAccumulator a, SecondMomentAccumulator b) {
        a.outer += b.outer;
        a.second += b.second;
        a.fourth += b.fourth;
        return a;
      });
  const double count = static_cast<double>(reps);
  Eigen::MatrixXd mean = acc.outer.selfadjointView<Eigen::Lower>();
  mean /= count;
  Kernel k(grid, std::move(mean));
  const double knorm = kernel_l2_norm(k);
  const double spread = std::max(acc.fourth / count - knorm * knorm, 0.0);
  return {std::move(k), std::sqrt(spread / (count - 1.0)), reps, acc.second / count, acc.fourth / count};
}

MeanEstimate mean_from_draws(const GridPtr& grid, std::size_t reps, const ElementDraw& draw, unsigned workers) {
  if (reps < 2) throw ArgumentError("mean estimation needs reps >= 2");
  const auto g = static_cast<Eigen::Index>(grid->size());
  const Eigen::ArrayXd w = grid->weight_vector().array();
  struct Acc {
    Eigen::VectorXd sum;
    double sq = 0.0;
  };
  auto acc = chunked_reduce(
      Chunking{reps, kRepChunk}, workers, Acc{Eigen::VectorXd::Zero(g), 0.0},
      [&](std::size_t begin, std::size_t end) {
        Acc local{Eigen::VectorXd::Zero(g), 0.0};
        Eigen::VectorXd x(g);
        for (std::size_t r = begin; r < end; ++r) {
          draw(r, x);
          local.sum += x;
          local.sq += (x.array().square() * w).sum();
        }
        return local;
      },
      [](Acc a, Acc b) {
        a.sum += b.sum;
        a.sq += b.sq;
        return a;
      });
  const double count = static_cast<double>(reps);
  GridFunction mean(grid, acc.sum / count);
  const double mean_sq = inner_product(mean, mean);
  const double spread = std::max(acc.sq / count - mean_sq, 0.0);
  return {std::move(mean), std::sqrt(spread / (count - 1.0))};
}

ElementDraw complete_draws(const ArraySpec& spec, std::size_t n, std::size_t m, Seed seed) {
  ArraySpec::check_index(n, m);
  return [&spec, n, m, seed](std::size_t rep, Eigen::VectorXd& out) {
    thread_local Eigen::VectorXd c;
    c.resize(static_cast<Eigen::Index>(spec.truncation()));
    Stream stream(element_seed(seed.derive(rep), n, m));
    spec.draw_coefficients(n, m, stream, c);
    out.noalias() = spec.basis_matrix() * c;
  };
}

KernelEstimate empirical_covariance(const ArraySpec& spec, std::size_t n, std::size_t m, std::size_t reps, Seed seed,
                                    unsigned workers) {
  return covariance_from_draws(spec.grid(), reps, complete_draws(spec, n, m, seed), workers);
}

MeanEstimate empirical_mean(const ArraySpec& spec, std::size_t n, std::size_t m, std::size_t reps, Seed seed,
                            unsigned workers) {
  return mean_from_draws(spec.grid(), reps, complete_draws(spec, n, m, seed), workers);
}

// Presets

namespace presets {

namespace {

std::vector<CoefficientLaw> repeat(std::size_t count, CoefficientLaw law) { return std::vector<CoefficientLaw>(count, law); }

}  // namespace

ArraySpec lf_pass(GridPtr grid, std::size_t basis_size) {
  CoefficientPlan plan;
  for (double variance : {1.0, 0.6, 0.3, 0.1})
    plan.cycle.push_back(repeat(basis_size, CoefficientLaw::rademacher(std::sqrt(variance))));
  auto basis = fourier_basis(grid, basis_size);
  return ArraySpec(kLfPass, std::move(grid), std::move(basis), std::move(plan), RowScaling{});
}

ArraySpec lf_fail(GridPtr grid, std::size_t basis_size) {
  CoefficientPlan plan;
  plan.cycle.push_back(repeat(basis_size, CoefficientLaw::rademacher(0.5)));
  auto fixed = repeat(basis_size, CoefficientLaw::zero());
  fixed[0] = CoefficientLaw::rademacher(1.0);
  plan.overrides.emplace(1, std::move(fixed));
  RowScaling scaling;
  scaling.fixed.emplace(1, 1.0);
  auto basis = fourier_basis(grid, basis_size);
  return ArraySpec(kLfFail, std::move(grid), std::move(basis), std::move(plan), std::move(scaling));
}

ArraySpec lyapunov_pass(GridPtr grid, std::size_t basis_size) {
  return ArraySpec::homogeneous(kLyapunovPass, std::move(grid), basis_size, CoefficientLaw::gaussian(1.0));
}

ArraySpec heavy_tail(GridPtr grid, std::size_t basis_size) {
  return ArraySpec::homogeneous(kHeavyTail, std::move(grid), basis_size, CoefficientLaw::student_t(kHeavyTailNu, 1.0));
}

ArraySpec gauss_j2(GridPtr grid) {
  return ArraySpec::homogeneous(kGaussJ2, std::move(grid), 2, CoefficientLaw::gaussian(1.0));
}

ArraySpec rademacher_j1(GridPtr grid) {
  return ArraySpec::homogeneous(kRademacherJ1, std::move(grid), 1, CoefficientLaw::rademacher(1.0));
}

std::vector<std::string> names() { return {kLfPass, kLfFail, kLyapunovPass, kHeavyTail, kGaussJ2, kRademacherJ1}; }

bool exists(const std::string& name) {
  for (const auto& n : names())
    if (n == name) return true;
  return false;
}

ArraySpec make(const std::string& name, GridPtr grid, std::size_t basis_size) {
  const std::size_t j = basis_size == 0 ? kDefaultBasisSize : basis_size;
  if (name == kLfPass) return lf_pass(std::move(grid), j);
  if (name == kLfFail) return lf_fail(std::move(grid), j);
  if (name == kLyapunovPass) return lyapunov_pass(std::move(grid), j);
  if (name == kHeavyTail) return heavy_tail(std::move(grid), j);
  if (name == kGaussJ2) {
    if (basis_size != 0 && basis_size != 2) throw ArgumentError("GAUSS-J2 has exactly two basis functions");
    return gauss_j2(std::move(grid));
  }
  if (name == kRademacherJ1) {
    if (basis_size != 0 && basis_size != 1) throw ArgumentError("RADEMACHER-J1 has exactly one basis function");
    return rademacher_j1(std::move(grid));
  }
  throw ArgumentError("unknown scenario '" + name + "'");
}

Kernel limit_covariance(const ArraySpec& spec) {
  const auto j = static_cast<Eigen::Index>(spec.truncation());
  const auto& plan = spec.plan();
  const auto& scaling = spec.scaling();
  Eigen::VectorXd variance = Eigen::VectorXd::Zero(j);
  if (scaling.kind == RowScaling::Kind::inverse_sqrt_n) {
    for (const auto& laws : plan.cycle)
      for (Eigen::Index k = 0; k < j; ++k) variance[k] += laws[static_cast<std::size_t>(k)].variance();
    variance /= static_cast<double>(plan.cycle.size());
  } else {
    for (const auto& laws : plan.cycle)
      for (const auto& law : laws)
        if (law.variance() > 0.0) throw ArgumentError("row sums without 1/sqrt(n) scaling have no limit");
  }
  for (const auto& [m, a] : scaling.fixed) {
    const auto& laws = plan.laws(m);
    for (Eigen::Index k = 0; k < j; ++k) variance[k] += a * a * laws[static_cast<std::size_t>(k)].variance();
  }
  const Eigen::MatrixXd& b = spec.basis_matrix();
  return Kernel(spec.grid(), b * variance.asDiagonal() * b.transpose());
}

}  // namespace presets

}  // namespace hclt
