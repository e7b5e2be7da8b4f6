#include "hclt/imputation.hpp"

#include "hclt/error.hpp"

#include <algorithm>
#include <cmath>

namespace hclt {

namespace {

constexpr double kRidgeFactor = 1e-10;

bool member_is_gaussian(const ArraySpec& spec, std::size_t m) {
  for (const auto& law : spec.laws(m))
    if (!law.is_degenerate() && law.kind() != LawKind::gaussian) return false;
  return true;
}

std::vector<Eigen::Index> as_index(const std::vector<std::size_t>& in) {
  return {in.begin(), in.end()};
}

/// Draws N(0, cov) through cov = P' L D L' P with negative pivots clamped to zero.
Eigen::VectorXd draw_ldlt(const Eigen::MatrixXd& cov, Stream& stream) {
  const Eigen::Index k = cov.rows();
  Eigen::VectorXd xi(k);
  for (Eigen::Index i = 0; i < k; ++i) xi[i] = stream.normal();
  if (k == 0) return xi;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd y = ldlt.matrixL() * d.cwiseProduct(xi).eval();
  return ldlt.transpositionsP().transpose() * y;
}

}  // namespace

GaussianConditioner::GaussianConditioner(Kernel prior) : prior_(std::move(prior)) {
  if (!prior_.is_symmetric(1e-10 * std::max(1.0, prior_.values().cwiseAbs().maxCoeff())))
    throw CovarianceError("prior covariance is not symmetric");
  if (!prior_.is_psd(1e-8)) throw CovarianceError("prior covariance is not positive semi-definite");
  ridge_ = kRidgeFactor * prior_.values().trace() / static_cast<double>(prior_.size());
}

ConditionalLaw GaussianConditioner::condition(const MissingnessPattern& pattern, const Eigen::VectorXd& observed) const {
  require_same_grid(prior_.grid(), pattern.grid());
  const auto obs = as_index(pattern.observed_indices());
  ConditionalLaw law;
  law.missing_indices = pattern.missing_indices();
  if (static_cast<std::size_t>(observed.size()) != obs.size())
    throw ArgumentError("observed value count differs from the observed index count");
  const auto mis = as_index(law.missing_indices);
  if (mis.empty()) return law;
  const Eigen::MatrixXd& sigma = prior_.values();
  law.cov_missing = sigma(mis, mis);
  law.mean_missing = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mis.size()));
  if (obs.empty() || ridge_ == 0.0) return law;

  Eigen::MatrixXd s11 = sigma(obs, obs);
  s11.diagonal().array() += ridge_;
  const Eigen::MatrixXd s01 = sigma(mis, obs);
  const Eigen::LLT<Eigen::MatrixXd> llt(s11);
  if (llt.info() != Eigen::Success) throw CovarianceError("observed block is not positive definite after the ridge");
  law.mean_missing = s01 * llt.solve(observed);
  law.cov_missing -= s01 * llt.solve(s01.transpose());
  law.cov_missing = 0.5 * (law.cov_missing + law.cov_missing.transpose()).eval();
  return law;
}

ConditionalLaw condition_gaussian(const Kernel& prior_cov, const MissingnessPattern& pattern,
                                  const Eigen::VectorXd& observed) {
  return GaussianConditioner(prior_cov).condition(pattern, observed);
}

FactorConditioner::FactorConditioner(GridPtr grid, Eigen::MatrixXd factor)
    : grid_(std::move(grid)), factor_(std::move(factor)) {
  if (static_cast<std::size_t>(factor_.rows()) != grid_->size()) throw GridMismatchError("factor rows differ from grid size");
  ridge_ = kRidgeFactor * factor_.squaredNorm() / static_cast<double>(grid_->size());
}

ConditionalLaw FactorConditioner::condition(const MissingnessPattern& pattern, const Eigen::VectorXd& observed) const {
  require_same_grid(grid_, pattern.grid());
  const auto obs = as_index(pattern.observed_indices());
  if (static_cast<std::size_t>(observed.size()) != obs.size())
    throw ArgumentError("observed value count differs from the observed index count");
  ConditionalLaw law;
  law.missing_indices = pattern.missing_indices();
  const auto mis = as_index(law.missing_indices);
  if (mis.empty()) return law;
  const Eigen::MatrixXd f0 = factor_(mis, Eigen::all);
  if (ridge_ == 0.0) {
    law.mean_missing = Eigen::VectorXd::Zero(f0.rows());
    law.cov_missing = Eigen::MatrixXd::Zero(f0.rows(), f0.rows());
    return law;
  }
  const Eigen::MatrixXd f1 = factor_(obs, Eigen::all);
  Eigen::MatrixXd a = f1.transpose() * f1;
  a.diagonal().array() += ridge_;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  law.mean_missing = f0 * llt.solve(f1.transpose() * observed);
  law.cov_missing = ridge_ * f0 * llt.solve(f0.transpose());
  law.cov_missing = 0.5 * (law.cov_missing + law.cov_missing.transpose()).eval();
  return law;
}

namespace {

/// Factor-route imputation with factor = basis * diag(scale).
void impute_scaled(const Eigen::MatrixXd& basis, const Eigen::VectorXd& scale, double ridge,
                   const std::vector<bool>& mask, Eigen::VectorXd& values, Stream& noise, NoiseMode mode,
                   bool mean_only) {
  const Eigen::Index g = basis.rows();
  const Eigen::Index j = basis.cols();
  if (static_cast<Eigen::Index>(mask.size()) != g || values.size() != g)
    throw GridMismatchError("mask or values differ from the grid size");
  if (std::all_of(mask.begin(), mask.end(), [](bool b) { return b; })) return;
  if (ridge == 0.0) {
    for (Eigen::Index i = 0; i < g; ++i)
      if (!mask[static_cast<std::size_t>(i)]) values[i] = 0.0;
    return;
  }
  thread_local Eigen::VectorXd weight;
  thread_local Eigen::VectorXd weighted_values;
  weight.resize(g);
  for (Eigen::Index i = 0; i < g; ++i) weight[i] = mask[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  weighted_values = weight.cwiseProduct(values);
  Eigen::MatrixXd a(j, j);
  Eigen::VectorXd b(j);
  for (Eigen::Index k = 0; k < j; ++k) {
    const auto wk = basis.col(k).cwiseProduct(weight).eval();
    for (Eigen::Index l = 0; l <= k; ++l) a(k, l) = a(l, k) = wk.dot(basis.col(l));
    b[k] = basis.col(k).dot(weighted_values);
  }
  // Work in unscaled coordinates: with S = diag(scale), F1'F1 = S B1'B1 S.
  a = scale.asDiagonal() * a * scale.asDiagonal();
  b = scale.cwiseProduct(b);
  a.diagonal().array() += ridge;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  const Eigen::VectorXd mean = scale.cwiseProduct(llt.solve(b));
  Eigen::VectorXd coefficients = mean;
  double break_scale = 0.0;
  if (!mean_only) {
    Eigen::VectorXd xi(j);
    for (Eigen::Index k = 0; k < j; ++k) xi[k] = noise.normal();
    coefficients += scale.cwiseProduct(std::sqrt(ridge) * llt.matrixU().solve(xi));
    if (mode == NoiseMode::deliberate_break) break_scale = noise.normal();
  }
  for (Eigen::Index i = 0; i < g; ++i) {
    if (mask[static_cast<std::size_t>(i)]) continue;
    const auto row = basis.row(i);
    values[i] = row.dot(coefficients) + break_scale * row.dot(mean);
  }
}

double scaled_ridge(const Eigen::MatrixXd& basis, const Eigen::VectorXd& scale) {
  return kRidgeFactor * (basis.colwise().squaredNorm().transpose().array() * scale.array().square()).sum() /
         static_cast<double>(basis.rows());
}

}  // namespace

void FactorConditioner::impute(const std::vector<bool>& mask, Eigen::VectorXd& values, Stream& noise, NoiseMode mode,
                               bool mean_only) const {
  impute_scaled(factor_, Eigen::VectorXd::Ones(factor_.cols()), ridge_, mask, values, noise, mode, mean_only);
}

PartialElement assemble_partial(const GridFunction& element, const MissingnessPattern& pattern,
                                const Kernel& prior_cov, Seed seed, NoiseMode mode) {
  require_same_grid(element.grid(), pattern.grid());
  require_same_grid(element.grid(), prior_cov.grid());
  const auto parts = split(element, pattern);
  if (parts.missing_indices.empty()) return {element, pattern, seed};
  const auto law = condition_gaussian(prior_cov, pattern, parts.observed_values);
  Eigen::MatrixXd noise_cov = law.cov_missing;
  if (mode == NoiseMode::deliberate_break) noise_cov += law.mean_missing * law.mean_missing.transpose();
  Stream stream(seed);
  const Eigen::VectorXd missing = law.mean_missing + draw_ldlt(noise_cov, stream);
  return {reassemble(element.grid(), parts, missing), pattern, seed};
}

TripleSeeds triple_seeds(Seed replication, std::size_t n, std::size_t m) {
  const Seed element = element_seed(replication, n, m);
  return {element, element.derive("pattern"), element.derive("noise")};
}

PartialSampler::PartialSampler(const ArraySpec& spec, Mechanism mech, NoiseMode mode)
    : spec_(spec), mech_(std::move(mech)), mode_(mode) {
  require_mar(mech_);
  require_same_grid(spec_.grid(), mech_.grid());
}

void PartialSampler::draw(std::size_t n, std::size_t m, Seed replication, Eigen::VectorXd& out,
                          Eigen::VectorXd* complete, std::vector<bool>* mask, bool mean_only) const {
  const auto seeds = triple_seeds(replication, n, m);
  thread_local Eigen::VectorXd c;
  thread_local Eigen::VectorXd scale;
  thread_local std::vector<bool> local_mask;
  const auto j = static_cast<Eigen::Index>(spec_.truncation());
  c.resize(j);
  Stream element_stream(seeds.element);
  spec_.draw_coefficients(n, m, element_stream, c);
  out.noalias() = spec_.basis_matrix() * c;
  if (complete) *complete = out;
  std::vector<bool>& pattern = mask ? *mask : local_mask;
  mech_.sample_mask(out, seeds.pattern, pattern);
  scale.resize(j);
  const auto& laws = spec_.laws(m);
  const double a = spec_.multiplier(n, m);
  for (Eigen::Index k = 0; k < j; ++k) scale[k] = a * laws[static_cast<std::size_t>(k)].scale();
  Stream noise(seeds.noise);
  impute_scaled(spec_.basis_matrix(), scale, scaled_ridge(spec_.basis_matrix(), scale), pattern, out, noise, mode_,
                mean_only);
}

PartialElement PartialSampler::draw(std::size_t n, std::size_t m, Seed replication) const {
  Eigen::VectorXd values;
  std::vector<bool> mask;
  draw(n, m, replication, values, nullptr, &mask);
  return {GridFunction(spec_.grid(), std::move(values)), MissingnessPattern(spec_.grid(), std::move(mask)), replication};
}

ElementDraw partial_draws(const PartialSampler& sampler, std::size_t n, std::size_t m, Seed seed) {
  ArraySpec::check_index(n, m);
  return [&sampler, n, m, seed](std::size_t rep, Eigen::VectorXd& out) { sampler.draw(n, m, seed.derive(rep), out); };
}

SquaredNormSampler partial_norms(const PartialSampler& sampler, std::size_t n, Seed seed) {
  return [&sampler, n, seed](std::size_t m, std::size_t rep) {
    thread_local Eigen::VectorXd x;
    sampler.draw(n, m, seed.derive(rep), x);
    return (x.array().square() * sampler.spec().grid()->weight_vector().array()).sum();
  };
}

KernelEstimate partial_covariance_empirical(const ArraySpec& spec, std::size_t n, std::size_t m, const Mechanism& mech,
                                            std::size_t reps, Seed seed, unsigned workers, NoiseMode mode) {
  const PartialSampler sampler(spec, mech, mode);
  return covariance_from_draws(spec.grid(), reps, partial_draws(sampler, n, m, seed), workers);
}

Eq1Audit lemma_eq1_audit(const ArraySpec& spec, std::size_t n, std::size_t m, const Mechanism& mech, std::size_t reps,
                         Seed seed, const Eq1AuditOptions& options) {
  ArraySpec::check_index(n, m);
  if (!member_is_gaussian(spec, m))
    throw UnsupportedLawError("the covariance audit requires Gaussian coefficient laws; '" + spec.name() +
                              "' member " + std::to_string(m) + " is not Gaussian");
  if (reps < 2) throw ArgumentError("lemma_eq1_audit needs reps >= 2");
  const Seed complete_seed = options.shared_seeds ? seed : seed.derive("complete");
  const Seed partial_seed = options.shared_seeds ? seed : seed.derive("partial");
  const PartialSampler sampler(spec, mech, options.mode);
  const auto complete =
      covariance_from_draws(spec.grid(), reps, complete_draws(spec, n, m, complete_seed), options.workers);
  const auto partial =
      covariance_from_draws(spec.grid(), reps, partial_draws(sampler, n, m, partial_seed), options.workers);

  Eq1Audit audit;
  audit.reps = reps;
  const double count = static_cast<double>(reps);
  audit.cov_distance = kernel_l2_norm(partial.kernel - complete.kernel);
  audit.cov_stderr = std::hypot(partial.stderr_bound, complete.stderr_bound);
  audit.partial_moment = partial.second_moment;
  audit.complete_moment = complete.second_moment;
  audit.moment_gap = std::abs(partial.second_moment - complete.second_moment);
  auto moment_var = [count](const KernelEstimate& k) {
    return std::max(k.fourth_moment - k.second_moment * k.second_moment, 0.0) * count / (count - 1.0);
  };
  audit.moment_stderr = std::sqrt((moment_var(partial) + moment_var(complete)) / count);
  audit.cov_pass = audit.cov_distance <= 4.0 * audit.cov_stderr;
  audit.moment_pass = audit.moment_gap <= 4.0 * audit.moment_stderr;
  audit.pass = audit.cov_pass && audit.moment_pass;
  return audit;
}

MeanEstimate conditional_mean_check(const ArraySpec& spec, std::size_t n, std::size_t m, const Mechanism& mech,
                                    std::size_t reps, Seed seed, unsigned workers) {
  ArraySpec::check_index(n, m);
  const PartialSampler sampler(spec, mech);
  return mean_from_draws(
      spec.grid(), reps,
      [&](std::size_t rep, Eigen::VectorXd& out) { sampler.draw(n, m, seed.derive(rep), out, nullptr, nullptr, true); },
      workers);
}

RowCovarianceResidual row_covariance_residual(const ArraySpec& spec, std::size_t n, const Mechanism& mech,
                                              const Kernel& sigma, std::size_t reps, Seed seed, unsigned workers) {
  if (n < 1) throw IndexError("row index n must be >= 1");
  require_same_grid(spec.grid(), sigma.grid());
  const PartialSampler sampler(spec, mech);
  Kernel partial_sum = Kernel::zero(spec.grid());
  Kernel complete_sum = Kernel::zero(spec.grid());
  double partial_var = 0.0;
  double complete_var = 0.0;
  for (std::size_t m = 1; m <= n; ++m) {
    const auto p = covariance_from_draws(spec.grid(), reps, partial_draws(sampler, n, m, seed), workers);
    const auto c = covariance_from_draws(spec.grid(), reps, complete_draws(spec, n, m, seed), workers);
    partial_sum += p.kernel;
    complete_sum += c.kernel;
    partial_var += p.stderr_bound * p.stderr_bound;
    complete_var += c.stderr_bound * c.stderr_bound;
  }
  return {kernel_l2_norm(partial_sum - sigma), kernel_l2_norm(complete_sum - sigma), std::sqrt(partial_var),
          std::sqrt(complete_var)};
}

}  // namespace hclt
