#include "hclt/missingness.hpp"

#include "hclt/error.hpp"
#include "hclt/imputation.hpp"

#include <algorithm>
#include <cmath>

namespace hclt {

MissingnessPattern::MissingnessPattern(GridPtr grid, std::vector<bool> mask) : grid_(std::move(grid)), mask_(std::move(mask)) {
  if (!grid_) throw ArgumentError("pattern needs a grid");
  if (mask_.size() != grid_->size()) throw GridMismatchError("mask length differs from grid size");
}

MissingnessPattern MissingnessPattern::all_observed(GridPtr grid) {
  const auto size = grid->size();
  return {std::move(grid), std::vector<bool>(size, true)};
}

MissingnessPattern MissingnessPattern::all_missing(GridPtr grid) {
  const auto size = grid->size();
  return {std::move(grid), std::vector<bool>(size, false)};
}

std::vector<std::size_t> MissingnessPattern::observed_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> MissingnessPattern::missing_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (!mask_[i]) out.push_back(i);
  return out;
}

std::size_t MissingnessPattern::observed_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), true));
}

SplitElement split(const GridFunction& element, const MissingnessPattern& pattern) {
  require_same_grid(element.grid(), pattern.grid());
  SplitElement parts;
  parts.observed_indices = pattern.observed_indices();
  parts.missing_indices = pattern.missing_indices();
  parts.observed_values.resize(static_cast<Eigen::Index>(parts.observed_indices.size()));
  for (std::size_t k = 0; k < parts.observed_indices.size(); ++k)
    parts.observed_values[static_cast<Eigen::Index>(k)] = element[parts.observed_indices[k]];
  return parts;
}

GridFunction reassemble(const GridPtr& grid, const SplitElement& parts, const Eigen::VectorXd& missing_values) {
  if (static_cast<std::size_t>(missing_values.size()) != parts.missing_indices.size())
    throw ArgumentError("missing value count differs from the missing index count");
  if (parts.observed_indices.size() + parts.missing_indices.size() != grid->size())
    throw GridMismatchError("split parts do not cover the grid");
  Eigen::VectorXd values(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t k = 0; k < parts.observed_indices.size(); ++k)
    values[static_cast<Eigen::Index>(parts.observed_indices[k])] = parts.observed_values[static_cast<Eigen::Index>(k)];
  for (std::size_t k = 0; k < parts.missing_indices.size(); ++k)
    values[static_cast<Eigen::Index>(parts.missing_indices[k])] = missing_values[static_cast<Eigen::Index>(k)];
  return GridFunction(grid, std::move(values));
}

double ObservedPrefix::value(std::size_t i) const {
  if (!observed(i)) throw IndexError("rule read index " + std::to_string(i) + ", which is not an observed prefix point");
  return values_[static_cast<Eigen::Index>(i)];
}

std::size_t ObservedPrefix::last_observed() const {
  for (std::size_t i = position_; i-- > 0;)
    if (mask_[i]) return i;
  return position_;
}

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

Mechanism Mechanism::mcar_bernoulli(GridPtr grid, double p) {
  check_probability(p, "observation probability");
  Mechanism mech(Kind::mcar_bernoulli, std::move(grid), "mcar-bernoulli");
  mech.p_ = p;
  return mech;
}

Mechanism Mechanism::mcar_interval(GridPtr grid, double length) {
  check_probability(length, "interval length");
  const auto size = grid->size();
  Mechanism mech(Kind::mcar_interval, std::move(grid), "mcar-interval");
  mech.block_ = static_cast<std::size_t>(std::llround(length * static_cast<double>(size)));
  return mech;
}

Mechanism Mechanism::mar_threshold(GridPtr grid, double probe_fraction, double threshold, double p_above,
                                   double p_below) {
  check_probability(probe_fraction, "probe fraction");
  check_probability(p_above, "p_above");
  check_probability(p_below, "p_below");
  const auto probe =
      static_cast<std::size_t>(std::ceil(probe_fraction * static_cast<double>(grid->size()) - 1e-9));
  auto rule = [threshold, p_above, p_below](const ObservedPrefix& prefix) {
    const std::size_t last = prefix.last_observed();
    if (last == prefix.position()) return p_below;
    return prefix.value(last) > threshold ? p_above : p_below;
  };
  auto mech = mar_sequential(std::move(grid), probe, rule, "mar-threshold");
  mech.threshold_ = threshold;
  mech.p_above_ = p_above;
  mech.p_below_ = p_below;
  return mech;
}

Mechanism Mechanism::mar_sequential(GridPtr grid, std::size_t probe_count, PrefixRule rule, std::string label) {
  if (!rule) throw ArgumentError("sequential mechanism needs a rule");
  if (probe_count > grid->size()) throw ArgumentError("probe set larger than the grid");
  Mechanism mech(Kind::mar_sequential, std::move(grid), std::move(label));
  mech.probe_ = probe_count;
  mech.rule_ = std::move(rule);
  return mech;
}

Mechanism adversarial::self_masking(GridPtr grid, double threshold, double p_above, double p_below) {
  check_probability(p_above, "p_above");
  check_probability(p_below, "p_below");
  Mechanism mech(Mechanism::Kind::self_masking, std::move(grid), "self-masking");
  mech.threshold_ = threshold;
  mech.p_above_ = p_above;
  mech.p_below_ = p_below;
  return mech;
}

double Mechanism::observe_probability(const GridFunction& element, const MissingnessPattern& pattern,
                                      std::size_t i) const {
  switch (kind_) {
    case Kind::mar_sequential: {
      if (i < probe_) return 1.0;
      const double p = rule_(ObservedPrefix(*grid_, element.values(), pattern.mask(), i));
      check_probability(p, "rule output");
      return p;
    }
    case Kind::self_masking:
      return element[i] > threshold_ ? p_above_ : p_below_;
    case Kind::mcar_bernoulli:
      return p_;
    case Kind::mcar_interval:
      break;
  }
  throw ArgumentError("interval mechanisms have no sequential decision probabilities");
}

MissingnessPattern Mechanism::sample(const GridFunction& element, Seed seed) const {
  require_same_grid(grid_, element.grid());
  std::vector<bool> mask;
  sample_mask(element.values(), seed, mask);
  return {grid_, std::move(mask)};
}

void Mechanism::sample_mask(const Eigen::VectorXd& values, Seed seed, std::vector<bool>& mask) const {
  const std::size_t size = grid_->size();
  if (static_cast<std::size_t>(values.size()) != size) throw GridMismatchError("element length differs from grid size");
  Stream stream(seed);
  mask.assign(size, true);
  switch (kind_) {
    case Kind::mcar_bernoulli:
      for (std::size_t i = 0; i < size; ++i) mask[i] = stream.uniform() < p_;
      break;
    case Kind::mcar_interval: {
      if (block_ == 0) break;
      const std::size_t starts = size - block_ + 1;
      const auto start = static_cast<std::size_t>(stream.uniform() * static_cast<double>(starts));
      std::fill(mask.begin() + static_cast<std::ptrdiff_t>(start),
                mask.begin() + static_cast<std::ptrdiff_t>(start + block_), false);
      break;
    }
    case Kind::mar_sequential:
      for (std::size_t i = probe_; i < size; ++i) {
        const double u = stream.uniform();
        const double p = rule_(ObservedPrefix(*grid_, values, mask, i));
        check_probability(p, "rule output");
        mask[i] = u < p;
      }
      break;
    case Kind::self_masking:
      for (std::size_t i = 0; i < size; ++i) {
        const double u = stream.uniform();
        mask[i] = u < (values[static_cast<Eigen::Index>(i)] > threshold_ ? p_above_ : p_below_);
      }
      break;
  }
}

MissingnessPattern sample_pattern(const Mechanism& mech, const GridFunction& element, Seed seed) {
  return mech.sample(element, seed);
}

void require_mar(const Mechanism& mech) {
  if (!mech.is_mar()) throw ArgumentError("mechanism '" + mech.label() + "' is not missing at random");
}

namespace {

bool member_is_gaussian(const ArraySpec& spec, std::size_t m) {
  for (const auto& law : spec.laws(m))
    if (!law.is_degenerate() && law.kind() != LawKind::gaussian) return false;
  return true;
}

}  // namespace

WitnessResult mar_witness_test(const Mechanism& mech, const ArraySpec& spec, std::size_t n, std::size_t m,
                               const MissingnessPattern& pattern, std::size_t reps, Seed seed,
                               std::size_t rejection_budget) {
  ArraySpec::check_index(n, m);
  require_same_grid(mech.grid(), spec.grid());
  require_same_grid(pattern.grid(), spec.grid());
  if (reps < 2) throw ArgumentError("mar_witness_test needs reps >= 2");
  const std::size_t size = spec.grid()->size();
  const auto& grid = spec.grid();
  const bool gaussian = member_is_gaussian(spec, m);
  const FactorConditioner conditioner(grid, spec.covariance_factor(n, m));
  const auto observed = pattern.observed_indices();

  std::vector<double> sum(size, 0.0), sum_sq(size, 0.0);
  Eigen::VectorXd c(static_cast<Eigen::Index>(spec.truncation()));
  for (std::size_t r = 0; r < reps; ++r) {
    const Seed rep_seed = seed.derive(r);
    Stream first(element_seed(rep_seed, n, m));
    spec.draw_coefficients(n, m, first, c);
    const GridFunction w1 = spec.expand(c);

    Eigen::VectorXd v2 = w1.values();
    if (gaussian) {
      Stream noise(rep_seed.derive("redraw"));
      conditioner.impute(pattern.mask(), v2, noise, NoiseMode::conditional_covariance);
    } else {
      Stream redraw(rep_seed.derive("redraw"));
      bool found = false;
      for (std::size_t attempt = 0; attempt < rejection_budget && !found; ++attempt) {
        spec.draw_coefficients(n, m, redraw, c);
        const Eigen::VectorXd candidate = spec.basis_matrix() * c;
        found = std::all_of(observed.begin(), observed.end(), [&](std::size_t i) {
          return candidate[static_cast<Eigen::Index>(i)] == v2[static_cast<Eigen::Index>(i)];
        });
        if (found) v2 = candidate;
      }
      if (!found)
        throw ConditioningError("no element agreeing on the observed part within " +
                                std::to_string(rejection_budget) + " draws (replication " + std::to_string(r) + ")");
    }
    const GridFunction w2(grid, std::move(v2));

    if (mech.is_mcar()) {
      const Seed pattern_seed = rep_seed.derive("pattern");
      const auto p1 = mech.sample(w1, pattern_seed);
      const auto p2 = mech.sample(w2, pattern_seed);
      for (std::size_t i = 0; i < size; ++i) {
        const double d = p1.observed(i) != p2.observed(i) ? 1.0 : 0.0;
        sum[i] += d;
        sum_sq[i] += d * d;
      }
    } else {
      Stream uniforms(rep_seed.derive("pattern"));
      for (std::size_t i = 0; i < size; ++i) {
        const double u = uniforms.uniform();
        const bool d1 = u < mech.observe_probability(w1, pattern, i);
        const bool d2 = u < mech.observe_probability(w2, pattern, i);
        const double d = d1 != d2 ? 1.0 : 0.0;
        sum[i] += d;
        sum_sq[i] += d;
      }
    }
  }

  WitnessResult result;
  result.pairs = reps;
  result.discrepancy.resize(size);
  result.std_error.resize(size);
  result.pass = true;
  const double count = static_cast<double>(reps);
  for (std::size_t i = 0; i < size; ++i) {
    const double mean = sum[i] / count;
    const double var = std::max(sum_sq[i] / count - mean * mean, 0.0) * count / (count - 1.0);
    result.discrepancy[i] = mean;
    result.std_error[i] = std::sqrt(var / count);
    result.max_discrepancy = std::max(result.max_discrepancy, mean);
    if (mean > 4.0 * result.std_error[i]) result.pass = false;
  }
  return result;
}

}  // namespace hclt
