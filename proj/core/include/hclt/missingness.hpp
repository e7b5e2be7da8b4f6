#pragma once

// Missingness patterns over a grid, the mechanisms that generate them, and a
// simulation audit of the missing-at-random property.

#include "hclt/l2.hpp"
#include "hclt/rng.hpp"
#include "hclt/triangular_array.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace hclt {

/// Grid mask with true = observed.
class MissingnessPattern {
 public:
  MissingnessPattern(GridPtr grid, std::vector<bool> mask);

  static MissingnessPattern all_observed(GridPtr grid);
  static MissingnessPattern all_missing(GridPtr grid);

  const GridPtr& grid() const { return grid_; }
  const std::vector<bool>& mask() const { return mask_; }
  std::size_t size() const { return mask_.size(); }
  bool observed(std::size_t i) const { return mask_[i]; }

  std::vector<std::size_t> observed_indices() const;
  std::vector<std::size_t> missing_indices() const;
  std::size_t observed_count() const;
  std::size_t missing_count() const { return size() - observed_count(); }

  friend bool operator==(const MissingnessPattern& a, const MissingnessPattern& b) {
    return a.grid_->same_as(*b.grid_) && a.mask_ == b.mask_;
  }

 private:
  GridPtr grid_;
  std::vector<bool> mask_;
};

struct SplitElement {
  std::vector<std::size_t> observed_indices;
  Eigen::VectorXd observed_values;
  std::vector<std::size_t> missing_indices;
};

SplitElement split(const GridFunction& element, const MissingnessPattern& pattern);

/// Inverse of split: observed values go back to their indices and
/// `missing_values` fills the rest in index order.
GridFunction reassemble(const GridPtr& grid, const SplitElement& parts, const Eigen::VectorXd& missing_values);

/// Read access to the values a sequential rule has already observed. Indices
/// that are missing, or not yet visited, raise IndexError.
class ObservedPrefix {
 public:
  ObservedPrefix(const Grid& grid, const Eigen::VectorXd& values, const std::vector<bool>& mask, std::size_t position)
      : grid_(grid), values_(values), mask_(mask), position_(position) {}

  /// Index about to be decided.
  std::size_t position() const { return position_; }
  bool observed(std::size_t i) const { return i < position_ && mask_[i]; }
  double value(std::size_t i) const;
  /// Most recent observed index before position(), or position() if none.
  std::size_t last_observed() const;
  double point(std::size_t i) const { return grid_.point(i); }

 private:
  const Grid& grid_;
  const Eigen::VectorXd& values_;
  const std::vector<bool>& mask_;
  std::size_t position_;
};

/// Probability of observing the current index given the observed prefix.
using PrefixRule = std::function<double(const ObservedPrefix&)>;

class Mechanism {
 public:
  enum class Kind { mcar_bernoulli, mcar_interval, mar_sequential, self_masking };

  /// Each point observed independently with probability p.
  static Mechanism mcar_bernoulli(GridPtr grid, double p);
  /// One contiguous missing block of round(length * G) points, uniform start, no wraparound.
  static Mechanism mcar_interval(GridPtr grid, double length);
  /// The first ceil(probe_fraction * G) points are always observed; later
  /// points are observed with p_above if the most recent observed value
  /// exceeds the threshold, else with p_below.
  static Mechanism mar_threshold(GridPtr grid, double probe_fraction, double threshold, double p_above,
                                 double p_below);
  /// General sequential rule over the observed prefix.
  static Mechanism mar_sequential(GridPtr grid, std::size_t probe_count, PrefixRule rule, std::string label);

  Kind kind() const { return kind_; }
  const GridPtr& grid() const { return grid_; }
  const std::string& label() const { return label_; }
  bool is_mar() const { return kind_ != Kind::self_masking; }
  bool is_mcar() const { return kind_ == Kind::mcar_bernoulli || kind_ == Kind::mcar_interval; }

  /// Reproducible from seed; MCAR kinds never read the element.
  MissingnessPattern sample(const GridFunction& element, Seed seed) const;
  /// Same draw on raw grid values, reusing `mask`.
  void sample_mask(const Eigen::VectorXd& values, Seed seed, std::vector<bool>& mask) const;

  /// P(M_i = 1 | M_j for j < i, element) with the prefix taken from `pattern`.
  /// Defined for the sequential kinds only.
  double observe_probability(const GridFunction& element, const MissingnessPattern& pattern, std::size_t i) const;

 private:
  friend struct adversarial;
  Mechanism(Kind kind, GridPtr grid, std::string label) : kind_(kind), grid_(std::move(grid)), label_(std::move(label)) {}

  Kind kind_;
  GridPtr grid_;
  std::string label_;
  double p_ = 1.0;
  std::size_t block_ = 0;
  std::size_t probe_ = 0;
  PrefixRule rule_;
  double threshold_ = 0.0;
  double p_above_ = 1.0;
  double p_below_ = 1.0;
};

/// Audit-only constructions that violate MAR. They are never produced by
/// configuration parsing and are refused by the imputation routines.
struct adversarial {
  /// Point i is observed with p_above if its own value exceeds the threshold, else p_below.
  static Mechanism self_masking(GridPtr grid, double threshold, double p_above, double p_below);
};

MissingnessPattern sample_pattern(const Mechanism& mech, const GridFunction& element, Seed seed);

/// Throws ArgumentError unless the mechanism is MAR.
void require_mar(const Mechanism& mech);

struct WitnessResult {
  /// Estimated E|1{U < p_i(w1)} - 1{U < p_i(w2)}| per grid point under common U.
  std::vector<double> discrepancy;
  std::vector<double> std_error;
  double max_discrepancy = 0.0;
  std::size_t pairs = 0;
  bool pass = false;
};

/// Simulation check of nu(M | w1) = nu(M | w2) for pairs agreeing on the
/// observed part of `pattern`. w1 is a fresh element of cell (n, m); w2 keeps
/// w1 on X1(pattern) and redraws X0 from the conditional law (exact Gaussian
/// conditioning, or rejection sampling within `rejection_budget` tries for
/// other laws, raising ConditioningError if no agreeing draw is found).
/// Sequential kinds are compared decision by decision along `pattern` with
/// shared uniforms; MCAR kinds compare whole patterns drawn from one seed.
/// Pass iff every point satisfies discrepancy <= 4 * std_error.
WitnessResult mar_witness_test(const Mechanism& mech, const ArraySpec& spec, std::size_t n, std::size_t m,
                               const MissingnessPattern& pattern, std::size_t reps, Seed seed,
                               std::size_t rejection_budget = 10000);

}  // namespace hclt
