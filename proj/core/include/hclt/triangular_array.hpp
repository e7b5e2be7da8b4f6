#pragma once

// Triangular arrays {chi_{n,m} : 1 <= m <= n} of independent mean-zero
// random elements, each a truncated expansion a_{n,m} * sum_j Z_{m,j} b_j
// over an orthonormal basis. Covariances are known in closed form.

#include "hclt/l2.hpp"
#include "hclt/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hclt {

enum class LawKind { gaussian, uniform, rademacher, student_t, point_mass_mixture };

std::string to_string(LawKind kind);
LawKind law_kind_from_string(const std::string& name);

/// Mean-zero scalar law with variance scale^2. A zero scale is the point mass
/// at zero for every kind.
class CoefficientLaw {
 public:
  static CoefficientLaw gaussian(double scale);
  static CoefficientLaw uniform(double scale);
  static CoefficientLaw rademacher(double scale);
  /// Student-t with nu > 2 degrees of freedom, rescaled to variance scale^2.
  static CoefficientLaw student_t(double nu, double scale);
  /// Zero with probability zero_prob, otherwise +-scale/sqrt(1 - zero_prob).
  static CoefficientLaw point_mass_mixture(double zero_prob, double scale);
  static CoefficientLaw zero() { return point_mass_mixture(1.0, 0.0); }

  LawKind kind() const { return kind_; }
  double scale() const { return scale_; }
  double nu() const { return nu_; }
  double zero_prob() const { return zero_prob_; }
  double variance() const { return scale_ * scale_; }
  bool is_degenerate() const { return scale_ == 0.0; }

  /// Largest attainable |Z|, or nullopt for unbounded laws.
  std::optional<double> bound() const;

  /// True iff E|Z|^p is finite. Only student-t can fail (p >= nu).
  bool has_finite_abs_moment(double p) const;

  /// E|Z|^p in closed form; +inf when the moment does not exist.
  double abs_moment(double p) const;

  double draw(Stream& stream) const;

  friend bool operator==(const CoefficientLaw&, const CoefficientLaw&) = default;

 private:
  CoefficientLaw(LawKind kind, double scale, double nu, double zero_prob);

  LawKind kind_ = LawKind::gaussian;
  double scale_ = 0.0;
  double nu_ = 0.0;
  double zero_prob_ = 0.0;
  double t_normalizer_ = 1.0;
};

/// Rule giving the multiplier a_{n,m}.
struct RowScaling {
  enum class Kind { inverse_sqrt_n, unit };
  Kind kind = Kind::inverse_sqrt_n;
  /// Members whose multiplier is fixed irrespective of n.
  std::map<std::size_t, double> fixed;

  double multiplier(std::size_t n, std::size_t m) const;
};

/// Laws for member m: overrides[m] when present, else cycle[(m-1) % cycle.size()].
struct CoefficientPlan {
  std::vector<std::vector<CoefficientLaw>> cycle;
  std::map<std::size_t, std::vector<CoefficientLaw>> overrides;

  const std::vector<CoefficientLaw>& laws(std::size_t m) const;
};

/// Declarative description of a triangular array. Immutable after
/// construction; the basis must be orthonormal to 1e-8.
class ArraySpec {
 public:
  ArraySpec(std::string name, GridPtr grid, std::vector<GridFunction> basis, CoefficientPlan plan, RowScaling scaling);

  /// Identical law on every member and coordinate.
  static ArraySpec homogeneous(std::string name, GridPtr grid, std::size_t basis_size, CoefficientLaw law,
                               RowScaling scaling = {});

  const std::string& name() const { return name_; }
  const GridPtr& grid() const { return grid_; }
  const std::vector<GridFunction>& basis() const { return basis_; }
  std::size_t truncation() const { return basis_.size(); }
  const CoefficientPlan& plan() const { return plan_; }
  const RowScaling& scaling() const { return scaling_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  /// G x J matrix whose columns are the basis functions.
  const Eigen::MatrixXd& basis_matrix() const { return basis_matrix_; }

  const std::vector<CoefficientLaw>& laws(std::size_t m) const { return plan_.laws(m); }
  double multiplier(std::size_t n, std::size_t m) const { return scaling_.multiplier(n, m); }

  /// True iff every law in play for members 1..n is Gaussian or degenerate.
  bool is_gaussian(std::size_t n) const;

  /// Throws IndexError unless 1 <= m <= n.
  static void check_index(std::size_t n, std::size_t m);

  /// Draws a_{n,m} Z_{m,j} for all j into `out` (length J).
  void draw_coefficients(std::size_t n, std::size_t m, Stream& stream, Eigen::Ref<Eigen::VectorXd> out) const;

  GridFunction expand(const Eigen::VectorXd& coefficients) const;

  /// ||sum_j c_j b_j||^2 = c' Gram c, equal to the grid norm of the expansion.
  double squared_norm(const Eigen::VectorXd& coefficients) const { return coefficients.dot(gram_ * coefficients); }

  /// G x J factor F with K_{n,m} = F F'.
  Eigen::MatrixXd covariance_factor(std::size_t n, std::size_t m) const;

  /// Worst-case ||chi_{n,m}|| for bounded laws, nullopt otherwise.
  std::optional<double> norm_bound(std::size_t n, std::size_t m) const;

 private:
  std::string name_;
  GridPtr grid_;
  std::vector<GridFunction> basis_;
  CoefficientPlan plan_;
  RowScaling scaling_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd basis_matrix_;
};

/// One realization chi_{n,m}(w, .), with w identified by its seed.
struct Sample {
  GridFunction element;
  std::size_t n;
  std::size_t m;
  Seed seed;
};

/// The stream used for member (n, m) under a replication seed.
inline Seed element_seed(Seed seed, std::size_t n, std::size_t m) { return seed.derive(n, m); }

Sample sample_element(const ArraySpec& spec, std::size_t n, std::size_t m, Seed seed);

/// Coefficients of the same draw as sample_element without expanding on the grid.
Eigen::VectorXd sample_coefficients(const ArraySpec& spec, std::size_t n, std::size_t m, Seed seed);

Kernel analytic_covariance(const ArraySpec& spec, std::size_t n, std::size_t m);
Kernel row_covariance_sum(const ArraySpec& spec, std::size_t n);

/// Monte Carlo covariance kernel with its RMS error bound
/// sqrt((mean ||x||^4 - ||K_hat||^2) / (reps - 1)).
struct KernelEstimate {
  Kernel kernel;
  double stderr_bound;
  std::size_t reps;
  /// Sample means of ||x||^2 and ||x||^4.
  double second_moment = 0.0;
  double fourth_moment = 0.0;
};

/// Fills `out` (length G) with the grid values of replication `rep`.
using ElementDraw = std::function<void(std::size_t rep, Eigen::VectorXd& out)>;

/// Draws of chi_{n,m}: replication r is sample_element(spec, n, m, seed.derive(r)).
ElementDraw complete_draws(const ArraySpec& spec, std::size_t n, std::size_t m, Seed seed);

/// Shared Monte Carlo second-moment kernel over any element draw. The
/// reduction runs over fixed chunks of replications, so the result is
/// bit-identical for every worker count and for two draws that agree.
KernelEstimate covariance_from_draws(const GridPtr& grid, std::size_t reps, const ElementDraw& draw,
                                    unsigned workers = 0);

/// Average of x (x) x over reps draws of chi_{n,m}, replication r using seed.derive(r).
KernelEstimate empirical_covariance(const ArraySpec& spec, std::size_t n, std::size_t m, std::size_t reps, Seed seed,
                                    unsigned workers = 0);

/// Monte Carlo mean function with the RMS bound sqrt(mean ||x - mean||^2 / (reps - 1))
/// on the norm of its error.
struct MeanEstimate {
  GridFunction mean;
  double stderr_bound;
};
MeanEstimate mean_from_draws(const GridPtr& grid, std::size_t reps, const ElementDraw& draw, unsigned workers = 0);
MeanEstimate empirical_mean(const ArraySpec& spec, std::size_t n, std::size_t m, std::size_t reps, Seed seed,
                            unsigned workers = 0);

/// Built-in scenarios.
namespace presets {

inline constexpr const char* kLfPass = "LF-PASS";
inline constexpr const char* kLfFail = "LF-FAIL";
inline constexpr const char* kLyapunovPass = "LYAPUNOV-PASS";
inline constexpr const char* kHeavyTail = "HEAVY-TAIL";
inline constexpr const char* kGaussJ2 = "GAUSS-J2";
inline constexpr const char* kRademacherJ1 = "RADEMACHER-J1";

inline constexpr std::size_t kDefaultGridSize = 256;
inline constexpr std::size_t kDefaultBasisSize = 8;

/// Bounded Rademacher coefficients with scales cycling over members through
/// variances {1, 0.6, 0.3, 0.1}; coefficient bound 1, a = 1/sqrt(n).
ArraySpec lf_pass(GridPtr grid, std::size_t basis_size = kDefaultBasisSize);
/// Member 1 is a Rademacher multiple of b_0 with a fixed unit norm; the rest
/// are Rademacher(0.5) with a = 1/sqrt(n).
ArraySpec lf_fail(GridPtr grid, std::size_t basis_size = kDefaultBasisSize);
ArraySpec lyapunov_pass(GridPtr grid, std::size_t basis_size = kDefaultBasisSize);
/// Student-t with nu = 2.5: finite variance, no moment of order >= 2.5.
ArraySpec heavy_tail(GridPtr grid, std::size_t basis_size = kDefaultBasisSize);
ArraySpec gauss_j2(GridPtr grid);
ArraySpec rademacher_j1(GridPtr grid);

std::vector<std::string> names();
bool exists(const std::string& name);
/// basis_size 0 selects the preset's own truncation.
ArraySpec make(const std::string& name, GridPtr grid, std::size_t basis_size = 0);

/// The limit of the row covariance sums.
Kernel limit_covariance(const ArraySpec& spec);

/// Student-t degrees of freedom used by HEAVY-TAIL.
inline constexpr double kHeavyTailNu = 2.5;

}  // namespace presets

}  // namespace hclt
