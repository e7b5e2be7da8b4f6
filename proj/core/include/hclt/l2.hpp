#pragma once

// Discretized L2([0,1]): grids with quadrature weights, sampled functions,
// kernels on [0,1]^2, and the inner products and norms between them.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace hclt {

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Ordered abscissae in [0,1] with positive weights summing to one.
class Grid {
 public:
  /// Uniform midpoint grid: x_i = (i + 1/2)/size, w_i = 1/size.
  static GridPtr uniform(std::size_t size);

  /// Validates and builds an arbitrary grid. Throws ArgumentError when
  /// points are not strictly increasing in [0,1] or weights are not positive
  /// with unit sum (1e-12).
  static GridPtr create(std::vector<double> points, std::vector<double> weights);

  std::size_t size() const { return points_.size(); }
  std::span<const double> points() const { return points_; }
  std::span<const double> weights() const { return weights_; }
  const Eigen::VectorXd& weight_vector() const { return weight_vector_; }
  double point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  bool same_as(const Grid& other) const;

 private:
  Grid(std::vector<double> points, std::vector<double> weights);

  std::vector<double> points_;
  std::vector<double> weights_;
  Eigen::VectorXd weight_vector_;
};

/// Throws GridMismatchError unless the two grids are the same grid.
void require_same_grid(const GridPtr& a, const GridPtr& b);

/// A function on [0,1] sampled at the grid points. Values are finite.
class GridFunction {
 public:
  GridFunction(GridPtr grid, Eigen::VectorXd values);

  static GridFunction zero(GridPtr grid);
  static GridFunction constant(GridPtr grid, double value);
  static GridFunction from(GridPtr grid, const std::function<double(double)>& f);

  const GridPtr& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  GridFunction operator+(const GridFunction& other) const;
  GridFunction operator-(const GridFunction& other) const;
  GridFunction operator*(double scale) const;
  friend GridFunction operator*(double scale, const GridFunction& f) { return f * scale; }

 private:
  struct Unchecked {};
  GridFunction(GridPtr grid, Eigen::VectorXd values, Unchecked);

  GridPtr grid_;
  Eigen::VectorXd values_;
};

/// A function on [0,1]^2 sampled on grid x grid. Symmetry and positive
/// semi-definiteness are properties queried on demand; residual kernels such
/// as a covariance sum minus its limit are legitimately indefinite.
class Kernel {
 public:
  Kernel(GridPtr grid, Eigen::MatrixXd values);

  static Kernel zero(GridPtr grid);
  static Kernel from(GridPtr grid, const std::function<double(double, double)>& f);

  const GridPtr& grid() const { return grid_; }
  const Eigen::MatrixXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  bool is_symmetric(double tolerance = 1e-10) const;

  /// Extreme eigenvalues of the weighted operator W^{1/2} K W^{1/2}, whose
  /// spectrum is that of the discretized integral operator.
  struct Spectrum {
    double smallest;
    double largest;
  };
  Spectrum spectrum() const;

  /// smallest eigenvalue >= -relative_tolerance * max(largest, 0).
  bool is_psd(double relative_tolerance = 1e-8) const;

  Kernel operator+(const Kernel& other) const;
  Kernel operator-(const Kernel& other) const;
  Kernel operator*(double scale) const;
  friend Kernel operator*(double scale, const Kernel& k) { return k * scale; }
  Kernel& operator+=(const Kernel& other);

 private:
  struct Unchecked {};
  Kernel(GridPtr grid, Eigen::MatrixXd values, Unchecked);

  GridPtr grid_;
  Eigen::MatrixXd values_;
};

double inner_product(const GridFunction& f, const GridFunction& g);
double norm_l2(const GridFunction& f);
Kernel tensor_product(const GridFunction& f, const GridFunction& g);

/// sqrt(sum_ij w_i w_j K_ij^2), the L2(mu x mu) norm.
double kernel_l2_norm(const Kernel& k);

/// sum_ij w_i w_j K_ij g_i g_j, i.e. the double integral of K(x,y) g(x) g(y).
double pairing(const Kernel& k, const GridFunction& g);

/// The integral operator h -> int K(., y) h(y) dy.
GridFunction apply(const Kernel& k, const GridFunction& h);

/// Hilbert-Schmidt norm of the integral operator with kernel K. On a grid
/// this is the Frobenius norm of W^{1/2} K W^{1/2}, which is the same sum as
/// kernel_l2_norm. A finite value certifies the kernel defines a
/// Hilbert-Schmidt operator.
double hs_operator_norm(const Kernel& k);

/// Orthonormal Fourier system on [0,1]: 1, sqrt2 cos(2 pi x), sqrt2 sin(2 pi x),
/// sqrt2 cos(4 pi x), ... truncated to `count` functions. Throws ArgumentError
/// when the highest frequency reaches half the grid size.
std::vector<GridFunction> fourier_basis(const GridPtr& grid, std::size_t count);

/// Gram matrix <b_j, b_k> of a family of functions on one grid.
Eigen::MatrixXd gram_matrix(std::span<const GridFunction> family);

}  // namespace hclt
