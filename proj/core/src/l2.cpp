#include "hclt/l2.hpp"

#include "hclt/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace hclt {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& values, const char* what) {
  if (!values.allFinite()) throw ArgumentError(std::string(what) + " values must be finite");
}

}  // namespace

Grid::Grid(std::vector<double> points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  weight_vector_ = Eigen::Map<const Eigen::VectorXd>(weights_.data(), static_cast<Eigen::Index>(weights_.size()));
}

GridPtr Grid::uniform(std::size_t size) {
  if (size == 0) throw ArgumentError("grid size must be positive");
  std::vector<double> points(size);
  std::vector<double> weights(size, 1.0 / static_cast<double>(size));
  for (std::size_t i = 0; i < size; ++i) points[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(size);
  return GridPtr(new Grid(std::move(points), std::move(weights)));
}

GridPtr Grid::create(std::vector<double> points, std::vector<double> weights) {
  if (points.empty()) throw ArgumentError("grid must contain at least one point");
  if (points.size() != weights.size()) throw ArgumentError("grid points and weights differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i] >= 0.0 && points[i] <= 1.0)) throw ArgumentError("grid points must lie in [0,1]");
    if (i > 0 && !(points[i] > points[i - 1])) throw ArgumentError("grid points must be strictly increasing");
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) throw ArgumentError("grid weights must be positive");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("grid weights must sum to 1");
  return GridPtr(new Grid(std::move(points), std::move(weights)));
}

bool Grid::same_as(const Grid& other) const {
  return this == &other || (points_ == other.points_ && weights_ == other.weights_);
}

void require_same_grid(const GridPtr& a, const GridPtr& b) {
  if (a == b) return;
  if (!a || !b || !a->same_as(*b)) throw GridMismatchError("operands live on different grids");
}

// GridFunction

GridFunction::GridFunction(GridPtr grid, Eigen::VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw ArgumentError("grid function needs a grid");
  if (static_cast<std::size_t>(values_.size()) != grid_->size())
    throw ArgumentError("grid function length " + std::to_string(values_.size()) + " does not match grid size " +
                        std::to_string(grid_->size()));
  require_finite(values_, "grid function");
}

GridFunction::GridFunction(GridPtr grid, Eigen::VectorXd values, Unchecked)
    : grid_(std::move(grid)), values_(std::move(values)) {}

GridFunction GridFunction::zero(GridPtr grid) {
  const auto size = static_cast<Eigen::Index>(grid->size());
  return GridFunction(std::move(grid), Eigen::VectorXd::Zero(size), Unchecked{});
}

GridFunction GridFunction::constant(GridPtr grid, double value) {
  const auto size = static_cast<Eigen::Index>(grid->size());
  return GridFunction(std::move(grid), Eigen::VectorXd::Constant(size, value));
}

GridFunction GridFunction::from(GridPtr grid, const std::function<double(double)>& f) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t i = 0; i < grid->size(); ++i) values[static_cast<Eigen::Index>(i)] = f(grid->point(i));
  return GridFunction(std::move(grid), std::move(values));
}

GridFunction GridFunction::operator+(const GridFunction& other) const {
  require_same_grid(grid_, other.grid_);
  return GridFunction(grid_, values_ + other.values_);
}

GridFunction GridFunction::operator-(const GridFunction& other) const {
  require_same_grid(grid_, other.grid_);
  return GridFunction(grid_, values_ - other.values_);
}

GridFunction GridFunction::operator*(double scale) const { return GridFunction(grid_, values_ * scale); }

// Kernel

Kernel::Kernel(GridPtr grid, Eigen::MatrixXd values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw ArgumentError("kernel needs a grid");
  const auto g = static_cast<Eigen::Index>(grid_->size());
  if (values_.rows() != g || values_.cols() != g) throw ArgumentError("kernel must be grid-size square");
  require_finite(values_, "kernel");
}

Kernel::Kernel(GridPtr grid, Eigen::MatrixXd values, Unchecked) : grid_(std::move(grid)), values_(std::move(values)) {}

Kernel Kernel::zero(GridPtr grid) {
  const auto g = static_cast<Eigen::Index>(grid->size());
  return Kernel(std::move(grid), Eigen::MatrixXd::Zero(g, g), Unchecked{});
}

Kernel Kernel::from(GridPtr grid, const std::function<double(double, double)>& f) {
  const auto g = static_cast<Eigen::Index>(grid->size());
  Eigen::MatrixXd values(g, g);
  for (Eigen::Index i = 0; i < g; ++i)
    for (Eigen::Index j = 0; j < g; ++j)
      values(i, j) = f(grid->point(static_cast<std::size_t>(i)), grid->point(static_cast<std::size_t>(j)));
  return Kernel(std::move(grid), std::move(values));
}

bool Kernel::is_symmetric(double tolerance) const {
  return ((values_ - values_.transpose()).cwiseAbs().maxCoeff()) <= tolerance;
}

Kernel::Spectrum Kernel::spectrum() const {
  const Eigen::VectorXd root_w = grid_->weight_vector().cwiseSqrt();
  const Eigen::MatrixXd sym = 0.5 * (values_ + values_.transpose());
  const Eigen::MatrixXd weighted = root_w.asDiagonal() * sym * root_w.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weighted, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

bool Kernel::is_psd(double relative_tolerance) const {
  const auto s = spectrum();
  return s.smallest >= -relative_tolerance * std::max(s.largest, 0.0);
}

Kernel Kernel::operator+(const Kernel& other) const {
  require_same_grid(grid_, other.grid_);
  return Kernel(grid_, values_ + other.values_, Unchecked{});
}

Kernel Kernel::operator-(const Kernel& other) const {
  require_same_grid(grid_, other.grid_);
  return Kernel(grid_, values_ - other.values_, Unchecked{});
}

Kernel Kernel::operator*(double scale) const { return Kernel(grid_, values_ * scale); }

Kernel& Kernel::operator+=(const Kernel& other) {
  require_same_grid(grid_, other.grid_);
  values_ += other.values_;
  return *this;
}

// Operations

double inner_product(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f.grid(), g.grid());
  const auto& w = f.grid()->weight_vector();
  return (w.array() * f.values().array() * g.values().array()).sum();
}

double norm_l2(const GridFunction& f) { return std::sqrt(inner_product(f, f)); }

Kernel tensor_product(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f.grid(), g.grid());
  return Kernel(f.grid(), f.values() * g.values().transpose());
}

double kernel_l2_norm(const Kernel& k) {
  const auto& w = k.grid()->weight_vector();
  const Eigen::MatrixXd weights = w * w.transpose();
  return std::sqrt((weights.array() * k.values().array().square()).sum());
}

double pairing(const Kernel& k, const GridFunction& g) {
  require_same_grid(k.grid(), g.grid());
  const Eigen::VectorXd wg = k.grid()->weight_vector().cwiseProduct(g.values());
  return wg.dot(k.values() * wg);
}

GridFunction apply(const Kernel& k, const GridFunction& h) {
  require_same_grid(k.grid(), h.grid());
  return GridFunction(k.grid(), k.values() * k.grid()->weight_vector().cwiseProduct(h.values()));
}

double hs_operator_norm(const Kernel& k) { return kernel_l2_norm(k); }

std::vector<GridFunction> fourier_basis(const GridPtr& grid, std::size_t count) {
  if (2 * (count / 2) >= grid->size())
    throw ArgumentError("fourier_basis: " + std::to_string(count) + " functions alias on a grid of " +
                        std::to_string(grid->size()) + " points");
  std::vector<GridFunction> basis;
  basis.reserve(count);
  const double root2 = std::numbers::sqrt2;
  for (std::size_t j = 0; j < count; ++j) {
    if (j == 0) {
      basis.push_back(GridFunction::constant(grid, 1.0));
      continue;
    }
    const double freq = 2.0 * std::numbers::pi * static_cast<double>((j + 1) / 2);
    if (j % 2 == 1)
      basis.push_back(GridFunction::from(grid, [=](double x) { return root2 * std::cos(freq * x); }));
    else
      basis.push_back(GridFunction::from(grid, [=](double x) { return root2 * std::sin(freq * x); }));
  }
  return basis;
}

Eigen::MatrixXd gram_matrix(std::span<const GridFunction> family) {
  const auto count = static_cast<Eigen::Index>(family.size());
  Eigen::MatrixXd gram(count, count);
  for (Eigen::Index j = 0; j < count; ++j)
    for (Eigen::Index k = j; k < count; ++k) {
      const double v = inner_product(family[static_cast<std::size_t>(j)], family[static_cast<std::size_t>(k)]);
      gram(j, k) = v;
      gram(k, j) = v;
    }
  return gram;
}

}  // namespace hclt
