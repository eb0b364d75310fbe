#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pift {

/// Uniform node grid over the closed unit square. n nodes per side,
/// node (i, j) sits at (x = j*h, y = i*h) with h = 1/(n-1), so rows
/// i = 0 and i = n-1 (and the matching columns) lie on the boundary.
struct Grid {
  int n = 0;

  Grid() = default;
  explicit Grid(int nodes) : n(nodes) {
    if (n < 3) {
      throw std::invalid_argument("Grid: need at least 3 nodes per side");
    }
  }

  double h() const { return 1.0 / static_cast<double>(n - 1); }
  double x(int j) const { return static_cast<double>(j) * h(); }
  double y(int i) const { return static_cast<double>(i) * h(); }
  std::size_t node_count() const { return static_cast<std::size_t>(n) * n; }

  bool operator==(const Grid&) const = default;
};

/// How a field is extended by one ring of ghost nodes.
struct PadMode {
  enum class Kind { Zero, Constant, Wrap };

  Kind kind = Kind::Zero;
  double value = 0.0;

  static PadMode zero() { return {Kind::Zero, 0.0}; }
  static PadMode wrap() { return {Kind::Wrap, 0.0}; }
  static PadMode constant(double c) {
    if (!std::isfinite(c)) {
      throw std::invalid_argument("PadMode: constant value must be finite");
    }
    return {Kind::Constant, c};
  }
};

/// Real scalar field sampled on a Grid, stored row-major (row = y index).
class ScalarField2D {
 public:
  ScalarField2D() = default;

  explicit ScalarField2D(Grid grid)
      : grid_(grid), values_(grid.node_count(), 0.0) {}

  ScalarField2D(Grid grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.node_count()) {
      throw std::invalid_argument("ScalarField2D: value count does not match grid");
    }
  }

  const Grid& grid() const { return grid_; }
  int n() const { return grid_.n; }

  double at(int i, int j) const { return values_[idx(i, j)]; }
  double& at(int i, int j) { return values_[idx(i, j)]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool same_shape(const ScalarField2D& other) const { return grid_ == other.grid_; }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * grid_.n + j;
  }

  Grid grid_;
  std::vector<double> values_;
};

/// Extend a field by one ghost ring: (n+2)x(n+2) output whose interior is the
/// input and whose ring follows the pad mode (Zero -> 0, Constant -> c,
/// Wrap -> periodic copy of the opposite edge).
ScalarField2D pad(const ScalarField2D& field, const PadMode& mode);

/// Strip the outermost ring: (n-2)x(n-2) output. Requires n >= 5.
ScalarField2D crop_interior(const ScalarField2D& field);

/// Copy of the field with the outermost ring overwritten by a constant.
/// Same shape as the input; equivalent to pad(crop_interior(field), value)
/// when n >= 5.
ScalarField2D with_boundary_ring(const ScalarField2D& field, double value);

/// ||pred - truth||_1 / ||truth||_1 over all nodes. Throws when the truth
/// norm vanishes.
double relative_l1(const ScalarField2D& pred, const ScalarField2D& truth);

/// Lower median: for sorted values of even count, the smaller of the two
/// middle elements. Throws on an empty or non-finite list.
double median_over_samples(std::vector<double> errors);

double max_abs(const ScalarField2D& field);

}  // namespace pift
