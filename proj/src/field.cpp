#include "pift/field.hpp"

#include <algorithm>
#include <cmath>

namespace pift {

ScalarField2D pad(const ScalarField2D& field, const PadMode& mode) {
  const int n = field.n();
  ScalarField2D out(Grid(n + 2));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out.at(i + 1, j + 1) = field.at(i, j);
    }
  }
  const int np = n + 2;
  auto ring_value = [&](int i, int j) -> double {
    switch (mode.kind) {
      case PadMode::Kind::Zero:
        return 0.0;
      case PadMode::Kind::Constant:
        return mode.value;
      case PadMode::Kind::Wrap: {
        const int si = ((i - 1) % n + n) % n;
        const int sj = ((j - 1) % n + n) % n;
        return field.at(si, sj);
      }
    }
    return 0.0;
  };
  for (int j = 0; j < np; ++j) {
    out.at(0, j) = ring_value(0, j);
    out.at(np - 1, j) = ring_value(np - 1, j);
  }
  for (int i = 1; i < np - 1; ++i) {
    out.at(i, 0) = ring_value(i, 0);
    out.at(i, np - 1) = ring_value(i, np - 1);
  }
  return out;
}

ScalarField2D crop_interior(const ScalarField2D& field) {
  const int n = field.n();
  if (n < 5) {
    throw std::invalid_argument("crop_interior: interior would drop below 3x3");
  }
  ScalarField2D out(Grid(n - 2));
  for (int i = 0; i < n - 2; ++i) {
    for (int j = 0; j < n - 2; ++j) {
      out.at(i, j) = field.at(i + 1, j + 1);
    }
  }
  return out;
}

ScalarField2D with_boundary_ring(const ScalarField2D& field, double value) {
  ScalarField2D out = field;
  const int n = field.n();
  for (int j = 0; j < n; ++j) {
    out.at(0, j) = value;
    out.at(n - 1, j) = value;
  }
  for (int i = 1; i < n - 1; ++i) {
    out.at(i, 0) = value;
    out.at(i, n - 1) = value;
  }
  return out;
}

double relative_l1(const ScalarField2D& pred, const ScalarField2D& truth) {
  if (!pred.same_shape(truth)) {
    throw std::invalid_argument("relative_l1: grid mismatch");
  }
  double num = 0.0;
  double den = 0.0;
  const auto& p = pred.values();
  const auto& t = truth.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    num += std::abs(p[k] - t[k]);
    den += std::abs(t[k]);
  }
  if (den == 0.0) {
    throw std::domain_error("relative_l1: degenerate truth with zero L1 norm");
  }
  return num / den;
}

double median_over_samples(std::vector<double> errors) {
  if (errors.empty()) {
    throw std::invalid_argument("median_over_samples: empty list");
  }
  for (double e : errors) {
    if (!std::isfinite(e)) {
      throw std::invalid_argument("median_over_samples: non-finite value");
    }
  }
  std::sort(errors.begin(), errors.end());
  return errors[(errors.size() - 1) / 2];
}

double max_abs(const ScalarField2D& field) {
  double m = 0.0;
  for (double v : field.values()) {
    m = std::max(m, std::abs(v));
  }
  return m;
}

}  // namespace pift
