#include "pift/residual.hpp"

#include <cmath>
#include <stdexcept>

namespace pift {

ScalarField2D fd_laplacian(const ScalarField2D& u, const PadMode& boundary) {
  const int n = u.n();
  const double h = u.grid().h();
  const double inv_h2 = 1.0 / (h * h);
  const ScalarField2D padded = pad(u, boundary);
  ScalarField2D out(u.grid());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int pi = i + 1;
      const int pj = j + 1;
      out.at(i, j) = (padded.at(pi, pj + 1) + padded.at(pi, pj - 1) +
                      padded.at(pi + 1, pj) + padded.at(pi - 1, pj) -
                      4.0 * padded.at(pi, pj)) *
                     inv_h2;
    }
  }
  return out;
}

ScalarField2D enforce_boundary(const PdeTask& task, const ScalarField2D& u_raw,
                               const std::vector<ScalarField2D>& inputs) {
  return with_boundary_ring(u_raw, task.dirichlet_value(inputs));
}

namespace {

void check_inputs(const ScalarField2D& u, const std::vector<ScalarField2D>& inputs) {
  if (inputs.empty()) {
    throw std::invalid_argument("pde_residual: missing input fields");
  }
  for (const auto& field : inputs) {
    if (!field.same_shape(u)) {
      throw std::invalid_argument("pde_residual: grid mismatch between u and inputs");
    }
  }
}

/// Residual at interior nodes of the boundary-enforced prediction; the ring
/// of the returned field is zero.
ScalarField2D residual_impl(const PdeTask& task, const ScalarField2D& u_raw,
                            const std::vector<ScalarField2D>& inputs,
                            ScalarField2D* u_bc_out) {
  check_inputs(u_raw, inputs);
  const int n = u_raw.n();
  const double h = u_raw.grid().h();
  const double inv_h2 = 1.0 / (h * h);
  ScalarField2D u = enforce_boundary(task, u_raw, inputs);
  ScalarField2D r(u_raw.grid());
  const double omega2 = task.omega * task.omega;
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      const double lap = (u.at(i, j + 1) + u.at(i, j - 1) + u.at(i + 1, j) +
                          u.at(i - 1, j) - 4.0 * u.at(i, j)) *
                         inv_h2;
      double value = -lap;
      if (task.kind == PdeTask::Kind::Poisson) {
        value -= inputs[0].at(i, j);
      } else {
        value -= omega2 * inputs[0].at(i, j) * u.at(i, j);
      }
      r.at(i, j) = value;
    }
  }
  if (u_bc_out) *u_bc_out = std::move(u);
  return r;
}

}  // namespace

ScalarField2D pde_residual(const PdeTask& task, const ScalarField2D& u_raw,
                           const std::vector<ScalarField2D>& inputs) {
  return residual_impl(task, u_raw, inputs, nullptr);
}

double physics_mse(const PdeTask& task, const ScalarField2D& u_raw,
                   const std::vector<ScalarField2D>& inputs) {
  const ScalarField2D r = residual_impl(task, u_raw, inputs, nullptr);
  const int n = u_raw.n();
  double sum = 0.0;
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      sum += r.at(i, j) * r.at(i, j);
    }
  }
  const double interior = static_cast<double>(n - 2) * (n - 2);
  return sum / interior;
}

PhysicsGrad physics_mse_grad(const PdeTask& task, const ScalarField2D& u_raw,
                             const std::vector<ScalarField2D>& inputs) {
  ScalarField2D u_bc(u_raw.grid());
  const ScalarField2D r = residual_impl(task, u_raw, inputs, &u_bc);
  const int n = u_raw.n();
  const double h = u_raw.grid().h();
  const double inv_h2 = 1.0 / (h * h);
  const double interior = static_cast<double>(n - 2) * (n - 2);
  const double omega2 = task.omega * task.omega;

  PhysicsGrad out;
  out.du_raw = ScalarField2D(u_raw.grid());
  double sum = 0.0;
  // dL/dr = 2 r / interior; adjoint of the stencil scatters into the five
  // touched nodes, skipping ring positions (their values are clamped).
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      const double rv = r.at(i, j);
      sum += rv * rv;
      const double g = 2.0 * rv / interior;
      auto add = [&](int ii, int jj, double coeff) {
        if (ii <= 0 || ii >= n - 1 || jj <= 0 || jj >= n - 1) return;
        out.du_raw.at(ii, jj) += g * coeff;
      };
      add(i, j + 1, -inv_h2);
      add(i, j - 1, -inv_h2);
      add(i + 1, j, -inv_h2);
      add(i - 1, j, -inv_h2);
      add(i, j, 4.0 * inv_h2);
      if (task.kind == PdeTask::Kind::Helmholtz) {
        add(i, j, -omega2 * inputs[0].at(i, j));
      }
    }
  }
  out.value = sum / interior;
  return out;
}

double physics_loss(const PdeTask& task, const std::vector<ScalarField2D>& u_batch,
                    const std::vector<std::vector<ScalarField2D>>& input_batch) {
  if (u_batch.empty() || u_batch.size() != input_batch.size()) {
    throw std::invalid_argument("physics_loss: empty or mismatched batch");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < u_batch.size(); ++s) {
    total += physics_mse(task, u_batch[s], input_batch[s]);
  }
  return total / static_cast<double>(u_batch.size());
}

double residual_rel_l1(const PdeTask& task, const ScalarField2D& u_raw,
                       const std::vector<ScalarField2D>& inputs) {
  constexpr double kEps = 1e-12;
  ScalarField2D u_bc(u_raw.grid());
  const ScalarField2D r = residual_impl(task, u_raw, inputs, &u_bc);
  const int n = u_raw.n();
  const double omega2 = task.omega * task.omega;
  double num = 0.0;
  double den = 0.0;
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      num += std::abs(r.at(i, j));
      if (task.kind == PdeTask::Kind::Poisson) {
        den += std::abs(inputs[0].at(i, j));
      } else {
        den += std::abs(omega2 * inputs[0].at(i, j) * u_bc.at(i, j));
      }
    }
  }
  if (task.kind == PdeTask::Kind::Helmholtz) {
    den += kEps;
  }
  if (den < kEps) {
    throw std::domain_error("residual_rel_l1: degenerate normalizer");
  }
  return num / den;
}

double mean_abs_residual(const PdeTask& task, const ScalarField2D& u_raw,
                         const std::vector<ScalarField2D>& inputs) {
  const ScalarField2D r = residual_impl(task, u_raw, inputs, nullptr);
  const int n = u_raw.n();
  double sum = 0.0;
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      sum += std::abs(r.at(i, j));
    }
  }
  return sum / (static_cast<double>(n - 2) * (n - 2));
}

}  // namespace pift
