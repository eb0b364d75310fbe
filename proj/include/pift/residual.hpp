#pragma once

#include <vector>

#include "pift/field.hpp"

namespace pift {

inline constexpr double kDefaultHelmholtzOmega = 2.5 * 3.14159265358979323846;

/// Which PDE governs a task, plus its boundary operator. Poisson pairs with
/// zero Dirichlet data; Helmholtz with a constant Dirichlet value that is
/// normally carried per sample in the broadcast-b input channel (the value
/// stored here is the fallback when no such channel is present).
struct PdeTask {
  enum class Kind { Poisson, Helmholtz };
  enum class Boundary { ZeroDirichlet, ConstantDirichlet };

  Kind kind = Kind::Poisson;
  double omega = 0.0;
  Boundary boundary = Boundary::ZeroDirichlet;
  double boundary_value = 0.0;

  static PdeTask poisson() { return {Kind::Poisson, 0.0, Boundary::ZeroDirichlet, 0.0}; }
  static PdeTask helmholtz(double omega = kDefaultHelmholtzOmega, double b = 0.0) {
    return {Kind::Helmholtz, omega, Boundary::ConstantDirichlet, b};
  }

  int input_channels() const { return kind == Kind::Poisson ? 1 : 2; }

  /// Dirichlet value for one sample: zero for Poisson, the broadcast-b
  /// channel (or the fallback) for Helmholtz.
  double dirichlet_value(const std::vector<ScalarField2D>& inputs) const {
    if (kind == Kind::Poisson) return 0.0;
    return inputs.size() >= 2 ? inputs[1].at(0, 0) : boundary_value;
  }
};

/// Five-point Laplacian (u_E + u_W + u_N + u_S - 4 u_C) / h^2 applied to the
/// one-ring padded field, so an n x n input yields an n x n output. h is the
/// input grid's own spacing 1/(n-1).
ScalarField2D fd_laplacian(const ScalarField2D& u, const PadMode& boundary);

/// The model's effective prediction: the raw output with its outermost ring
/// replaced by the task's Dirichlet data. This is how the boundary operator
/// is enforced -- by padding, not by a penalty term.
ScalarField2D enforce_boundary(const PdeTask& task, const ScalarField2D& u_raw,
                               const std::vector<ScalarField2D>& inputs);

/// PDE residual of a raw model output. Boundary enforcement is applied
/// first; the residual is evaluated at the nodes strictly inside the domain
/// and the output ring (which carries the boundary operator, satisfied
/// exactly by construction) is zero. Poisson: r = -lap(u) - f.
/// Helmholtz: r = -lap(u) - omega^2 a u.
ScalarField2D pde_residual(const PdeTask& task, const ScalarField2D& u_raw,
                           const std::vector<ScalarField2D>& inputs);

/// Mean of r^2 over the interior nodes for one sample.
double physics_mse(const PdeTask& task, const ScalarField2D& u_raw,
                   const std::vector<ScalarField2D>& inputs);

struct PhysicsGrad {
  double value = 0.0;
  ScalarField2D du_raw;  // derivative of the interior-mean r^2 w.r.t. u_raw
};

/// physics_mse plus its exact gradient with respect to the raw output.
/// Ring coordinates of the gradient are zero (they are overwritten by the
/// boundary data and cannot influence the residual).
PhysicsGrad physics_mse_grad(const PdeTask& task, const ScalarField2D& u_raw,
                             const std::vector<ScalarField2D>& inputs);

/// Batch physics loss: mean over samples and interior nodes of r^2.
double physics_loss(const PdeTask& task, const std::vector<ScalarField2D>& u_batch,
                    const std::vector<std::vector<ScalarField2D>>& input_batch);

/// Relative L1 residual metric over interior nodes. Poisson normalizes by
/// ||f||_1; Helmholtz by ||omega^2 a u||_1 + eps. Throws when the normalizer
/// falls below eps = 1e-12.
double residual_rel_l1(const PdeTask& task, const ScalarField2D& u_raw,
                       const std::vector<ScalarField2D>& inputs);

/// Mean of |r| over interior nodes.
double mean_abs_residual(const PdeTask& task, const ScalarField2D& u_raw,
                         const std::vector<ScalarField2D>& inputs);

}  // namespace pift
