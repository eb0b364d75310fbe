#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "pift/dataset.hpp"
#include "pift/field.hpp"
#include "pift/generators.hpp"
#include "pift/residual.hpp"

namespace pift {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Symmetric sparse matrix in compressed-row layout.
struct CsrMatrix {
  int rows = 0;
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<double> val;

  void apply(const std::vector<double>& x, std::vector<double>& y) const;
};

/// Assembled linear system with Dirichlet constraints listed separately.
/// After constraint elimination the free-free block of the Poisson stiffness
/// matrix is symmetric positive definite.
struct SparseSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  std::vector<int> constrained_dofs;
  std::vector<double> constrained_values;
};

struct SolveReport {
  int iterations = 0;
  double residual_norm = 0.0;  // relative algebraic residual ||b - Ax|| / ||b||
  double seconds = 0.0;
  bool converged = true;
};

/// 4x4 bilinear-quad element stiffness for the Laplacian, integrated with
/// 2x2 Gauss quadrature on an h x h cell (h-independent in 2-D). Local node
/// order is counterclockwise from the lower-left corner.
std::array<std::array<double, 4>, 4> poisson_element_stiffness(double h);

/// Stiffness + load for -lap(u) = f with zero Dirichlet data. The load
/// integrates f bilinearly interpolated from its nodal values.
SparseSystem assemble_poisson(const Grid& grid, const ScalarField2D& f);

/// K - omega^2 M_a with Dirichlet value b on all boundary nodes; M_a is the
/// a-weighted mass matrix assembled with the same 2x2 quadrature.
SparseSystem assemble_helmholtz(const Grid& grid, const ScalarField2D& a,
                                double omega, double b);

/// General assembly used by both solvers and by manufactured-solution tests:
/// K - omega^2 M_a (mass term only when `a` given), load from `source`
/// (zero when absent), constant Dirichlet value on the whole boundary.
SparseSystem assemble_system(const Grid& grid, const ScalarField2D* a, double omega,
                             const ScalarField2D* source, double boundary_value);

enum class KrylovMethod { ConjugateGradient, Minres };

/// Eliminates constraints, solves the free block with the requested Krylov
/// method, and scatters prescribed values back (boundary nodes exact).
std::pair<ScalarField2D, SolveReport> solve_system(const Grid& grid,
                                                   const SparseSystem& system,
                                                   double tol, KrylovMethod method);

/// -lap(u) = f on the unit square, u = 0 on the boundary. Diagonally
/// preconditioned CG on the SPD free block; iteration cap 10 n^2.
std::pair<ScalarField2D, SolveReport> solve_poisson(const Grid& grid,
                                                    const ScalarField2D& f,
                                                    double tol);

/// -lap(u) - omega^2 a u = 0, u = b on the boundary. MINRES on the possibly
/// indefinite free block.
std::pair<ScalarField2D, SolveReport> solve_helmholtz(const Grid& grid,
                                                      const ScalarField2D& a,
                                                      double omega, double b,
                                                      double tol);

struct LabeledSetOptions {
  double tol = 1e-10;
  BlobParams blobs;            // Poisson training distribution
  MediumParams medium;         // Helmholtz training distribution
  std::optional<std::filesystem::path> log_path;  // one line per sample
  int threads = 1;
};

/// Inputs from the task's training-distribution generator paired with
/// reference solutions from the matching solver. Per-sample seeds are
/// derived from (seed, index); outputs are ordered by index regardless of
/// the thread count. Solver failures abort with the failing sample index.
SampleSet generate_labeled_set(const PdeTask& task, const Grid& grid, int count,
                               std::uint64_t seed,
                               const LabeledSetOptions& options = {});

}  // namespace pift
