#include "pift/fem.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "pift/rng.hpp"

namespace pift {

void CsrMatrix::apply(const std::vector<double>& x, std::vector<double>& y) const {
  y.assign(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      acc += val[k] * x[col[k]];
    }
    y[r] = acc;
  }
}

namespace {

constexpr double kGaussPoint = 0.57735026918962576451;  // 1/sqrt(3)

/// Bilinear shape functions on the reference square [-1,1]^2, local nodes
/// counterclockwise from (-1,-1).
void shape_values(double xi, double eta, double N[4]) {
  N[0] = 0.25 * (1.0 - xi) * (1.0 - eta);
  N[1] = 0.25 * (1.0 + xi) * (1.0 - eta);
  N[2] = 0.25 * (1.0 + xi) * (1.0 + eta);
  N[3] = 0.25 * (1.0 - xi) * (1.0 + eta);
}

void shape_gradients(double xi, double eta, double dxi[4], double deta[4]) {
  dxi[0] = -0.25 * (1.0 - eta);
  dxi[1] = 0.25 * (1.0 - eta);
  dxi[2] = 0.25 * (1.0 + eta);
  dxi[3] = -0.25 * (1.0 + eta);
  deta[0] = -0.25 * (1.0 - xi);
  deta[1] = -0.25 * (1.0 + xi);
  deta[2] = 0.25 * (1.0 + xi);
  deta[3] = 0.25 * (1.0 - xi);
}

}  // namespace

std::array<std::array<double, 4>, 4> poisson_element_stiffness(double h) {
  // Physical gradient = (2/h) * reference gradient; detJ = (h/2)^2, so the
  // Jacobian factors cancel and the entries are h-independent.
  (void)h;
  std::array<std::array<double, 4>, 4> K{};
  const double pts[2] = {-kGaussPoint, kGaussPoint};
  for (double xi : pts) {
    for (double eta : pts) {
      double dxi[4], deta[4];
      shape_gradients(xi, eta, dxi, deta);
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          K[a][b] += dxi[a] * dxi[b] + deta[a] * deta[b];
        }
      }
    }
  }
  return K;
}

SparseSystem assemble_system(const Grid& grid, const ScalarField2D* a, double omega,
                             const ScalarField2D* source, double boundary_value) {
  const int n = grid.n;
  const int dofs = n * n;
  const double h = grid.h();
  const double det_j = 0.25 * h * h;

  // 9-point CSR pattern of the structured bilinear mesh.
  CsrMatrix K;
  K.rows = dofs;
  K.row_ptr.assign(dofs + 1, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      int nnz = 0;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int ii = i + di;
          const int jj = j + dj;
          if (ii >= 0 && ii < n && jj >= 0 && jj < n) ++nnz;
        }
      }
      K.row_ptr[i * n + j + 1] = nnz;
    }
  }
  for (int r = 0; r < dofs; ++r) K.row_ptr[r + 1] += K.row_ptr[r];
  K.col.assign(K.row_ptr.back(), 0);
  K.val.assign(K.row_ptr.back(), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      int cursor = K.row_ptr[i * n + j];
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int ii = i + di;
          const int jj = j + dj;
          if (ii >= 0 && ii < n && jj >= 0 && jj < n) {
            K.col[cursor++] = ii * n + jj;
          }
        }
      }
    }
  }

  auto add_entry = [&](int row, int column, double value) {
    for (int k = K.row_ptr[row]; k < K.row_ptr[row + 1]; ++k) {
      if (K.col[k] == column) {
        K.val[k] += value;
        return;
      }
    }
    throw SolverError("assemble_system: entry outside sparsity pattern");
  };

  const auto Ke = poisson_element_stiffness(h);
  std::vector<double> rhs(dofs, 0.0);
  const double omega2 = omega * omega;

  const double pts[2] = {-kGaussPoint, kGaussPoint};
  for (int ci = 0; ci < n - 1; ++ci) {
    for (int cj = 0; cj < n - 1; ++cj) {
      const int nodes[4] = {ci * n + cj, ci * n + cj + 1, (ci + 1) * n + cj + 1,
                            (ci + 1) * n + cj};
      double a_nodal[4] = {0, 0, 0, 0};
      double f_nodal[4] = {0, 0, 0, 0};
      if (a) {
        a_nodal[0] = a->at(ci, cj);
        a_nodal[1] = a->at(ci, cj + 1);
        a_nodal[2] = a->at(ci + 1, cj + 1);
        a_nodal[3] = a->at(ci + 1, cj);
      }
      if (source) {
        f_nodal[0] = source->at(ci, cj);
        f_nodal[1] = source->at(ci, cj + 1);
        f_nodal[2] = source->at(ci + 1, cj + 1);
        f_nodal[3] = source->at(ci + 1, cj);
      }

      std::array<std::array<double, 4>, 4> Me{};
      std::array<double, 4> Fe{};
      if (a || source) {
        for (double xi : pts) {
          for (double eta : pts) {
            double N[4];
            shape_values(xi, eta, N);
            double a_g = 0.0;
            double f_g = 0.0;
            for (int c = 0; c < 4; ++c) {
              a_g += N[c] * a_nodal[c];
              f_g += N[c] * f_nodal[c];
            }
            for (int row = 0; row < 4; ++row) {
              if (source) Fe[row] += N[row] * f_g * det_j;
              if (a) {
                for (int column = 0; column < 4; ++column) {
                  Me[row][column] += N[row] * N[column] * a_g * det_j;
                }
              }
            }
          }
        }
      }

      for (int row = 0; row < 4; ++row) {
        for (int column = 0; column < 4; ++column) {
          double value = Ke[row][column];
          if (a) value -= omega2 * Me[row][column];
          add_entry(nodes[row], nodes[column], value);
        }
        rhs[nodes[row]] += Fe[row];
      }
    }
  }

  SparseSystem system;
  system.matrix = std::move(K);
  system.rhs = std::move(rhs);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == 0 || i == n - 1 || j == 0 || j == n - 1) {
        system.constrained_dofs.push_back(i * n + j);
        system.constrained_values.push_back(boundary_value);
      }
    }
  }
  return system;
}

SparseSystem assemble_poisson(const Grid& grid, const ScalarField2D& f) {
  if (!(f.grid() == grid)) {
    throw std::invalid_argument("assemble_poisson: source grid mismatch");
  }
  return assemble_system(grid, nullptr, 0.0, &f, 0.0);
}

SparseSystem assemble_helmholtz(const Grid& grid, const ScalarField2D& a,
                                double omega, double b) {
  if (!(a.grid() == grid)) {
    throw std::invalid_argument("assemble_helmholtz: coefficient grid mismatch");
  }
  return assemble_system(grid, &a, omega, nullptr, b);
}

namespace {

struct CondensedSystem {
  CsrMatrix A;
  std::vector<double> b;
  std::vector<int> free_nodes;  // free index -> global node
};

CondensedSystem condense(const SparseSystem& system) {
  const int dofs = system.matrix.rows;
  std::vector<char> constrained(dofs, 0);
  std::vector<double> prescribed(dofs, 0.0);
  for (std::size_t k = 0; k < system.constrained_dofs.size(); ++k) {
    constrained[system.constrained_dofs[k]] = 1;
    prescribed[system.constrained_dofs[k]] = system.constrained_values[k];
  }

  CondensedSystem out;
  std::vector<int> free_index(dofs, -1);
  for (int d = 0; d < dofs; ++d) {
    if (!constrained[d]) {
      free_index[d] = static_cast<int>(out.free_nodes.size());
      out.free_nodes.push_back(d);
    }
  }

  const int nf = static_cast<int>(out.free_nodes.size());
  out.A.rows = nf;
  out.A.row_ptr.assign(nf + 1, 0);
  out.b.assign(nf, 0.0);
  const auto& M = system.matrix;
  for (int fr = 0; fr < nf; ++fr) {
    const int r = out.free_nodes[fr];
    int nnz = 0;
    double rhs = system.rhs[r];
    for (int k = M.row_ptr[r]; k < M.row_ptr[r + 1]; ++k) {
      if (constrained[M.col[k]]) {
        rhs -= M.val[k] * prescribed[M.col[k]];
      } else {
        ++nnz;
      }
    }
    out.A.row_ptr[fr + 1] = nnz;
    out.b[fr] = rhs;
  }
  for (int fr = 0; fr < nf; ++fr) out.A.row_ptr[fr + 1] += out.A.row_ptr[fr];
  out.A.col.assign(out.A.row_ptr.back(), 0);
  out.A.val.assign(out.A.row_ptr.back(), 0.0);
  for (int fr = 0; fr < nf; ++fr) {
    const int r = out.free_nodes[fr];
    int cursor = out.A.row_ptr[fr];
    for (int k = M.row_ptr[r]; k < M.row_ptr[r + 1]; ++k) {
      if (!constrained[M.col[k]]) {
        out.A.col[cursor] = free_index[M.col[k]];
        out.A.val[cursor] = M.val[k];
        ++cursor;
      }
    }
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

/// Jacobi-preconditioned conjugate gradients; returns (x, iterations).
std::pair<std::vector<double>, int> pcg(const CsrMatrix& A, const std::vector<double>& b,
                                        double tol, int max_iterations) {
  const int nf = A.rows;
  std::vector<double> x(nf, 0.0);
  const double norm_b = norm2(b);
  if (norm_b == 0.0) return {x, 0};

  std::vector<double> inv_diag(nf, 1.0);
  for (int r = 0; r < nf; ++r) {
    for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) {
      if (A.col[k] == r && A.val[k] != 0.0) {
        inv_diag[r] = 1.0 / A.val[k];
        break;
      }
    }
  }

  std::vector<double> r = b;
  std::vector<double> z(nf), p(nf), q(nf);
  for (int i = 0; i < nf; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rho = dot(r, z);
  int it = 0;
  while (it < max_iterations) {
    if (norm2(r) <= tol * norm_b) break;
    A.apply(p, q);
    const double alpha = rho / dot(p, q);
    for (int i = 0; i < nf; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    for (int i = 0; i < nf; ++i) z[i] = inv_diag[i] * r[i];
    const double rho_next = dot(r, z);
    const double beta = rho_next / rho;
    rho = rho_next;
    for (int i = 0; i < nf; ++i) p[i] = z[i] + beta * p[i];
    ++it;
  }
  return {x, it};
}

/// MINRES for symmetric (possibly indefinite) systems, after Paige-Saunders.
std::pair<std::vector<double>, int> minres(const CsrMatrix& A, const std::vector<double>& b,
                                           double tol, int max_iterations) {
  const int nf = A.rows;
  std::vector<double> x(nf, 0.0);
  const double beta1 = norm2(b);
  if (beta1 == 0.0) return {x, 0};

  std::vector<double> r1 = b;
  std::vector<double> r2 = b;
  std::vector<double> y = b;
  std::vector<double> v(nf), w(nf, 0.0), w1(nf, 0.0), w2(nf, 0.0), av(nf);

  double oldb = 0.0;
  double beta = beta1;
  double dbar = 0.0;
  double epsln = 0.0;
  double phibar = beta1;
  double cs = -1.0;
  double sn = 0.0;

  int it = 0;
  while (it < max_iterations) {
    ++it;
    const double s = 1.0 / beta;
    for (int i = 0; i < nf; ++i) v[i] = y[i] * s;
    A.apply(v, av);
    y = av;
    if (it >= 2) {
      const double c = beta / oldb;
      for (int i = 0; i < nf; ++i) y[i] -= c * r1[i];
    }
    const double alfa = dot(v, y);
    {
      const double c = alfa / beta;
      for (int i = 0; i < nf; ++i) y[i] -= c * r2[i];
    }
    r1 = r2;
    r2 = y;
    oldb = beta;
    beta = norm2(y);

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::sqrt(gbar * gbar + beta * beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    const double denom = 1.0 / gamma;
    w1 = w2;
    w2 = w;
    for (int i = 0; i < nf; ++i) {
      w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
      x[i] += phi * w[i];
    }
    if (phibar <= tol * beta1) break;
  }
  return {x, it};
}

}  // namespace

std::pair<ScalarField2D, SolveReport> solve_system(const Grid& grid,
                                                   const SparseSystem& system,
                                                   double tol, KrylovMethod method) {
  if (tol <= 0.0) {
    throw std::invalid_argument("solve_system: tolerance must be positive");
  }
  const auto start = std::chrono::steady_clock::now();
  const CondensedSystem condensed = condense(system);
  const int cap = 10 * grid.n * grid.n;

  std::pair<std::vector<double>, int> result;
  if (method == KrylovMethod::ConjugateGradient) {
    result = pcg(condensed.A, condensed.b, tol, cap);
  } else {
    result = minres(condensed.A, condensed.b, tol, cap);
  }
  const auto& xf = result.first;

  // True relative algebraic residual, not the recurrence estimate.
  std::vector<double> ax(condensed.A.rows);
  condensed.A.apply(xf, ax);
  double res2 = 0.0;
  for (int i = 0; i < condensed.A.rows; ++i) {
    const double d = condensed.b[i] - ax[i];
    res2 += d * d;
  }
  const double norm_b = norm2(condensed.b);
  const double rel_res = (norm_b == 0.0) ? 0.0 : std::sqrt(res2) / norm_b;

  SolveReport report;
  report.iterations = result.second;
  report.residual_norm = rel_res;
  report.converged = rel_res <= tol * 16.0;  // allow recurrence round-off slack
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!report.converged) {
    std::ostringstream msg;
    msg << "linear solve failed to converge: relative residual " << rel_res << " after "
        << report.iterations << " iterations (tol " << tol << ")";
    throw SolverError(msg.str());
  }

  ScalarField2D u(grid);
  for (std::size_t k = 0; k < condensed.free_nodes.size(); ++k) {
    const int node = condensed.free_nodes[k];
    u.at(node / grid.n, node % grid.n) = xf[k];
  }
  for (std::size_t k = 0; k < system.constrained_dofs.size(); ++k) {
    const int node = system.constrained_dofs[k];
    u.at(node / grid.n, node % grid.n) = system.constrained_values[k];
  }
  return {std::move(u), report};
}

std::pair<ScalarField2D, SolveReport> solve_poisson(const Grid& grid,
                                                    const ScalarField2D& f,
                                                    double tol) {
  return solve_system(grid, assemble_poisson(grid, f), tol,
                      KrylovMethod::ConjugateGradient);
}

std::pair<ScalarField2D, SolveReport> solve_helmholtz(const Grid& grid,
                                                      const ScalarField2D& a,
                                                      double omega, double b,
                                                      double tol) {
  return solve_system(grid, assemble_helmholtz(grid, a, omega, b), tol,
                      KrylovMethod::Minres);
}

SampleSet generate_labeled_set(const PdeTask& task, const Grid& grid, int count,
                               std::uint64_t seed, const LabeledSetOptions& options) {
  if (count < 1) {
    throw std::invalid_argument("generate_labeled_set: count must be >= 1");
  }

  SampleSet set;
  set.grid = grid;
  set.channels = task.input_channels();
  set.seed = seed;
  set.inputs.resize(count);
  set.solutions.resize(count, ScalarField2D(grid));
  std::vector<SolveReport> reports(count);
  std::vector<std::string> failures(count);

  auto run_sample = [&](int s) {
    const std::uint64_t sample_seed = derive_seed(seed, s);
    try {
      if (task.kind == PdeTask::Kind::Poisson) {
        ScalarField2D f = gen_gaussian_blobs(grid, options.blobs, sample_seed);
        auto [u, report] = solve_poisson(grid, f, options.tol);
        set.inputs[s] = {std::move(f)};
        set.solutions[s] = std::move(u);
        reports[s] = report;
      } else {
        HelmholtzMedium medium =
            gen_helmholtz_medium(grid, MediumFamily::GaussianComponents,
                                 options.medium, sample_seed);
        auto [u, report] = solve_helmholtz(grid, medium.a, task.omega, medium.b,
                                           options.tol);
        ScalarField2D b_channel(grid);
        for (double& v : b_channel.values()) v = medium.b;
        set.inputs[s] = {std::move(medium.a), std::move(b_channel)};
        set.solutions[s] = std::move(u);
        reports[s] = report;
      }
    } catch (const std::exception& exc) {
      failures[s] = exc.what();
    }
  };

  const int threads = std::max(1, options.threads);
  if (threads == 1 || count < 4) {
    for (int s = 0; s < count; ++s) run_sample(s);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        for (int s = next.fetch_add(1); s < count; s = next.fetch_add(1)) {
          run_sample(s);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  for (int s = 0; s < count; ++s) {
    if (!failures[s].empty()) {
      throw SolverError("generate_labeled_set: sample " + std::to_string(s) +
                        " failed: " + failures[s]);
    }
  }

  if (options.log_path) {
    std::ofstream log(*options.log_path, std::ios::app);
    for (int s = 0; s < count; ++s) {
      log << s << " " << reports[s].iterations << " " << reports[s].residual_norm
          << "\n";
    }
  }

  set.generator =
      task.kind == PdeTask::Kind::Poisson ? "fem-poisson-blobs" : "fem-helmholtz-gaussian";
  nlohmann::json params = {{"fem_tol", options.tol}};
  if (task.kind == PdeTask::Kind::Poisson) {
    params["blobs"] = {{"k_min", options.blobs.k_min},
                       {"k_max", options.blobs.k_max},
                       {"amp_min", options.blobs.amp_min},
                       {"amp_max", options.blobs.amp_max},
                       {"amp_dead_zone", options.blobs.amp_dead_zone},
                       {"sigma_min", options.blobs.sigma_min},
                       {"sigma_max", options.blobs.sigma_max},
                       {"center_margin", options.blobs.center_margin}};
  } else {
    params["omega"] = task.omega;
    params["b_min"] = options.medium.b_min;
    params["b_max"] = options.medium.b_max;
    params["medium_family"] = "gaussian_components";
  }
  set.generator_params = std::move(params);
  return set;
}

}  // namespace pift
