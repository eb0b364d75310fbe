#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pift/fem.hpp"
#include "pift/generators.hpp"
#include "pift/residual.hpp"
#include "pift/rng.hpp"

using namespace pift;

namespace {

constexpr double kPi = 3.14159265358979323846;

ScalarField2D random_field(const Grid& grid, Rng& rng) {
  ScalarField2D f(grid);
  for (double& v : f.values()) v = rng.uniform(-1.0, 1.0);
  return f;
}

/// Straightforward pad-then-stencil evaluation used as the brute-force
/// reference for the fused implementation.
double oracle_physics_loss(const PdeTask& task,
                           const std::vector<ScalarField2D>& u_batch,
                           const std::vector<std::vector<ScalarField2D>>& inputs) {
  double total = 0.0;
  for (std::size_t s = 0; s < u_batch.size(); ++s) {
    const int n = u_batch[s].n();
    const double h = u_batch[s].grid().h();
    const double b = task.dirichlet_value(inputs[s]);
    const ScalarField2D u = with_boundary_ring(u_batch[s], b);
    double sum = 0.0;
    for (int i = 1; i < n - 1; ++i) {
      for (int j = 1; j < n - 1; ++j) {
        const double lap = (u.at(i, j + 1) + u.at(i, j - 1) + u.at(i + 1, j) +
                            u.at(i - 1, j) - 4.0 * u.at(i, j)) /
                           (h * h);
        double r = -lap;
        if (task.kind == PdeTask::Kind::Poisson) {
          r -= inputs[s][0].at(i, j);
        } else {
          r -= task.omega * task.omega * inputs[s][0].at(i, j) * u.at(i, j);
        }
        sum += r * r;
      }
    }
    total += sum / ((n - 2.0) * (n - 2.0));
  }
  return total / u_batch.size();
}

}  // namespace

TEST_CASE("laplacian of zero is zero") {
  const ScalarField2D u(Grid(9));
  const ScalarField2D lap = fd_laplacian(u, PadMode::zero());
  REQUIRE(lap.n() == 9);
  for (double v : lap.values()) CHECK(v == 0.0);
}

TEST_CASE("stencil is exact for x(1-x)y(1-y) at the center node") {
  for (int n : {17, 33}) {
    const Grid grid(n);
    ScalarField2D u(grid);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double x = grid.x(j);
        const double y = grid.y(i);
        u.at(i, j) = x * (1.0 - x) * y * (1.0 - y);
      }
    }
    const ScalarField2D lap = fd_laplacian(u, PadMode::zero());
    const int c = (n - 1) / 2;
    CHECK(std::abs(lap.at(c, c) - (-1.0)) < 1e-10);
  }
}

TEST_CASE("discrete eigenfunction identity for the sine mode") {
  const int n = 17;
  const Grid grid(n);
  const double h = grid.h();
  ScalarField2D u(grid);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      u.at(i, j) = std::sin(kPi * grid.x(j)) * std::sin(kPi * grid.y(i));
    }
  }
  const ScalarField2D lap = fd_laplacian(u, PadMode::zero());
  const double s = std::sin(kPi * h / 2.0);
  const double lambda = -8.0 / (h * h) * s * s;
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      CHECK(std::abs(lap.at(i, j) - lambda * u.at(i, j)) < 1e-9);
    }
  }
}

TEST_CASE("stencil exactness for low-order polynomials away from the ring") {
  const Grid grid(13);
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), c = rng.uniform(-1, 1);
    const double d = rng.uniform(-1, 1), e = rng.uniform(-1, 1), g = rng.uniform(-1, 1);
    ScalarField2D u(grid);
    for (int i = 0; i < grid.n; ++i) {
      for (int j = 0; j < grid.n; ++j) {
        const double x = grid.x(j);
        const double y = grid.y(i);
        u.at(i, j) = a * x * x + b * x * y + c * y * y + d * x + e * y + g;
      }
    }
    const ScalarField2D lap = fd_laplacian(u, PadMode::zero());
    const double exact = 2.0 * a + 2.0 * c;
    for (int i = 1; i < grid.n - 1; ++i) {
      for (int j = 1; j < grid.n - 1; ++j) {
        CHECK(std::abs(lap.at(i, j) - exact) < 1e-10);
      }
    }
  }
}

TEST_CASE("laplacian is linear under zero padding") {
  const Grid grid(11);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ScalarField2D u = random_field(grid, rng);
    const ScalarField2D v = random_field(grid, rng);
    const double alpha = rng.uniform(-2, 2);
    const double beta = rng.uniform(-2, 2);
    ScalarField2D combo(grid);
    for (int i = 0; i < grid.n; ++i) {
      for (int j = 0; j < grid.n; ++j) {
        combo.at(i, j) = alpha * u.at(i, j) + beta * v.at(i, j);
      }
    }
    const ScalarField2D lc = fd_laplacian(combo, PadMode::zero());
    const ScalarField2D lu = fd_laplacian(u, PadMode::zero());
    const ScalarField2D lv = fd_laplacian(v, PadMode::zero());
    const double scale = 1.0 / (grid.h() * grid.h());
    for (int i = 0; i < grid.n; ++i) {
      for (int j = 0; j < grid.n; ++j) {
        CHECK(std::abs(lc.at(i, j) - (alpha * lu.at(i, j) + beta * lv.at(i, j))) <
              1e-12 * scale);
      }
    }
  }
}

TEST_CASE("poisson residual of zero output is minus the source") {
  const Grid grid(9);
  Rng rng(8);
  const ScalarField2D f = random_field(grid, rng);
  const ScalarField2D u(grid);
  const ScalarField2D r = pde_residual(PdeTask::poisson(), u, {f});
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      const bool interior = i > 0 && i < grid.n - 1 && j > 0 && j < grid.n - 1;
      CHECK(r.at(i, j) == (interior ? -f.at(i, j) : 0.0));
    }
  }
  CHECK(residual_rel_l1(PdeTask::poisson(), u, {f}) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("helmholtz constant state with vanishing medium has zero residual") {
  const Grid grid(9);
  const double b = 0.37;
  const PdeTask task = PdeTask::helmholtz();
  ScalarField2D u(grid);
  ScalarField2D a(grid);
  ScalarField2D b_channel(grid);
  for (double& v : u.values()) v = b;
  for (double& v : b_channel.values()) v = b;
  const ScalarField2D r = pde_residual(task, u, {a, b_channel});
  for (double v : r.values()) CHECK(v == 0.0);
}

TEST_CASE("physics loss of constant residual two is four") {
  const Grid grid(9);
  ScalarField2D f(grid);
  for (double& v : f.values()) v = -2.0;  // u == 0 gives r = -f = 2 at the interior
  const ScalarField2D u(grid);
  const double loss = physics_loss(PdeTask::poisson(), {u}, {{f}});
  CHECK(loss == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("physics loss matches the brute-force oracle on random batches") {
  Rng rng(13);
  const Grid grid(10);
  SUBCASE("poisson") {
    const PdeTask task = PdeTask::poisson();
    std::vector<ScalarField2D> u_batch;
    std::vector<std::vector<ScalarField2D>> inputs;
    for (int s = 0; s < 4; ++s) {
      u_batch.push_back(random_field(grid, rng));
      inputs.push_back({random_field(grid, rng)});
    }
    const double fused = physics_loss(task, u_batch, inputs);
    const double oracle = oracle_physics_loss(task, u_batch, inputs);
    CHECK(fused == doctest::Approx(oracle).epsilon(1e-12));
  }
  SUBCASE("helmholtz") {
    const PdeTask task = PdeTask::helmholtz();
    std::vector<ScalarField2D> u_batch;
    std::vector<std::vector<ScalarField2D>> inputs;
    for (int s = 0; s < 4; ++s) {
      u_batch.push_back(random_field(grid, rng));
      ScalarField2D a = random_field(grid, rng);
      ScalarField2D b_channel(grid);
      const double b = rng.uniform(0.25, 0.5);
      for (double& v : b_channel.values()) v = b;
      inputs.push_back({std::move(a), std::move(b_channel)});
    }
    const double fused = physics_loss(task, u_batch, inputs);
    const double oracle = oracle_physics_loss(task, u_batch, inputs);
    CHECK(fused == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("physics loss is nonnegative and zero only at zero residual") {
  Rng rng(31);
  const Grid grid(8);
  for (int trial = 0; trial < 10; ++trial) {
    const ScalarField2D u = random_field(grid, rng);
    const ScalarField2D f = random_field(grid, rng);
    const double loss = physics_loss(PdeTask::poisson(), {u}, {{f}});
    CHECK(loss >= 0.0);
  }
  const ScalarField2D zero(grid);
  CHECK(physics_loss(PdeTask::poisson(), {zero}, {{zero}}) == 0.0);
}

TEST_CASE("residual gradient matches finite differences of the loss") {
  Rng rng(41);
  const Grid grid(8);
  for (const PdeTask& task : {PdeTask::poisson(), PdeTask::helmholtz()}) {
    ScalarField2D u = random_field(grid, rng);
    std::vector<ScalarField2D> inputs;
    inputs.push_back(random_field(grid, rng));
    if (task.kind == PdeTask::Kind::Helmholtz) {
      ScalarField2D b_channel(grid);
      for (double& v : b_channel.values()) v = 0.3;
      inputs.push_back(b_channel);
    }
    const PhysicsGrad pg = physics_mse_grad(task, u, inputs);
    CHECK(pg.value == doctest::Approx(physics_mse(task, u, inputs)).epsilon(1e-14));
    const double delta = 1e-6;
    for (int i = 0; i < grid.n; i += 3) {
      for (int j = 0; j < grid.n; j += 2) {
        ScalarField2D up = u;
        ScalarField2D dn = u;
        up.at(i, j) += delta;
        dn.at(i, j) -= delta;
        const double fd =
            (physics_mse(task, up, inputs) - physics_mse(task, dn, inputs)) / (2 * delta);
        CHECK(pg.du_raw.at(i, j) == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("fem ground truth residual shrinks at second order") {
  const GaussianBlob blob{0.8, 0.45, 0.55, 0.12};
  std::vector<double> mean_abs;
  std::vector<double> rel;
  for (int n : {33, 65}) {
    const Grid grid(n);
    const ScalarField2D f = blob_field(grid, {blob});
    auto [u, report] = solve_poisson(grid, f, 1e-12);
    mean_abs.push_back(mean_abs_residual(PdeTask::poisson(), u, {f}));
    rel.push_back(residual_rel_l1(PdeTask::poisson(), u, {f}));
  }
  const double ratio = mean_abs[0] / mean_abs[1];
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
  CHECK(rel[1] <= rel[0]);
}

TEST_CASE("input validation") {
  const Grid grid(8);
  const ScalarField2D u(grid);
  const ScalarField2D f((Grid(9)));
  CHECK_THROWS_AS(pde_residual(PdeTask::poisson(), u, {f}), std::invalid_argument);
  CHECK_THROWS_AS(pde_residual(PdeTask::poisson(), u, {}), std::invalid_argument);
  CHECK_THROWS_AS(residual_rel_l1(PdeTask::poisson(), u, {ScalarField2D(grid)}),
                  std::domain_error);
}

TEST_CASE("enforce_boundary clamps the ring only") {
  const Grid grid(8);
  Rng rng(55);
  const ScalarField2D u = random_field(grid, rng);
  const ScalarField2D clamped = enforce_boundary(PdeTask::poisson(), u, {u});
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      const bool ring = i == 0 || i == grid.n - 1 || j == 0 || j == grid.n - 1;
      CHECK(clamped.at(i, j) == (ring ? 0.0 : u.at(i, j)));
    }
  }
}
