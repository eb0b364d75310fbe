#include "pift/generators.hpp"

#include <cmath>

#include "pift/rng.hpp"

namespace pift {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

/// Rescale in place so max|f| <= kFieldAmplitudeBound.
void clamp_amplitude(ScalarField2D& field) {
  const double m = max_abs(field);
  if (m > kFieldAmplitudeBound) {
    const double s = kFieldAmplitudeBound / m;
    for (double& v : field.values()) v *= s;
  }
}

}  // namespace

ScalarField2D blob_field(const Grid& grid, const std::vector<GaussianBlob>& blobs) {
  ScalarField2D field(grid);
  const int n = grid.n;
  for (int i = 0; i < n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < n; ++j) {
      const double x = grid.x(j);
      double v = 0.0;
      for (const auto& blob : blobs) {
        const double dx = x - blob.cx;
        const double dy = y - blob.cy;
        v += blob.amplitude *
             std::exp(-(dx * dx + dy * dy) / (2.0 * blob.sigma * blob.sigma));
      }
      field.at(i, j) = v;
    }
  }
  return field;
}

ScalarField2D gen_gaussian_blobs(const Grid& grid, const BlobParams& params,
                                 std::uint64_t seed) {
  Rng rng(seed);
  const int k = static_cast<int>(rng.uniform_int(params.k_min, params.k_max));
  std::vector<GaussianBlob> blobs;
  blobs.reserve(k);
  for (int b = 0; b < k; ++b) {
    GaussianBlob blob;
    do {
      blob.amplitude = rng.uniform(params.amp_min, params.amp_max);
    } while (std::abs(blob.amplitude) < params.amp_dead_zone);
    blob.cx = rng.uniform(params.center_margin, 1.0 - params.center_margin);
    blob.cy = rng.uniform(params.center_margin, 1.0 - params.center_margin);
    blob.sigma = rng.uniform(params.sigma_min, params.sigma_max);
    blobs.push_back(blob);
  }
  ScalarField2D field = blob_field(grid, blobs);
  clamp_amplitude(field);
  return field;
}

std::string extreme_kind_name(ExtremeKind kind) {
  switch (kind) {
    case ExtremeKind::SinusoidalWaves: return "sinusoidal_waves";
    case ExtremeKind::RadialPattern:   return "radial_pattern";
    case ExtremeKind::AngularPattern:  return "angular_pattern";
    case ExtremeKind::Checkerboard:    return "checkerboard";
    case ExtremeKind::RandomPolygons:  return "random_polygons";
    case ExtremeKind::PerlinLikeNoise: return "perlin_like_noise";
    case ExtremeKind::StripePattern:   return "stripe_pattern";
    case ExtremeKind::SpiralPattern:   return "spiral_pattern";
    case ExtremeKind::RandomLines:     return "random_lines";
  }
  return "unknown";
}

ScalarField2D sinusoid_field(const Grid& grid, double kx, double ky,
                             double amplitude, double phase) {
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      field.at(i, j) = amplitude * std::sin(kTwoPi * (kx * x + ky * y) + phase);
    }
  }
  return field;
}

ScalarField2D checkerboard_field(const Grid& grid, int cells, double amplitude) {
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      int cx = static_cast<int>(x * cells);
      int cy = static_cast<int>(y * cells);
      if (cx >= cells) cx = cells - 1;
      if (cy >= cells) cy = cells - 1;
      field.at(i, j) = ((cx + cy) % 2 == 0) ? amplitude : -amplitude;
    }
  }
  return field;
}

namespace {

ScalarField2D radial_field(const Grid& grid, Rng& rng) {
  const double cx = rng.uniform(0.3, 0.7);
  const double cy = rng.uniform(0.3, 0.7);
  const int rings = static_cast<int>(rng.uniform_int(1, 6));
  const double amp = rng.uniform(0.5, 2.0);
  const double phase = rng.uniform(0.0, kTwoPi);
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      const double r = std::hypot(x - cx, y - cy);
      field.at(i, j) = amp * std::sin(kTwoPi * rings * r + phase);
    }
  }
  return field;
}

ScalarField2D angular_field(const Grid& grid, Rng& rng) {
  const double cx = rng.uniform(0.35, 0.65);
  const double cy = rng.uniform(0.35, 0.65);
  const int lobes = static_cast<int>(rng.uniform_int(1, 8));
  const double amp = rng.uniform(0.5, 2.0);
  const double phase = rng.uniform(0.0, kTwoPi);
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      const double theta = std::atan2(y - cy, x - cx);
      field.at(i, j) = amp * std::sin(lobes * theta + phase);
    }
  }
  return field;
}

ScalarField2D polygon_field(const Grid& grid, Rng& rng) {
  struct Polygon {
    std::vector<double> px, py;
    double amplitude;
  };
  const int count = static_cast<int>(rng.uniform_int(1, 3));
  std::vector<Polygon> polys(count);
  for (auto& poly : polys) {
    const int verts = static_cast<int>(rng.uniform_int(3, 8));
    const double cx = rng.uniform(0.25, 0.75);
    const double cy = rng.uniform(0.25, 0.75);
    const double base_r = rng.uniform(0.1, 0.3);
    const double rot = rng.uniform(0.0, kTwoPi);
    poly.amplitude = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
    poly.px.resize(verts);
    poly.py.resize(verts);
    for (int v = 0; v < verts; ++v) {
      const double angle = rot + kTwoPi * v / verts;
      const double r = base_r * rng.uniform(0.6, 1.0);
      poly.px[v] = cx + r * std::cos(angle);
      poly.py[v] = cy + r * std::sin(angle);
    }
  }
  auto inside = [](const Polygon& poly, double x, double y) {
    bool in = false;
    const std::size_t n = poly.px.size();
    for (std::size_t a = 0, b = n - 1; a < n; b = a++) {
      if ((poly.py[a] > y) != (poly.py[b] > y)) {
        const double t = (y - poly.py[a]) / (poly.py[b] - poly.py[a]);
        if (x < poly.px[a] + t * (poly.px[b] - poly.px[a])) in = !in;
      }
    }
    return in;
  };
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      double v = 0.0;
      for (const auto& poly : polys) {
        if (inside(poly, x, y)) v += poly.amplitude;
      }
      field.at(i, j) = v;
    }
  }
  return field;
}

/// Two-octave value noise on coarse lattices with smoothstep interpolation.
ScalarField2D perlin_like_field(const Grid& grid, Rng& rng) {
  const int base_cells = static_cast<int>(rng.uniform_int(3, 6));
  const double amp = rng.uniform(0.8, 1.6);

  auto octave = [&](int cells) {
    std::vector<double> lattice((cells + 1) * (cells + 1));
    for (double& v : lattice) v = rng.uniform(-1.0, 1.0);
    return lattice;
  };
  auto sample = [](const std::vector<double>& lattice, int cells, double x, double y) {
    double fx = x * cells;
    double fy = y * cells;
    int ix = static_cast<int>(fx);
    int iy = static_cast<int>(fy);
    if (ix >= cells) ix = cells - 1;
    if (iy >= cells) iy = cells - 1;
    double tx = fx - ix;
    double ty = fy - iy;
    tx = tx * tx * (3.0 - 2.0 * tx);
    ty = ty * ty * (3.0 - 2.0 * ty);
    const int stride = cells + 1;
    const double v00 = lattice[iy * stride + ix];
    const double v10 = lattice[iy * stride + ix + 1];
    const double v01 = lattice[(iy + 1) * stride + ix];
    const double v11 = lattice[(iy + 1) * stride + ix + 1];
    const double a = v00 + tx * (v10 - v00);
    const double b = v01 + tx * (v11 - v01);
    return a + ty * (b - a);
  };

  const auto coarse = octave(base_cells);
  const auto fine = octave(2 * base_cells);
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      field.at(i, j) = amp * (sample(coarse, base_cells, x, y) +
                              0.5 * sample(fine, 2 * base_cells, x, y));
    }
  }
  return field;
}

ScalarField2D stripe_field(const Grid& grid, Rng& rng) {
  const double theta = rng.uniform(0.0, kPi);
  const int stripes = static_cast<int>(rng.uniform_int(2, 10));
  const double amp = rng.uniform(0.5, 2.0);
  const double phase = rng.uniform(0.0, kTwoPi);
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      const double t = x * ct + y * st;
      const double s = std::sin(kTwoPi * stripes * t + phase);
      field.at(i, j) = amp * (s >= 0.0 ? 1.0 : -1.0);
    }
  }
  return field;
}

ScalarField2D spiral_field(const Grid& grid, Rng& rng) {
  const double cx = rng.uniform(0.4, 0.6);
  const double cy = rng.uniform(0.4, 0.6);
  const int arms = static_cast<int>(rng.uniform_int(1, 4));
  const int radial = static_cast<int>(rng.uniform_int(2, 5));
  const double amp = rng.uniform(0.5, 2.0);
  const double phase = rng.uniform(0.0, kTwoPi);
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      const double r = std::hypot(x - cx, y - cy);
      const double theta = std::atan2(y - cy, x - cx);
      field.at(i, j) = amp * std::sin(arms * theta + kTwoPi * radial * r + phase);
    }
  }
  return field;
}

ScalarField2D line_field(const Grid& grid, Rng& rng) {
  struct Line {
    double px, py, nx, ny, sigma, amplitude;
  };
  const int count = static_cast<int>(rng.uniform_int(2, 6));
  std::vector<Line> lines(count);
  for (auto& line : lines) {
    line.px = rng.uniform(0.1, 0.9);
    line.py = rng.uniform(0.1, 0.9);
    const double angle = rng.uniform(0.0, kPi);
    line.nx = -std::sin(angle);
    line.ny = std::cos(angle);
    line.sigma = rng.uniform(0.01, 0.05);
    line.amplitude = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
  }
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      double v = 0.0;
      for (const auto& line : lines) {
        const double d = (x - line.px) * line.nx + (y - line.py) * line.ny;
        v += line.amplitude * std::exp(-d * d / (2.0 * line.sigma * line.sigma));
      }
      field.at(i, j) = v;
    }
  }
  return field;
}

}  // namespace

ScalarField2D gen_extreme(const Grid& grid, ExtremeKind kind, std::uint64_t seed) {
  Rng rng(seed);
  ScalarField2D field(grid);
  switch (kind) {
    case ExtremeKind::SinusoidalWaves: {
      const int kx = static_cast<int>(rng.uniform_int(0, 8));
      const int ky_min = (kx == 0) ? 1 : 0;
      const int ky = static_cast<int>(rng.uniform_int(ky_min, 8));
      const double amp = rng.uniform(0.5, 2.0);
      const double phase = rng.uniform(0.0, kTwoPi);
      field = sinusoid_field(grid, kx, ky, amp, phase);
      break;
    }
    case ExtremeKind::RadialPattern:
      field = radial_field(grid, rng);
      break;
    case ExtremeKind::AngularPattern:
      field = angular_field(grid, rng);
      break;
    case ExtremeKind::Checkerboard: {
      const int cells = static_cast<int>(rng.uniform_int(2, 8));
      const double amp = rng.uniform(0.5, 2.0);
      field = checkerboard_field(grid, cells, amp);
      break;
    }
    case ExtremeKind::RandomPolygons:
      field = polygon_field(grid, rng);
      break;
    case ExtremeKind::PerlinLikeNoise:
      field = perlin_like_field(grid, rng);
      break;
    case ExtremeKind::StripePattern:
      field = stripe_field(grid, rng);
      break;
    case ExtremeKind::SpiralPattern:
      field = spiral_field(grid, rng);
      break;
    case ExtremeKind::RandomLines:
      field = line_field(grid, rng);
      break;
  }
  clamp_amplitude(field);
  return field;
}

SampleSet gen_ood_testset(const Grid& grid, int count, std::uint64_t seed) {
  if (count < 1) {
    throw std::invalid_argument("gen_ood_testset: count must be >= 1");
  }
  SampleSet set;
  set.grid = grid;
  set.channels = 1;
  set.generator = "extreme-ood";
  set.seed = seed;
  nlohmann::json kinds = nlohmann::json::array();
  set.inputs.reserve(count);
  for (int s = 0; s < count; ++s) {
    const ExtremeKind kind = kAllExtremeKinds[s % kAllExtremeKinds.size()];
    kinds.push_back(extreme_kind_name(kind));
    set.inputs.push_back({gen_extreme(grid, kind, derive_seed(seed, s))});
  }
  set.generator_params = {{"kinds", kinds}, {"allocation", "round_robin"}};
  return set;
}

ScalarField2D wavy_stripe_field(const Grid& grid, double orientation, int stripe_count,
                                double waviness_amplitude, int waviness_frequency,
                                double phase) {
  const double ct = std::cos(orientation);
  const double st = std::sin(orientation);
  ScalarField2D field(grid);
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.y(i);
    for (int j = 0; j < grid.n; ++j) {
      const double x = grid.x(j);
      const double along = x * ct + y * st;       // stripe coordinate
      const double across = -x * st + y * ct;     // tangent coordinate
      const double t = along +
          waviness_amplitude * std::sin(kTwoPi * waviness_frequency * across);
      field.at(i, j) =
          0.2 + 0.4 * (1.0 + std::cos(kTwoPi * stripe_count * t + phase));
    }
  }
  return field;
}

HelmholtzMedium gen_helmholtz_medium(const Grid& grid, MediumFamily family,
                                     const MediumParams& params, std::uint64_t seed) {
  Rng rng(seed);
  HelmholtzMedium medium;
  medium.b = rng.uniform(params.b_min, params.b_max);
  switch (family) {
    case MediumFamily::GaussianComponents: {
      const auto& gp = params.gaussian;
      const int k = static_cast<int>(rng.uniform_int(gp.k_min, gp.k_max));
      std::vector<GaussianBlob> blobs;
      blobs.reserve(k);
      for (int b = 0; b < k; ++b) {
        GaussianBlob blob;
        blob.amplitude = rng.uniform(gp.amp_min, gp.amp_max);
        blob.cx = rng.uniform(gp.center_margin, 1.0 - gp.center_margin);
        blob.cy = rng.uniform(gp.center_margin, 1.0 - gp.center_margin);
        blob.sigma = rng.uniform(gp.sigma_min, gp.sigma_max);
        blobs.push_back(blob);
      }
      medium.a = blob_field(grid, blobs);
      break;
    }
    case MediumFamily::WavyStripes: {
      const auto& sp = params.stripes;
      const double orientation = rng.uniform(sp.orientation_min, sp.orientation_max);
      const int stripes = static_cast<int>(rng.uniform_int(sp.stripes_min, sp.stripes_max));
      const double waviness = rng.uniform(sp.waviness_min, sp.waviness_max);
      const int frequency = static_cast<int>(rng.uniform_int(1, 3));
      const double phase = rng.uniform(0.0, kTwoPi);
      medium.a = wavy_stripe_field(grid, orientation, stripes, waviness, frequency, phase);
      break;
    }
  }
  clamp_amplitude(medium.a);
  return medium;
}

}  // namespace pift
