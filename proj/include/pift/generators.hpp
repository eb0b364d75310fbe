#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pift/dataset.hpp"
#include "pift/field.hpp"

namespace pift {

/// All generated fields are rescaled so max|f| never exceeds this bound,
/// keeping residual losses across source families on comparable scales.
inline constexpr double kFieldAmplitudeBound = 2.0;

struct GaussianBlob {
  double amplitude = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  double sigma = 0.1;
};

/// Distribution over Gaussian-blob superpositions (the training family).
struct BlobParams {
  int k_min = 1;
  int k_max = 6;
  double amp_min = -1.0;
  double amp_max = 1.0;
  double amp_dead_zone = 0.05;  // |A| below this is redrawn
  double sigma_min = 0.05;
  double sigma_max = 0.15;
  double center_margin = 0.1;   // centers uniform in [margin, 1-margin]^2
};

/// Deterministic superposition of explicit blobs (no randomness, no rescale).
ScalarField2D blob_field(const Grid& grid, const std::vector<GaussianBlob>& blobs);

/// Seeded random blob superposition; rescaled to the amplitude bound.
ScalarField2D gen_gaussian_blobs(const Grid& grid, const BlobParams& params,
                                 std::uint64_t seed);

/// The nine out-of-distribution source families.
enum class ExtremeKind {
  SinusoidalWaves,
  RadialPattern,
  AngularPattern,
  Checkerboard,
  RandomPolygons,
  PerlinLikeNoise,
  StripePattern,
  SpiralPattern,
  RandomLines,
};

inline constexpr std::array<ExtremeKind, 9> kAllExtremeKinds = {
    ExtremeKind::SinusoidalWaves, ExtremeKind::RadialPattern,
    ExtremeKind::AngularPattern,  ExtremeKind::Checkerboard,
    ExtremeKind::RandomPolygons,  ExtremeKind::PerlinLikeNoise,
    ExtremeKind::StripePattern,   ExtremeKind::SpiralPattern,
    ExtremeKind::RandomLines,
};

std::string extreme_kind_name(ExtremeKind kind);

// Deterministic family kernels; gen_extreme draws their parameters.
ScalarField2D sinusoid_field(const Grid& grid, double kx, double ky,
                             double amplitude, double phase);
ScalarField2D checkerboard_field(const Grid& grid, int cells, double amplitude);

/// Seeded field from one extreme family; |values| <= amplitude bound.
ScalarField2D gen_extreme(const Grid& grid, ExtremeKind kind, std::uint64_t seed);

/// Unlabeled OOD test set: samples cycle through the nine kinds round-robin
/// by index, each sample drawn with a derived per-sample seed. The manifest
/// records the kind of every sample.
SampleSet gen_ood_testset(const Grid& grid, int count, std::uint64_t seed);

/// Helmholtz coefficient-field families.
enum class MediumFamily { GaussianComponents, WavyStripes };

struct StripeMediumParams {
  double orientation_min = 0.0;   // radians, angle of the stripe normal
  double orientation_max = 3.14159265358979323846;
  int stripes_min = 2;
  int stripes_max = 8;
  double waviness_min = 0.02;
  double waviness_max = 0.15;
};

struct GaussianMediumParams {
  int k_min = 1;
  int k_max = 4;
  double amp_min = 0.2;
  double amp_max = 1.0;
  double sigma_min = 0.1;
  double sigma_max = 0.3;
  double center_margin = 0.2;
};

struct MediumParams {
  GaussianMediumParams gaussian;
  StripeMediumParams stripes;
  double b_min = 0.25;
  double b_max = 0.5;
};

/// Deterministic wavy-stripe kernel: stripes normal to angle `orientation`,
/// waviness displaces the stripe coordinate along the tangent direction.
ScalarField2D wavy_stripe_field(const Grid& grid, double orientation, int stripe_count,
                                double waviness_amplitude, int waviness_frequency,
                                double phase);

struct HelmholtzMedium {
  ScalarField2D a;
  double b = 0.0;
};

/// Coefficient field a(x,y) from the requested family plus the boundary
/// constant b ~ U[b_min, b_max]. Draw order is fixed: b first, then the field.
HelmholtzMedium gen_helmholtz_medium(const Grid& grid, MediumFamily family,
                                     const MediumParams& params, std::uint64_t seed);

}  // namespace pift
