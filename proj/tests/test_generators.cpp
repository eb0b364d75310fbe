#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "pift/generators.hpp"
#include "pift/rng.hpp"

using namespace pift;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("unit blob peaks at its center") {
  const Grid grid(17);  // node (8,8) sits exactly at (0.5, 0.5)
  const ScalarField2D f = blob_field(grid, {{1.0, 0.5, 0.5, 0.1}});
  CHECK(f.at(8, 8) == 1.0);
  CHECK(f.at(8, 9) < 1.0);
}

TEST_CASE("blob superposition is additive") {
  const Grid grid(9);
  const GaussianBlob a{0.4, 0.3, 0.4, 0.08};
  const GaussianBlob b{-0.6, 0.7, 0.6, 0.12};
  const ScalarField2D fa = blob_field(grid, {a});
  const ScalarField2D fb = blob_field(grid, {b});
  const ScalarField2D fab = blob_field(grid, {a, b});
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      CHECK(fab.at(i, j) == fa.at(i, j) + fb.at(i, j));
    }
  }
}

TEST_CASE("blob generator determinism across 100 seed pairs") {
  const Grid grid(12);
  const BlobParams params;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ScalarField2D a = gen_gaussian_blobs(grid, params, seed);
    const ScalarField2D b = gen_gaussian_blobs(grid, params, seed);
    CHECK(a.values() == b.values());
  }
  const ScalarField2D a = gen_gaussian_blobs(grid, params, 1);
  const ScalarField2D b = gen_gaussian_blobs(grid, params, 2);
  CHECK(a.values() != b.values());
}

TEST_CASE("checkerboard 2x2 gives the quadrant sign pattern") {
  const Grid grid(8);
  const ScalarField2D f = checkerboard_field(grid, 2, 1.0);
  // lower-left quadrant positive, alternating across quadrants
  CHECK(f.at(1, 1) == 1.0);
  CHECK(f.at(1, 6) == -1.0);
  CHECK(f.at(6, 1) == -1.0);
  CHECK(f.at(6, 6) == 1.0);
}

TEST_CASE("sinusoid kernel matches the closed form") {
  const Grid grid(21);
  const ScalarField2D f = sinusoid_field(grid, 1.0, 0.0, 1.0, 0.0);
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      CHECK(f.at(i, j) == doctest::Approx(std::sin(2.0 * kPi * grid.x(j))).epsilon(1e-12));
    }
  }
}

TEST_CASE("extreme generators are deterministic per seed") {
  const Grid grid(16);
  for (ExtremeKind kind : kAllExtremeKinds) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      const ScalarField2D a = gen_extreme(grid, kind, seed);
      const ScalarField2D b = gen_extreme(grid, kind, seed);
      CHECK(a.values() == b.values());
    }
  }
}

TEST_CASE("all generators stay finite and bounded over many draws") {
  const Grid grid(16);
  const BlobParams blob_params;
  const MediumParams medium_params;
  int draws = 0;
  for (std::uint64_t seed = 0; seed < 700; ++seed) {
    for (ExtremeKind kind : kAllExtremeKinds) {
      const ScalarField2D f = gen_extreme(grid, kind, seed);
      REQUIRE(f.all_finite());
      REQUIRE(max_abs(f) <= kFieldAmplitudeBound + 1e-12);
      ++draws;
    }
    const ScalarField2D f = gen_gaussian_blobs(grid, blob_params, seed);
    REQUIRE(f.all_finite());
    REQUIRE(max_abs(f) <= kFieldAmplitudeBound + 1e-12);
    ++draws;
    const HelmholtzMedium medium = gen_helmholtz_medium(
        grid, seed % 2 ? MediumFamily::WavyStripes : MediumFamily::GaussianComponents,
        medium_params, seed);
    REQUIRE(medium.a.all_finite());
    REQUIRE(max_abs(medium.a) <= kFieldAmplitudeBound + 1e-12);
    ++draws;
  }
  CHECK(draws >= 7000);
}

TEST_CASE("ood testset cycles the nine kinds") {
  const Grid grid(12);
  SUBCASE("count 9 gives one of each") {
    const SampleSet set = gen_ood_testset(grid, 9, 5);
    const auto kinds = set.generator_params.at("kinds");
    REQUIRE(kinds.size() == 9);
    std::map<std::string, int> histogram;
    for (const auto& k : kinds) histogram[k.get<std::string>()]++;
    CHECK(histogram.size() == 9);
    for (const auto& [name, count] : histogram) CHECK(count == 1);
  }
  SUBCASE("count 50 balances kinds to 5 or 6") {
    const SampleSet set = gen_ood_testset(grid, 50, 5);
    std::map<std::string, int> histogram;
    for (const auto& k : set.generator_params.at("kinds")) {
      histogram[k.get<std::string>()]++;
    }
    REQUIRE(histogram.size() == 9);
    for (const auto& [name, count] : histogram) {
      CHECK(count >= 5);
      CHECK(count <= 6);
    }
  }
  SUBCASE("same seed same payload") {
    const SampleSet a = gen_ood_testset(grid, 20, 77);
    const SampleSet b = gen_ood_testset(grid, 20, 77);
    CHECK(sampleset_checksum(a) == sampleset_checksum(b));
  }
  CHECK_THROWS_AS(gen_ood_testset(grid, 0, 1), std::invalid_argument);
}

TEST_CASE("helmholtz boundary constant distribution") {
  const Grid grid(8);
  const MediumParams params;
  double sum = 0.0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const HelmholtzMedium medium = gen_helmholtz_medium(
        grid, MediumFamily::GaussianComponents, params, static_cast<std::uint64_t>(k));
    REQUIRE(medium.b >= 0.25);
    REQUIRE(medium.b <= 0.5);
    sum += medium.b;
  }
  CHECK(sum / draws == doctest::Approx(0.375).epsilon(0.027));  // 0.375 +- 0.01
}

TEST_CASE("zero waviness at orientation zero gives vertical stripes") {
  const Grid grid(16);
  const ScalarField2D a = wavy_stripe_field(grid, 0.0, 4, 0.0, 2, 0.3);
  for (int j = 0; j < grid.n; ++j) {
    const double column_value = a.at(0, j);
    for (int i = 1; i < grid.n; ++i) {
      CHECK(a.at(i, j) == doctest::Approx(column_value).epsilon(1e-14));
    }
  }
}

TEST_CASE("gaussian medium reuses the blob kernel") {
  const Grid grid(17);
  const ScalarField2D f = blob_field(grid, {{1.0, 0.5, 0.5, 0.2}});
  CHECK(f.at(8, 8) == 1.0);
}
