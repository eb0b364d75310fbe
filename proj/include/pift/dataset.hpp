#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pift/field.hpp"

namespace pift {

/// Failure taxonomy for dataset persistence.
struct DatasetError : std::runtime_error {
  enum class Kind { Io, BadManifest, SizeMismatch, ChecksumMismatch };

  DatasetError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}

  Kind kind;
};

/// 64-bit FNV-1a; the dataset checksum is this hash over inputs.bin bytes
/// followed by solutions.bin bytes (when present), rendered as 16 hex digits.
class Fnv1a64 {
 public:
  void update(const void* data, std::size_t size);
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// A seeded, manifest-described collection of input fields with optional
/// paired ground-truth solutions. Inputs carry 1 or 2 channels per sample
/// (Poisson: f; Helmholtz: a plus the broadcast boundary constant b).
struct SampleSet {
  Grid grid;
  int channels = 1;
  std::vector<std::vector<ScalarField2D>> inputs;   // [sample][channel]
  std::vector<ScalarField2D> solutions;             // empty or one per sample
  std::string generator;
  nlohmann::json generator_params = nlohmann::json::object();
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(inputs.size()); }
  bool labeled() const { return !solutions.empty(); }

  const ScalarField2D& input(int sample, int channel = 0) const {
    return inputs.at(sample).at(channel);
  }
  const ScalarField2D& solution(int sample) const { return solutions.at(sample); }

  /// Boundary constant for a Helmholtz sample, read off the broadcast channel.
  double boundary_value(int sample) const {
    return channels >= 2 ? inputs.at(sample).at(1).at(0, 0) : 0.0;
  }

  void validate() const;
};

/// Writes manifest.json + inputs.bin (+ solutions.bin) into a directory.
/// Payloads are little-endian IEEE-754 float64, sample-major then
/// channel-major then row-major, no header.
void save_sampleset(const SampleSet& set, const std::filesystem::path& dir);

/// Loads a directory written by save_sampleset; verifies payload sizes
/// against the manifest and the checksum against the payload bytes.
SampleSet load_sampleset(const std::filesystem::path& dir);

/// First `count` samples starting at `offset`, with the slice recorded in
/// generator_params ("source_offset", "source_count") so downstream logs can
/// prove test-set isolation.
SampleSet slice_sampleset(const SampleSet& set, int offset, int count);

/// Checksum of the set's payload bytes as stored on disk.
std::string sampleset_checksum(const SampleSet& set);

}  // namespace pift
