#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pift/field.hpp"

namespace pift {

/// Compact Fourier-spectral operator: per-node lifting (the input channels
/// plus fixed x/y coordinate channels, which break translation equivariance
/// so Dirichlet-type operators are representable), L spectral layers
/// (mode-truncated Fourier mixing plus a pointwise affine bypass, SiLU
/// activation), per-node projection back to one channel.
struct OperatorConfig {
  int in_channels = 1;
  int width = 32;
  int layers = 4;
  // Retained low modes per dimension: row frequencies in [0,m) and [-m,0)
  // (the two corner blocks of the spectrum), column frequencies in [0,m);
  // the conjugate half-plane is covered by the real-part extraction.
  int modes = 12;

  void validate() const {
    if (in_channels < 1 || width < 1 || layers < 1 || modes < 1) {
      throw std::invalid_argument("OperatorConfig: all dimensions must be >= 1");
    }
  }

  bool operator==(const OperatorConfig&) const = default;
};

/// Fine-tuning subset a parameter block belongs to: the spectral and bypass
/// weights form the core backbone; lifting and projection are the embedding
/// and recovery parameters, re-drawn on transfer.
enum class ParamSubset { Backbone, EmbedRecovery };

struct ParamBlock {
  std::string name;
  ParamSubset subset;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Deterministic flat layout: lifting, then per layer (spectral complex
/// weights as interleaved re/im, bypass weight, bypass bias), projection.
std::vector<ParamBlock> param_layout(const OperatorConfig& config);
std::size_t param_count(const OperatorConfig& config);

struct ModelParams {
  OperatorConfig config;
  std::vector<double> values;
};

/// Seeded initialization: lifting/projection uniform in +-1/sqrt(fan_in),
/// biases zero, spectral re/im uniform with magnitude scale 1/(width*modes),
/// bypass uniform in +-1/sqrt(width).
ModelParams init_params(const OperatorConfig& config, std::uint64_t seed);

/// Per-sample forward/backward scratch. Reused across calls; one instance
/// per thread.
struct Workspace {
  int n = 0;
  std::vector<double> input;                         // Cin * n^2
  std::vector<std::vector<double>> layer_in;         // per layer: w * n^2
  std::vector<std::vector<std::complex<double>>> layer_vhat;  // per layer: w * m^2
  std::vector<std::vector<double>> layer_z;          // per layer: w * n^2
  std::vector<double> final_act;                     // w * n^2
  std::vector<std::complex<double>> scratch;         // n^2
};

/// Forward pass on an n x n multi-channel input (channel count must match
/// the config; modes must satisfy m <= n/2). Returns the raw n x n output.
/// When `ws` is given, intermediate activations are cached for backward().
ScalarField2D forward(const ModelParams& params,
                      const std::vector<ScalarField2D>& input, Workspace* ws = nullptr);

/// Reverse-mode gradient of a scalar loss given d(loss)/d(output), using the
/// caches produced by the matching forward call. Returns the gradient over
/// the flat parameter vector.
std::vector<double> backward(const ModelParams& params, const Workspace& ws,
                             const ScalarField2D& dout);

struct LossGrad {
  double value = 0.0;
  ScalarField2D dpred;
};

struct BatchGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Gradient of a composed loss over a batch: forward each sample, evaluate
/// the per-sample loss closure (which returns its value and its analytic
/// derivative with respect to the prediction), and backpropagate. Loss
/// values and closure contributions are accumulated in sample order.
/// Throws on a non-finite loss.
BatchGradient gradient(const ModelParams& params,
                       const std::vector<std::vector<ScalarField2D>>& batch,
                       const std::function<LossGrad(int, const ScalarField2D&)>& loss);

struct Checkpoint {
  OperatorConfig config;
  std::vector<double> values;
  nlohmann::json metadata = nlohmann::json::object();
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Text JSON header line + little-endian float64 blob; round trips bit-exact.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Weight transfer: backbone blocks copied bitwise from the checkpoint
/// (width/layers/modes must match), embedding/recovery re-drawn from the
/// seeded initialization. The input channel count may differ.
ModelParams transfer_init(const Checkpoint& pretrained, const OperatorConfig& new_config,
                          std::uint64_t seed);

}  // namespace pift
