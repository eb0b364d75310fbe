#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "pift/dataset.hpp"
#include "pift/field.hpp"
#include "pift/generators.hpp"
#include "pift/operator.hpp"
#include "pift/residual.hpp"

namespace pift {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LossMode { Data, Physics, Hybrid };

std::string loss_mode_name(LossMode mode);
LossMode loss_mode_from_name(const std::string& name);

/// On-the-fly unlabeled augmentation: each batch is extended with freshly
/// generated inputs evaluated under the physics loss only. For Poisson the
/// extras cycle the configured extreme families; for Helmholtz the same
/// number of wavy-stripe media is drawn.
struct Augmentation {
  bool enabled = false;
  std::vector<ExtremeKind> families{kAllExtremeKinds.begin(), kAllExtremeKinds.end()};
  int per_family = 1;

  int per_batch() const {
    return enabled ? static_cast<int>(families.size()) * per_family : 0;
  }
};

struct TrainConfig {
  LossMode mode = LossMode::Data;
  double weight_data = 1.0;
  double weight_physics = 1.0;
  int batch_size = 8;
  int steps = 500;
  double lr_backbone = 1e-4;  // conservative updates for the transferred core
  double lr_embed = 1e-3;     // aggressive updates for embedding/recovery
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Augmentation augmentation;
  std::uint64_t seed = 0;
  int threads = 1;
  int grid_n = 0;  // augmentation grid when the sample set is empty
};

struct TrainRecord {
  int step = 0;
  double data_loss = 0.0;
  double physics_loss = 0.0;
  double total_loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  nlohmann::json metadata = nlohmann::json::object();

  void write_csv(const std::filesystem::path& path) const;
};

/// Mean over the batch of relative_l1(pred, truth).
double data_loss(const std::vector<ScalarField2D>& preds,
                 const std::vector<ScalarField2D>& truths);

/// One batch element as seen by the task loss: a raw model output, the
/// sample's input channels, and (when labeled) its reference solution.
struct LossBatchItem {
  ScalarField2D pred_raw;
  std::vector<ScalarField2D> inputs;
  const ScalarField2D* truth = nullptr;
  bool physics_only = false;
};

/// Task loss of a batch of raw predictions. Data terms compare the
/// boundary-enforced prediction against the truth; physics terms are the
/// interior residual MSE. Hybrid combines both with the given weights.
double total_loss(const PdeTask& task, LossMode mode, double weight_data,
                  double weight_physics, const std::vector<LossBatchItem>& batch);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  static AdamState zeros(std::size_t size) { return {std::vector<double>(size, 0.0),
                                                     std::vector<double>(size, 0.0), 0}; }
};

/// One training sample for a step: owned input channels plus an optional
/// borrowed truth. Augmented samples carry physics_only = true.
struct BatchSample {
  std::vector<ScalarField2D> inputs;
  const ScalarField2D* truth = nullptr;
  bool physics_only = false;
};

/// One bias-corrected adaptive-moment update over a flat value vector, with
/// the learning rate chosen per block by subset tag (lr_backbone for the
/// core, lr_embed for embedding/recovery).
void adam_update(std::vector<double>& values, AdamState& adam,
                 const std::vector<double>& grad, const std::vector<ParamBlock>& blocks,
                 const TrainConfig& config);

/// One adaptive-moment update. Backbone coordinates use lr_backbone,
/// embedding/recovery coordinates lr_embed. Throws on non-finite loss or
/// gradient. Returns the step's loss decomposition and gradient norm.
TrainRecord train_step(ModelParams& params, AdamState& adam, const PdeTask& task,
                       const std::vector<BatchSample>& batch, const TrainConfig& config,
                       int step_index);

struct PretrainConfig {
  OperatorConfig model{1, 32, 4, 12};
  int grid_n = 64;
  int steps = 800;
  int batch_size = 8;
  double smooth_sigma = 0.05;
  BlobParams blobs;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Periodic Gaussian filter computed spectrally: multiplier
/// exp(-2 pi^2 sigma^2 |k|^2) on integer frequencies.
ScalarField2D gaussian_smooth(const ScalarField2D& field, double sigma);

struct PretrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

/// Surrogate pre-training: data-driven regression of blob fields onto their
/// Gaussian-smoothed counterparts, batches sampled on the fly. Emits a
/// checkpoint tagged "pretrained".
PretrainResult pretrain(const PretrainConfig& config);

struct FinetuneResult {
  Checkpoint checkpoint;
  TrainLog log;
};

/// The five-configuration entry point: fine-tunes from a pretrained
/// checkpoint (weight transfer, embedding/recovery re-drawn) or trains from
/// scratch when `pretrained` is null. Physics mode ignores solutions and
/// admits an unlabeled (or empty) sample set; Data/Hybrid require labels.
/// Batches draw from the labeled set without replacement when it is large
/// enough, with replacement otherwise; augmentation extras are appended
/// under physics-only supervision. Nothing is frozen.
FinetuneResult finetune(const Checkpoint* pretrained, const PdeTask& task,
                        const SampleSet& labeled, const OperatorConfig& config,
                        const TrainConfig& train_config);

}  // namespace pift
