#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "pift/fem.hpp"
#include "pift/rng.hpp"
#include "pift/train.hpp"

using namespace pift;

namespace {

constexpr double kPi = 3.14159265358979323846;

ScalarField2D random_field(const Grid& grid, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ScalarField2D f(grid);
  for (double& v : f.values()) v = rng.uniform(lo, hi);
  return f;
}

SampleSet tiny_poisson_set(const Grid& grid, int count, std::uint64_t seed) {
  LabeledSetOptions options;
  return generate_labeled_set(PdeTask::poisson(), grid, count, seed, options);
}

}  // namespace

TEST_CASE("data_loss basics and oracle") {
  Rng rng(1);
  const Grid grid(8);
  std::vector<ScalarField2D> truths;
  std::vector<ScalarField2D> preds;
  for (int s = 0; s < 4; ++s) {
    truths.push_back(random_field(grid, rng, 0.5, 1.5));
    preds.push_back(truths.back());
  }
  CHECK(data_loss(preds, truths) == 0.0);

  ScalarField2D doubled = truths[0];
  for (double& v : doubled.values()) v *= 2.0;
  CHECK(data_loss({doubled}, {truths[0]}) == doctest::Approx(1.0).epsilon(1e-14));

  preds.clear();
  for (int s = 0; s < 4; ++s) preds.push_back(random_field(grid, rng));
  double oracle = 0.0;
  for (int s = 0; s < 4; ++s) oracle += relative_l1(preds[s], truths[s]);
  oracle /= 4.0;
  CHECK(data_loss(preds, truths) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("total_loss mode algebra") {
  Rng rng(3);
  const Grid grid(8);
  const PdeTask task = PdeTask::poisson();
  std::vector<LossBatchItem> batch;
  std::vector<ScalarField2D> truths;
  truths.reserve(3);
  for (int s = 0; s < 3; ++s) {
    truths.push_back(random_field(grid, rng, 0.5, 1.5));
  }
  for (int s = 0; s < 3; ++s) {
    LossBatchItem item;
    item.pred_raw = random_field(grid, rng);
    item.inputs = {random_field(grid, rng)};
    item.truth = &truths[s];
    batch.push_back(std::move(item));
  }

  const double data_only = total_loss(task, LossMode::Data, 1, 1, batch);
  const double physics_only = total_loss(task, LossMode::Physics, 1, 1, batch);
  CHECK(total_loss(task, LossMode::Hybrid, 1, 0, batch) ==
        doctest::Approx(data_only).epsilon(1e-14));
  CHECK(total_loss(task, LossMode::Hybrid, 0, 1, batch) ==
        doctest::Approx(physics_only).epsilon(1e-14));
  CHECK(total_loss(task, LossMode::Hybrid, 1, 1, batch) ==
        doctest::Approx(data_only + physics_only).epsilon(1e-12));
  for (int trial = 0; trial < 5; ++trial) {
    const double a = Rng(trial).uniform(0.1, 2.0);
    const double b = Rng(trial + 100).uniform(0.1, 2.0);
    CHECK(total_loss(task, LossMode::Hybrid, a, b, batch) ==
          doctest::Approx(a * data_only + b * physics_only).epsilon(1e-12));
  }

  batch[1].truth = nullptr;
  batch[1].physics_only = true;
  CHECK_NOTHROW(total_loss(task, LossMode::Physics, 1, 1, batch));

  std::vector<LossBatchItem> unlabeled;
  LossBatchItem item;
  item.pred_raw = random_field(grid, rng);
  item.inputs = {random_field(grid, rng)};
  unlabeled.push_back(std::move(item));
  CHECK_THROWS_AS(total_loss(task, LossMode::Data, 1, 1, unlabeled), TrainingError);
  CHECK_THROWS_AS(total_loss(task, LossMode::Hybrid, 1, 1, {}), std::invalid_argument);
}

TEST_CASE("adam one-parameter closed-form step") {
  // theta0 = 3, quadratic loss L = theta^2 / 2, g = 3.
  std::vector<double> values = {3.0};
  std::vector<double> grad = {3.0};
  AdamState adam = AdamState::zeros(1);
  TrainConfig config;
  config.lr_backbone = 0.1;
  const std::vector<ParamBlock> blocks = {{"theta", ParamSubset::Backbone, 0, 1}};

  adam_update(values, adam, grad, blocks, config);

  const double m = (1.0 - config.beta1) * 3.0;
  const double v = (1.0 - config.beta2) * 9.0;
  const double mhat = m / (1.0 - config.beta1);
  const double vhat = v / (1.0 - config.beta2);
  const double expected = 3.0 - config.lr_backbone * mhat / (std::sqrt(vhat) + config.epsilon);
  CHECK(values[0] == doctest::Approx(expected).epsilon(1e-16));
  CHECK(adam.t == 1);
}

TEST_CASE("zero gradient with fresh moments is an exact fixed point") {
  const OperatorConfig cfg{1, 3, 1, 3};
  ModelParams params{cfg, std::vector<double>(param_count(cfg), 0.0)};
  AdamState adam = AdamState::zeros(params.values.size());
  const Grid grid(8);

  // zero parameters and zero source: prediction and residual both vanish
  BatchSample sample;
  sample.inputs = {ScalarField2D(grid)};
  sample.physics_only = true;
  TrainConfig config;
  config.mode = LossMode::Physics;
  const std::vector<double> before = params.values;
  const TrainRecord record = train_step(params, adam, PdeTask::poisson(), {sample},
                                        config, 0);
  CHECK(record.total_loss == 0.0);
  CHECK(record.grad_norm == 0.0);
  CHECK(params.values == before);
}

TEST_CASE("per-subset learning rates freeze the untouched subset bitwise") {
  const Grid grid(16);
  const SampleSet labeled = tiny_poisson_set(grid, 4, 10);
  const OperatorConfig cfg{1, 4, 2, 4};

  for (const bool freeze_backbone : {true, false}) {
    ModelParams params = init_params(cfg, 77);
    const std::vector<double> before = params.values;
    AdamState adam = AdamState::zeros(params.values.size());
    TrainConfig config;
    config.mode = LossMode::Data;
    config.batch_size = 2;
    config.lr_backbone = freeze_backbone ? 0.0 : 1e-3;
    config.lr_embed = freeze_backbone ? 1e-3 : 0.0;
    Rng rng(5);
    for (int step = 0; step < 5; ++step) {
      std::vector<BatchSample> batch;
      for (int k = 0; k < 2; ++k) {
        const int idx = static_cast<int>(rng.uniform_int(0, labeled.count() - 1));
        BatchSample sample;
        sample.inputs = labeled.inputs[idx];
        sample.truth = &labeled.solutions[idx];
        batch.push_back(std::move(sample));
      }
      train_step(params, adam, PdeTask::poisson(), batch, config, step);
    }
    bool frozen_unchanged = true;
    bool active_changed = false;
    for (const auto& block : param_layout(cfg)) {
      const bool frozen = (block.subset == ParamSubset::Backbone) == freeze_backbone;
      for (std::size_t k = block.offset; k < block.offset + block.size; ++k) {
        if (frozen) {
          frozen_unchanged = frozen_unchanged && params.values[k] == before[k];
        } else if (params.values[k] != before[k]) {
          active_changed = true;
        }
      }
    }
    CHECK(frozen_unchanged);
    CHECK(active_changed);
  }
}

TEST_CASE("train_step loss agrees with the total_loss operation") {
  const Grid grid(16);
  const SampleSet labeled = tiny_poisson_set(grid, 3, 20);
  const OperatorConfig cfg{1, 4, 2, 4};
  ModelParams params = init_params(cfg, 31);
  const ModelParams frozen = params;

  std::vector<BatchSample> batch;
  std::vector<LossBatchItem> items;
  for (int s = 0; s < 3; ++s) {
    BatchSample sample;
    sample.inputs = labeled.inputs[s];
    sample.truth = &labeled.solutions[s];
    batch.push_back(sample);
    LossBatchItem item;
    item.pred_raw = forward(frozen, labeled.inputs[s]);
    item.inputs = labeled.inputs[s];
    item.truth = &labeled.solutions[s];
    items.push_back(std::move(item));
  }

  AdamState adam = AdamState::zeros(params.values.size());
  TrainConfig config;
  config.mode = LossMode::Hybrid;
  const TrainRecord record =
      train_step(params, adam, PdeTask::poisson(), batch, config, 0);
  const double expected =
      total_loss(PdeTask::poisson(), LossMode::Hybrid, 1, 1, items);
  CHECK(record.total_loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("train_step is independent of the thread count") {
  const Grid grid(16);
  const SampleSet labeled = tiny_poisson_set(grid, 6, 30);
  const OperatorConfig cfg{1, 4, 2, 4};

  std::vector<std::vector<double>> results;
  for (int threads : {1, 3}) {
    ModelParams params = init_params(cfg, 41);
    AdamState adam = AdamState::zeros(params.values.size());
    TrainConfig config;
    config.mode = LossMode::Hybrid;
    config.threads = threads;
    std::vector<BatchSample> batch;
    for (int s = 0; s < 6; ++s) {
      BatchSample sample;
      sample.inputs = labeled.inputs[s];
      sample.truth = &labeled.solutions[s];
      batch.push_back(sample);
    }
    train_step(params, adam, PdeTask::poisson(), batch, config, 0);
    results.push_back(params.values);
  }
  CHECK(results[0] == results[1]);
}

TEST_CASE("gaussian smoothing is exact on fourier modes") {
  const Grid grid(32);
  const double sigma = 0.05;

  ScalarField2D constant(grid);
  for (double& v : constant.values()) v = 0.7;
  const ScalarField2D smooth_const = gaussian_smooth(constant, sigma);
  for (double v : smooth_const.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));

  // single periodic mode decays by exp(-2 pi^2 sigma^2 |k|^2)
  const int kx = 3;
  ScalarField2D mode(grid);
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      mode.at(i, j) = std::sin(2.0 * kPi * kx * j / grid.n);
    }
  }
  const double factor = std::exp(-2.0 * kPi * kPi * sigma * sigma * kx * kx);
  const ScalarField2D smoothed = gaussian_smooth(mode, sigma);
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      CHECK(smoothed.at(i, j) == doctest::Approx(factor * mode.at(i, j)).epsilon(1e-10));
    }
  }
}

TEST_CASE("pretrain determinism and zero-step identity") {
  PretrainConfig config;
  config.model = {1, 3, 1, 3};
  config.grid_n = 16;
  config.steps = 0;
  config.batch_size = 2;
  config.seed = 91;

  const PretrainResult zero_steps = pretrain(config);
  const ModelParams init = init_params(config.model, config.seed);
  CHECK(zero_steps.checkpoint.values == init.values);
  CHECK(zero_steps.checkpoint.metadata.at("tag") == "pretrained");

  config.steps = 3;
  const PretrainResult a = pretrain(config);
  const PretrainResult b = pretrain(config);
  CHECK(a.checkpoint.values == b.checkpoint.values);
  CHECK(a.checkpoint.values != init.values);
}

TEST_CASE("pretrained smoothing surrogate reaches low held-out error") {
  PretrainConfig config;
  config.model = {1, 12, 3, 8};
  config.grid_n = 32;
  config.steps = 250;
  config.batch_size = 8;
  config.lr = 2e-3;
  config.seed = 7;
  config.threads = 4;
  const PretrainResult result = pretrain(config);

  const Grid grid(config.grid_n);
  const ModelParams params{config.model, result.checkpoint.values};
  std::vector<double> errors;
  for (int s = 0; s < 32; ++s) {
    const ScalarField2D f =
        gen_gaussian_blobs(grid, config.blobs, derive_seed(123456, s));
    const ScalarField2D target = gaussian_smooth(f, config.smooth_sigma);
    const ScalarField2D pred = forward(params, {f});
    errors.push_back(relative_l1(pred, target));
  }
  CHECK(median_over_samples(errors) < 0.1);
}

TEST_CASE("finetune reproducibility and metadata") {
  const Grid grid(16);
  const SampleSet labeled = tiny_poisson_set(grid, 4, 50);
  const OperatorConfig cfg{1, 4, 2, 4};
  TrainConfig config;
  config.mode = LossMode::Data;
  config.steps = 4;
  config.batch_size = 2;
  config.seed = 17;

  const FinetuneResult a = finetune(nullptr, PdeTask::poisson(), labeled, cfg, config);
  const FinetuneResult b = finetune(nullptr, PdeTask::poisson(), labeled, cfg, config);
  CHECK(a.checkpoint.values == b.checkpoint.values);
  REQUIRE(a.log.records.size() == 4);
  for (std::size_t k = 0; k < a.log.records.size(); ++k) {
    CHECK(a.log.records[k].total_loss == b.log.records[k].total_loss);
    CHECK(a.log.records[k].grad_norm == b.log.records[k].grad_norm);
  }
  CHECK(a.checkpoint.metadata.at("tag") == "scratch");
  CHECK(a.checkpoint.metadata.at("loss_mode") == "data");
  CHECK(a.checkpoint.metadata.at("labeled_samples") == 4);
}

TEST_CASE("physics mode admits unlabeled and empty sample sets") {
  const OperatorConfig cfg{1, 3, 1, 3};
  TrainConfig config;
  config.mode = LossMode::Physics;
  config.steps = 2;
  config.batch_size = 2;
  config.seed = 3;

  SUBCASE("unlabeled inputs only") {
    const Grid grid(16);
    SampleSet inputs_only;
    inputs_only.grid = grid;
    inputs_only.channels = 1;
    Rng rng(5);
    for (int s = 0; s < 3; ++s) {
      inputs_only.inputs.push_back({random_field(grid, rng)});
    }
    const FinetuneResult result =
        finetune(nullptr, PdeTask::poisson(), inputs_only, cfg, config);
    CHECK(result.log.records.size() == 2);
    for (const auto& r : result.log.records) {
      CHECK(std::isfinite(r.total_loss));
      CHECK(r.data_loss == 0.0);
    }
    CHECK(result.checkpoint.metadata.at("labeled_solutions") == 0);
  }

  SUBCASE("empty set with augmentation disabled runs as a no-op") {
    SampleSet empty;
    empty.grid = Grid(16);
    const ModelParams init = init_params(cfg, derive_seed(config.seed, 0x57A7));
    const FinetuneResult result =
        finetune(nullptr, PdeTask::poisson(), empty, cfg, config);
    CHECK(result.log.records.size() == 2);
    CHECK(result.checkpoint.values == init.values);
  }

  SUBCASE("empty set with augmentation needs a grid") {
    SampleSet empty;
    empty.grid = Grid(16);
    TrainConfig aug_config = config;
    aug_config.augmentation.enabled = true;
    CHECK_THROWS_AS(finetune(nullptr, PdeTask::poisson(), empty, cfg, aug_config),
                    TrainingError);
    aug_config.grid_n = 16;
    const FinetuneResult result =
        finetune(nullptr, PdeTask::poisson(), empty, cfg, aug_config);
    CHECK(result.log.records.size() == 2);
    for (const auto& r : result.log.records) CHECK(std::isfinite(r.physics_loss));
  }
}

TEST_CASE("data mode rejects unlabeled sets") {
  const OperatorConfig cfg{1, 3, 1, 3};
  const Grid grid(16);
  SampleSet inputs_only;
  inputs_only.grid = grid;
  inputs_only.channels = 1;
  Rng rng(5);
  inputs_only.inputs.push_back({random_field(grid, rng)});
  TrainConfig config;
  config.mode = LossMode::Data;
  CHECK_THROWS_AS(finetune(nullptr, PdeTask::poisson(), inputs_only, cfg, config),
                  TrainingError);
}

TEST_CASE("hybrid augmentation extends batches with physics-only samples") {
  const Grid grid(16);
  const SampleSet labeled = tiny_poisson_set(grid, 1, 60);
  const OperatorConfig cfg{1, 4, 2, 4};
  TrainConfig config;
  config.mode = LossMode::Hybrid;
  config.steps = 3;
  config.batch_size = 1;
  config.seed = 23;
  config.augmentation.enabled = true;
  config.augmentation.per_family = 1;

  const FinetuneResult result =
      finetune(nullptr, PdeTask::poisson(), labeled, cfg, config);
  CHECK(result.log.records.size() == 3);
  for (const auto& r : result.log.records) {
    CHECK(std::isfinite(r.data_loss));
    CHECK(std::isfinite(r.physics_loss));
    CHECK(r.physics_loss > 0.0);
  }
  CHECK(result.checkpoint.metadata.at("augmentation") == true);
}

TEST_CASE("training sanity: data mode fits a small task") {
  const Grid grid(32);
  const SampleSet labeled = tiny_poisson_set(grid, 64, 70);
  const OperatorConfig cfg{1, 12, 3, 8};
  TrainConfig config;
  config.mode = LossMode::Data;
  config.steps = 500;
  config.batch_size = 8;
  config.lr_backbone = 2e-3;
  config.lr_embed = 2e-3;
  config.seed = 29;
  config.threads = 4;

  const FinetuneResult result =
      finetune(nullptr, PdeTask::poisson(), labeled, cfg, config);
  const double initial = result.log.records.front().data_loss;
  const double final_loss = result.log.records.back().data_loss;
  INFO("initial " << initial << " final " << final_loss);
  CHECK(final_loss < 0.3 * initial);
}

TEST_CASE("train log csv is written with the documented header") {
  TrainLog log;
  log.records.push_back({0, 0.5, 0.25, 0.75, 1.5});
  const auto path = std::filesystem::temp_directory_path() / "pift_train_log.csv";
  log.write_csv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,data_loss,physics_loss,total_loss,grad_norm");
  std::filesystem::remove(path);
}
