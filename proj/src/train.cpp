#include "pift/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <thread>

#include "pift/fft.hpp"
#include "pift/rng.hpp"

namespace pift {

std::string loss_mode_name(LossMode mode) {
  switch (mode) {
    case LossMode::Data: return "data";
    case LossMode::Physics: return "physics";
    case LossMode::Hybrid: return "hybrid";
  }
  return "unknown";
}

LossMode loss_mode_from_name(const std::string& name) {
  if (name == "data") return LossMode::Data;
  if (name == "physics") return LossMode::Physics;
  if (name == "hybrid") return LossMode::Hybrid;
  throw std::invalid_argument("unknown loss mode: " + name);
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw TrainingError("TrainLog: cannot write " + path.string());
  }
  out.precision(17);
  out << "step,data_loss,physics_loss,total_loss,grad_norm\n";
  for (const auto& r : records) {
    out << r.step << "," << r.data_loss << "," << r.physics_loss << ","
        << r.total_loss << "," << r.grad_norm << "\n";
  }
}

double data_loss(const std::vector<ScalarField2D>& preds,
                 const std::vector<ScalarField2D>& truths) {
  if (preds.empty() || preds.size() != truths.size()) {
    throw std::invalid_argument("data_loss: empty or mismatched batch");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    total += relative_l1(preds[s], truths[s]);
  }
  return total / static_cast<double>(preds.size());
}

namespace {

struct ModeWeights {
  double data = 0.0;
  double physics = 0.0;
};

ModeWeights mode_weights(LossMode mode, double weight_data, double weight_physics) {
  switch (mode) {
    case LossMode::Data: return {1.0, 0.0};
    case LossMode::Physics: return {0.0, 1.0};
    case LossMode::Hybrid:
      if (weight_data < 0.0 || weight_physics < 0.0 ||
          (weight_data == 0.0 && weight_physics == 0.0)) {
        throw std::invalid_argument("hybrid weights must be >= 0 and not both zero");
      }
      return {weight_data, weight_physics};
  }
  return {1.0, 0.0};
}

}  // namespace

double total_loss(const PdeTask& task, LossMode mode, double weight_data,
                  double weight_physics, const std::vector<LossBatchItem>& batch) {
  if (batch.empty()) {
    throw std::invalid_argument("total_loss: empty batch");
  }
  const ModeWeights w = mode_weights(mode, weight_data, weight_physics);

  double data_sum = 0.0;
  int data_count = 0;
  double physics_sum = 0.0;
  int physics_count = 0;
  for (const auto& item : batch) {
    const bool wants_data = w.data > 0.0 && !item.physics_only;
    if (wants_data) {
      if (!item.truth) {
        throw TrainingError("total_loss: missing solution under data/hybrid mode");
      }
      const ScalarField2D eff = enforce_boundary(task, item.pred_raw, item.inputs);
      data_sum += relative_l1(eff, *item.truth);
      ++data_count;
    }
    if (w.physics > 0.0) {
      physics_sum += physics_mse(task, item.pred_raw, item.inputs);
      ++physics_count;
    }
  }
  double total = 0.0;
  if (w.data > 0.0) {
    if (data_count == 0) {
      throw TrainingError("total_loss: no labeled samples under data/hybrid mode");
    }
    total += w.data * data_sum / data_count;
  }
  if (w.physics > 0.0 && physics_count > 0) {
    total += w.physics * physics_sum / physics_count;
  }
  return total;
}

namespace {

struct SampleResult {
  double data = 0.0;
  double physics = 0.0;
  std::vector<double> grad;
};

/// Loss and parameter gradient for one batch sample. Data terms compare the
/// boundary-enforced prediction against the truth (ring gradients vanish);
/// physics terms backpropagate through the residual stencil.
SampleResult sample_loss_grad(const ModelParams& params, const PdeTask& task,
                              const BatchSample& sample, const ModeWeights& w,
                              int data_count, int physics_count, Workspace& ws) {
  SampleResult out;
  const ScalarField2D pred = forward(params, sample.inputs, &ws);
  ScalarField2D dpred(pred.grid());
  const int n = pred.n();

  const bool wants_data = w.data > 0.0 && !sample.physics_only;
  if (wants_data) {
    if (!sample.truth) {
      throw TrainingError("train_step: missing solution under data/hybrid mode");
    }
    const ScalarField2D eff = enforce_boundary(task, pred, sample.inputs);
    double num = 0.0;
    double den = 0.0;
    const auto& e = eff.values();
    const auto& t = sample.truth->values();
    for (std::size_t k = 0; k < e.size(); ++k) {
      num += std::abs(e[k] - t[k]);
      den += std::abs(t[k]);
    }
    if (den == 0.0) {
      throw TrainingError("train_step: degenerate truth with zero L1 norm");
    }
    out.data = num / den;
    const double scale = w.data / (den * data_count);
    for (int i = 1; i < n - 1; ++i) {
      for (int j = 1; j < n - 1; ++j) {
        const double d = eff.at(i, j) - sample.truth->at(i, j);
        if (d > 0.0) {
          dpred.at(i, j) += scale;
        } else if (d < 0.0) {
          dpred.at(i, j) -= scale;
        }
      }
    }
  }

  if (w.physics > 0.0 && physics_count > 0) {
    PhysicsGrad pg = physics_mse_grad(task, pred, sample.inputs);
    out.physics = pg.value;
    const double scale = w.physics / physics_count;
    for (std::size_t k = 0; k < dpred.values().size(); ++k) {
      dpred.values()[k] += scale * pg.du_raw.values()[k];
    }
  }

  out.grad = backward(params, ws, dpred);
  return out;
}

}  // namespace

TrainRecord train_step(ModelParams& params, AdamState& adam, const PdeTask& task,
                       const std::vector<BatchSample>& batch, const TrainConfig& config,
                       int step_index) {
  TrainRecord record;
  record.step = step_index;
  if (batch.empty()) {
    return record;  // nothing to learn from; parameters untouched
  }
  const ModeWeights w = mode_weights(config.mode, config.weight_data,
                                     config.weight_physics);
  int data_count = 0;
  int physics_count = 0;
  for (const auto& sample : batch) {
    if (w.data > 0.0 && !sample.physics_only) ++data_count;
    if (w.physics > 0.0) ++physics_count;
  }
  if (w.data > 0.0 && data_count == 0) {
    throw TrainingError("train_step: no labeled samples under data/hybrid mode");
  }

  // Per-sample gradients (parallelizable) summed in sample order, so the
  // result is independent of the thread count.
  const int count = static_cast<int>(batch.size());
  std::vector<SampleResult> results(count);
  const int threads = std::max(1, std::min(config.threads, count));
  if (threads == 1) {
    Workspace ws;
    for (int s = 0; s < count; ++s) {
      results[s] = sample_loss_grad(params, task, batch[s], w, data_count,
                                    physics_count, ws);
    }
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::vector<std::string> errors(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        Workspace ws;
        try {
          for (int s = next.fetch_add(1); s < count; s = next.fetch_add(1)) {
            results[s] = sample_loss_grad(params, task, batch[s], w, data_count,
                                          physics_count, ws);
          }
        } catch (const std::exception& exc) {
          errors[t] = exc.what();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (!e.empty()) throw TrainingError(e);
    }
  }

  std::vector<double> grad(params.values.size(), 0.0);
  double data_sum = 0.0;
  double physics_sum = 0.0;
  for (int s = 0; s < count; ++s) {
    data_sum += results[s].data;
    physics_sum += results[s].physics;
    const auto& g = results[s].grad;
    for (std::size_t k = 0; k < g.size(); ++k) grad[k] += g[k];
  }

  record.data_loss = data_count > 0 ? data_sum / data_count : 0.0;
  record.physics_loss = physics_count > 0 ? physics_sum / physics_count : 0.0;
  record.total_loss = w.data * record.data_loss + w.physics * record.physics_loss;

  double norm2 = 0.0;
  for (double g : grad) norm2 += g * g;
  record.grad_norm = std::sqrt(norm2);
  if (!std::isfinite(record.total_loss) || !std::isfinite(record.grad_norm)) {
    throw TrainingError("train_step: non-finite loss or gradient at step " +
                        std::to_string(step_index));
  }

  if (adam.m.empty()) {
    adam = AdamState::zeros(params.values.size());
  }
  adam_update(params.values, adam, grad, param_layout(params.config), config);
  return record;
}

void adam_update(std::vector<double>& values, AdamState& adam,
                 const std::vector<double>& grad, const std::vector<ParamBlock>& blocks,
                 const TrainConfig& config) {
  if (adam.m.size() != values.size() || grad.size() != values.size()) {
    throw TrainingError("adam_update: state/gradient size mismatch");
  }
  adam.t += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.t));
  for (const auto& block : blocks) {
    const double lr =
        block.subset == ParamSubset::Backbone ? config.lr_backbone : config.lr_embed;
    for (std::size_t k = block.offset; k < block.offset + block.size; ++k) {
      const double g = grad[k];
      adam.m[k] = config.beta1 * adam.m[k] + (1.0 - config.beta1) * g;
      adam.v[k] = config.beta2 * adam.v[k] + (1.0 - config.beta2) * g * g;
      const double mhat = adam.m[k] / bc1;
      const double vhat = adam.v[k] / bc2;
      values[k] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
}

ScalarField2D gaussian_smooth(const ScalarField2D& field, double sigma) {
  const int n = field.n();
  const std::size_t n2 = static_cast<std::size_t>(n) * n;
  std::vector<std::complex<double>> buf(n2);
  for (std::size_t k = 0; k < n2; ++k) buf[k] = {field.values()[k], 0.0};
  fft2_forward(buf.data(), n);
  constexpr double kTwoPiSq = 2.0 * 9.86960440108935861883;  // 2 pi^2
  for (int p = 0; p < n; ++p) {
    const int kp = p <= n / 2 ? p : p - n;
    for (int q = 0; q < n; ++q) {
      const int kq = q <= n / 2 ? q : q - n;
      const double mult =
          std::exp(-kTwoPiSq * sigma * sigma * (double(kp) * kp + double(kq) * kq));
      buf[static_cast<std::size_t>(p) * n + q] *= mult;
    }
  }
  fft2_inverse_unnorm(buf.data(), n);
  ScalarField2D out(field.grid());
  const double inv_n2 = 1.0 / static_cast<double>(n2);
  for (std::size_t k = 0; k < n2; ++k) out.values()[k] = buf[k].real() * inv_n2;
  return out;
}

PretrainResult pretrain(const PretrainConfig& config) {
  config.model.validate();
  if (config.model.in_channels != 1) {
    throw TrainingError("pretrain: surrogate task is single-channel");
  }
  const Grid grid(config.grid_n);

  // Zero steps leaves the checkpoint at exactly init_params(model, seed).
  ModelParams params = init_params(config.model, config.seed);
  AdamState adam = AdamState::zeros(params.values.size());
  TrainConfig tc;
  tc.mode = LossMode::Data;
  tc.batch_size = config.batch_size;
  tc.steps = config.steps;
  tc.lr_backbone = config.lr;
  tc.lr_embed = config.lr;
  tc.seed = config.seed;
  tc.threads = config.threads;

  TrainLog log;
  const std::uint64_t batch_seed = derive_seed(config.seed, 0xBA7C);

  // The surrogate targets do not vanish on the boundary, so the raw output
  // is compared directly; boundary enforcement belongs to the PDE tasks.
  std::vector<ScalarField2D> targets;
  for (int step = 0; step < config.steps; ++step) {
    std::vector<BatchSample> batch(config.batch_size);
    targets.assign(config.batch_size, ScalarField2D(grid));
    for (int s = 0; s < config.batch_size; ++s) {
      ScalarField2D f =
          gen_gaussian_blobs(grid, config.blobs, derive_seed(batch_seed, {(std::uint64_t)step, (std::uint64_t)s}));
      targets[s] = gaussian_smooth(f, config.smooth_sigma);
      batch[s].inputs = {std::move(f)};
      batch[s].truth = &targets[s];
    }
    // Pretraining is a plain data-driven task: reuse the stepper with a
    // boundary-free pseudo task by comparing raw predictions; the Poisson
    // clamp would zero the ring of the target space. Implemented inline.
    const int count = config.batch_size;
    std::vector<SampleResult> results(count);
    const int threads = std::max(1, std::min(config.threads, count));
    auto run_sample = [&](int s, Workspace& ws) {
      SampleResult r;
      const ScalarField2D pred = forward(params, batch[s].inputs, &ws);
      double num = 0.0;
      double den = 0.0;
      const auto& p = pred.values();
      const auto& t = batch[s].truth->values();
      for (std::size_t k = 0; k < p.size(); ++k) {
        num += std::abs(p[k] - t[k]);
        den += std::abs(t[k]);
      }
      if (den == 0.0) throw TrainingError("pretrain: degenerate target");
      r.data = num / den;
      ScalarField2D dpred(pred.grid());
      const double scale = 1.0 / (den * count);
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double d = p[k] - t[k];
        dpred.values()[k] = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
      }
      r.grad = backward(params, ws, dpred);
      return r;
    };
    if (threads == 1) {
      Workspace ws;
      for (int s = 0; s < count; ++s) results[s] = run_sample(s, ws);
    } else {
      std::vector<std::thread> pool;
      std::atomic<int> next{0};
      std::vector<std::string> errors(threads);
      for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
          Workspace ws;
          try {
            for (int s = next.fetch_add(1); s < count; s = next.fetch_add(1)) {
              results[s] = run_sample(s, ws);
            }
          } catch (const std::exception& exc) {
            errors[t] = exc.what();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (const auto& e : errors) {
        if (!e.empty()) throw TrainingError(e);
      }
    }

    std::vector<double> grad(params.values.size(), 0.0);
    double loss = 0.0;
    for (int s = 0; s < count; ++s) {
      loss += results[s].data;
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += results[s].grad[k];
    }
    loss /= count;

    TrainRecord record;
    record.step = step;
    record.data_loss = loss;
    record.total_loss = loss;
    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    record.grad_norm = std::sqrt(norm2);
    if (!std::isfinite(loss)) {
      throw TrainingError("pretrain: diverged at step " + std::to_string(step));
    }

    adam_update(params.values, adam, grad, param_layout(config.model), tc);
    log.records.push_back(record);
  }

  PretrainResult result;
  result.checkpoint.config = config.model;
  result.checkpoint.values = params.values;
  result.checkpoint.metadata = {
      {"tag", "pretrained"},
      {"seed", config.seed},
      {"steps", config.steps},
      {"loss_mode", "data"},
      {"surrogate", {{"family", "gaussian_smoothing"},
                     {"sigma", config.smooth_sigma},
                     {"grid_n", config.grid_n}}},
      {"optimizer", {{"kind", "adam"}, {"lr", config.lr},
                     {"beta1", tc.beta1}, {"beta2", tc.beta2}, {"epsilon", tc.epsilon}}},
  };
  log.metadata = result.checkpoint.metadata;
  result.log = std::move(log);
  return result;
}

FinetuneResult finetune(const Checkpoint* pretrained, const PdeTask& task,
                        const SampleSet& labeled, const OperatorConfig& config,
                        const TrainConfig& train_config) {
  if (config.in_channels != task.input_channels()) {
    throw TrainingError("finetune: model channel count does not match task");
  }
  const int M = labeled.count();
  const bool needs_labels = train_config.mode != LossMode::Physics;
  if (needs_labels && (M == 0 || !labeled.labeled())) {
    throw TrainingError("finetune: data/hybrid mode requires a labeled sample set");
  }
  if (M > 0 && labeled.channels != task.input_channels()) {
    throw TrainingError("finetune: sample set channel count does not match task");
  }

  Grid grid;
  if (M > 0) {
    grid = labeled.grid;
  } else if (train_config.augmentation.enabled) {
    if (train_config.grid_n < 3) {
      throw TrainingError(
          "finetune: empty sample set with augmentation needs grid_n in the config");
    }
    grid = Grid(train_config.grid_n);
  }
  ModelParams params =
      pretrained
          ? transfer_init(*pretrained, config, derive_seed(train_config.seed, 0x7A45))
          : init_params(config, derive_seed(train_config.seed, 0x57A7));
  AdamState adam = AdamState::zeros(params.values.size());

  Rng batch_rng(derive_seed(train_config.seed, 0xBA7C));
  const std::uint64_t aug_seed = derive_seed(train_config.seed, 0xA06);
  std::vector<int> order(M);
  for (int i = 0; i < M; ++i) order[i] = i;

  TrainLog log;
  for (int step = 0; step < train_config.steps; ++step) {
    std::vector<BatchSample> batch;
    batch.reserve(train_config.batch_size + train_config.augmentation.per_batch());

    if (M > 0) {
      std::vector<int> indices;
      if (M >= train_config.batch_size) {
        // Without replacement: partial Fisher-Yates over the index array.
        for (int k = 0; k < train_config.batch_size; ++k) {
          const int pick = static_cast<int>(batch_rng.uniform_int(k, M - 1));
          std::swap(order[k], order[pick]);
          indices.push_back(order[k]);
        }
      } else {
        for (int k = 0; k < train_config.batch_size; ++k) {
          indices.push_back(static_cast<int>(batch_rng.uniform_int(0, M - 1)));
        }
      }
      for (int idx : indices) {
        BatchSample sample;
        sample.inputs = labeled.inputs[idx];
        sample.truth = labeled.labeled() ? &labeled.solutions[idx] : nullptr;
        sample.physics_only = !labeled.labeled();
        batch.push_back(std::move(sample));
      }
    }

    if (train_config.augmentation.enabled) {
      const auto& aug = train_config.augmentation;
      for (std::size_t fam = 0; fam < aug.families.size(); ++fam) {
        for (int rep = 0; rep < aug.per_family; ++rep) {
          const std::uint64_t s = derive_seed(
              aug_seed, {static_cast<std::uint64_t>(step), fam,
                         static_cast<std::uint64_t>(rep)});
          BatchSample sample;
          sample.physics_only = true;
          if (task.kind == PdeTask::Kind::Poisson) {
            sample.inputs = {gen_extreme(grid, aug.families[fam], s)};
          } else {
            MediumParams medium_params;
            HelmholtzMedium medium =
                gen_helmholtz_medium(grid, MediumFamily::WavyStripes, medium_params, s);
            ScalarField2D b_channel(grid);
            for (double& v : b_channel.values()) v = medium.b;
            sample.inputs = {std::move(medium.a), std::move(b_channel)};
          }
          batch.push_back(std::move(sample));
        }
      }
    }

    log.records.push_back(
        train_step(params, adam, task, batch, train_config, step));
  }

  FinetuneResult result;
  result.checkpoint.config = config;
  result.checkpoint.values = params.values;
  result.checkpoint.metadata = {
      {"tag", pretrained ? "finetuned" : "scratch"},
      {"seed", train_config.seed},
      {"steps", train_config.steps},
      {"loss_mode", loss_mode_name(train_config.mode)},
      {"labeled_samples", M},
      {"labeled_solutions", labeled.labeled() ? M : 0},
      {"augmentation", train_config.augmentation.enabled},
      {"task", task.kind == PdeTask::Kind::Poisson ? "poisson" : "helmholtz"},
      {"optimizer", {{"kind", "adam"},
                     {"lr_backbone", train_config.lr_backbone},
                     {"lr_embed", train_config.lr_embed},
                     {"beta1", train_config.beta1},
                     {"beta2", train_config.beta2},
                     {"epsilon", train_config.epsilon}}},
  };
  log.metadata = result.checkpoint.metadata;
  result.log = std::move(log);
  return result;
}

}  // namespace pift
