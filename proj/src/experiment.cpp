#include "pift/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "pift/rng.hpp"

namespace pift {

namespace {

std::string task_name(PdeTask::Kind kind) {
  return kind == PdeTask::Kind::Poisson ? "poisson" : "helmholtz";
}

PdeTask::Kind task_from_name(const std::string& name) {
  if (name == "poisson") return PdeTask::Kind::Poisson;
  if (name == "helmholtz") return PdeTask::Kind::Helmholtz;
  throw ConfigError("unknown task: " + name);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (grid_n < 8) throw ConfigError("grid_n must be >= 8");
  if (m_list.empty()) throw ConfigError("m_list must be non-empty");
  if (!std::is_sorted(m_list.begin(), m_list.end())) {
    throw ConfigError("m_list must be sorted ascending");
  }
  for (int m : m_list) {
    if (m < 1) throw ConfigError("m_list entries must be >= 1");
  }
  if (configurations.empty()) throw ConfigError("configurations must be non-empty");
  for (const auto& c : configurations) {
    if (std::find(kAllConfigurations.begin(), kAllConfigurations.end(), c) ==
        kAllConfigurations.end()) {
      throw ConfigError("unknown configuration: " + c);
    }
  }
  if (test_count < 1 || ood_count < 1) {
    throw ConfigError("test_count and ood_count must be >= 1");
  }
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (train_steps < 0 || pretrain_steps < 0) throw ConfigError("negative step count");
  if (batch_size < 1 || pretrain_batch < 1) throw ConfigError("batch size must be >= 1");
  if (fem_tol <= 0) throw ConfigError("fem_tol must be positive");
  model.validate();
  if (model.in_channels != task_object().input_channels()) {
    throw ConfigError("model in_channels must match the task (1 Poisson, 2 Helmholtz)");
  }
  if (2 * model.modes > grid_n) throw ConfigError("model modes exceed grid_n / 2");
}

PdeTask ExperimentSpec::task_object() const {
  return task == PdeTask::Kind::Poisson ? PdeTask::poisson()
                                        : PdeTask::helmholtz(helmholtz_omega);
}

nlohmann::json ExperimentSpec::to_json() const {
  return {
      {"task", task_name(task)},
      {"grid_n", grid_n},
      {"m_list", m_list},
      {"configurations", configurations},
      {"test_count", test_count},
      {"ood_count", ood_count},
      {"seeds", seeds},
      {"output_dir", output_dir},
      {"model",
       {{"in_channels", model.in_channels},
        {"width", model.width},
        {"layers", model.layers},
        {"modes", model.modes}}},
      {"train_steps", train_steps},
      {"batch_size", batch_size},
      {"lr_backbone", lr_backbone},
      {"lr_embed", lr_embed},
      {"aug_per_family", aug_per_family},
      {"pretrain_steps", pretrain_steps},
      {"pretrain_batch", pretrain_batch},
      {"pretrain_lr", pretrain_lr},
      {"smooth_sigma", smooth_sigma},
      {"pretrain_seed", pretrain_seed},
      {"data_seed", data_seed},
      {"fem_tol", fem_tol},
      {"helmholtz_omega", helmholtz_omega},
      {"record_wall_time", record_wall_time},
      {"threads", threads},
  };
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  try {
    if (j.contains("task")) spec.task = task_from_name(j.at("task").get<std::string>());
    spec.grid_n = j.value("grid_n", spec.grid_n);
    if (j.contains("m_list")) spec.m_list = j.at("m_list").get<std::vector<int>>();
    if (j.contains("configurations")) {
      spec.configurations = j.at("configurations").get<std::vector<std::string>>();
    }
    spec.test_count = j.value("test_count", spec.test_count);
    spec.ood_count = j.value("ood_count", spec.ood_count);
    if (j.contains("seeds")) {
      spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    }
    spec.output_dir = j.value("output_dir", spec.output_dir);
    if (j.contains("model")) {
      const auto& m = j.at("model");
      spec.model.in_channels = m.value("in_channels", spec.model.in_channels);
      spec.model.width = m.value("width", spec.model.width);
      spec.model.layers = m.value("layers", spec.model.layers);
      spec.model.modes = m.value("modes", spec.model.modes);
    }
    spec.train_steps = j.value("train_steps", spec.train_steps);
    spec.batch_size = j.value("batch_size", spec.batch_size);
    spec.lr_backbone = j.value("lr_backbone", spec.lr_backbone);
    spec.lr_embed = j.value("lr_embed", spec.lr_embed);
    spec.aug_per_family = j.value("aug_per_family", spec.aug_per_family);
    spec.pretrain_steps = j.value("pretrain_steps", spec.pretrain_steps);
    spec.pretrain_batch = j.value("pretrain_batch", spec.pretrain_batch);
    spec.pretrain_lr = j.value("pretrain_lr", spec.pretrain_lr);
    spec.smooth_sigma = j.value("smooth_sigma", spec.smooth_sigma);
    spec.pretrain_seed = j.value("pretrain_seed", spec.pretrain_seed);
    spec.data_seed = j.value("data_seed", spec.data_seed);
    spec.fem_tol = j.value("fem_tol", spec.fem_tol);
    spec.helmholtz_omega = j.value("helmholtz_omega", spec.helmholtz_omega);
    spec.record_wall_time = j.value("record_wall_time", spec.record_wall_time);
    spec.threads = j.value("threads", spec.threads);
  } catch (const nlohmann::json::exception& exc) {
    throw ConfigError(std::string("malformed experiment config: ") + exc.what());
  }
  // Helmholtz inputs carry (a, broadcast-b); fix the channel count when the
  // config did not set it explicitly.
  if (!j.contains("model") || !j.at("model").contains("in_channels")) {
    spec.model.in_channels = spec.task_object().input_channels();
  }
  spec.validate();
  return spec;
}

ExperimentSpec ExperimentSpec::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open experiment config: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& exc) {
    throw ConfigError(std::string("malformed experiment config: ") + exc.what());
  }
  return from_json(j);
}

std::filesystem::path resolve_output_path(const std::filesystem::path& path) {
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("PIFT_OUT_ROOT")) {
    return std::filesystem::path(root) / path;
  }
  return path;
}

DatasetPaths build_datasets(const ExperimentSpec& spec) {
  spec.validate();
  const Grid grid(spec.grid_n);
  const PdeTask task = spec.task_object();
  const auto root = resolve_output_path(spec.output_dir) / "datasets";

  const int pool_count = spec.m_list.back();
  const int total = spec.test_count + pool_count;

  LabeledSetOptions options;
  options.tol = spec.fem_tol;
  options.threads = spec.threads;
  options.log_path = root / "fem_solves.log";
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  std::filesystem::remove(*options.log_path, ec);

  const SampleSet full =
      generate_labeled_set(task, grid, total, derive_seed(spec.data_seed, 0x1AB), options);

  SampleSet test = slice_sampleset(full, 0, spec.test_count);
  SampleSet pool = slice_sampleset(full, spec.test_count, pool_count);

  // Out-of-distribution test set, solved with the same reference solver.
  SampleSet ood;
  ood.grid = grid;
  ood.seed = derive_seed(spec.data_seed, 0x00D);
  if (task.kind == PdeTask::Kind::Poisson) {
    ood = gen_ood_testset(grid, spec.ood_count, ood.seed);
    ood.solutions.reserve(spec.ood_count);
    for (int s = 0; s < spec.ood_count; ++s) {
      auto [u, report] = solve_poisson(grid, ood.inputs[s][0], spec.fem_tol);
      ood.solutions.push_back(std::move(u));
    }
    ood.generator = "fem-poisson-extreme-ood";
  } else {
    ood.channels = 2;
    MediumParams medium_params;
    nlohmann::json b_values = nlohmann::json::array();
    for (int s = 0; s < spec.ood_count; ++s) {
      HelmholtzMedium medium = gen_helmholtz_medium(
          grid, MediumFamily::WavyStripes, medium_params, derive_seed(ood.seed, s));
      auto [u, report] =
          solve_helmholtz(grid, medium.a, task.omega, medium.b, spec.fem_tol);
      ScalarField2D b_channel(grid);
      for (double& v : b_channel.values()) v = medium.b;
      b_values.push_back(medium.b);
      ood.inputs.push_back({std::move(medium.a), std::move(b_channel)});
      ood.solutions.push_back(std::move(u));
    }
    ood.generator = "fem-helmholtz-wavy-ood";
    ood.generator_params = {{"omega", task.omega}, {"b", b_values}};
  }

  DatasetPaths paths{root / "test", root / "pool", root / "ood"};
  save_sampleset(test, paths.test_dir);
  save_sampleset(pool, paths.pool_dir);
  save_sampleset(ood, paths.ood_dir);
  return paths;
}

namespace {

struct SampleMetrics {
  double solution = 0.0;
  double residual_rel = 0.0;
  double residual_abs = 0.0;
};

SampleMetrics eval_sample(const ModelParams& params, const PdeTask& task,
                          const SampleSet& set, int s, Workspace& ws,
                          ScalarField2D* prediction_out) {
  const ScalarField2D pred = forward(params, set.inputs[s], &ws);
  SampleMetrics metrics;
  const ScalarField2D eff = enforce_boundary(task, pred, set.inputs[s]);
  if (set.labeled()) {
    metrics.solution = relative_l1(eff, set.solutions[s]);
  }
  metrics.residual_rel = residual_rel_l1(task, pred, set.inputs[s]);
  metrics.residual_abs = mean_abs_residual(task, pred, set.inputs[s]);
  if (prediction_out) *prediction_out = pred;
  return metrics;
}

}  // namespace

EvalResult evaluate(const ModelParams& params, const PdeTask& task,
                    const SampleSet& test, int threads,
                    std::vector<ScalarField2D>* predictions) {
  if (test.count() == 0) {
    throw std::invalid_argument("evaluate: empty test set");
  }
  const int count = test.count();
  std::vector<SampleMetrics> metrics(count);
  if (predictions) predictions->assign(count, ScalarField2D(test.grid));

  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    Workspace ws;
    for (int s = 0; s < count; ++s) {
      metrics[s] = eval_sample(params, task, test, s, ws,
                               predictions ? &(*predictions)[s] : nullptr);
    }
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::vector<std::string> errors(workers);
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t]() {
        Workspace ws;
        try {
          for (int s = next.fetch_add(1); s < count; s = next.fetch_add(1)) {
            metrics[s] = eval_sample(params, task, test, s, ws,
                                     predictions ? &(*predictions)[s] : nullptr);
          }
        } catch (const std::exception& exc) {
          errors[t] = exc.what();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (!e.empty()) throw std::runtime_error(e);
    }
  }

  std::vector<double> sol, rres;
  double abs_sum = 0.0;
  sol.reserve(count);
  rres.reserve(count);
  for (const auto& m : metrics) {
    sol.push_back(m.solution);
    rres.push_back(m.residual_rel);
    abs_sum += m.residual_abs;
  }
  EvalResult result;
  result.median_solution_rel_l1 = test.labeled() ? median_over_samples(sol) : 0.0;
  result.median_residual_rel_l1 = median_over_samples(rres);
  result.mean_abs_residual = abs_sum / count;
  return result;
}

EvalResult evaluate_predictions(const std::vector<ScalarField2D>& predictions,
                                const PdeTask& task, const SampleSet& test) {
  if (static_cast<int>(predictions.size()) != test.count() || test.count() == 0) {
    throw std::invalid_argument("evaluate_predictions: size mismatch");
  }
  std::vector<double> sol, rres;
  double abs_sum = 0.0;
  for (int s = 0; s < test.count(); ++s) {
    const ScalarField2D eff = enforce_boundary(task, predictions[s], test.inputs[s]);
    if (test.labeled()) sol.push_back(relative_l1(eff, test.solutions[s]));
    rres.push_back(residual_rel_l1(task, predictions[s], test.inputs[s]));
    abs_sum += mean_abs_residual(task, predictions[s], test.inputs[s]);
  }
  EvalResult result;
  result.median_solution_rel_l1 = test.labeled() ? median_over_samples(sol) : 0.0;
  result.median_residual_rel_l1 = median_over_samples(rres);
  result.mean_abs_residual = abs_sum / test.count();
  return result;
}

void write_scaling_csv(const std::filesystem::path& path,
                       const std::vector<ResultRow>& rows) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "# scaling-csv v1\n";
  out << "config,M,regime,median_rel_l1_solution,median_rel_l1_residual,"
         "mean_abs_residual,wall_time_s,status\n";
  for (const auto& row : rows) {
    out << row.configuration << "," << row.m << "," << row.regime << ","
        << format_double(row.metrics.median_solution_rel_l1) << ","
        << format_double(row.metrics.median_residual_rel_l1) << ","
        << format_double(row.metrics.mean_abs_residual) << ","
        << format_double(row.wall_time_s) << "," << row.status << "\n";
  }
}

namespace {

struct CellSetup {
  LossMode mode = LossMode::Data;
  bool pretrained = false;
  bool augmentation = false;
};

CellSetup cell_setup(const std::string& configuration) {
  if (configuration == "ft-data") return {LossMode::Data, true, false};
  if (configuration == "ft-physics") return {LossMode::Physics, true, false};
  if (configuration == "ft-hybrid") return {LossMode::Hybrid, true, true};
  if (configuration == "scratch-data") return {LossMode::Data, false, false};
  if (configuration == "scratch-physics") return {LossMode::Physics, false, false};
  throw ConfigError("unknown configuration: " + configuration);
}

}  // namespace

std::vector<ResultRow> run_scaling_seed(const ExperimentSpec& spec,
                                        const DatasetPaths& paths,
                                        const Checkpoint* pretrained,
                                        std::uint64_t seed) {
  const PdeTask task = spec.task_object();
  const SampleSet test = load_sampleset(paths.test_dir);
  const SampleSet pool = load_sampleset(paths.pool_dir);
  const SampleSet ood = load_sampleset(paths.ood_dir);
  if (pool.count() < spec.m_list.back()) {
    throw ConfigError("labeled pool smaller than max(m_list)");
  }

  const auto seed_dir =
      resolve_output_path(spec.output_dir) / ("seed_" + std::to_string(seed));

  std::vector<ResultRow> rows;
  for (std::size_t ci = 0; ci < spec.configurations.size(); ++ci) {
    const std::string& name = spec.configurations[ci];
    const CellSetup setup = cell_setup(name);
    for (int m : spec.m_list) {
      const auto start = std::chrono::steady_clock::now();
      ResultRow interp{name, m, "interp", {}, 0.0, "ok"};
      ResultRow extrap{name, m, "extrap", {}, 0.0, "ok"};
      try {
        SampleSet train = slice_sampleset(pool, 0, m);
        if (setup.mode == LossMode::Physics) {
          train.solutions.clear();  // same inputs, no labeled solutions
        }
        TrainConfig tc;
        tc.mode = setup.mode;
        tc.batch_size = spec.batch_size;
        tc.steps = spec.train_steps;
        tc.lr_backbone = spec.lr_backbone;
        tc.lr_embed = spec.lr_embed;
        tc.augmentation.enabled = setup.augmentation;
        tc.augmentation.per_family = spec.aug_per_family;
        tc.seed = derive_seed(seed, {ci, static_cast<std::uint64_t>(m)});
        tc.threads = spec.threads;
        tc.grid_n = spec.grid_n;

        FinetuneResult result =
            finetune(setup.pretrained ? pretrained : nullptr, task, train, spec.model, tc);
        result.log.write_csv(seed_dir / "logs" /
                             (name + "_M" + std::to_string(m) + ".csv"));

        ModelParams params{spec.model, result.checkpoint.values};
        interp.metrics = evaluate(params, task, test, spec.threads);
        extrap.metrics = evaluate(params, task, ood, spec.threads);
      } catch (const std::exception& exc) {
        const std::string status = std::string("failed:") + exc.what();
        interp.status = status;
        extrap.status = status;
        interp.metrics = {};
        extrap.metrics = {};
      }
      if (spec.record_wall_time) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        interp.wall_time_s = secs;
        extrap.wall_time_s = secs;
      }
      rows.push_back(std::move(interp));
      rows.push_back(std::move(extrap));
    }
  }
  return rows;
}

std::filesystem::path run_scaling(const ExperimentSpec& spec) {
  spec.validate();
  const DatasetPaths paths = build_datasets(spec);

  bool needs_pretrain = false;
  for (const auto& c : spec.configurations) {
    if (cell_setup(c).pretrained) needs_pretrain = true;
  }

  Checkpoint pretrained;
  if (needs_pretrain) {
    const auto ckpt_path = resolve_output_path(spec.output_dir) / "pretrained.ckpt";
    PretrainConfig pc;
    pc.model = spec.model;
    pc.model.in_channels = 1;  // surrogate smoothing task is single-channel
    pc.grid_n = spec.grid_n;
    pc.steps = spec.pretrain_steps;
    pc.batch_size = spec.pretrain_batch;
    pc.smooth_sigma = spec.smooth_sigma;
    pc.lr = spec.pretrain_lr;
    pc.seed = spec.pretrain_seed;
    pc.threads = spec.threads;
    PretrainResult result = pretrain(pc);
    pretrained = std::move(result.checkpoint);
    save_checkpoint(pretrained, ckpt_path);
    result.log.write_csv(resolve_output_path(spec.output_dir) / "pretrain_log.csv");
  }

  std::filesystem::path first_csv;
  for (std::size_t k = 0; k < spec.seeds.size(); ++k) {
    const std::uint64_t seed = spec.seeds[k];
    const auto rows = run_scaling_seed(spec, paths, needs_pretrain ? &pretrained : nullptr,
                                       seed);
    const auto csv_path = resolve_output_path(spec.output_dir) /
                          ("seed_" + std::to_string(seed)) / "scaling.csv";
    write_scaling_csv(csv_path, rows);
    if (k == 0) {
      first_csv = resolve_output_path(spec.output_dir) / "scaling.csv";
      write_scaling_csv(first_csv, rows);
    }
  }
  return first_csv;
}

void write_residual_audit(const ModelParams& params, const PdeTask& task,
                          const SampleSet& set, const std::filesystem::path& path,
                          int threads) {
  std::vector<ScalarField2D> predictions;
  evaluate(params, task, set, threads, &predictions);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "# residual-audit v1\n";
  out << "sample,mean_abs_residual,rel_l1_residual"
      << (set.labeled() ? ",rel_l1_solution" : "") << "\n";
  for (int s = 0; s < set.count(); ++s) {
    out << s << "," << format_double(mean_abs_residual(task, predictions[s], set.inputs[s]))
        << "," << format_double(residual_rel_l1(task, predictions[s], set.inputs[s]));
    if (set.labeled()) {
      const ScalarField2D eff = enforce_boundary(task, predictions[s], set.inputs[s]);
      out << "," << format_double(relative_l1(eff, set.solutions[s]));
    }
    out << "\n";
  }
}

}  // namespace pift
