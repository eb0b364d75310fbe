#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pift/dataset.hpp"
#include "pift/fem.hpp"
#include "pift/operator.hpp"
#include "pift/residual.hpp"
#include "pift/train.hpp"

namespace pift {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The five model configurations.
inline const std::vector<std::string> kAllConfigurations = {
    "ft-data", "ft-physics", "ft-hybrid", "scratch-data", "scratch-physics"};

/// End-to-end experiment description, mirrored field-for-field by the JSON
/// config file.
struct ExperimentSpec {
  PdeTask::Kind task = PdeTask::Kind::Poisson;
  int grid_n = 64;
  std::vector<int> m_list = {1, 4, 16, 64, 256};
  std::vector<std::string> configurations = kAllConfigurations;
  int test_count = 240;
  int ood_count = 50;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir = "results";

  OperatorConfig model{1, 32, 4, 12};
  int train_steps = 200;
  int batch_size = 8;
  double lr_backbone = 1e-4;
  double lr_embed = 1e-3;
  int aug_per_family = 1;

  int pretrain_steps = 600;
  int pretrain_batch = 8;
  double pretrain_lr = 1e-3;
  double smooth_sigma = 0.05;
  std::uint64_t pretrain_seed = 7;

  std::uint64_t data_seed = 42;
  double fem_tol = 1e-10;
  double helmholtz_omega = kDefaultHelmholtzOmega;
  bool record_wall_time = false;  // off keeps scaling.csv byte-reproducible
  int threads = 1;

  void validate() const;
  PdeTask task_object() const;
  nlohmann::json to_json() const;
  static ExperimentSpec from_json(const nlohmann::json& j);
  static ExperimentSpec from_file(const std::filesystem::path& path);
};

struct DatasetPaths {
  std::filesystem::path test_dir;
  std::filesystem::path pool_dir;
  std::filesystem::path ood_dir;
};

/// Builds the labeled pool (training distribution, first test_count samples
/// reserved for the in-distribution test set), plus the labeled OOD set
/// (extreme sources for Poisson, wavy-stripe media for Helmholtz), all under
/// output_dir/datasets.
DatasetPaths build_datasets(const ExperimentSpec& spec);

struct EvalResult {
  double median_solution_rel_l1 = 0.0;
  double median_residual_rel_l1 = 0.0;
  double mean_abs_residual = 0.0;
};

/// Per-sample forward passes with boundary enforcement applied to the
/// outputs before metrics; medians use the lower-median convention. When
/// `predictions` is given the raw outputs are stored there.
EvalResult evaluate(const ModelParams& params, const PdeTask& task,
                    const SampleSet& test, int threads = 1,
                    std::vector<ScalarField2D>* predictions = nullptr);

/// Same metrics recomputed from saved raw predictions.
EvalResult evaluate_predictions(const std::vector<ScalarField2D>& predictions,
                                const PdeTask& task, const SampleSet& test);

struct ResultRow {
  std::string configuration;
  int m = 0;
  std::string regime;  // "interp" | "extrap"
  EvalResult metrics;
  double wall_time_s = 0.0;
  std::string status = "ok";
};

/// `# scaling-csv v1` comment line, documented header, one row per
/// (configuration, M, regime) in spec order.
void write_scaling_csv(const std::filesystem::path& path,
                       const std::vector<ResultRow>& rows);

/// Runs the full configuration x M grid for one training seed against the
/// prebuilt datasets. Cell failures become failure-marked rows rather than
/// aborting the sweep.
std::vector<ResultRow> run_scaling_seed(const ExperimentSpec& spec,
                                        const DatasetPaths& paths,
                                        const Checkpoint* pretrained,
                                        std::uint64_t seed);

/// Full pipeline: datasets, shared pretraining checkpoint (when any ft-*
/// configuration is requested), one scaling.csv per seed under
/// output_dir/seed_<k>/, and a copy of the first seed's CSV at
/// output_dir/scaling.csv. Returns that first CSV's path.
std::filesystem::path run_scaling(const ExperimentSpec& spec);

/// Per-sample residual audit (absolute and relative norms, plus the solution
/// error when the set is labeled) written as CSV.
void write_residual_audit(const ModelParams& params, const PdeTask& task,
                          const SampleSet& set, const std::filesystem::path& path,
                          int threads = 1);

/// Applies the PIFT_OUT_ROOT override to relative output paths.
std::filesystem::path resolve_output_path(const std::filesystem::path& path);

}  // namespace pift
