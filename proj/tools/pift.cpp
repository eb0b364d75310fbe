// Command-line front end: dataset generation, pretraining, fine-tuning,
// evaluation, scaling sweeps, and residual audits.
//
// Exit codes: 0 success, 2 usage error, 3 malformed config, 4 dataset
// error, 5 solver/training failure, 1 other runtime error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pift/dataset.hpp"
#include "pift/experiment.hpp"
#include "pift/fem.hpp"
#include "pift/generators.hpp"
#include "pift/operator.hpp"
#include "pift/train.hpp"

namespace {

using pift::PdeTask;

PdeTask task_from_string(const std::string& name, double omega) {
  if (name == "poisson") return PdeTask::poisson();
  if (name == "helmholtz") return PdeTask::helmholtz(omega);
  throw pift::ConfigError("unknown task: " + name + " (expected poisson|helmholtz)");
}

struct GenerateArgs {
  std::string task = "poisson";
  std::string out = "dataset";
  std::string kind = "labeled";  // labeled | ood
  int grid_n = 64;
  int count = 16;
  std::uint64_t seed = 0;
  double tol = 1e-10;
  double omega = pift::kDefaultHelmholtzOmega;
  int threads = 1;
};

int run_generate(const GenerateArgs& args) {
  const pift::Grid grid(args.grid_n);
  const PdeTask task = task_from_string(args.task, args.omega);
  const auto out_dir = pift::resolve_output_path(args.out);
  pift::SampleSet set;
  if (args.kind == "ood") {
    if (task.kind != PdeTask::Kind::Poisson) {
      throw pift::ConfigError("generate --kind ood is the Poisson extreme-source set; "
                              "Helmholtz OOD media are built by the scaling pipeline");
    }
    set = pift::gen_ood_testset(grid, args.count, args.seed);
  } else if (args.kind == "labeled") {
    pift::LabeledSetOptions options;
    options.tol = args.tol;
    options.threads = args.threads;
    options.log_path = out_dir / "fem_solves.log";
    set = pift::generate_labeled_set(task, grid, args.count, args.seed, options);
  } else {
    throw pift::ConfigError("unknown --kind: " + args.kind + " (expected labeled|ood)");
  }
  pift::save_sampleset(set, out_dir);
  std::cout << "wrote " << set.count() << " samples to " << out_dir.string()
            << " (checksum " << pift::sampleset_checksum(set) << ")\n";
  return 0;
}

struct PretrainArgs {
  std::string out = "pretrained.ckpt";
  std::string log;
  int grid_n = 64;
  int steps = 800;
  int batch = 8;
  int width = 32;
  int layers = 4;
  int modes = 12;
  double lr = 1e-3;
  double sigma = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;
};

int run_pretrain(const PretrainArgs& args) {
  pift::PretrainConfig config;
  config.model = {1, args.width, args.layers, args.modes};
  config.grid_n = args.grid_n;
  config.steps = args.steps;
  config.batch_size = args.batch;
  config.lr = args.lr;
  config.smooth_sigma = args.sigma;
  config.seed = args.seed;
  config.threads = args.threads;
  pift::PretrainResult result = pift::pretrain(config);
  const auto out = pift::resolve_output_path(args.out);
  pift::save_checkpoint(result.checkpoint, out);
  if (!args.log.empty()) {
    result.log.write_csv(pift::resolve_output_path(args.log));
  }
  std::cout << "pretrained checkpoint written to " << out.string() << " (final loss "
            << result.log.records.back().total_loss << ")\n";
  return 0;
}

struct FinetuneArgs {
  std::string mode = "data";
  std::string data_dir;
  std::string pretrained;
  std::string out = "finetuned.ckpt";
  std::string log;
  std::string task = "poisson";
  int samples = -1;  // -1: whole set
  int steps = 500;
  int batch = 8;
  int width = 32;
  int layers = 4;
  int modes = 12;
  double lr_backbone = 1e-4;
  double lr_embed = 1e-3;
  bool augment = false;
  double omega = pift::kDefaultHelmholtzOmega;
  std::uint64_t seed = 0;
  int threads = 1;
  int grid_n = 0;
};

int run_finetune(const FinetuneArgs& args) {
  const PdeTask task = task_from_string(args.task, args.omega);
  pift::SampleSet labeled;
  if (!args.data_dir.empty()) {
    labeled = pift::load_sampleset(args.data_dir);
    if (args.samples >= 0) {
      labeled = pift::slice_sampleset(labeled, 0, args.samples);
    }
  } else if (args.samples > 0) {
    throw pift::ConfigError("--samples > 0 requires --data");
  }
  if (args.mode == "physics") {
    labeled.solutions.clear();
  }

  pift::TrainConfig tc;
  tc.mode = pift::loss_mode_from_name(args.mode);
  tc.steps = args.steps;
  tc.batch_size = args.batch;
  tc.lr_backbone = args.lr_backbone;
  tc.lr_embed = args.lr_embed;
  tc.augmentation.enabled = args.augment;
  tc.seed = args.seed;
  tc.threads = args.threads;
  tc.grid_n = args.grid_n > 0 ? args.grid_n : (labeled.count() > 0 ? labeled.grid.n : 0);

  pift::OperatorConfig model{task.input_channels(), args.width, args.layers, args.modes};
  pift::Checkpoint pretrained;
  const bool has_pretrained = !args.pretrained.empty();
  if (has_pretrained) {
    pretrained = pift::load_checkpoint(args.pretrained);
  }
  pift::FinetuneResult result =
      pift::finetune(has_pretrained ? &pretrained : nullptr, task, labeled, model, tc);
  const auto out = pift::resolve_output_path(args.out);
  pift::save_checkpoint(result.checkpoint, out);
  if (!args.log.empty()) {
    result.log.write_csv(pift::resolve_output_path(args.log));
  }
  std::cout << "checkpoint written to " << out.string() << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string task = "poisson";
  double omega = pift::kDefaultHelmholtzOmega;
  int threads = 1;
};

int run_evaluate(const EvaluateArgs& args) {
  const PdeTask task = task_from_string(args.task, args.omega);
  const pift::Checkpoint ck = pift::load_checkpoint(args.checkpoint);
  const pift::SampleSet set = pift::load_sampleset(args.data_dir);
  const pift::ModelParams params{ck.config, ck.values};
  const pift::EvalResult result = pift::evaluate(params, task, set, args.threads);
  std::cout << "median_rel_l1_solution " << result.median_solution_rel_l1 << "\n"
            << "median_rel_l1_residual " << result.median_residual_rel_l1 << "\n"
            << "mean_abs_residual " << result.mean_abs_residual << "\n";
  return 0;
}

struct AuditArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string out = "residual_audit.csv";
  std::string task = "poisson";
  double omega = pift::kDefaultHelmholtzOmega;
  int threads = 1;
};

int run_audit(const AuditArgs& args) {
  const PdeTask task = task_from_string(args.task, args.omega);
  const pift::Checkpoint ck = pift::load_checkpoint(args.checkpoint);
  const pift::SampleSet set = pift::load_sampleset(args.data_dir);
  const pift::ModelParams params{ck.config, ck.values};
  const auto out = pift::resolve_output_path(args.out);
  pift::write_residual_audit(params, task, set, out, args.threads);
  std::cout << "residual audit written to " << out.string() << "\n";
  return 0;
}

struct ScalingArgs {
  std::string config;
  std::string out;
};

int run_scaling_cmd(const ScalingArgs& args) {
  pift::ExperimentSpec spec = pift::ExperimentSpec::from_file(args.config);
  if (!args.out.empty()) {
    spec.output_dir = args.out;
  }
  const auto csv = pift::run_scaling(spec);
  std::cout << "scaling results written to " << csv.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed fine-tuning lab for spectral neural operators"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand("generate", "Generate a dataset directory");
  cmd_gen->add_option("--task", gen.task, "poisson|helmholtz")->capture_default_str();
  cmd_gen->add_option("--out", gen.out, "output directory")->capture_default_str();
  cmd_gen->add_option("--kind", gen.kind, "labeled|ood")->capture_default_str();
  cmd_gen->add_option("--grid", gen.grid_n, "nodes per side")->capture_default_str();
  cmd_gen->add_option("--count", gen.count, "sample count")->capture_default_str();
  cmd_gen->add_option("--seed", gen.seed, "base seed")->capture_default_str();
  cmd_gen->add_option("--tol", gen.tol, "FEM solver tolerance")->capture_default_str();
  cmd_gen->add_option("--omega", gen.omega, "Helmholtz frequency")->capture_default_str();
  cmd_gen->add_option("--threads", gen.threads, "solver threads")->capture_default_str();

  PretrainArgs pre;
  auto* cmd_pre = app.add_subcommand("pretrain", "Surrogate pre-training run");
  cmd_pre->add_option("--out", pre.out, "checkpoint path")->capture_default_str();
  cmd_pre->add_option("--log", pre.log, "training log CSV path");
  cmd_pre->add_option("--grid", pre.grid_n, "nodes per side")->capture_default_str();
  cmd_pre->add_option("--steps", pre.steps, "training steps")->capture_default_str();
  cmd_pre->add_option("--batch", pre.batch, "batch size")->capture_default_str();
  cmd_pre->add_option("--width", pre.width, "hidden width")->capture_default_str();
  cmd_pre->add_option("--layers", pre.layers, "spectral layers")->capture_default_str();
  cmd_pre->add_option("--modes", pre.modes, "retained modes per dim")->capture_default_str();
  cmd_pre->add_option("--lr", pre.lr, "learning rate")->capture_default_str();
  cmd_pre->add_option("--sigma", pre.sigma, "smoothing width")->capture_default_str();
  cmd_pre->add_option("--seed", pre.seed, "seed")->capture_default_str();
  cmd_pre->add_option("--threads", pre.threads, "batch threads")->capture_default_str();

  FinetuneArgs fit;
  auto* cmd_fit = app.add_subcommand("finetune", "Fine-tune or train from scratch");
  cmd_fit->add_option("--mode", fit.mode, "data|physics|hybrid")->capture_default_str();
  cmd_fit->add_option("--data", fit.data_dir, "labeled dataset directory");
  cmd_fit->add_option("--samples", fit.samples, "labeled budget M (-1: whole set)")
      ->capture_default_str();
  cmd_fit->add_option("--pretrained", fit.pretrained, "pretrained checkpoint");
  cmd_fit->add_option("--out", fit.out, "output checkpoint")->capture_default_str();
  cmd_fit->add_option("--log", fit.log, "training log CSV path");
  cmd_fit->add_option("--task", fit.task, "poisson|helmholtz")->capture_default_str();
  cmd_fit->add_option("--steps", fit.steps, "training steps")->capture_default_str();
  cmd_fit->add_option("--batch", fit.batch, "batch size")->capture_default_str();
  cmd_fit->add_option("--width", fit.width, "hidden width")->capture_default_str();
  cmd_fit->add_option("--layers", fit.layers, "spectral layers")->capture_default_str();
  cmd_fit->add_option("--modes", fit.modes, "retained modes per dim")->capture_default_str();
  cmd_fit->add_option("--lr-backbone", fit.lr_backbone, "backbone learning rate")
      ->capture_default_str();
  cmd_fit->add_option("--lr-embed", fit.lr_embed, "embedding/recovery learning rate")
      ->capture_default_str();
  cmd_fit->add_flag("--augment", fit.augment, "on-the-fly physics augmentation");
  cmd_fit->add_option("--omega", fit.omega, "Helmholtz frequency")->capture_default_str();
  cmd_fit->add_option("--seed", fit.seed, "seed")->capture_default_str();
  cmd_fit->add_option("--threads", fit.threads, "batch threads")->capture_default_str();
  cmd_fit->add_option("--grid", fit.grid_n, "augmentation grid when no dataset given");

  EvaluateArgs ev;
  auto* cmd_ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  cmd_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  cmd_ev->add_option("--data", ev.data_dir, "dataset directory")->required();
  cmd_ev->add_option("--task", ev.task, "poisson|helmholtz")->capture_default_str();
  cmd_ev->add_option("--omega", ev.omega, "Helmholtz frequency")->capture_default_str();
  cmd_ev->add_option("--threads", ev.threads, "evaluation threads")->capture_default_str();

  ScalingArgs sc;
  auto* cmd_sc = app.add_subcommand("scaling", "Full configuration x M sweep");
  cmd_sc->add_option("--config", sc.config, "experiment spec JSON")->required();
  cmd_sc->add_option("--out", sc.out, "override output directory");

  AuditArgs audit;
  auto* cmd_audit =
      app.add_subcommand("audit-residual", "Per-sample residual consistency audit");
  cmd_audit->add_option("--checkpoint", audit.checkpoint, "checkpoint path")->required();
  cmd_audit->add_option("--data", audit.data_dir, "dataset directory")->required();
  cmd_audit->add_option("--out", audit.out, "output CSV")->capture_default_str();
  cmd_audit->add_option("--task", audit.task, "poisson|helmholtz")->capture_default_str();
  cmd_audit->add_option("--omega", audit.omega, "Helmholtz frequency")
      ->capture_default_str();
  cmd_audit->add_option("--threads", audit.threads, "evaluation threads")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (app.got_subcommand(cmd_gen)) return run_generate(gen);
    if (app.got_subcommand(cmd_pre)) return run_pretrain(pre);
    if (app.got_subcommand(cmd_fit)) return run_finetune(fit);
    if (app.got_subcommand(cmd_ev)) return run_evaluate(ev);
    if (app.got_subcommand(cmd_sc)) return run_scaling_cmd(sc);
    if (app.got_subcommand(cmd_audit)) return run_audit(audit);
  } catch (const pift::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const pift::DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return 4;
  } catch (const pift::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 4;
  } catch (const pift::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 5;
  } catch (const pift::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
