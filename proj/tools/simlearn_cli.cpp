// simlearn: experiment runner for simultaneous-learning classifiers.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "simlearn/checkpoint.hpp"
#include "simlearn/errors.hpp"
#include "simlearn/experiment.hpp"

namespace fs = std::filesystem;
using namespace simlearn;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<double> reduce;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config (YAML)")->check(CLI::ExistingFile)->required();
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
  cmd->add_option("--seed", o.seed, "run this single seed instead of the configured list");
  cmd->add_option("--workers", o.workers, "concurrent runs")->check(CLI::PositiveNumber);
  cmd->add_option("--reduce", o.reduce, "fraction of the target train set to keep, in (0, 1]");
}

ExperimentConfig load(const Overrides& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (!o.out.empty()) cfg.output = o.out;
  if (o.seed) cfg.seeds = {*o.seed};
  if (o.workers) cfg.workers = *o.workers;
  if (o.reduce) cfg.reduce = *o.reduce;
  cfg.validate();
  return cfg;
}

void print_warnings(const PreparedData& data) {
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';
}

void report_run(const RunRecord& r) {
  if (!r.error.empty()) {
    std::cerr << r.spec.id << ": " << r.error << '\n';
    return;
  }
  std::cout << r.spec.id << ": val dacc " << fmt_double(r.val_dacc) << ", test dacc " << fmt_double(r.test.dacc)
            << ", test accuracy " << fmt_double(r.test.accuracy) << '\n';
}

int cmd_train(const Overrides& o) {
  const auto cfg = load(o);
  const auto result = run_experiment(cfg, cfg.output, report_run);
  std::cout << "wrote " << result.summary_csv.string() << '\n';
  return result.ok() ? 0 : 3;
}

int cmd_sweep(const Overrides& o) {
  const auto cfg = load(o);
  const auto sweep = lambda_sweep(cfg, cfg.output, report_run);
  std::cout << "best lambda " << fmt_double(sweep.best_lambda) << " (see " << (cfg.output / "sweep.csv").string()
            << ")\n";
  return sweep.runs.ok() ? 0 : 3;
}

int cmd_evaluate(const Overrides& o, const std::string& checkpoint) {
  const auto cfg = load(o);
  const Model model = checkpoint_load(checkpoint).model;
  const auto prepared = prepare_dataset(cfg, cfg.seeds.front());
  print_warnings(prepared);
  const auto report = evaluate_export(model, prepared.data, cfg.output);
  std::cout << "accuracy " << fmt_double(report.accuracy) << ", dacc " << fmt_double(report.dacc) << ", macro AUC "
            << fmt_double(report.auc.macro) << '\n';
  return 0;
}

int cmd_interpret(const Overrides& o, const std::string& checkpoint, const std::string& compare) {
  const auto cfg = load(o);
  const Model model = checkpoint_load(checkpoint).model;
  std::optional<Model> other;
  if (!compare.empty()) other = checkpoint_load(compare).model;
  const auto prepared = prepare_dataset(cfg, cfg.seeds.front());
  print_warnings(prepared);
  const auto label = fs::path(checkpoint).parent_path().filename().string();
  const auto compare_label = compare.empty() ? std::string() : fs::path(compare).parent_path().filename().string();
  const auto ex = interpret_export(model, other, prepared, cfg.interpret, cfg.output, label.empty() ? "model" : label,
                                   compare_label.empty() || compare_label == label ? "compare" : compare_label);
  for (const auto& n : ex.notices) std::cout << "notice: " << n << '\n';
  std::cout << "wrote " << ex.files.size() << " files to " << cfg.output.string() << '\n';
  return 0;
}

int cmd_synth(const Overrides& o) {
  const auto cfg = load(o);
  if (cfg.dataset.source != DataSource::Synthetic) throw ConfigError("dataset.source", 0, "synth needs a synthetic dataset");
  const auto data = synth_generate(cfg.dataset.synth, cfg.seeds.front());
  write_image_dir(data, cfg.output);
  std::cout << "wrote " << data.target_train.size() + data.target_val.size() + data.target_test.size()
            << " target and " << data.aux_pool.size() << " auxiliary images to " << cfg.output.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous learning experiments"};
  app.require_subcommand(1);
  Overrides o;
  std::string checkpoint, compare;

  auto* train = app.add_subcommand("train", "train every configured mode and seed, write summary.csv");
  add_common(train, o);
  auto* sweep = app.add_subcommand("sweep", "baseline plus one simultaneous run per lambda, write sweep.csv/svg");
  add_common(sweep, o);
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
  add_common(evaluate, o);
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  auto* interpret = app.add_subcommand("interpret", "layer correlation, top auxiliary classes and Grad-CAM");
  add_common(interpret, o);
  interpret->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  interpret->add_option("--compare", compare, "second checkpoint for a side-by-side comparison")
      ->check(CLI::ExistingFile);
  auto* synth = app.add_subcommand("synth", "write the synthetic dataset as a PNG directory tree");
  add_common(synth, o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(o);
    if (*sweep) return cmd_sweep(o);
    if (*evaluate) return cmd_evaluate(o, checkpoint);
    if (*interpret) return cmd_interpret(o, checkpoint, compare);
    if (*synth) return cmd_synth(o);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
