#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "simlearn/grouped_data.hpp"
#include "simlearn/interpret.hpp"
#include "simlearn/metrics.hpp"
#include "simlearn/model.hpp"
#include "simlearn/trainer.hpp"

namespace simlearn {

inline constexpr int kConfigVersion = 1;

enum class DataSource { Synthetic, Directory };
enum class Selection { BestVal, Final };

struct DatasetConfig {
  DataSource source = DataSource::Synthetic;
  SynthConfig synth;
  std::filesystem::path root;  // directory source
  ImageDirOptions dir;
  bool standardize = true;
};

/// One entry of the mode list. Simultaneous runs expand to one run per lambda.
struct ModeSpec {
  TrainMode kind = TrainMode::Baseline;
  double dropout = 0.0;
  std::vector<double> lambdas;

  std::string label() const;  // "baseline", "dropout0.5", "sl"
};

struct InterpretConfig {
  std::vector<std::size_t> layers;  // empty: every spatial layer
  std::size_t top_classes = 10;
  std::size_t top_instances = 3;
  double overlay_opacity = 0.5;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds{0};
  std::size_t workers = 1;
  double reduce = 1.0;
  std::filesystem::path output = "out";
  DatasetConfig dataset;
  ClassifierShape model;  // k, m and input are filled from the dataset
  TrainConfig train;      // mode, seed and lambda are set per run
  std::size_t pretrain_epochs = 0;
  double pretrain_learning_rate = 0.01;
  Selection selection = Selection::BestVal;
  std::vector<ModeSpec> modes;
  std::vector<double> sweep_lambdas;
  InterpretConfig interpret;

  void validate() const;
};

/// Parses the YAML experiment schema (see configs/). Throws ConfigError with
/// the offending field and line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Dataset for one seed: generated (synthetic) or loaded, reduced, standardized.
struct PreparedData {
  GroupedDataset data;
  Standardization standardization;
  std::vector<std::string> warnings;
};
PreparedData prepare_dataset(const ExperimentConfig& config, std::uint64_t seed);

/// One (mode, lambda, seed) training run.
struct RunSpec {
  std::string id;  // e.g. "sl_l0.7_s3"
  ModeSpec mode;
  double lambda = 1.0;
  std::uint64_t seed = 0;
};

struct RunRecord {
  RunSpec spec;
  std::size_t best_epoch = 0;
  std::size_t epochs = 0;
  double val_dacc = 0.0;  // of the selected model
  EvaluationReport test;
  double final_layer_corr = 0.0;  // mean |pearson| of the last spatial layer, test set
  std::string error;              // non-empty when the run failed
};

/// Initial weights shared by every mode of one seed: the base model and its
/// multi-group extension draw from the same streams.
Model initial_model(const ExperimentConfig& config, const GroupedDataset& data, const ModeSpec& mode,
                    std::uint64_t seed);

/// Trains and evaluates one run, writing history_<id>.csv and runs/<id>/
/// (best.ckpt, final.ckpt, the test report and roc_<class>.csv) under `out`.
RunRecord execute_run(const ExperimentConfig& config, const PreparedData& data, const RunSpec& run,
                      const std::filesystem::path& out);

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::filesystem::path summary_csv;
  bool ok() const;
};

using RunCallback = std::function<void(const RunRecord&)>;
/// Expands modes x lambdas x seeds, runs them on up to `workers` threads and
/// writes summary.csv (per-run rows followed by mean and std rows per mode).
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out,
                                const RunCallback& on_run = {});

struct SweepPoint {
  double lambda = 0.0;
  double mean_val = 0.0;
  double std_val = 0.0;
  double mean_test = 0.0;
  double std_test = 0.0;
  double mean_corr = 0.0;
  std::size_t n = 0;
};

struct SweepResult {
  ExperimentResult runs;
  std::vector<SweepPoint> points;
  SweepPoint baseline;  // lambda is NaN
  double best_lambda = 0.0;
};

/// Baseline plus one simultaneous run per lambda per seed. Writes summary.csv,
/// sweep.csv, sweep.svg and sweep_summary.txt.
SweepResult lambda_sweep(const ExperimentConfig& config, const std::filesystem::path& out,
                         const RunCallback& on_run = {});

/// Writes the evaluation report of `model` on the test split into `out`
/// (see write_report, plus roc_<class>.csv).
EvaluationReport evaluate_export(const Model& model, const GroupedDataset& data, const std::filesystem::path& out);

struct InterpretExport {
  std::vector<std::string> notices;
  std::vector<std::filesystem::path> files;
};

/// layer_corr.csv for `model` (and `compare`, side by side, when given),
/// plus top_aux.csv and Grad-CAM overlays when `model` has an auxiliary head.
InterpretExport interpret_export(const Model& model, const std::optional<Model>& compare, const PreparedData& data,
                                 const InterpretConfig& config, const std::filesystem::path& out,
                                 const std::string& label = "model", const std::string& compare_label = "compare");

// ---------------------------------------------------------------------------
// Plots

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional symmetric error bars
};

struct PlotStyle {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::optional<double> baseline;  // dashed horizontal reference
  std::string baseline_label = "baseline";
  int width = 640;
  int height = 420;
};

/// Standalone SVG line plot. Throws InvalidArgument for no series, an empty
/// series, mismatched lengths or non-finite values.
std::string render_svg(const std::vector<Series>& series, const PlotStyle& style);
void emit_plot(const std::vector<Series>& series, const PlotStyle& style, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// CSV helpers shared with the tools

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);
/// report.csv (metric,class,value), confusion.csv and report.json in `dir`.
void write_report(const EvaluationReport& report, const std::filesystem::path& dir);
void write_roc_csvs(const Tensor& target_probs, std::span<const std::size_t> labels, const std::filesystem::path& dir);

/// Shortest round-trip decimal for a double ("nan" for NaN).
std::string fmt_double(double v);

}  // namespace simlearn
