#include "simlearn/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "simlearn/checkpoint.hpp"
#include "simlearn/errors.hpp"
#include "simlearn/image_io.hpp"

namespace simlearn {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool ExperimentResult::ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.error.empty(); });
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::vector<std::size_t> target_labels(const std::vector<Sample>& samples) {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.class_index);
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); 0 for a single value.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return v.empty() ? kNaN : 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Copies trainable parameters in layer order; the two specs may differ in
/// parameter-free layers (dropout).
void copy_trainable_in_order(const Model& from, Model& to) {
  std::vector<std::size_t> a, b;
  for (std::size_t i = 0; i < from.spec.layers.size(); ++i)
    if (from.spec.layers[i].trainable()) a.push_back(i);
  for (std::size_t i = 0; i < to.spec.layers.size(); ++i)
    if (to.spec.layers[i].trainable()) b.push_back(i);
  if (a.size() != b.size()) throw InvalidState("models differ in trainable layers");
  for (std::size_t j = 0; j < a.size(); ++j) {
    to.params.get(weight_name(b[j])) = from.params.get(weight_name(a[j]));
    to.params.get(bias_name(b[j])) = from.params.get(bias_name(a[j]));
  }
}

ClassifierShape shape_for(const ExperimentConfig& cfg, const GroupedDataset& data, double dropout) {
  ClassifierShape s = cfg.model;
  s.input = data.sample_shape;
  s.k = data.layout.k;
  s.m = 0;
  s.dropout = dropout;
  return s;
}

/// Base (k-output, no dropout) initial model for one seed, pre-trained when configured.
Model base_initial_model(const ExperimentConfig& cfg, const GroupedDataset& data, std::uint64_t seed) {
  Rng init(mix_seed(seed, 1));
  Model base = Model::initialize(make_classifier(shape_for(cfg, data, 0.0)), init);
  if (cfg.pretrain_epochs > 0) {
    TrainConfig pc = cfg.train;
    pc.epochs = cfg.pretrain_epochs;
    pc.learning_rate = cfg.pretrain_learning_rate;
    pc.seed = mix_seed(seed, 4);
    Rng head_rng(mix_seed(seed, 5));
    base = pretrain_features(base, data, pc, head_rng);
  }
  return base;
}

Model model_for_mode(const ExperimentConfig& cfg, const GroupedDataset& data, const ModeSpec& mode,
                     std::uint64_t seed, const Model& base) {
  switch (mode.kind) {
    case TrainMode::Baseline: return base;
    case TrainMode::Dropout: {
      Rng unused(0);
      Model m = Model::initialize(make_classifier(shape_for(cfg, data, mode.dropout)), unused);
      copy_trainable_in_order(base, m);
      return m;
    }
    case TrainMode::Simultaneous: {
      Rng ext(mix_seed(seed, 2));
      return extend_multi_group(base, data.layout.m, ext);
    }
  }
  throw InvalidArgument("unknown mode");
}

std::string run_id(const ModeSpec& mode, double lambda, std::uint64_t seed) {
  std::string id = mode.label();
  if (mode.kind == TrainMode::Simultaneous) id += "_l" + fmt_double(lambda);
  return id + "_s" + std::to_string(seed);
}

RunRecord execute_with_base(const ExperimentConfig& cfg, const PreparedData& prepared, const RunSpec& run,
                            const Model& base, const fs::path& out) {
  const GroupedDataset& data = prepared.data;
  RunRecord rec;
  rec.spec = run;
  TrainConfig tc = cfg.train;
  tc.mode = run.mode.kind;
  tc.h.lambda = run.lambda;
  tc.seed = mix_seed(run.seed, 3);
  TrainResult res;
  try {
    res = train(model_for_mode(cfg, data, run.mode, run.seed, base), data, tc);
  } catch (const DivergenceError& e) {
    rec.error = e.what();
    return rec;
  }
  const bool best = cfg.selection == Selection::BestVal;
  const Model& selected = best ? res.best_model : res.final_model;
  rec.epochs = res.history.size();
  rec.best_epoch = best ? res.best_epoch : res.history.size();
  rec.val_dacc = best ? res.best_val_dacc : res.history.back().val_dacc;

  const fs::path run_dir = out / "runs" / run.id;
  fs::create_directories(run_dir);
  write_history_csv(res.history, out / ("history_" + run.id + ".csv"));
  checkpoint_save(Checkpoint{res.best_model, std::nullopt, std::nullopt}, run_dir / "best.ckpt");
  checkpoint_save(res.checkpoint(), run_dir / "final.ckpt");
  if (!data.target_test.empty()) {
    rec.test = evaluate_export(selected, data, run_dir);
    const auto layers = spatial_layers(selected.spec);
    rec.final_layer_corr = kNaN;
    if (!layers.empty()) {
      const std::size_t last[] = {layers.back()};
      try {
        rec.final_layer_corr = layer_correlation(selected, data.target_test, last).layers.at(0).mean_abs;
      } catch (const InvalidArgument&) {
        // fewer than two classes in the test split
      }
    }
  } else {
    rec.test.accuracy = rec.test.dacc = rec.test.inter_group_error_rate = kNaN;
    rec.test.auc.macro = kNaN;
    rec.final_layer_corr = kNaN;
  }
  return rec;
}

struct SeedContext {
  PreparedData data;
  Model base;
};

/// Runs `f(i)` for i in [0, n) on up to `workers` threads. Exceptions are
/// rethrown (first by index) after every worker has stopped.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n);
  if (threads <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<RunSpec> expand_runs(const std::vector<ModeSpec>& modes, const std::vector<std::uint64_t>& seeds) {
  std::vector<RunSpec> runs;
  for (auto seed : seeds) {
    for (const auto& mode : modes) {
      if (mode.kind == TrainMode::Simultaneous) {
        for (double l : mode.lambdas) runs.push_back({run_id(mode, l, seed), mode, l, seed});
      } else {
        runs.push_back({run_id(mode, 1.0, seed), mode, 1.0, seed});
      }
    }
  }
  return runs;
}

std::string group_key(const RunSpec& r) {
  return r.mode.label() + (r.mode.kind == TrainMode::Simultaneous ? "_l" + fmt_double(r.lambda) : "");
}

void write_summary(const std::vector<RunRecord>& runs, const fs::path& path) {
  auto out = open_out(path);
  out << "run,mode,lambda,dropout,seed,best_epoch,val_dacc,test_dacc,test_accuracy,test_macro_auc,"
         "test_inter_group_error,final_layer_corr,status\n";
  auto lambda_str = [](const RunSpec& s) {
    return s.mode.kind == TrainMode::Simultaneous ? fmt_double(s.lambda) : std::string();
  };
  auto dropout_str = [](const RunSpec& s) {
    return s.mode.kind == TrainMode::Dropout ? fmt_double(s.mode.dropout) : std::string();
  };
  for (const auto& r : runs) {
    out << r.spec.id << ',' << train_mode_name(r.spec.mode.kind) << ',' << lambda_str(r.spec) << ','
        << dropout_str(r.spec) << ',' << r.spec.seed << ',';
    if (!r.error.empty()) {
      out << ",,,,,,,diverged\n";
      continue;
    }
    out << r.best_epoch << ',' << fmt_double(r.val_dacc) << ',' << fmt_double(r.test.dacc) << ','
        << fmt_double(r.test.accuracy) << ',' << fmt_double(r.test.auc.macro) << ','
        << fmt_double(r.test.inter_group_error_rate) << ',' << fmt_double(r.final_layer_corr) << ",ok\n";
  }
  // Aggregates per (mode, lambda, dropout), in first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) {
    const auto key = group_key(r.spec);
    if (!groups.count(key)) order.push_back(key);
    groups[key];
    if (r.error.empty()) groups[key].push_back(&r);
  }
  for (const auto& key : order) {
    const auto& members = groups[key];
    if (members.empty()) continue;
    const RunSpec& spec = members.front()->spec;
    auto column = [&](auto get) {
      std::vector<double> v;
      for (const auto* r : members) v.push_back(get(*r));
      return v;
    };
    const std::vector<std::vector<double>> cols = {
        column([](const RunRecord& r) { return r.val_dacc; }),
        column([](const RunRecord& r) { return r.test.dacc; }),
        column([](const RunRecord& r) { return r.test.accuracy; }),
        column([](const RunRecord& r) { return r.test.auc.macro; }),
        column([](const RunRecord& r) { return r.test.inter_group_error_rate; }),
        column([](const RunRecord& r) { return r.final_layer_corr; }),
    };
    for (const char* stat : {"mean", "std"}) {
      out << stat << ',' << train_mode_name(spec.mode.kind) << ',' << lambda_str(spec) << ',' << dropout_str(spec)
          << ",,,";
      for (std::size_t c = 0; c < cols.size(); ++c)
        out << (c ? "," : "") << fmt_double(stat[0] == 'm' ? mean_of(cols[c]) : std_of(cols[c]));
      out << ",n=" << members.size() << '\n';
    }
  }
}

ExperimentResult run_all(const ExperimentConfig& cfg, const std::vector<RunSpec>& specs, const fs::path& out,
                         const RunCallback& on_run) {
  fs::create_directories(out);
  std::vector<SeedContext> contexts(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t i) {
    contexts[i].data = prepare_dataset(cfg, cfg.seeds[i]);
    contexts[i].base = base_initial_model(cfg, contexts[i].data.data, cfg.seeds[i]);
  });
  std::map<std::uint64_t, const SeedContext*> by_seed;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) by_seed[cfg.seeds[i]] = &contexts[i];

  ExperimentResult result;
  result.runs.resize(specs.size());
  std::mutex report_mutex;
  parallel_for(specs.size(), cfg.workers, [&](std::size_t i) {
    const SeedContext& ctx = *by_seed.at(specs[i].seed);
    result.runs[i] = execute_with_base(cfg, ctx.data, specs[i], ctx.base, out);
    if (on_run) {
      std::lock_guard lock(report_mutex);
      on_run(result.runs[i]);
    }
  });
  result.summary_csv = out / "summary.csv";
  write_summary(result.runs, result.summary_csv);
  return result;
}

}  // namespace

PreparedData prepare_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  PreparedData p;
  if (cfg.dataset.source == DataSource::Synthetic) {
    p.data = synth_generate(cfg.dataset.synth, seed);
  } else {
    p.data = load_image_dir(cfg.dataset.root, cfg.dataset.dir, &p.warnings);
  }
  if (cfg.reduce < 1.0) p.data = reduce_train(p.data, cfg.reduce, mix_seed(seed, 6));
  if (cfg.dataset.standardize) {
    p.standardization = fit_standardization(p.data);
    apply_standardization(p.data, p.standardization);
  }
  return p;
}

Model initial_model(const ExperimentConfig& config, const GroupedDataset& data, const ModeSpec& mode,
                    std::uint64_t seed) {
  return model_for_mode(config, data, mode, seed, base_initial_model(config, data, seed));
}

RunRecord execute_run(const ExperimentConfig& config, const PreparedData& data, const RunSpec& run,
                      const fs::path& out) {
  return execute_with_base(config, data, run, base_initial_model(config, data.data, run.seed), out);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const fs::path& out, const RunCallback& on_run) {
  config.validate();
  if (config.modes.empty()) throw ConfigError("modes", 0, "no modes to run");
  return run_all(config, expand_runs(config.modes, config.seeds), out, on_run);
}

SweepResult lambda_sweep(const ExperimentConfig& config, const fs::path& out, const RunCallback& on_run) {
  config.validate();
  if (config.sweep_lambdas.empty()) throw ConfigError("sweep.lambdas", 0, "lambda grid is empty");
  ModeSpec base;
  ModeSpec sl{TrainMode::Simultaneous, 0.0, config.sweep_lambdas};
  SweepResult sweep;
  sweep.runs = run_all(config, expand_runs({base, sl}, config.seeds), out, on_run);

  auto point = [&](auto pick, double lambda) {
    std::vector<double> val, test, corr;
    for (const auto& r : sweep.runs.runs)
      if (r.error.empty() && pick(r.spec)) {
        val.push_back(r.val_dacc);
        test.push_back(r.test.dacc);
        corr.push_back(r.final_layer_corr);
      }
    return SweepPoint{lambda, mean_of(val), std_of(val), mean_of(test), std_of(test), mean_of(corr), val.size()};
  };
  sweep.baseline = point([](const RunSpec& s) { return s.mode.kind == TrainMode::Baseline; }, kNaN);
  double best = -1.0;
  for (double l : config.sweep_lambdas) {
    const auto p = point([&](const RunSpec& s) { return s.mode.kind == TrainMode::Simultaneous && s.lambda == l; }, l);
    sweep.points.push_back(p);
    if (p.n > 0 && p.mean_val > best) {
      best = p.mean_val;
      sweep.best_lambda = l;
    }
  }

  auto csv = open_out(out / "sweep.csv");
  csv << "lambda,mean_val_dacc,std_val_dacc,mean_test_dacc,std_test_dacc,mean_final_layer_corr,n\n";
  auto row = [&](const std::string& label, const SweepPoint& p) {
    csv << label << ',' << fmt_double(p.mean_val) << ',' << fmt_double(p.std_val) << ',' << fmt_double(p.mean_test)
        << ',' << fmt_double(p.std_test) << ',' << fmt_double(p.mean_corr) << ',' << p.n << '\n';
  };
  for (const auto& p : sweep.points) row(fmt_double(p.lambda), p);
  row("baseline", sweep.baseline);

  Series s{"simultaneous learning", {}, {}, {}};
  for (const auto& p : sweep.points) {
    if (p.n == 0) continue;
    s.x.push_back(p.lambda);
    s.y.push_back(p.mean_val);
    s.err.push_back(p.std_val);
  }
  if (!s.x.empty()) {
    PlotStyle style;
    style.title = "Validation dacc vs lambda";
    style.x_label = "lambda";
    style.y_label = "mean validation dacc";
    if (sweep.baseline.n > 0) style.baseline = sweep.baseline.mean_val;
    emit_plot({s}, style, out / "sweep.svg");
  }

  auto txt = open_out(out / "sweep_summary.txt");
  const auto it = std::find_if(sweep.points.begin(), sweep.points.end(),
                               [&](const SweepPoint& p) { return p.lambda == sweep.best_lambda; });
  txt << "best_lambda: " << fmt_double(sweep.best_lambda) << '\n';
  if (it != sweep.points.end()) {
    txt << "best_mean_val_dacc: " << fmt_double(it->mean_val) << '\n'
        << "best_mean_test_dacc: " << fmt_double(it->mean_test) << '\n'
        << "best_std_test_dacc: " << fmt_double(it->std_test) << '\n'
        << "best_mean_final_layer_corr: " << fmt_double(it->mean_corr) << '\n';
  }
  txt << "baseline_mean_val_dacc: " << fmt_double(sweep.baseline.mean_val) << '\n'
      << "baseline_std_val_dacc: " << fmt_double(sweep.baseline.std_val) << '\n'
      << "baseline_mean_test_dacc: " << fmt_double(sweep.baseline.mean_test) << '\n'
      << "baseline_std_test_dacc: " << fmt_double(sweep.baseline.std_test) << '\n'
      << "baseline_mean_final_layer_corr: " << fmt_double(sweep.baseline.mean_corr) << '\n'
      << "seeds: " << config.seeds.size() << '\n';
  return sweep;
}

// ---------------------------------------------------------------------------
// reports

void write_history_csv(const std::vector<EpochRecord>& history, const fs::path& path) {
  auto out = open_out(path);
  out << "epoch,train_loss,val_dacc\n";
  for (const auto& r : history) out << r.epoch << ',' << fmt_double(r.train_loss) << ',' << fmt_double(r.val_dacc) << '\n';
}

void write_report(const EvaluationReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto csv = open_out(dir / "report.csv");
    csv << "metric,class,value\n";
    csv << "accuracy,," << fmt_double(report.accuracy) << '\n';
    csv << "dacc,," << fmt_double(report.dacc) << '\n';
    csv << "macro_auc,," << fmt_double(report.auc.macro) << '\n';
    csv << "inter_group_error_rate,," << fmt_double(report.inter_group_error_rate) << '\n';
    for (const auto& c : report.auc.per_class)
      csv << "auc," << c.class_index << ',' << (c.skipped ? std::string("skipped") : fmt_double(c.auc)) << '\n';
  }
  {
    auto csv = open_out(dir / "confusion.csv");
    const std::size_t k = report.confusion.size();
    csv << "true\\pred";
    for (std::size_t c = 0; c < k; ++c) csv << ',' << c;
    csv << '\n';
    for (std::size_t r = 0; r < k; ++r) {
      csv << r;
      for (auto v : report.confusion[r]) csv << ',' << v;
      csv << '\n';
    }
  }
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::ordered_json j;
  j["accuracy"] = num(report.accuracy);
  j["dacc"] = num(report.dacc);
  j["macro_auc"] = num(report.auc.macro);
  j["inter_group_error_rate"] = num(report.inter_group_error_rate);
  j["per_class_auc"] = nlohmann::json::array();
  for (const auto& c : report.auc.per_class) {
    j["per_class_auc"].push_back({{"class", c.class_index}, {"auc", c.skipped ? nlohmann::json(nullptr) : num(c.auc)},
                                  {"skipped", c.skipped}});
  }
  j["confusion"] = report.confusion;
  open_out(dir / "report.json") << j.dump(2) << '\n';
}

void write_roc_csvs(const Tensor& target_probs, std::span<const std::size_t> labels, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t c = 0; c < target_probs.dim(1); ++c) {
    auto out = open_out(dir / ("roc_" + std::to_string(c) + ".csv"));
    out << "fpr,tpr\n";
    for (const auto& p : roc_curve(target_probs, labels, c)) out << fmt_double(p.fpr) << ',' << fmt_double(p.tpr) << '\n';
  }
}

EvaluationReport evaluate_export(const Model& model, const GroupedDataset& data, const fs::path& out) {
  if (data.target_test.empty()) throw InvalidDataset("test split is empty");
  const GroupLayout layout{model.spec.target_outputs(), model.spec.aux_outputs()};
  if (layout.k != data.layout.k) throw InvalidArgument("model has " + std::to_string(layout.k) +
                                                       " target outputs, dataset has " + std::to_string(data.layout.k));
  const Tensor probs = predict_proba(model, stack_features(data.target_test));
  const auto labels = target_labels(data.target_test);
  const EvaluationReport report = evaluate_predictions(probs, labels, layout);
  write_report(report, out);
  write_roc_csvs(target_scores(probs, layout), labels, out);
  return report;
}

// ---------------------------------------------------------------------------
// interpretability

InterpretExport interpret_export(const Model& model, const std::optional<Model>& compare, const PreparedData& prepared,
                                 const InterpretConfig& config, const fs::path& out, const std::string& label,
                                 const std::string& compare_label) {
  const GroupedDataset& data = prepared.data;
  InterpretExport ex;
  fs::create_directories(out);

  auto layers_for = [&](const Model& m) {
    return config.layers.empty() ? spatial_layers(m.spec) : config.layers;
  };
  const auto layers = layers_for(model);
  if (layers.empty()) throw InvalidArgument("model has no spatial layers to correlate");
  const auto report = layer_correlation(model, data.target_test, layers);
  std::optional<LayerCorrelationReport> other;
  if (compare) {
    const auto cl = layers_for(*compare);
    if (cl.size() != layers.size()) throw InvalidArgument("compared models have different spatial layer counts");
    other = layer_correlation(*compare, data.target_test, cl);
  }
  for (auto c : report.skipped_classes) ex.notices.push_back("class " + std::to_string(c) + " has no test samples; skipped");

  {
    const fs::path path = out / "layer_corr.csv";
    auto csv = open_out(path);
    csv << "position,layer,name,mean_abs_" << label;
    if (other) csv << ",mean_abs_" << compare_label;
    csv << ",degenerate_pairs_" << label;
    if (other) csv << ",degenerate_pairs_" << compare_label;
    csv << '\n';
    for (std::size_t i = 0; i < report.layers.size(); ++i) {
      const auto& l = report.layers[i];
      csv << i << ',' << l.layer << ',' << l.layer_name << ',' << fmt_double(l.mean_abs);
      if (other) csv << ',' << fmt_double(other->layers[i].mean_abs);
      csv << ',' << l.degenerate_pairs;
      if (other) csv << ',' << other->layers[i].degenerate_pairs;
      csv << '\n';
    }
    ex.files.push_back(path);

    std::vector<Series> series;
    Series a{label, {}, {}, {}};
    for (std::size_t i = 0; i < report.layers.size(); ++i) {
      a.x.push_back(static_cast<double>(i));
      a.y.push_back(report.layers[i].mean_abs);
    }
    series.push_back(a);
    if (other) {
      Series b{compare_label, {}, {}, {}};
      for (std::size_t i = 0; i < other->layers.size(); ++i) {
        b.x.push_back(static_cast<double>(i));
        b.y.push_back(other->layers[i].mean_abs);
      }
      series.push_back(b);
    }
    PlotStyle style;
    style.title = "Layer correlation";
    style.x_label = "spatial layer position";
    style.y_label = "mean |pearson|";
    emit_plot(series, style, out / "layer_corr.svg");
    ex.files.push_back(out / "layer_corr.svg");
  }

  if (model.spec.aux_outputs() == 0) {
    ex.notices.push_back("model has no auxiliary head; top-activating class table and Grad-CAM overlays skipped");
    return ex;
  }
  if (data.aux_pool.empty()) {
    ex.notices.push_back("dataset has no auxiliary pool; top-activating class table and Grad-CAM overlays skipped");
    return ex;
  }
  const GroupLayout layout{model.spec.target_outputs(), model.spec.aux_outputs()};
  const auto ranked = top_activating_aux(model, data.aux_pool, layout, config.top_classes, config.top_instances);
  {
    const fs::path path = out / "top_aux.csv";
    auto csv = open_out(path);
    csv << "rank,aux_class,name,class_score,sample_count,truncated,instance_rank,pool_index,instance_score\n";
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      const auto& c = ranked[r];
      const std::string name = c.class_index < data.aux_class_names.size() ? data.aux_class_names[c.class_index] : "";
      for (std::size_t i = 0; i < c.top_instances.size(); ++i) {
        csv << r + 1 << ',' << c.class_index << ',' << name << ',' << fmt_double(c.score) << ',' << c.sample_count << ','
            << (c.truncated ? 1 : 0) << ',' << i + 1 << ',' << c.top_instances[i].pool_index << ','
            << fmt_double(c.top_instances[i].score) << '\n';
      }
    }
    ex.files.push_back(path);
  }
  if (!last_conv_layer(model.spec)) {
    ex.notices.push_back("model has no convolutional layer; Grad-CAM overlays skipped");
    return ex;
  }
  std::vector<std::size_t> target_outputs(layout.k);
  for (std::size_t t = 0; t < layout.k; ++t) target_outputs[t] = t;
  const fs::path cam_dir = out / "gradcam";
  fs::create_directories(cam_dir);
  const auto& st = prepared.standardization;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    for (std::size_t i = 0; i < ranked[r].top_instances.size(); ++i) {
      const auto idx = ranked[r].top_instances[i].pool_index;
      const Tensor& img = data.aux_pool[idx].features;
      const std::string stem = "rank" + std::to_string(r + 1) + "_aux" + std::to_string(ranked[r].class_index) + "_" +
                               std::to_string(i + 1);
      const Heatmap hm = grad_cam(model, img, target_outputs, "aux_pool[" + std::to_string(idx) + "]");
      Tensor raw = img;
      for (auto& v : raw.values()) v = v * st.stddev + st.mean;
      write_pgm(cam_dir / (stem + "_heatmap.pgm"), heatmap_image(hm));
      write_png(cam_dir / (stem + "_overlay.png"), heatmap_overlay(raw, hm, config.overlay_opacity));
      ex.files.push_back(cam_dir / (stem + "_overlay.png"));
    }
  }
  return ex;
}

}  // namespace simlearn
