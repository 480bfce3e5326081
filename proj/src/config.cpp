#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "simlearn/errors.hpp"
#include "simlearn/experiment.hpp"

namespace simlearn {

std::string ModeSpec::label() const {
  switch (kind) {
    case TrainMode::Baseline: return "baseline";
    case TrainMode::Dropout: return "dropout" + fmt_double(dropout);
    case TrainMode::Simultaneous: return "sl";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (version != kConfigVersion) throw ConfigError("version", 0, "unsupported version " + std::to_string(version));
  if (seeds.empty()) throw ConfigError("seeds", 0, "at least one seed is required");
  if (workers < 1) throw ConfigError("workers", 0, "must be >= 1");
  if (!(reduce > 0.0 && reduce <= 1.0)) throw ConfigError("dataset.reduce", 0, "must be in (0, 1]");
  for (const auto& m : modes) {
    if (m.kind == TrainMode::Dropout && !(m.dropout >= 0.0 && m.dropout < 1.0))
      throw ConfigError("modes", 0, "dropout rate must be in [0, 1)");
    if (m.kind == TrainMode::Simultaneous && m.lambdas.empty()) throw ConfigError("modes", 0, "sl needs lambdas");
    for (double l : m.lambdas)
      if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("modes", 0, "lambda must be in [0, 1]");
  }
  for (double l : sweep_lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep.lambdas", 0, "lambda must be in [0, 1]");
  try {
    train.validate();
    dataset.synth.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("", 0, e.what());
  }
}

namespace {

std::size_t line_of(const YAML::Node& node) {
  const auto mark = node.Mark();
  return mark.line >= 0 ? static_cast<std::size_t>(mark.line) + 1 : 0;
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const YAML::Node& map, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!map.IsMap()) throw ConfigError(path, line_of(map), "expected a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError(join(path, key), line_of(kv.first), "unknown key");
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& path, const char* what) {
  if (!node.IsScalar()) throw ConfigError(path, line_of(node), std::string("expected ") + what);
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, line_of(node), std::string("expected ") + what + ", got '" + node.Scalar() + "'");
  }
}

double number(const YAML::Node& node, const std::string& path) {
  const double v = scalar<double>(node, path, "a number");
  if (!std::isfinite(v)) throw ConfigError(path, line_of(node), "must be finite");
  return v;
}

std::size_t count(const YAML::Node& node, const std::string& path) {
  const double v = number(node, path);
  if (v < 0 || v != std::floor(v)) throw ConfigError(path, line_of(node), "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

double in_range(const YAML::Node& node, const std::string& path, double lo, double hi, bool lo_open = false) {
  const double v = number(node, path);
  if (v > hi || v < lo || (lo_open && v == lo)) {
    throw ConfigError(path, line_of(node),
                      "must be in " + std::string(lo_open ? "(" : "[") + fmt_double(lo) + ", " + fmt_double(hi) + "]");
  }
  return v;
}

std::vector<std::size_t> count_list(const YAML::Node& node, const std::string& path) {
  std::vector<std::size_t> out;
  if (node.IsScalar()) return {count(node, path)};
  if (!node.IsSequence()) throw ConfigError(path, line_of(node), "expected an integer or a list of integers");
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(count(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<double> lambda_list(const YAML::Node& node, const std::string& path) {
  std::vector<double> out;
  if (node.IsScalar()) return {in_range(node, path, 0.0, 1.0)};
  if (!node.IsSequence() || node.size() == 0) throw ConfigError(path, line_of(node), "expected a non-empty list of lambdas");
  for (std::size_t i = 0; i < node.size(); ++i)
    out.push_back(in_range(node[i], path + "[" + std::to_string(i) + "]", 0.0, 1.0));
  return out;
}

bool boolean(const YAML::Node& node, const std::string& path) { return scalar<bool>(node, path, "true or false"); }

void parse_synth(const YAML::Node& n, const std::string& path, SynthConfig& s) {
  check_keys(n, path,
             {"k", "m", "image_size", "train_per_class", "val_per_class", "test_per_class", "aux_per_class", "noise",
              "aux_noise", "contrast", "jitter", "target_frequency", "aux_frequency", "aux_background", "aux_wave"});
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    const auto p = join(path, key);
    const auto& v = kv.second;
    if (key == "k") s.k = count(v, p);
    else if (key == "m") s.m = count(v, p);
    else if (key == "image_size") s.image_size = count(v, p);
    else if (key == "train_per_class") s.train_per_class = count_list(v, p);
    else if (key == "val_per_class") s.val_per_class = count(v, p);
    else if (key == "test_per_class") s.test_per_class = count(v, p);
    else if (key == "aux_per_class") s.aux_per_class = count(v, p);
    else if (key == "noise") s.noise = in_range(v, p, 0.0, 1e6);
    else if (key == "aux_noise") s.aux_noise = in_range(v, p, 0.0, 1e6);
    else if (key == "contrast") s.contrast = in_range(v, p, 0.0, 1.0);
    else if (key == "jitter") s.jitter = in_range(v, p, 0.0, 1.0);
    else if (key == "target_frequency") s.target_frequency = in_range(v, p, 0.0, 0.5);
    else if (key == "aux_frequency") s.aux_frequency = in_range(v, p, 0.0, 0.5);
    else if (key == "aux_background") s.aux_background = in_range(v, p, 0.0, 1.0);
    else if (key == "aux_wave") {
      const auto w = scalar<std::string>(v, p, "'sine' or 'square'");
      if (w != "sine" && w != "square") throw ConfigError(p, line_of(v), "expected 'sine' or 'square'");
      s.aux_square = w == "square";
    }
  }
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, line_of(n), e.what());
  }
}

void parse_directory(const YAML::Node& n, const std::string& path, DatasetConfig& d) {
  check_keys(n, path,
             {"root", "height", "width", "channels", "require_aux", "val_fraction", "test_fraction", "split_seed"});
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    const auto p = join(path, key);
    const auto& v = kv.second;
    if (key == "root") d.root = scalar<std::string>(v, p, "a path");
    else if (key == "height") d.dir.height = count(v, p);
    else if (key == "width") d.dir.width = count(v, p);
    else if (key == "channels") {
      d.dir.channels = count(v, p);
      if (d.dir.channels != 1 && d.dir.channels != 3) throw ConfigError(p, line_of(v), "must be 1 or 3");
    } else if (key == "require_aux") d.dir.require_aux = boolean(v, p);
    else if (key == "val_fraction") d.dir.val_fraction = in_range(v, p, 0.0, 1.0);
    else if (key == "test_fraction") d.dir.test_fraction = in_range(v, p, 0.0, 1.0);
    else if (key == "split_seed") d.dir.split_seed = scalar<std::uint64_t>(v, p, "an integer");
  }
  if (d.root.empty()) throw ConfigError(join(path, "root"), line_of(n), "missing");
}

void parse_dataset(const YAML::Node& n, ExperimentConfig& cfg) {
  check_keys(n, "dataset", {"source", "standardize", "reduce", "synthetic", "directory"});
  auto& d = cfg.dataset;
  if (n["source"]) {
    const auto s = scalar<std::string>(n["source"], "dataset.source", "'synthetic' or 'directory'");
    if (s == "synthetic") d.source = DataSource::Synthetic;
    else if (s == "directory") d.source = DataSource::Directory;
    else throw ConfigError("dataset.source", line_of(n["source"]), "expected 'synthetic' or 'directory'");
  }
  if (n["standardize"]) d.standardize = boolean(n["standardize"], "dataset.standardize");
  if (n["reduce"]) cfg.reduce = in_range(n["reduce"], "dataset.reduce", 0.0, 1.0, true);
  if (n["synthetic"]) parse_synth(n["synthetic"], "dataset.synthetic", d.synth);
  if (n["directory"]) parse_directory(n["directory"], "dataset.directory", d);
  if (d.source == DataSource::Directory && !n["directory"])
    throw ConfigError("dataset.directory", line_of(n), "required when source is 'directory'");
}

void parse_model(const YAML::Node& n, ClassifierShape& m) {
  check_keys(n, "model", {"conv_channels", "conv_kernels", "conv_strides", "n1", "n2"});
  if (n["conv_channels"]) m.conv_channels = count_list(n["conv_channels"], "model.conv_channels");
  if (n["conv_kernels"]) m.conv_kernels = count_list(n["conv_kernels"], "model.conv_kernels");
  if (n["conv_strides"]) m.conv_strides = count_list(n["conv_strides"], "model.conv_strides");
  if (n["n1"]) m.n1 = count(n["n1"], "model.n1");
  if (n["n2"]) m.n2 = count(n["n2"], "model.n2");
  if (m.conv_kernels.size() != m.conv_channels.size() || m.conv_strides.size() != m.conv_channels.size())
    throw ConfigError("model", line_of(n), "conv_channels, conv_kernels and conv_strides must have equal length");
  if (m.n1 < 1 || m.n2 < 1) throw ConfigError("model", line_of(n), "n1 and n2 must be >= 1");
}

void parse_training(const YAML::Node& n, ExperimentConfig& cfg) {
  check_keys(n, "training",
             {"optimizer", "learning_rate", "epochs", "batch_size", "lambda", "alpha", "beta", "shuffle_target",
              "selection", "pretrain_epochs", "pretrain_learning_rate"});
  auto& t = cfg.train;
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    const auto p = join("training", key);
    const auto& v = kv.second;
    if (key == "optimizer") {
      try {
        t.optimizer = parse_optimizer(scalar<std::string>(v, p, "'sgd' or 'adagrad'"));
      } catch (const InvalidArgument& e) {
        throw ConfigError(p, line_of(v), e.what());
      }
    } else if (key == "learning_rate") {
      t.learning_rate = in_range(v, p, 0.0, 1e6, true);
    } else if (key == "epochs") {
      t.epochs = count(v, p);
      if (t.epochs < 1) throw ConfigError(p, line_of(v), "must be >= 1");
    } else if (key == "batch_size") {
      t.batch_size = count(v, p);
      if (t.batch_size < 2 || t.batch_size % 2) throw ConfigError(p, line_of(v), "must be an even integer >= 2");
    } else if (key == "lambda") {
      t.h.lambda = in_range(v, p, 0.0, 1.0);
    } else if (key == "alpha") {
      t.h.alpha = in_range(v, p, 0.0, 1e6);
    } else if (key == "beta") {
      t.h.beta = in_range(v, p, 0.0, 1e6);
    } else if (key == "shuffle_target") {
      t.shuffle_target = boolean(v, p);
    } else if (key == "selection") {
      const auto s = scalar<std::string>(v, p, "'best_val' or 'final'");
      if (s == "best_val") cfg.selection = Selection::BestVal;
      else if (s == "final") cfg.selection = Selection::Final;
      else throw ConfigError(p, line_of(v), "expected 'best_val' or 'final'");
    } else if (key == "pretrain_epochs") {
      cfg.pretrain_epochs = count(v, p);
    } else if (key == "pretrain_learning_rate") {
      cfg.pretrain_learning_rate = in_range(v, p, 0.0, 1e6, true);
    }
  }
}

ModeSpec parse_mode(const YAML::Node& n, const std::string& path, double default_lambda) {
  ModeSpec m;
  if (n.IsScalar()) {
    const auto s = n.as<std::string>();
    if (s == "baseline") return m;
    if (s == "sl") {
      m.kind = TrainMode::Simultaneous;
      m.lambdas = {default_lambda};
      return m;
    }
    throw ConfigError(path, line_of(n), "unknown mode '" + s + "' (expected baseline, sl, {dropout: r} or {sl: [...]})");
  }
  if (!n.IsMap() || n.size() != 1) throw ConfigError(path, line_of(n), "expected a mode name or a one-key mapping");
  const auto key = n.begin()->first.as<std::string>();
  const auto& v = n.begin()->second;
  if (key == "dropout") {
    m.kind = TrainMode::Dropout;
    m.dropout = number(v, path + ".dropout");
    if (!(m.dropout >= 0.0 && m.dropout < 1.0)) throw ConfigError(path + ".dropout", line_of(v), "must be in [0, 1)");
  } else if (key == "sl") {
    m.kind = TrainMode::Simultaneous;
    m.lambdas = lambda_list(v, path + ".sl");
  } else {
    throw ConfigError(path + "." + key, line_of(n), "unknown mode");
  }
  return m;
}

void parse_interpret(const YAML::Node& n, InterpretConfig& c) {
  check_keys(n, "interpret", {"layers", "top_classes", "top_instances", "overlay_opacity"});
  if (n["layers"]) {
    const auto& l = n["layers"];
    if (l.IsScalar() && l.as<std::string>() == "all") c.layers.clear();
    else c.layers = count_list(l, "interpret.layers");
  }
  if (n["top_classes"]) c.top_classes = count(n["top_classes"], "interpret.top_classes");
  if (n["top_instances"]) c.top_instances = count(n["top_instances"], "interpret.top_instances");
  if (n["overlay_opacity"]) c.overlay_opacity = in_range(n["overlay_opacity"], "interpret.overlay_opacity", 0.0, 1.0);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", static_cast<std::size_t>(e.mark.line) + 1, e.msg);
  }
  if (!root.IsMap()) throw ConfigError("", 1, "top level must be a mapping");
  check_keys(root, "",
             {"version", "name", "seeds", "workers", "output", "dataset", "model", "training", "modes", "sweep",
              "interpret"});
  ExperimentConfig cfg;
  if (!root["version"]) throw ConfigError("version", 1, "missing (expected " + std::to_string(kConfigVersion) + ")");
  cfg.version = scalar<int>(root["version"], "version", "an integer");
  if (cfg.version != kConfigVersion)
    throw ConfigError("version", line_of(root["version"]), "unsupported version " + std::to_string(cfg.version));
  if (root["name"]) cfg.name = scalar<std::string>(root["name"], "name", "a string");
  if (root["seeds"]) {
    const auto& s = root["seeds"];
    cfg.seeds.clear();
    if (s.IsScalar()) {
      cfg.seeds.push_back(scalar<std::uint64_t>(s, "seeds", "an integer"));
    } else if (s.IsSequence()) {
      for (std::size_t i = 0; i < s.size(); ++i)
        cfg.seeds.push_back(scalar<std::uint64_t>(s[i], "seeds[" + std::to_string(i) + "]", "an integer"));
    } else {
      throw ConfigError("seeds", line_of(s), "expected an integer or a list of integers");
    }
    if (cfg.seeds.empty()) throw ConfigError("seeds", line_of(s), "at least one seed is required");
  }
  if (root["workers"]) {
    cfg.workers = count(root["workers"], "workers");
    if (cfg.workers < 1) throw ConfigError("workers", line_of(root["workers"]), "must be >= 1");
  }
  if (root["output"]) cfg.output = scalar<std::string>(root["output"], "output", "a path");
  if (root["dataset"]) parse_dataset(root["dataset"], cfg);
  if (root["model"]) parse_model(root["model"], cfg.model);
  if (root["training"]) parse_training(root["training"], cfg);
  if (root["modes"]) {
    const auto& m = root["modes"];
    if (!m.IsSequence() || m.size() == 0) throw ConfigError("modes", line_of(m), "expected a non-empty list");
    for (std::size_t i = 0; i < m.size(); ++i)
      cfg.modes.push_back(parse_mode(m[i], "modes[" + std::to_string(i) + "]", cfg.train.h.lambda));
  } else {
    cfg.modes.push_back(ModeSpec{});
  }
  if (root["sweep"]) {
    check_keys(root["sweep"], "sweep", {"lambdas"});
    if (root["sweep"]["lambdas"]) cfg.sweep_lambdas = lambda_list(root["sweep"]["lambdas"], "sweep.lambdas");
  }
  if (root["interpret"]) parse_interpret(root["interpret"], cfg.interpret);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace simlearn
