#include "simlearn/grouped_data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <map>
#include <numbers>

#include "simlearn/errors.hpp"
#include "simlearn/image_io.hpp"

namespace simlearn {

void GroupedDataset::validate(bool simultaneous) const {
  layout.validate();
  auto check = [&](const std::vector<Sample>& samples, Group group, const char* name) {
    for (const auto& s : samples) {
      if (s.group != group) throw InvalidDataset(std::string(name) + ": sample has the wrong group tag");
      (void)layout.index_of(group, s.class_index);
      if (s.features.shape() != sample_shape) throw InvalidDataset(std::string(name) + ": sample shape mismatch");
    }
  };
  check(target_train, Group::Target, "target_train");
  check(target_val, Group::Target, "target_val");
  check(target_test, Group::Target, "target_test");
  check(aux_pool, Group::Auxiliary, "aux_pool");
  if (simultaneous && aux_pool.empty()) throw InvalidDataset("auxiliary pool is empty but simultaneous mode is enabled");
  if (simultaneous && layout.m == 0) throw InvalidDataset("simultaneous mode needs m >= 1 auxiliary classes");
}

LabelVector encode_label(const GroupLayout& layout, Group group, std::size_t class_index) {
  std::vector<double> v(layout.n(), 0.0);
  v[layout.index_of(group, class_index)] = 1.0;
  return LabelVector(std::move(v), group, layout);
}

LabelVector Batch::label(std::size_t row, const GroupLayout& layout) const {
  auto r = labels.row(row);
  return LabelVector(std::vector<double>(r.begin(), r.end()), provenance.at(row).group, layout);
}

std::vector<std::vector<std::size_t>> epoch_plan(std::size_t train_size, std::size_t slice_size, Rng* shuffle_rng) {
  if (slice_size == 0) throw InvalidArgument("epoch_plan: slice size must be >= 1");
  if (train_size < slice_size) {
    throw InvalidArgument("epoch_plan: " + std::to_string(train_size) + " target samples cannot fill a slice of " +
                          std::to_string(slice_size));
  }
  std::vector<std::size_t> order(train_size);
  for (std::size_t i = 0; i < train_size; ++i) order[i] = i;
  if (shuffle_rng) shuffle_rng->shuffle(std::span<std::size_t>(order));
  const std::size_t steps = train_size / slice_size;
  std::vector<std::vector<std::size_t>> plan(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    plan[s].assign(order.begin() + static_cast<std::ptrdiff_t>(s * slice_size),
                   order.begin() + static_cast<std::ptrdiff_t>((s + 1) * slice_size));
  }
  return plan;
}

namespace {

void append_row(Batch& batch, std::size_t row, const Sample& s, std::size_t sample_size, const GroupLayout& layout) {
  if (s.features.size() != sample_size) throw ShapeError("batch: sample feature size mismatch");
  std::copy(s.features.storage().begin(), s.features.storage().end(), batch.inputs.data() + row * sample_size);
  batch.labels.at(row, layout.index_of(s.group, s.class_index)) = 1.0;
}

Shape batch_shape(std::size_t rows, const Shape& sample_shape) {
  Shape shape{rows};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  return shape;
}

}  // namespace

Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices, const GroupLayout& layout) {
  if (indices.empty()) throw InvalidArgument("make_batch: no indices");
  const Shape& ss = samples[indices[0]].features.shape();
  const std::size_t size = shape_size(ss);
  Batch batch{Tensor(batch_shape(indices.size(), ss)), Tensor({indices.size(), layout.n()}), {}};
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Sample& s = samples[indices[r]];
    append_row(batch, r, s, size, layout);
    batch.provenance.push_back({s.group, indices[r]});
  }
  return batch;
}

Batch compose_batch(std::span<const Sample> target_train, std::span<const std::size_t> target_slice,
                    std::span<const Sample> aux_pool, std::vector<std::size_t>& aux_order, std::size_t batch_size,
                    const GroupLayout& layout, Rng& rng) {
  if (batch_size < 2 || batch_size % 2 != 0) throw InvalidArgument("compose_batch: batch size must be even and >= 2");
  const std::size_t half = batch_size / 2;
  if (target_slice.size() != half) throw InvalidArgument("compose_batch: target slice must hold exactly B/2 samples");
  if (aux_pool.size() < half) {
    throw InvalidArgument("compose_batch: auxiliary pool has " + std::to_string(aux_pool.size()) +
                          " samples, need at least " + std::to_string(half));
  }
  if (aux_order.size() != aux_pool.size()) {
    aux_order.resize(aux_pool.size());
    for (std::size_t i = 0; i < aux_order.size(); ++i) aux_order[i] = i;
  }
  rng.shuffle_prefix(std::span<std::size_t>(aux_order), half);

  const Shape& ss = target_train[target_slice[0]].features.shape();
  const std::size_t size = shape_size(ss);
  Batch batch{Tensor(batch_shape(batch_size, ss)), Tensor({batch_size, layout.n()}), {}};
  batch.provenance.reserve(batch_size);
  for (std::size_t r = 0; r < half; ++r) {
    const Sample& s = target_train[target_slice[r]];
    if (s.group != Group::Target) throw InvalidArgument("compose_batch: target slice holds a non-target sample");
    append_row(batch, r, s, size, layout);
    batch.provenance.push_back({Group::Target, target_slice[r]});
  }
  for (std::size_t r = 0; r < half; ++r) {
    const Sample& s = aux_pool[aux_order[r]];
    if (s.group != Group::Auxiliary) throw InvalidArgument("compose_batch: auxiliary pool holds a non-auxiliary sample");
    append_row(batch, half + r, s, size, layout);
    batch.provenance.push_back({Group::Auxiliary, aux_order[r]});
  }
  return batch;
}

Tensor stack_features(std::span<const Sample> samples) {
  if (samples.empty()) throw InvalidArgument("stack_features: no samples");
  const Shape& ss = samples[0].features.shape();
  const std::size_t size = shape_size(ss);
  Tensor out(batch_shape(samples.size(), ss));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.shape() != ss) throw ShapeError("stack_features: mismatched sample shapes");
    std::copy(samples[i].features.storage().begin(), samples[i].features.storage().end(), out.data() + i * size);
  }
  return out;
}

Tensor stack_labels(std::span<const Sample> samples, const GroupLayout& layout) {
  Tensor out({samples.size(), layout.n()});
  for (std::size_t i = 0; i < samples.size(); ++i) out.at(i, layout.index_of(samples[i].group, samples[i].class_index)) = 1.0;
  return out;
}

Standardization fit_standardization(const GroupedDataset& ds) {
  if (ds.target_train.empty()) throw InvalidDataset("cannot fit standardization: empty training set");
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const auto& s : ds.target_train) {
    for (double v : s.features.values()) {
      sum += v;
      sq += v * v;
    }
    count += s.features.size();
  }
  const double mean = sum / static_cast<double>(count);
  const double var = std::max(sq / static_cast<double>(count) - mean * mean, 0.0);
  return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

void apply_standardization(GroupedDataset& ds, const Standardization& s) {
  if (!(s.stddev > 0.0)) throw InvalidArgument("standardization stddev must be > 0");
  for (auto* part : {&ds.target_train, &ds.target_val, &ds.target_test, &ds.aux_pool}) {
    for (auto& sample : *part)
      for (auto& v : sample.features.values()) v = (v - s.mean) / s.stddev;
  }
}

GroupedDataset auxiliary_as_target(const GroupedDataset& ds) {
  if (ds.aux_pool.empty()) throw InvalidDataset("auxiliary pool is empty");
  GroupedDataset out;
  out.layout = GroupLayout{ds.layout.m, 0};
  out.sample_shape = ds.sample_shape;
  out.target_class_names = ds.aux_class_names;
  out.target_train.reserve(ds.aux_pool.size());
  for (const auto& s : ds.aux_pool) out.target_train.push_back(Sample{s.features, Group::Target, s.class_index});
  return out;
}

GroupedDataset reduce_train(const GroupedDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("reduction fraction must be in (0, 1]");
  if (fraction == 1.0) return ds;
  std::vector<std::vector<std::size_t>> by_class(ds.layout.k);
  for (std::size_t i = 0; i < ds.target_train.size(); ++i) by_class.at(ds.target_train[i].class_index).push_back(i);
  Rng rng(mix_seed(seed, 0x7265647563ULL));
  std::vector<std::size_t> keep;
  for (auto& idx : by_class) {
    if (idx.empty()) continue;
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size()))));
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, idx.size())));
  }
  std::sort(keep.begin(), keep.end());
  GroupedDataset out = ds;
  out.target_train.clear();
  for (auto i : keep) out.target_train.push_back(ds.target_train[i]);
  return out;
}

// ---------------------------------------------------------------------------
// synthetic generator

void SynthConfig::validate() const {
  if (k < 1 || m < 1) throw InvalidArgument("synth: k and m must be >= 1");
  if (image_size < 4) throw InvalidArgument("synth: image_size must be >= 4");
  if (train_per_class.empty() || (train_per_class.size() != 1 && train_per_class.size() != k)) {
    throw InvalidArgument("synth: train_per_class needs 1 or k entries");
  }
  for (auto c : train_per_class)
    if (c < 1) throw InvalidArgument("synth: per-class counts must be >= 1");
  if (val_per_class < 1 || test_per_class < 1 || aux_per_class < 1) {
    throw InvalidArgument("synth: per-class counts must be >= 1");
  }
  if (noise < 0 || aux_noise < 0 || jitter < 0) throw InvalidArgument("synth: noise and jitter must be >= 0");
}

namespace {

enum class Wave { Sine, Square };

Tensor grating(std::size_t size, double angle, double frequency, Wave wave, double background, double contrast,
               double jitter, double noise, Rng& rng) {
  const double phase = jitter * std::numbers::pi * rng.uniform(-1.0, 1.0);
  const double c = std::cos(angle), s = std::sin(angle);
  const double centre = 0.5 * static_cast<double>(size - 1);
  Tensor img({size, size, 1});
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double u = (static_cast<double>(x) - centre) * c + (static_cast<double>(y) - centre) * s;
      double w = std::cos(2.0 * std::numbers::pi * frequency * u + phase);
      if (wave == Wave::Square) w = w >= 0.0 ? 1.0 : -1.0;
      double v = background + contrast * w;
      if (noise > 0.0) v += noise * rng.normal();
      img[y * size + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace

GroupedDataset synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  GroupedDataset ds;
  ds.layout = GroupLayout{cfg.k, cfg.m};
  ds.sample_shape = Shape{cfg.image_size, cfg.image_size, 1};
  for (std::size_t c = 0; c < cfg.k; ++c) {
    // One stream per class so changing one class's count leaves the others untouched.
    Rng rng(mix_seed(seed, 1000 + c));
    const double angle = std::numbers::pi * static_cast<double>(c) / static_cast<double>(cfg.k);
    auto make = [&] {
      return Sample{grating(cfg.image_size, angle, cfg.target_frequency, Wave::Sine, 0.5, cfg.contrast, cfg.jitter,
                            cfg.noise, rng),
                    Group::Target, c};
    };
    const std::size_t n_train = cfg.train_per_class.size() == 1 ? cfg.train_per_class[0] : cfg.train_per_class[c];
    for (std::size_t i = 0; i < n_train; ++i) ds.target_train.push_back(make());
    for (std::size_t i = 0; i < cfg.val_per_class; ++i) ds.target_val.push_back(make());
    for (std::size_t i = 0; i < cfg.test_per_class; ++i) ds.target_test.push_back(make());
    ds.target_class_names.push_back("target_" + std::to_string(c));
  }
  for (std::size_t a = 0; a < cfg.m; ++a) {
    Rng rng(mix_seed(seed, 500000 + a));
    const double angle = std::numbers::pi * (static_cast<double>(a) + 0.5) / static_cast<double>(cfg.m);
    for (std::size_t i = 0; i < cfg.aux_per_class; ++i) {
      ds.aux_pool.push_back(Sample{grating(cfg.image_size, angle, cfg.aux_frequency, cfg.aux_square ? Wave::Square : Wave::Sine,
                                           cfg.aux_background, cfg.contrast, cfg.jitter, cfg.aux_noise, rng),
                                   Group::Auxiliary, a});
    }
    ds.aux_class_names.push_back("aux_" + std::to_string(a));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// image directories

void write_image_dir(const GroupedDataset& ds, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::map<std::pair<int, std::size_t>, std::size_t> counters;
  auto emit = [&](const Sample& s) {
    const bool target = s.group == Group::Target;
    const auto& names = target ? ds.target_class_names : ds.aux_class_names;
    const std::string cls =
        s.class_index < names.size() ? names[s.class_index] : "class_" + std::to_string(s.class_index);
    const fs::path dir = root / (target ? "target" : "auxiliary") / cls;
    fs::create_directories(dir);
    const std::size_t n = counters[{target ? 0 : 1, s.class_index}]++;
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.png", n);
    write_png(dir / name, tensor_to_image(s.features));
  };
  for (const auto* split : {&ds.target_train, &ds.target_val, &ds.target_test, &ds.aux_pool})
    for (const auto& s : *split) emit(s);
}

namespace {

bool is_png(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png";
}

std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir, bool directories) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

GroupedDataset load_image_dir(const std::filesystem::path& root, const ImageDirOptions& opt,
                              std::vector<std::string>* warnings) {
  namespace fs = std::filesystem;
  if (!(opt.val_fraction >= 0 && opt.test_fraction >= 0 && opt.val_fraction + opt.test_fraction < 1.0)) {
    throw InvalidArgument("load_image_dir: invalid split fractions");
  }
  GroupedDataset ds;
  ds.sample_shape = Shape{opt.height, opt.width, opt.channels};

  auto load_group = [&](const fs::path& dir, Group group, std::vector<std::string>& names) {
    std::vector<std::vector<Sample>> per_class;
    for (const auto& class_dir : sorted_entries(dir, true)) {
      std::vector<Sample> samples;
      for (const auto& file : sorted_entries(class_dir, false)) {
        if (!is_png(file)) {
          if (warnings) warnings->push_back("skipping non-image file '" + file.string() + "'");
          continue;
        }
        const Image8 img = read_png(file);
        samples.push_back(Sample{image_to_tensor(img, opt.height, opt.width, opt.channels), group, per_class.size()});
      }
      if (samples.empty()) throw InvalidDataset("class directory '" + class_dir.string() + "' has no images");
      names.push_back(class_dir.filename().string());
      per_class.push_back(std::move(samples));
    }
    return per_class;
  };

  const fs::path target_dir = root / "target";
  if (!fs::is_directory(target_dir)) throw InvalidDataset("missing target directory '" + target_dir.string() + "'");
  auto target = load_group(target_dir, Group::Target, ds.target_class_names);
  if (target.empty()) throw InvalidDataset("target directory '" + target_dir.string() + "' has no class directories");

  const fs::path aux_dir = root / "auxiliary";
  std::vector<std::vector<Sample>> aux;
  if (fs::is_directory(aux_dir)) {
    aux = load_group(aux_dir, Group::Auxiliary, ds.aux_class_names);
  } else if (opt.require_aux) {
    throw InvalidDataset("missing auxiliary directory '" + aux_dir.string() + "'");
  }
  if (opt.require_aux && aux.empty()) throw InvalidDataset("auxiliary directory has no class directories");
  ds.layout = GroupLayout{target.size(), aux.size()};

  Rng rng(mix_seed(opt.split_seed, 0x73706c6974ULL));
  for (auto& samples : target) {
    rng.shuffle(std::span<Sample>(samples));
    const std::size_t n = samples.size();
    const auto n_val = static_cast<std::size_t>(std::floor(opt.val_fraction * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::floor(opt.test_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t i = 0; i < n; ++i) {
      auto& dst = i < n_train ? ds.target_train : (i < n_train + n_val ? ds.target_val : ds.target_test);
      dst.push_back(std::move(samples[i]));
    }
  }
  for (auto& samples : aux)
    for (auto& s : samples) ds.aux_pool.push_back(std::move(s));
  return ds;
}

}  // namespace simlearn
