#include "simlearn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "simlearn/errors.hpp"

namespace simlearn {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'L', 'C', 'K', 'P', 'T', '\0', '\0'};

enum SectionTag : std::uint32_t { kSpec = 1, kParams = 2, kOptimizer = 3, kTrainer = 4 };

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void str32(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void params(const ParameterStore& store) {
    u32(static_cast<std::uint32_t>(store.entries().size()));
    for (const auto& e : store.entries()) {
      str32(e.name);
      u32(static_cast<std::uint32_t>(e.value.rank()));
      for (auto d : e.value.shape()) u64(d);
      for (double v : e.value.values()) f64(v);
    }
  }
  void section(std::uint32_t tag, const Writer& payload) {
    u32(tag);
    u64(payload.buf_.size());
    bytes(payload.buf_.data(), payload.buf_.size());
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str32() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  ParameterStore params() {
    ParameterStore store;
    const std::uint32_t count = u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = str32();
      const std::uint32_t rank = u32();
      if (rank > 8) throw FormatError("checkpoint: implausible tensor rank for '" + name + "'");
      Shape shape(rank);
      for (auto& d : shape) d = u64();
      const std::size_t n = shape_size(shape);
      need(n * 8);
      std::vector<double> data(n);
      for (auto& v : data) v = f64();
      store.add(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return store;
  }
  Reader sub(std::size_t n) {
    need(n);
    Reader r(p_, n);
    p_ += n;
    return r;
  }
  bool done() const { return p_ == end_; }
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n) throw FormatError("checkpoint: truncated data");
  }
  void raw(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, p_, n);
    p_ += n;
  }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p_[i]) << (8 * i);
    p_ += n;
    return v;
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer out;
  out.bytes(kMagic.data(), kMagic.size());
  out.u32(kCheckpointVersion);
  const std::uint32_t sections = 2 + (ckpt.optimizer ? 1 : 0) + (ckpt.trainer ? 1 : 0);
  out.u32(sections);

  Writer spec;
  const std::string text = ckpt.model.spec.to_text();
  spec.bytes(text.data(), text.size());
  out.section(kSpec, spec);

  Writer params;
  params.params(ckpt.model.params);
  out.section(kParams, params);

  if (ckpt.optimizer) {
    Writer opt;
    opt.u32(ckpt.optimizer->kind == OptimizerKind::Sgd ? 0 : 1);
    opt.u64(ckpt.optimizer->step);
    opt.params(ckpt.optimizer->accumulators);
    out.section(kOptimizer, opt);
  }
  if (ckpt.trainer) {
    const TrainerState& t = *ckpt.trainer;
    Writer tr;
    tr.u64(t.epochs_completed);
    tr.str32(t.rng_state);
    tr.u64(t.history.size());
    for (const auto& h : t.history) {
      tr.u64(h.epoch);
      tr.f64(h.train_loss);
      tr.f64(h.val_dacc);
    }
    tr.f64(t.best_val_dacc);
    tr.u64(t.best_epoch);
    tr.params(t.best_params);
    out.section(kTrainer, tr);
  }
  return std::move(out.buffer());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes.data(), bytes.size());
  std::array<char, 8> magic{};
  in.raw(magic.data(), magic.size());
  if (magic != kMagic) throw FormatError("checkpoint: bad magic (not a simlearn checkpoint)");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t sections = in.u32();
  std::optional<ModelSpec> spec;
  std::optional<ParameterStore> params;
  Checkpoint ckpt;
  for (std::uint32_t s = 0; s < sections; ++s) {
    const std::uint32_t tag = in.u32();
    const std::uint64_t len = in.u64();
    Reader body = in.sub(len);
    switch (tag) {
      case kSpec: {
        std::string text(len, '\0');
        body.raw(text.data(), len);
        spec = ModelSpec::from_text(text);
        break;
      }
      case kParams: params = body.params(); break;
      case kOptimizer: {
        OptimizerState st;
        const std::uint32_t kind = body.u32();
        if (kind > 1) throw FormatError("checkpoint: unknown optimizer kind");
        st.kind = kind == 0 ? OptimizerKind::Sgd : OptimizerKind::Adagrad;
        st.step = body.u64();
        st.accumulators = body.params();
        ckpt.optimizer = std::move(st);
        break;
      }
      case kTrainer: {
        TrainerState t;
        t.epochs_completed = body.u64();
        t.rng_state = body.str32();
        const std::uint64_t n = body.u64();
        body.need(n * 24);
        for (std::uint64_t i = 0; i < n; ++i) {
          EpochRecord r;
          r.epoch = body.u64();
          r.train_loss = body.f64();
          r.val_dacc = body.f64();
          t.history.push_back(r);
        }
        t.best_val_dacc = body.f64();
        t.best_epoch = body.u64();
        t.best_params = body.params();
        ckpt.trainer = std::move(t);
        break;
      }
      default: break;  // unknown sections are skipped
    }
    if (tag <= kTrainer && !body.done()) throw FormatError("checkpoint: trailing bytes in section " + std::to_string(tag));
  }
  if (!in.done()) throw FormatError("checkpoint: trailing bytes after last section");
  if (!spec || !params) throw FormatError("checkpoint: missing model spec or parameters");
  try {
    check_parameters(*spec, *params);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: parameters do not match spec: ") + e.what());
  }
  ckpt.model = Model{std::move(*spec), std::move(*params)};
  return ckpt;
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace simlearn
