#include "gcq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gcq/error.hpp"

namespace gcq::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'G', 'C', 'Q', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    out_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_ += s;
  }
  void doubles(std::span<const double> v) {
    out_.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <typename T>
  T pod() {
    T v;
    need(sizeof v);
    std::memcpy(&v, in_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(std::span<double> v) {
    need(v.size_bytes());
    std::memcpy(v.data(), in_.data() + pos_, v.size_bytes());
    pos_ += v.size_bytes();
  }
  bool done() const { return pos_ == in_.size(); }
  void need(std::size_t n) const {
    if (n > in_.size() - pos_) throw FormatError("checkpoint is truncated");
  }
  std::size_t pos_ = 0;

 private:
  const std::string& in_;
};

}  // namespace

std::string serialize(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(ckpt.config_digest);
  w.str(ckpt.structural_digest);
  w.str(ckpt.config_text);
  w.pod<std::uint64_t>(ckpt.step);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.network.layers.size()));
  for (const auto& l : ckpt.network.layers) {
    w.str(l.name);
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(l.kind));
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(l.activation));
    w.pod<std::uint64_t>(l.W.rows());
    w.pod<std::uint64_t>(l.W.cols());
    w.doubles(l.W.values());
    w.pod<std::uint64_t>(l.b.cols());
    w.doubles(l.b.values());
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.network.program.size()));
  for (const auto& s : ckpt.network.program) {
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(s.op));
    w.pod<std::uint64_t>(s.layer);
  }
  return w.take();
}

Checkpoint deserialize(const std::string& bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic);
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("not a GCQ checkpoint");
  r.pos_ = sizeof kMagic;
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config_digest = r.str();
  c.structural_digest = r.str();
  c.config_text = r.str();
  c.step = r.pod<std::uint64_t>();
  const auto layers = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < layers; ++i) {
    Layer l;
    l.name = r.str();
    const auto kind = r.pod<std::uint8_t>();
    const auto act = r.pod<std::uint8_t>();
    if (kind > 1 || act > 1) throw FormatError("checkpoint layer '" + l.name + "' has an unknown type");
    l.kind = static_cast<LayerKind>(kind);
    l.activation = static_cast<Activation>(act);
    const auto rows = r.pod<std::uint64_t>();
    const auto cols = r.pod<std::uint64_t>();
    if (rows > (1u << 20) || cols > (1u << 20)) throw FormatError("checkpoint layer shape is implausible");
    l.W = Matrix(rows, cols);
    r.doubles(l.W.values());
    const auto bcols = r.pod<std::uint64_t>();
    if (bcols != cols) throw FormatError("checkpoint layer '" + l.name + "' has a mismatched bias");
    l.b = Matrix(1, bcols);
    r.doubles(l.b.values());
    c.network.layers.push_back(std::move(l));
  }
  const auto steps = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < steps; ++i) {
    const auto op = r.pod<std::uint8_t>();
    const auto layer = r.pod<std::uint64_t>();
    if (op > 1) throw FormatError("checkpoint program has an unknown op");
    c.network.program.push_back({static_cast<ProgramStep::Op>(op), static_cast<std::size_t>(layer)});
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  c.network.validate();
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write checkpoint '" + path + "'");
  const std::string bytes = serialize(ckpt);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

}  // namespace gcq::nn
