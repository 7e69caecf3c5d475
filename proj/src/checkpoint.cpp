#include "deconflict/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace deconflict {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'F', 'L', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& in) : in_(in) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void bytes(void* p, size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(size_t n, const char* what) const {
    if (remaining() < n) throw CheckpointError(fmt::format("checkpoint truncated while reading {}", what));
  }

  const std::vector<uint8_t>& in_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.put<uint32_t>(Checkpoint::kVersion);
  w.put<uint8_t>(static_cast<uint8_t>(fleet_char(ckpt.fleet)));
  w.put<uint64_t>(ckpt.seed);
  w.put<uint64_t>(ckpt.episodes);
  const auto& d = ckpt.net.dims();
  for (int v : {d.obs, d.enc, d.trunk, d.actions}) w.put<uint32_t>(static_cast<uint32_t>(v));
  const auto& params = ckpt.net.params();
  w.put<uint32_t>(static_cast<uint32_t>(params.size()));
  uint64_t payload = 0;
  for (const auto& p : params) {
    w.put<uint32_t>(static_cast<uint32_t>(p.shape.size()));
    for (size_t s : p.shape) w.put<uint32_t>(static_cast<uint32_t>(s));
    payload += p.values.size() * sizeof(float);
  }
  w.put<uint64_t>(payload);
  for (const auto& p : params) w.bytes(p.values.data(), p.values.size() * sizeof(float));
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<uint8_t>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError("not a checkpoint: bad magic bytes");
  const auto version = r.get<uint32_t>("version");
  if (version != Checkpoint::kVersion)
    throw CheckpointError(fmt::format("unsupported checkpoint version {} (expected {})", version, Checkpoint::kVersion));
  const auto fleet = static_cast<char>(r.get<uint8_t>("fleet"));
  if (fleet != 'A' && fleet != 'B') throw CheckpointError(fmt::format("invalid fleet id '{}'", fleet));

  Checkpoint ckpt;
  ckpt.fleet = fleet == 'A' ? FleetId::kA : FleetId::kB;
  ckpt.seed = r.get<uint64_t>("seed");
  ckpt.episodes = r.get<uint64_t>("episode count");
  nn::NetworkDims dims;
  dims.obs = static_cast<int>(r.get<uint32_t>("dims"));
  dims.enc = static_cast<int>(r.get<uint32_t>("dims"));
  dims.trunk = static_cast<int>(r.get<uint32_t>("dims"));
  dims.actions = static_cast<int>(r.get<uint32_t>("dims"));
  if (dims.obs <= 0 || dims.enc <= 0 || dims.trunk <= 0 || dims.actions <= 0 || dims.obs > 4096 ||
      dims.enc > 4096 || dims.trunk > 4096 || dims.actions > 4096)
    throw CheckpointError("invalid network dims in checkpoint");
  if (dims.obs != kObsDim || dims.actions != kNumActions)
    throw CheckpointError(fmt::format("shape mismatch: checkpoint has obs={} actions={}, expected obs={} actions={}",
                                      dims.obs, dims.actions, kObsDim, kNumActions));
  ckpt.net = nn::PolicyNetwork<float>(dims);
  auto& params = ckpt.net.params();

  const auto count = r.get<uint32_t>("tensor count");
  if (count != params.size())
    throw CheckpointError(fmt::format("shape mismatch: {} tensors in checkpoint, expected {}", count, params.size()));
  uint64_t expected = 0;
  for (auto& p : params) {
    const auto rank = r.get<uint32_t>("shape table");
    std::vector<size_t> shape;
    for (uint32_t i = 0; i < rank && i < 8; ++i) shape.push_back(r.get<uint32_t>("shape table"));
    if (shape != p.shape)
      throw CheckpointError(fmt::format("shape mismatch for tensor '{}': [{}] in checkpoint, expected [{}]", p.name,
                                        fmt::join(shape, "x"), fmt::join(p.shape, "x")));
    expected += p.values.size() * sizeof(float);
  }
  const auto declared = r.get<uint64_t>("payload length");
  if (declared != expected)
    throw CheckpointError(
        fmt::format("payload length mismatch: shapes require {} bytes, header declares {}", expected, declared));
  if (r.remaining() != expected)
    throw CheckpointError(
        fmt::format("payload length mismatch: expected {} bytes, found {}", expected, r.remaining()));
  for (auto& p : params) r.bytes(p.values.data(), p.values.size() * sizeof(float), "payload");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(fmt::format("cannot open '{}' for writing", path));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(fmt::format("write to '{}' failed", path));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open checkpoint '{}'", path));
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(fmt::format("{}: {}", path, e.what()));
  }
}

}  // namespace deconflict
