#include "segvit/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "segvit/errors.hpp"

namespace segvit {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write checkpoint " + path.string());
  }
  template <typename V>
  void pod(V v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void bytes(const void* p, size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot read checkpoint " + path.string());
  }
  template <typename V>
  V pod() {
    V v{};
    bytes(&v, sizeof v);
    return v;
  }
  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw DataError(path_.string() + ": truncated checkpoint");
    }
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

void write_records(Writer& w, const std::vector<TensorRecord>& records) {
  w.pod<uint64_t>(records.size());
  for (const auto& r : records) {
    w.pod<uint32_t>(static_cast<uint32_t>(r.name.size()));
    w.bytes(r.name.data(), r.name.size());
    w.pod<uint32_t>(sizeof(float));
    w.pod<uint32_t>(static_cast<uint32_t>(r.shape.size()));
    for (int64_t d : r.shape) w.pod<int64_t>(d);
    w.bytes(r.values.data(), r.values.size() * sizeof(float));
  }
}

std::vector<TensorRecord> read_records(Reader& r) {
  constexpr uint64_t kMaxRecords = 1u << 20;
  const auto n = r.pod<uint64_t>();
  if (n > kMaxRecords) throw DataError(r.path().string() + ": implausible record count");
  std::vector<TensorRecord> out(n);
  for (auto& rec : out) {
    const auto name_len = r.pod<uint32_t>();
    if (name_len > 4096) throw DataError(r.path().string() + ": implausible name length");
    rec.name.resize(name_len);
    r.bytes(rec.name.data(), name_len);
    if (r.pod<uint32_t>() != sizeof(float)) {
      throw DataError(r.path().string() + ": record '" + rec.name + "' has unsupported dtype");
    }
    const auto rank = r.pod<uint32_t>();
    if (rank > 8) throw DataError(r.path().string() + ": record '" + rec.name + "' has bad rank");
    rec.shape.resize(rank);
    for (auto& d : rec.shape) {
      d = r.pod<int64_t>();
      if (d < 0 || d > (int64_t{1} << 32)) {
        throw DataError(r.path().string() + ": record '" + rec.name + "' has bad extent");
      }
    }
    rec.values.resize(static_cast<size_t>(shape_numel(rec.shape)));
    r.bytes(rec.values.data(), rec.values.size() * sizeof(float));
  }
  return out;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w(path);
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.pod<uint32_t>(ckpt.version);
  w.pod<uint64_t>(ckpt.config.size());
  w.bytes(ckpt.config.data(), ckpt.config.size());
  w.pod<int64_t>(ckpt.iteration);
  w.pod<int64_t>(ckpt.optimizer_step);
  write_records(w, ckpt.params);
  write_records(w, ckpt.moments);
  w.finish();
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[sizeof kCheckpointMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw DataError(path.string() + ": not a checkpoint file");
  }
  Checkpoint ckpt;
  ckpt.version = r.pod<uint32_t>();
  if (ckpt.version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  const auto config_len = r.pod<uint64_t>();
  if (config_len > (1u << 20)) throw DataError(path.string() + ": implausible config length");
  ckpt.config.resize(config_len);
  r.bytes(ckpt.config.data(), config_len);
  ckpt.iteration = r.pod<int64_t>();
  ckpt.optimizer_step = r.pod<int64_t>();
  ckpt.params = read_records(r);
  ckpt.moments = read_records(r);
  if (!r.at_end()) throw DataError(path.string() + ": trailing bytes after checkpoint");
  return ckpt;
}

std::vector<TensorRecord> capture(const ParameterStore<float>& store) {
  std::vector<TensorRecord> out;
  for (const auto& p : store.all()) {
    const auto d = p.tensor.data();
    out.push_back({p.name, p.tensor.shape(), std::vector<float>(d.begin(), d.end())});
  }
  return out;
}

void restore(const std::vector<TensorRecord>& records, ParameterStore<float>& store) {
  auto& params = store.all();
  if (records.size() != params.size()) {
    throw ConfigError("checkpoint has " + std::to_string(records.size()) + " tensors, model has " +
                      std::to_string(params.size()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& rec = records[i];
    auto& p = params[i];
    if (rec.name != p.name || rec.shape != p.tensor.shape()) {
      throw ConfigError("checkpoint tensor '" + rec.name + "' " + shape_str(rec.shape) +
                        " does not match model tensor '" + p.name + "' " +
                        shape_str(p.tensor.shape()));
    }
  }
  for (size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    std::copy(records[i].values.begin(), records[i].values.end(), dst.begin());
  }
}

}  // namespace segvit
