#include "gnncomp/sparse_ckpt.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace gnncomp {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'S', 'C'};

std::uint32_t bits_of(float v) { return std::bit_cast<std::uint32_t>(v); }

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
  }
  void put_f32(float v) { put(bits_of(v)); }
  void put_bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename Len>
  void put_string(const std::string& s, const char* what) {
    if (s.size() > std::numeric_limits<Len>::max()) throw CheckpointError(CheckpointErrorKind::Corrupt, std::string(what) + " too long");
    put(static_cast<Len>(s.size()));
    put_bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::span<const std::uint8_t> get_bytes(std::uint64_t n) {
    need(n);
    auto s = in_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }
  template <typename Len>
  std::string get_string() {
    const auto n = get<Len>();
    auto b = get_bytes(n);
    return std::string(b.begin(), b.end());
  }
  bool at_end() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) {
      throw CheckpointError(CheckpointErrorKind::Truncated,
                            "checkpoint truncated at byte " + std::to_string(pos_) + " (needed " + std::to_string(n) + ")");
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

CheckpointEntry dense_entry(const std::string& name, const Tensor& t) {
  CheckpointEntry e;
  e.name = name;
  e.shape = t.shape;
  e.storage = StorageKind::Dense;
  e.values.assign(t.data.data(), t.data.data() + t.numel());
  return e;
}

std::uint64_t numel_checked(const std::vector<Index>& shape) {
  std::uint64_t n = 1;
  for (Index d : shape) {
    if (d < 0) throw CheckpointError(CheckpointErrorKind::Corrupt, "negative dimension");
    const auto ud = static_cast<std::uint64_t>(d);
    if (ud != 0 && n > std::numeric_limits<std::uint32_t>::max() / ud) {
      throw CheckpointError(CheckpointErrorKind::Corrupt, "tensor too large");
    }
    n *= ud;
  }
  return n;
}

std::uint64_t popcount(const std::vector<std::uint8_t>& mask) {
  std::uint64_t n = 0;
  for (auto b : mask) n += static_cast<std::uint64_t>(std::popcount(b));
  return n;
}

}  // namespace

bool CheckpointEntry::operator==(const CheckpointEntry& other) const {
  return name == other.name && shape == other.shape && storage == other.storage && mask == other.mask &&
         same_bits(values, other.values);
}

SparseCheckpoint compress_state(const ModelState& state) {
  SparseCheckpoint ckpt;
  ckpt.metadata = state.metadata;
  for (const auto& [name, t] : state) {
    const Index n = t.numel();
    std::vector<std::uint8_t> mask(static_cast<std::size_t>((n + 7) / 8), 0);
    std::vector<float> values;
    for (Index i = 0; i < n; ++i) {
      if (bits_of(t.data[i]) != 0) {
        mask[static_cast<std::size_t>(i / 8)] |= static_cast<std::uint8_t>(1u << (i % 8));
        values.push_back(t.data[i]);
      }
    }
    if (values.empty()) {
      ckpt.entries.push_back(dense_entry(name, t));
      continue;
    }
    CheckpointEntry e;
    e.name = name;
    e.shape = t.shape;
    e.storage = StorageKind::Sparse;
    e.mask = std::move(mask);
    e.values = std::move(values);
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

SparseCheckpoint dense_checkpoint(const ModelState& state) {
  SparseCheckpoint ckpt;
  ckpt.metadata = state.metadata;
  for (const auto& [name, t] : state) ckpt.entries.push_back(dense_entry(name, t));
  return ckpt;
}

ModelState decompress_state(const SparseCheckpoint& ckpt) {
  ModelState state;
  state.metadata = ckpt.metadata;
  for (const auto& e : ckpt.entries) {
    const std::uint64_t n = numel_checked(e.shape);
    VectorX<float> data = VectorX<float>::Zero(static_cast<Index>(n));
    if (e.storage == StorageKind::Dense) {
      if (e.values.size() != n) throw CheckpointError(CheckpointErrorKind::Corrupt, e.name + ": dense value count mismatch");
      if (n) std::memcpy(data.data(), e.values.data(), n * sizeof(float));
    } else {
      if (e.mask.size() != (n + 7) / 8) throw CheckpointError(CheckpointErrorKind::Corrupt, e.name + ": mask length mismatch");
      if (popcount(e.mask) != e.values.size()) {
        throw CheckpointError(CheckpointErrorKind::Corrupt, e.name + ": mask popcount does not match value count");
      }
      std::size_t k = 0;
      for (std::uint64_t i = 0; i < n; ++i) {
        if (e.mask[i / 8] >> (i % 8) & 1u) data[static_cast<Index>(i)] = e.values[k++];
      }
      if (k != e.values.size()) throw CheckpointError(CheckpointErrorKind::Corrupt, e.name + ": mask bits set past the tensor end");
    }
    state.insert(e.name, Tensor(e.shape, std::move(data)));
  }
  return state;
}

std::vector<std::uint8_t> serialize(const SparseCheckpoint& ckpt) {
  Writer w;
  w.put_bytes(kMagic, sizeof kMagic);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.put_string<std::uint32_t>(k, "metadata key");
    w.put_string<std::uint32_t>(v, "metadata value");
  }
  w.put(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    w.put_string<std::uint16_t>(e.name, "entry name");
    if (e.shape.size() > 255) throw CheckpointError(CheckpointErrorKind::Corrupt, e.name + ": rank above 255");
    w.put(static_cast<std::uint8_t>(e.storage));
    w.put(static_cast<std::uint8_t>(e.shape.size()));
    for (Index d : e.shape) w.put(static_cast<std::uint64_t>(d));
    if (e.storage == StorageKind::Sparse) {
      w.put(static_cast<std::uint64_t>(e.mask.size()));
      w.put_bytes(e.mask.data(), e.mask.size());
      w.put(static_cast<std::uint64_t>(e.values.size()));
    }
    for (float v : e.values) w.put_f32(v);
  }
  return w.take();
}

SparseCheckpoint deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(CheckpointErrorKind::BadMagic, "not a sparse checkpoint (bad magic)");
  }
  r.get_bytes(sizeof kMagic);
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorKind::VersionMismatch, "unsupported checkpoint version " + std::to_string(version));
  }
  SparseCheckpoint ckpt;
  const auto meta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < meta; ++i) {
    std::string k = r.get_string<std::uint32_t>();
    std::string v = r.get_string<std::uint32_t>();
    if (!ckpt.metadata.emplace(std::move(k), std::move(v)).second) {
      throw CheckpointError(CheckpointErrorKind::Corrupt, "duplicate metadata key");
    }
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.get_string<std::uint16_t>();
    const auto flag = r.get<std::uint8_t>();
    if (flag > 1) throw CheckpointError(CheckpointErrorKind::Corrupt, e.name + ": unknown storage flag");
    e.storage = static_cast<StorageKind>(flag);
    const auto rank = r.get<std::uint8_t>();
    for (int d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint64_t>();
      if (dim > static_cast<std::uint64_t>(std::numeric_limits<Index>::max())) {
        throw CheckpointError(CheckpointErrorKind::Corrupt, e.name + ": dimension out of range");
      }
      e.shape.push_back(static_cast<Index>(dim));
    }
    const std::uint64_t n = numel_checked(e.shape);
    std::uint64_t nvalues = n;
    if (e.storage == StorageKind::Sparse) {
      const auto mask_len = r.get<std::uint64_t>();
      if (mask_len != (n + 7) / 8) throw CheckpointError(CheckpointErrorKind::Corrupt, e.name + ": mask length mismatch");
      auto m = r.get_bytes(mask_len);
      e.mask.assign(m.begin(), m.end());
      nvalues = r.get<std::uint64_t>();
      if (nvalues != popcount(e.mask)) {
        throw CheckpointError(CheckpointErrorKind::Corrupt, e.name + ": mask popcount does not match value count");
      }
    }
    if (nvalues > r.remaining() / 4) {
      throw CheckpointError(CheckpointErrorKind::Truncated, e.name + ": value payload truncated");
    }
    e.values.resize(static_cast<std::size_t>(nvalues));
    for (auto& v : e.values) v = r.get_f32();
    ckpt.entries.push_back(std::move(e));
  }
  if (!r.at_end()) throw CheckpointError(CheckpointErrorKind::Corrupt, "trailing bytes after last entry");
  return ckpt;
}

void write_file(const SparseCheckpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrorKind::Io, "write failed: " + path.string());
}

SparseCheckpoint read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorKind::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

Index nonzero_count(const ModelState& state) {
  Index n = 0;
  for (const auto& [name, t] : state) n += (t.data.array() != 0.0f).count();
  return n;
}

SizeRatioReport size_ratio(const ModelState& base, const ModelState& pruned) {
  if (base.size() != pruned.size()) throw Error("size_ratio: states have different entry counts");
  SizeRatioReport r;
  for (const auto& [name, t] : base) {
    const Tensor* p = pruned.find(name);
    if (!p) throw Error("size_ratio: pruned state lacks " + name);
    if (p->shape != t.shape) throw ShapeError("size_ratio: shape mismatch for " + name);
    r.dense_bytes += 4 * static_cast<std::uint64_t>(t.numel());
  }
  r.payload_bytes = 4 * static_cast<std::uint64_t>(nonzero_count(pruned));
  r.total_bytes = serialize(compress_state(pruned)).size();
  const double inf = std::numeric_limits<double>::infinity();
  r.payload_ratio = r.payload_bytes == 0 ? inf : static_cast<double>(r.dense_bytes) / static_cast<double>(r.payload_bytes);
  r.total_ratio = r.total_bytes == 0 ? inf : static_cast<double>(r.dense_bytes) / static_cast<double>(r.total_bytes);
  return r;
}

bool bitwise_equal(const ModelState& a, const ModelState& b) {
  if (a.size() != b.size() || a.metadata != b.metadata) return false;
  auto ib = b.begin();
  for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape != ib->second.shape) return false;
    const auto n = static_cast<std::size_t>(ia->second.numel());
    if (n && std::memcmp(ia->second.data.data(), ib->second.data.data(), n * sizeof(float)) != 0) return false;
  }
  return true;
}

}  // namespace gnncomp
