#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gnncomp/tensor.hpp"

namespace gnncomp {

enum class StorageKind : std::uint8_t { Dense = 0, Sparse = 1 };

/// One tensor. Sparse entries keep a row-major bitmask (element i is bit
/// i % 8 of byte i / 8) and the values whose bit is set, in order.
struct CheckpointEntry {
  std::string name;
  std::vector<Index> shape;
  StorageKind storage = StorageKind::Dense;
  std::vector<std::uint8_t> mask;
  std::vector<float> values;

  /// Values are compared as raw bits.
  bool operator==(const CheckpointEntry& other) const;
};

struct SparseCheckpoint {
  std::vector<CheckpointEntry> entries;
  std::map<std::string, std::string> metadata;

  bool operator==(const SparseCheckpoint& other) const = default;
};

enum class CheckpointErrorKind { BadMagic, VersionMismatch, Truncated, Corrupt, Io };

class CheckpointError : public Error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// A tensor is stored sparse when any element is bitwise non-zero (so -0.0
/// and NaN payloads survive); all-zero tensors are kept dense.
SparseCheckpoint compress_state(const ModelState& state);
/// Every entry dense: the uncompressed reference form.
SparseCheckpoint dense_checkpoint(const ModelState& state);
ModelState decompress_state(const SparseCheckpoint& ckpt);

std::vector<std::uint8_t> serialize(const SparseCheckpoint& ckpt);
SparseCheckpoint deserialize(std::span<const std::uint8_t> bytes);

void write_file(const SparseCheckpoint& ckpt, const std::filesystem::path& path);
SparseCheckpoint read_file(const std::filesystem::path& path);

struct SizeRatioReport {
  std::uint64_t dense_bytes = 0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t total_bytes = 0;
  double payload_ratio = 0;
  double total_ratio = 0;
};

/// dense = 4 * element count of `base`; payload = 4 * non-zero elements of
/// `pruned`; total = serialized size of compress_state(pruned). Ratios are
/// infinite when the denominator is zero.
SizeRatioReport size_ratio(const ModelState& base, const ModelState& pruned);

/// Number of elements that compare unequal to 0.
Index nonzero_count(const ModelState& state);

/// Tensor equality on raw bits, including names, order, shapes and metadata.
bool bitwise_equal(const ModelState& a, const ModelState& b);

}  // namespace gnncomp
