#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "gnncomp/pruning.hpp"
#include "gnncomp/sparse_ckpt.hpp"
#include "gnncomp/synthetic.hpp"
#include "test_util.hpp"

using namespace gnncomp;
using gnncomp::testing::TempDir;

namespace {

Tensor vec(std::initializer_list<float> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (float x : values) v(i++) = x;
  return Tensor({static_cast<Index>(values.size())}, v);
}

ModelState single(const std::string& name, Tensor t) {
  ModelState s;
  s.insert(name, std::move(t));
  return s;
}

/// Naive coordinate-list codec: (flat index, raw bits) for every bitwise non-zero element.
struct CoordList {
  std::vector<std::pair<Index, std::uint32_t>> items;
  Index n = 0;
};

CoordList coord_encode(const Tensor& t) {
  CoordList c;
  c.n = t.numel();
  for (Index i = 0; i < t.numel(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(t.data(i));
    if (bits != 0) c.items.emplace_back(i, bits);
  }
  return c;
}

Tensor coord_decode(const CoordList& c, std::vector<Index> shape) {
  Vector v = Vector::Zero(c.n);
  for (auto [i, bits] : c.items) v(i) = std::bit_cast<float>(bits);
  return Tensor(std::move(shape), v);
}

ModelState random_state(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ntensors(0, 5);
  std::uniform_int_distribution<int> rank(0, 3);
  std::uniform_int_distribution<Index> dim(0, 7);
  std::uniform_real_distribution<double> sparsity(0.0, 1.0);
  std::normal_distribution<float> value(0.0f, 1.0f);
  ModelState s;
  const int count = ntensors(rng);
  for (int t = 0; t < count; ++t) {
    std::vector<Index> shape(static_cast<std::size_t>(rank(rng)));
    for (auto& d : shape) d = dim(rng);
    const double z = sparsity(rng);
    std::bernoulli_distribution zero(z);
    Vector v(shape_numel(shape));
    for (Index i = 0; i < v.size(); ++i) v(i) = zero(rng) ? 0.0f : value(rng);
    s.insert("p" + std::to_string(t), Tensor(shape, v));
  }
  if (rng() % 2) s.metadata["accuracy"] = "0.8" + std::to_string(rng() % 10);
  return s;
}

std::vector<std::uint8_t> golden_example() {
  return {
      'S', 'M', 'S', 'C',                             // magic
      0x01, 0x00,                                     // version
      0x00, 0x00, 0x00, 0x00,                         // metadata count
      0x01, 0x00, 0x00, 0x00,                         // entry count
      0x01, 0x00, 'w',                                // name
      0x01,                                           // sparse
      0x01,                                           // rank
      0x04, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // dims
      0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // mask length
      0x0A,                                           // mask: elements 1 and 3
      0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // nnz
      0x00, 0x00, 0x40, 0x40,                         // 3.0f
      0x00, 0x00, 0xA0, 0x40,                         // 5.0f
  };
}

CheckpointErrorKind error_kind(std::span<const std::uint8_t> bytes) {
  try {
    deserialize(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return CheckpointErrorKind::Io;
}

}  // namespace

TEST(Compress, SparseExample) {
  const SparseCheckpoint c = compress_state(single("w", vec({0, 3, 0, 5})));
  ASSERT_EQ(c.entries.size(), 1u);
  const CheckpointEntry& e = c.entries[0];
  EXPECT_EQ(e.storage, StorageKind::Sparse);
  EXPECT_EQ(e.shape, std::vector<Index>{4});
  EXPECT_EQ(e.mask, std::vector<std::uint8_t>{0x0A});
  EXPECT_EQ(e.values, (std::vector<float>{3, 5}));
  EXPECT_TRUE(bitwise_equal(decompress_state(c), single("w", vec({0, 3, 0, 5}))));
}

TEST(Compress, AllZeroTensorStaysDense) {
  const SparseCheckpoint c = compress_state(single("z", vec({0, 0, 0})));
  ASSERT_EQ(c.entries.size(), 1u);
  EXPECT_EQ(c.entries[0].storage, StorageKind::Dense);
  EXPECT_EQ(c.entries[0].values, (std::vector<float>{0, 0, 0}));
  EXPECT_TRUE(c.entries[0].mask.empty());
}

TEST(Compress, EmptyStateRoundTrips) {
  const ModelState empty;
  const SparseCheckpoint c = compress_state(empty);
  EXPECT_TRUE(c.entries.empty());
  EXPECT_TRUE(bitwise_equal(decompress_state(deserialize(serialize(c))), empty));
}

TEST(Compress, MetadataCopiedVerbatim) {
  ModelState s = single("w", vec({1, 0}));
  s.metadata["accuracy"] = "0.81";
  s.metadata["epoch"] = "200";
  const SparseCheckpoint c = compress_state(s);
  EXPECT_EQ(c.metadata, s.metadata);
  EXPECT_EQ(decompress_state(deserialize(serialize(c))).metadata, s.metadata);
}

TEST(Compress, MatchesCoordinateListOracle) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution zero(0.7);
  std::normal_distribution<float> value;
  Vector v(997);
  for (Index i = 0; i < v.size(); ++i) v(i) = zero(rng) ? 0.0f : value(rng);
  const Tensor t({997}, v);
  const CoordList oracle = coord_encode(t);
  const SparseCheckpoint c = compress_state(single("w", t));
  const CheckpointEntry& e = c.entries[0];
  ASSERT_EQ(e.values.size(), oracle.items.size());
  for (std::size_t k = 0; k < oracle.items.size(); ++k) {
    const Index i = oracle.items[k].first;
    EXPECT_TRUE(e.mask[static_cast<std::size_t>(i / 8)] & (1u << (i % 8)));
    EXPECT_EQ(std::bit_cast<std::uint32_t>(e.values[k]), oracle.items[k].second);
  }
  const ModelState back = decompress_state(deserialize(serialize(c)));
  EXPECT_TRUE(bitwise_equal(back, single("w", coord_decode(oracle, {997}))));
}

TEST(Compress, SignedZeroAndNanPayloadsSurvive) {
  const float nan = std::bit_cast<float>(std::uint32_t{0x7fc01234});
  const Tensor t = vec({0.0f, -0.0f, nan, 1.0f, 0.0f, std::numeric_limits<float>::infinity()});
  const ModelState s = single("w", t);
  const ModelState back = decompress_state(deserialize(serialize(compress_state(s))));
  EXPECT_TRUE(bitwise_equal(back, s));
  EXPECT_EQ(std::bit_cast<std::uint32_t>(back.at("w").data(1)), 0x80000000u);
  EXPECT_EQ(std::bit_cast<std::uint32_t>(back.at("w").data(2)), 0x7fc01234u);
}

TEST(Compress, FuzzRoundTrip) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const ModelState s = random_state(rng);
    const SparseCheckpoint c = compress_state(s);
    for (const auto& e : c.entries) {
      if (e.storage == StorageKind::Sparse) {
        std::size_t bits = 0;
        for (auto b : e.mask) bits += static_cast<std::size_t>(std::popcount(b));
        ASSERT_EQ(bits, e.values.size());
      }
    }
    const auto bytes = serialize(c);
    ASSERT_EQ(deserialize(bytes), c) << "trial " << trial;
    ASSERT_TRUE(bitwise_equal(decompress_state(deserialize(bytes)), s)) << "trial " << trial;
  }
}

TEST(Format, GoldenBytes) {
  const auto bytes = serialize(compress_state(single("w", vec({0, 3, 0, 5}))));
  EXPECT_EQ(bytes, golden_example());
  EXPECT_TRUE(bitwise_equal(decompress_state(deserialize(golden_example())), single("w", vec({0, 3, 0, 5}))));
}

TEST(Format, FileRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(3);
  const SparseCheckpoint c = compress_state(random_state(rng));
  write_file(c, dir / "model.smsc");
  EXPECT_EQ(read_file(dir / "model.smsc"), c);
  EXPECT_EQ(std::filesystem::file_size(dir / "model.smsc"), serialize(c).size());
}

TEST(Format, BadMagic) {
  auto bytes = golden_example();
  bytes[0] = 'X';
  EXPECT_EQ(error_kind(bytes), CheckpointErrorKind::BadMagic);
}

TEST(Format, VersionMismatch) {
  auto bytes = golden_example();
  bytes[4] = 0x02;
  EXPECT_EQ(error_kind(bytes), CheckpointErrorKind::VersionMismatch);
}

TEST(Format, EveryTruncationIsDetected) {
  const auto bytes = golden_example();
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    const std::span<const std::uint8_t> prefix(bytes.data(), n);
    const CheckpointErrorKind kind = error_kind(prefix);
    EXPECT_TRUE(kind == CheckpointErrorKind::Truncated || (n < 4 && kind == CheckpointErrorKind::BadMagic)) << n;
  }
}

TEST(Format, CorruptionKinds) {
  auto popcount = golden_example();
  popcount[35] = 0x0B;  // three mask bits, two values
  EXPECT_EQ(error_kind(popcount), CheckpointErrorKind::Corrupt);
  auto flag = golden_example();
  flag[17] = 0x07;
  EXPECT_EQ(error_kind(flag), CheckpointErrorKind::Corrupt);
  auto trailing = golden_example();
  trailing.push_back(0);
  EXPECT_EQ(error_kind(trailing), CheckpointErrorKind::Corrupt);
}

TEST(Format, MissingFileIsIoError) {
  TempDir dir;
  try {
    read_file(dir / "absent.smsc");
    FAIL() << "no error raised";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointErrorKind::Io);
  }
}

TEST(SizeRatio, UnprunedIsOne) {
  std::mt19937_64 rng(4);
  const ModelState s = single("w", Tensor({10, 10}, gnncomp::testing::random_matrix(1, 100, rng, 0.5f, 1.0f).transpose()));
  const SizeRatioReport r = size_ratio(s, s);
  EXPECT_EQ(r.dense_bytes, 400u);
  EXPECT_EQ(r.payload_bytes, 400u);
  EXPECT_EQ(r.payload_ratio, 1.0);
  EXPECT_EQ(r.total_bytes, serialize(compress_state(s)).size());
  EXPECT_GE(r.total_bytes, r.payload_bytes);
}

TEST(SizeRatio, PayloadRatioIsCountOverNonzero) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const ModelState s = random_state(rng);
    Index total = 0;
    for (const auto& [n, t] : s) total += t.numel();
    const Index nnz = nonzero_count(s);
    const SizeRatioReport r = size_ratio(s, s);
    EXPECT_EQ(r.dense_bytes, 4u * static_cast<std::uint64_t>(total));
    EXPECT_EQ(r.payload_bytes, 4u * static_cast<std::uint64_t>(nnz));
    if (nnz > 0) {
      EXPECT_EQ(r.payload_ratio, static_cast<double>(total) / static_cast<double>(nnz));
    } else if (total > 0) {
      EXPECT_TRUE(std::isinf(r.payload_ratio));
    }
    EXPECT_GE(r.payload_ratio, 0.0);
    EXPECT_GE(r.total_ratio, 0.0);
  }
}

TEST(SizeRatio, ZeroFractionIdentity) {
  Vector v = Vector::Ones(1000);
  for (Index i = 0; i < 750; ++i) v(i * 4 / 3) = 0.0f;
  const ModelState s = single("w", Tensor({1000}, v));
  const double z = 1.0 - static_cast<double>(nonzero_count(s)) / 1000.0;
  EXPECT_DOUBLE_EQ(size_ratio(s, s).payload_ratio, 1.0 / (1.0 - z));
}

TEST(SizeRatio, CompressedFileSmallerAboveThreshold) {
  std::mt19937_64 rng(6);
  std::normal_distribution<float> value;
  for (double z : {0.1, 0.3, 0.5, 0.9}) {
    ModelState s;
    std::bernoulli_distribution zero(z);
    for (int t = 0; t < 4; ++t) {
      Vector v(256 * 16);
      for (Index i = 0; i < v.size(); ++i) v(i) = zero(rng) ? 0.0f : value(rng);
      s.insert("w" + std::to_string(t), Tensor({256, 16}, v));
    }
    const SizeRatioReport r = size_ratio(s, s);
    EXPECT_LT(r.total_bytes, serialize(dense_checkpoint(s)).size()) << z;
  }
}

TEST(SizeRatio, MismatchedStatesRejected) {
  const ModelState a = single("w", vec({1, 2}));
  EXPECT_ANY_THROW(size_ratio(a, single("v", vec({1, 2}))));
  EXPECT_ANY_THROW(size_ratio(a, single("w", vec({1, 2, 3}))));
}

TEST(SizeRatio, PrunedGcnAtNinetyPercent) {
  CitationConfig cc;
  cc.num_features = 1433;
  cc.class_sizes = {351, 217, 418, 818, 426, 298, 180};
  cc.num_edges = 5278;
  const Dataset ds = make_citation_dataset(cc, 1);
  auto model = make_model(ModelSpec::for_dataset(ds), 1);
  TrainOptions options;
  options.optim.max_epochs = 20;
  train(*model, ds, make_splits(ds, {0.6, 0.2, 0.2}, 1), options);
  const ModelState base = model->state();
  apply_mask(*model, global_magnitude_prune(*model, 0.9));
  const SizeRatioReport r = size_ratio(base, model->state());
  EXPECT_GE(r.payload_ratio, 7.5);
  EXPECT_LE(r.payload_ratio, 10.0);
  EXPECT_GT(r.total_ratio, 1.0);
  EXPECT_LT(r.total_ratio, r.payload_ratio);
}
