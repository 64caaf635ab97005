#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gabornoise/dataset.hpp"
#include "gabornoise/io.hpp"
#include "support/oracles.hpp"
#include "support/util.hpp"

using namespace gabornoise;

namespace {
const ImageShape kShape{32, 32, 3};
}

TEST(Synthetic, DeterministicIntegerImages) {
  const auto a = synthetic_dataset(5, kShape, 11);
  const auto b = synthetic_dataset(5, kShape, 11);
  const auto c = synthetic_dataset(5, kShape, 12);
  ASSERT_EQ(a.size(), 5u);
  ASSERT_EQ(a.names.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.images[i].values, b.images[i].values);
    EXPECT_NE(a.images[i].values, c.images[i].values);
    for (float v : a.images[i].values) {
      ASSERT_EQ(v, std::round(v));
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 255.0f);
    }
  }
  EXPECT_NE(a.images[0].values, a.images[1].values);
}

TEST(Synthetic, PrefixStable) {
  const auto small = synthetic_dataset(3, kShape, 4);
  const auto large = synthetic_dataset(8, kShape, 4);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(small.images[i].values, large.images[i].values);
}

TEST(Resolve, SyntheticSource) {
  const auto d = resolve_dataset("synthetic:6:9", kShape);
  EXPECT_EQ(d.size(), 6u);
  EXPECT_EQ(d.images[2].values, synthetic_dataset(6, kShape, 9).images[2].values);
  EXPECT_ERRC(resolve_dataset("synthetic:six:9", kShape), Errc::invalid_argument);
  EXPECT_ERRC(resolve_dataset("synthetic:6", kShape), Errc::invalid_argument);
  EXPECT_ERRC(resolve_dataset("synthetic:0:1", kShape), Errc::empty_dataset);
}

TEST(Load, PngDirectorySortedByName) {
  testutil::TempDir dir;
  const auto d = synthetic_dataset(3, kShape, 1);
  write_png_rgb(dir / "b.png", d.images[1]);
  write_png_rgb(dir / "a.png", d.images[0]);
  write_png_rgb(dir / "c.PNG", d.images[2]);
  write_file_bytes(dir / "notes.txt", "ignored");
  const auto loaded = load_dataset(dir.path(), kShape);
  ASSERT_EQ(loaded.size(), 3u);
  EXPECT_EQ(loaded.names, (std::vector<std::string>{"a.png", "b.png", "c.PNG"}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(loaded.images[i].values, d.images[i].values);
}

TEST(Load, TensorFile) {
  testutil::TempDir dir;
  const auto d = synthetic_dataset(4, kShape, 2);
  write_tensor_file(dir / "set.gnt", d.images);
  const auto loaded = load_dataset(dir / "set.gnt", kShape);
  ASSERT_EQ(loaded.size(), 4u);
  EXPECT_EQ(loaded.names[3], "set.gnt#3");
  EXPECT_EQ(loaded.images[3].values, d.images[3].values);
}

TEST(Load, ShapeMismatchListsEveryOffender) {
  testutil::TempDir dir;
  write_png_rgb(dir / "ok.png", synthetic_dataset(1, kShape, 1).images[0]);
  write_png_rgb(dir / "wide.png", synthetic_dataset(1, ImageShape{40, 32, 3}, 1).images[0]);
  write_png_rgb(dir / "tall.png", synthetic_dataset(1, ImageShape{32, 40, 3}, 1).images[0]);
  try {
    load_dataset(dir.path(), kShape);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("wide.png"), std::string::npos);
    EXPECT_NE(msg.find("tall.png"), std::string::npos);
    EXPECT_EQ(msg.find("ok.png"), std::string::npos);
  }
}

TEST(Load, MissingAndEmpty) {
  testutil::TempDir dir;
  EXPECT_ERRC(load_dataset(dir / "nope", kShape), Errc::unreadable_file);
  EXPECT_ERRC(load_dataset(dir.path(), kShape), Errc::empty_dataset);
}

TEST(Subsample, SortedDistinctDeterministic) {
  const auto a = subsample_indices(1000, 50, 7);
  EXPECT_EQ(a, subsample_indices(1000, 50, 7));
  EXPECT_NE(a, subsample_indices(1000, 50, 8));
  ASSERT_EQ(a.size(), 50u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 50u);
  EXPECT_LT(a.back(), 1000u);
  const auto all = subsample_indices(5, 9, 1);
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Subsample, RoughlyUniformInclusion) {
  // Each index of 16 is picked with probability 1/4; chi-square over 4000 draws.
  std::vector<std::size_t> counts(16, 0);
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    for (std::size_t i : subsample_indices(16, 4, seed)) ++counts[i];
  }
  EXPECT_LT(oracle::chi_square_uniform(counts), oracle::kChiSquare15At1em4);
}

TEST(Subset, KeepsNamesAligned) {
  const auto d = synthetic_dataset(5, kShape, 3);
  const auto s = subset(d, {1, 4});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.names[1], d.names[4]);
  EXPECT_EQ(s.images[0].values, d.images[1].values);
  EXPECT_ERRC(subset(d, {5}), Errc::out_of_range);
}
