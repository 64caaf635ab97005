#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gabornoise/perturbation.hpp"

namespace gabornoise {

struct Dataset {
  std::vector<ImageTensor> images;
  std::vector<std::string> names;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
};

/// Reads a directory of PNG files (sorted by filename, RGB) or a GNT1 tensor
/// file. Every image must already have expected_shape; all offenders are
/// listed in one Errc::shape_mismatch.
Dataset load_dataset(const std::filesystem::path& path, const ImageShape& expected_shape);

/// Smooth seeded test images: a colour gradient plus a handful of Gaussian
/// blobs and one soft-edged bar, quantized to integer intensities.
Dataset synthetic_dataset(std::size_t count, const ImageShape& shape, std::uint64_t seed);

/// Dataset source string: either a filesystem path or
/// "synthetic:<count>:<seed>".
Dataset resolve_dataset(std::string_view source, const ImageShape& expected_shape);

/// Seeded subsample of n indices without replacement, returned in ascending
/// order. n >= total returns every index.
std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t n, std::uint64_t seed);

Dataset subset(const Dataset& d, const std::vector<std::size_t>& indices);

}  // namespace gabornoise
