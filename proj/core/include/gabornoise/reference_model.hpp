#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gabornoise/oracle.hpp"

namespace gabornoise {

/// Desk-scale classifier built from a fixed Gabor filter bank:
///
///   luminance (sum of channels / 255)
///   -> 8 zero-mean Gabor filters, orientations k*pi/8, 11x11 taps,
///      "same" output with clamp-to-edge padding
///   -> ReLU
///   -> 4x4 average pool (stride 4)
///   -> flatten -> kLogitScale * W -> softmax
///
/// Taps are the unit-magnitude Gabor kernel with a 2 px envelope standard
/// deviation and 3 px wavelength (kernel_from_pixel_units), sampled on the
/// 11x11 integer offsets and shifted to zero mean.
///
/// W is num_classes x features (row-major, feature index (k, py, px)). From
/// SplitMix64(seed).symmetric() draws: first a num_classes x 8 orientation
/// template T, then one draw D per weight in row-major order;
/// W = (1 - a) T[c][k] + a D with a = kSpatialWeight, each row then shifted
/// to zero sum.
/// Construction is bit-deterministic in the seed; instances are immutable
/// and safe to share across threads.
class GaborBankClassifier final : public Oracle {
 public:
  static constexpr int kInputSize = 32;
  static constexpr int kChannels = 3;
  static constexpr int kClasses = 10;
  static constexpr int kFilters = 8;
  static constexpr int kKernelSize = 11;
  static constexpr int kTapRadius = kKernelSize / 2;
  static constexpr double kFilterSigma = 2.0;
  static constexpr double kFilterLambda = 3.0;
  static constexpr int kPool = 4;
  static constexpr int kPooledSize = kInputSize / kPool;
  static constexpr int kConvSize = kFilters * kInputSize * kInputSize;
  static constexpr int kFeatures = kFilters * kPooledSize * kPooledSize;
  static constexpr int kInputDim = kInputSize * kInputSize * kChannels;
  static constexpr double kLogitScale = 1.0;
  static constexpr double kSpatialWeight = 0.25;

  explicit GaborBankClassifier(std::uint64_t seed);

  const ModelDescriptor& descriptor() const override { return descriptor_; }
  std::vector<Prediction> predict_batch(std::span<const ImageTensor> images) override;

  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const double> filter(int k) const { return filters_[static_cast<std::size_t>(k)]; }
  std::span<const double> weights() const noexcept { return weights_; }

  struct Activations {
    std::vector<double> pre_activation;  // conv output before ReLU
    std::vector<double> post_conv;       // after ReLU
    std::vector<double> pooled;
    std::vector<double> logits;
    Prediction prediction;
  };

  Activations forward(const ImageTensor& image) const;
  Prediction classify(const ImageTensor& image) const;

  // Linear stages, exposed for Jacobian products. Layouts:
  //   image:  (y, x, c) channel fastest, kInputDim
  //   lum:    (y, x), kInputSize^2
  //   conv:   (k, y, x), kConvSize
  //   pooled: (k, py, px), kFeatures
  std::vector<double> luminance(std::span<const double> image) const;
  std::vector<double> luminance_transpose(std::span<const double> lum) const;
  std::vector<double> convolve(std::span<const double> lum) const;
  std::vector<double> convolve_transpose(std::span<const double> response) const;
  std::vector<double> pool(std::span<const double> response) const;
  std::vector<double> pool_transpose(std::span<const double> pooled) const;
  std::vector<double> project(std::span<const double> pooled) const;
  std::vector<double> project_transpose(std::span<const double> logits) const;

 private:
  std::uint64_t seed_;
  ModelDescriptor descriptor_;
  std::array<std::vector<double>, kFilters> filters_;
  std::vector<double> weights_;
};

GaborBankClassifier build_reference_model(std::uint64_t seed);

/// Numerically stable softmax (max subtraction).
Prediction softmax(std::span<const double> logits);

}  // namespace gabornoise
