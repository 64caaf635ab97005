#include "gabornoise/reference_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gabornoise/error.hpp"
#include "gabornoise/noise.hpp"
#include "gabornoise/rng.hpp"

namespace gabornoise {

namespace {

constexpr int N = GaborBankClassifier::kInputSize;
constexpr int R = GaborBankClassifier::kTapRadius;
constexpr int T = 2 * R + 1;

// Clamp-to-edge padding.
constexpr int clamp_edge(int i) noexcept { return i < 0 ? 0 : (i >= N ? N - 1 : i); }

}  // namespace

GaborBankClassifier::GaborBankClassifier(std::uint64_t seed)
    : seed_(seed), descriptor_{"gabor-bank-reference", kInputSize, kInputSize, kChannels, kClasses} {
  for (int k = 0; k < kFilters; ++k) {
    const GaborKernelParams p = kernel_from_pixel_units(kFilterSigma, kFilterLambda, k * std::numbers::pi / kFilters);
    auto& taps = filters_[static_cast<std::size_t>(k)];
    taps.resize(static_cast<std::size_t>(T * T));
    for (int dy = -R; dy <= R; ++dy) {
      for (int dx = -R; dx <= R; ++dx) {
        taps[static_cast<std::size_t>((dy + R) * T + (dx + R))] = eval_gabor_kernel(p, dx, dy);
      }
    }
    // Zero-mean taps: the bank responds to structure, not overall brightness.
    double mean = 0.0;
    for (double t : taps) mean += t;
    mean /= static_cast<double>(taps.size());
    for (double& t : taps) t -= mean;
  }
  SplitMix64 rng(seed);
  std::vector<double> templates(static_cast<std::size_t>(kClasses) * kFilters);
  for (double& t : templates) t = rng.symmetric();
  weights_.resize(static_cast<std::size_t>(kClasses) * kFeatures);
  for (int c = 0; c < kClasses; ++c) {
    for (int f = 0; f < kFeatures; ++f) {
      const int k = f / (kPooledSize * kPooledSize);
      weights_[static_cast<std::size_t>(c) * kFeatures + static_cast<std::size_t>(f)] =
          (1.0 - kSpatialWeight) * templates[static_cast<std::size_t>(c * kFilters + k)] +
          kSpatialWeight * rng.symmetric();
    }
  }
  // Zero-sum rows: a uniform shift of every feature leaves the logits unchanged.
  for (int c = 0; c < kClasses; ++c) {
    double* row = weights_.data() + static_cast<std::size_t>(c) * kFeatures;
    double mean = 0.0;
    for (int f = 0; f < kFeatures; ++f) mean += row[f];
    mean /= kFeatures;
    for (int f = 0; f < kFeatures; ++f) row[f] -= mean;
  }
}

GaborBankClassifier build_reference_model(std::uint64_t seed) { return GaborBankClassifier(seed); }

Prediction softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  Prediction p;
  p.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p.probs[i] = std::exp(logits[i] - peak);
    sum += p.probs[i];
  }
  for (double& v : p.probs) v /= sum;
  return p;
}

std::vector<double> GaborBankClassifier::luminance(std::span<const double> image) const {
  std::vector<double> lum(static_cast<std::size_t>(N * N));
  for (std::size_t i = 0; i < lum.size(); ++i) {
    double s = 0.0;
    for (int c = 0; c < kChannels; ++c) s += image[i * kChannels + static_cast<std::size_t>(c)];
    lum[i] = s / 255.0;
  }
  return lum;
}

std::vector<double> GaborBankClassifier::luminance_transpose(std::span<const double> lum) const {
  std::vector<double> image(static_cast<std::size_t>(kInputDim));
  for (std::size_t i = 0; i < lum.size(); ++i) {
    for (int c = 0; c < kChannels; ++c) image[i * kChannels + static_cast<std::size_t>(c)] = lum[i] / 255.0;
  }
  return image;
}

std::vector<double> GaborBankClassifier::convolve(std::span<const double> lum) const {
  std::vector<double> out(static_cast<std::size_t>(kConvSize), 0.0);
  for (int k = 0; k < kFilters; ++k) {
    const auto& taps = filters_[static_cast<std::size_t>(k)];
    double* plane = out.data() + static_cast<std::size_t>(k) * N * N;
    for (int y = 0; y < N; ++y) {
      for (int x = 0; x < N; ++x) {
        double acc = 0.0;
        for (int dy = -R; dy <= R; ++dy) {
          const int yy = clamp_edge(y + dy);
          for (int dx = -R; dx <= R; ++dx) {
            const int xx = clamp_edge(x + dx);
            acc += taps[static_cast<std::size_t>((dy + R) * T + (dx + R))] * lum[static_cast<std::size_t>(yy * N + xx)];
          }
        }
        plane[y * N + x] = acc;
      }
    }
  }
  return out;
}

std::vector<double> GaborBankClassifier::convolve_transpose(std::span<const double> response) const {
  std::vector<double> lum(static_cast<std::size_t>(N * N), 0.0);
  for (int k = 0; k < kFilters; ++k) {
    const auto& taps = filters_[static_cast<std::size_t>(k)];
    const double* plane = response.data() + static_cast<std::size_t>(k) * N * N;
    for (int y = 0; y < N; ++y) {
      for (int x = 0; x < N; ++x) {
        const double g = plane[y * N + x];
        if (g == 0.0) continue;
        for (int dy = -R; dy <= R; ++dy) {
          const int yy = clamp_edge(y + dy);
          for (int dx = -R; dx <= R; ++dx) {
            const int xx = clamp_edge(x + dx);
            lum[static_cast<std::size_t>(yy * N + xx)] += taps[static_cast<std::size_t>((dy + R) * T + (dx + R))] * g;
          }
        }
      }
    }
  }
  return lum;
}

std::vector<double> GaborBankClassifier::pool(std::span<const double> response) const {
  constexpr int P = kPooledSize;
  constexpr double inv = 1.0 / (kPool * kPool);
  std::vector<double> out(static_cast<std::size_t>(kFeatures), 0.0);
  for (int k = 0; k < kFilters; ++k) {
    for (int y = 0; y < N; ++y) {
      for (int x = 0; x < N; ++x) {
        out[static_cast<std::size_t>((k * P + y / kPool) * P + x / kPool)] +=
            response[static_cast<std::size_t>((k * N + y) * N + x)] * inv;
      }
    }
  }
  return out;
}

std::vector<double> GaborBankClassifier::pool_transpose(std::span<const double> pooled) const {
  constexpr int P = kPooledSize;
  constexpr double inv = 1.0 / (kPool * kPool);
  std::vector<double> out(static_cast<std::size_t>(kConvSize));
  for (int k = 0; k < kFilters; ++k) {
    for (int y = 0; y < N; ++y) {
      for (int x = 0; x < N; ++x) {
        out[static_cast<std::size_t>((k * N + y) * N + x)] =
            pooled[static_cast<std::size_t>((k * P + y / kPool) * P + x / kPool)] * inv;
      }
    }
  }
  return out;
}

std::vector<double> GaborBankClassifier::project(std::span<const double> pooled) const {
  std::vector<double> logits(kClasses, 0.0);
  for (int c = 0; c < kClasses; ++c) {
    const double* row = weights_.data() + static_cast<std::size_t>(c) * kFeatures;
    double acc = 0.0;
    for (int f = 0; f < kFeatures; ++f) acc += row[f] * pooled[static_cast<std::size_t>(f)];
    logits[static_cast<std::size_t>(c)] = kLogitScale * acc;
  }
  return logits;
}

std::vector<double> GaborBankClassifier::project_transpose(std::span<const double> logits) const {
  std::vector<double> pooled(static_cast<std::size_t>(kFeatures), 0.0);
  for (int c = 0; c < kClasses; ++c) {
    const double* row = weights_.data() + static_cast<std::size_t>(c) * kFeatures;
    const double g = kLogitScale * logits[static_cast<std::size_t>(c)];
    for (int f = 0; f < kFeatures; ++f) pooled[static_cast<std::size_t>(f)] += row[f] * g;
  }
  return pooled;
}

GaborBankClassifier::Activations GaborBankClassifier::forward(const ImageTensor& image) const {
  if (!(image.shape == descriptor_.input_shape())) {
    throw Error(Errc::shape_mismatch, "reference model expects " + to_string(descriptor_.input_shape()) + ", got " +
                                          to_string(image.shape));
  }
  const std::vector<double> pixels(image.values.begin(), image.values.end());
  Activations a;
  a.pre_activation = convolve(luminance(pixels));
  a.post_conv = a.pre_activation;
  for (double& v : a.post_conv) v = v > 0.0 ? v : 0.0;
  a.pooled = pool(a.post_conv);
  a.logits = project(a.pooled);
  a.prediction = softmax(a.logits);
  return a;
}

Prediction GaborBankClassifier::classify(const ImageTensor& image) const { return forward(image).prediction; }

std::vector<Prediction> GaborBankClassifier::predict_batch(std::span<const ImageTensor> images) {
  check_shapes(images);
  std::vector<Prediction> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(classify(img));
  return out;
}

}  // namespace gabornoise
