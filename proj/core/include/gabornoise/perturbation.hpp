#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gabornoise/noise.hpp"

namespace gabornoise {

inline constexpr double kDefaultEpsilon = 12.0;

struct ImageShape {
  int width = 0;
  int height = 0;
  int channels = 3;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * static_cast<std::size_t>(channels);
  }
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
  bool operator==(const ImageShape&) const = default;
};

std::string to_string(const ImageShape& shape);

/// Raw-pixel image, values in [0, 255], row-major with channel fastest.
struct ImageTensor {
  ImageShape shape;
  std::vector<float> values;

  ImageTensor() = default;
  ImageTensor(ImageShape s, std::vector<float> v);
  explicit ImageTensor(ImageShape s, float fill = 0.0f);

  float at(int x, int y, int c) const { return values[shape.index(x, y, c)]; }
  float& at(int x, int y, int c) { return values[shape.index(x, y, c)]; }
};

enum class PerturbationMode { scaled, sign };

std::string_view to_string(PerturbationMode mode) noexcept;
PerturbationMode parse_mode(std::string_view text);

struct NoProvenance {};

struct GaborProvenance {
  NoiseTheta theta;
  int kernel_size = kDefaultKernelSize;
  double density = 1.0;
  PerturbationMode mode = PerturbationMode::scaled;
};

struct UniformRandomProvenance {};

struct SingularVectorProvenance {
  std::string layer;
  double p = 2.0;
  double q = 2.0;
  int batch = 1;
  int iterations = 0;
  bool converged = false;
  std::uint64_t model_seed = 0;
};

using Provenance = std::variant<NoProvenance, GaborProvenance, UniformRandomProvenance, SingularVectorProvenance>;

std::string_view provenance_kind(const Provenance& p) noexcept;

/// Additive perturbation in pixel-intensity units with its l-inf budget.
struct PerturbationField {
  ImageShape shape;
  std::vector<float> values;
  double epsilon = kDefaultEpsilon;
  Provenance provenance;
  std::uint64_t seed = 0;

  float at(int x, int y, int c) const { return values[shape.index(x, y, c)]; }
};

PerturbationField zero_perturbation(ImageShape shape, double epsilon = 0.0);

/// Replicates a normalized field across channels as eps*f (scaled) or
/// eps*sign(f) (sign). Throws Errc::not_normalized.
PerturbationField to_perturbation(const NoiseField& field, double epsilon, PerturbationMode mode, int channels = 3);

/// Full Gabor pipeline with provenance filled in.
PerturbationField gabor_perturbation(const AnisotropicNoiseParams& params, int width, int height, double epsilon,
                                     PerturbationMode mode, double density = 1.0, int channels = 3);

/// Independent +-eps per entry (channels included), one generator draw per entry.
PerturbationField random_uniform_perturbation(int width, int height, double epsilon, std::uint64_t rng_seed,
                                              int channels = 3);

/// clamp(x + s, 0, 255) elementwise.
ImageTensor apply(const ImageTensor& x, const PerturbationField& s);

double linf_norm(const PerturbationField& s) noexcept;

}  // namespace gabornoise
