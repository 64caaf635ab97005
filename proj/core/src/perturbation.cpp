#include "gabornoise/perturbation.hpp"

#include <algorithm>
#include <cmath>

#include "gabornoise/error.hpp"
#include "gabornoise/rng.hpp"

namespace gabornoise {

namespace {

void check_shape(const ImageShape& s) {
  if (s.width < 1 || s.height < 1 || s.channels < 1) {
    throw Error(Errc::invalid_argument, "image dimensions must be >= 1, got " + to_string(s));
  }
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(Errc::invalid_argument, "epsilon must be > 0");
}

}  // namespace

std::string to_string(const ImageShape& shape) {
  return std::to_string(shape.width) + "x" + std::to_string(shape.height) + "x" + std::to_string(shape.channels);
}

ImageTensor::ImageTensor(ImageShape s, std::vector<float> v) : shape(s), values(std::move(v)) {
  check_shape(shape);
  if (values.size() != shape.size()) throw Error(Errc::length_mismatch, "image value count does not match shape");
  for (float x : values) {
    if (!(x >= 0.0f && x <= 255.0f)) throw Error(Errc::out_of_range, "image values must lie in [0, 255]");
  }
}

ImageTensor::ImageTensor(ImageShape s, float fill) : shape(s) {
  check_shape(shape);
  if (!(fill >= 0.0f && fill <= 255.0f)) throw Error(Errc::out_of_range, "image values must lie in [0, 255]");
  values.assign(shape.size(), fill);
}

std::string_view to_string(PerturbationMode mode) noexcept {
  return mode == PerturbationMode::sign ? "sign" : "scaled";
}

PerturbationMode parse_mode(std::string_view text) {
  if (text == "scaled") return PerturbationMode::scaled;
  if (text == "sign") return PerturbationMode::sign;
  throw Error(Errc::invalid_argument, "mode must be 'scaled' or 'sign', got '" + std::string(text) + "'");
}

std::string_view provenance_kind(const Provenance& p) noexcept {
  struct Visitor {
    std::string_view operator()(const NoProvenance&) const { return "none"; }
    std::string_view operator()(const GaborProvenance&) const { return "gabor"; }
    std::string_view operator()(const UniformRandomProvenance&) const { return "uniform_random"; }
    std::string_view operator()(const SingularVectorProvenance&) const { return "singular_vector"; }
  };
  return std::visit(Visitor{}, p);
}

PerturbationField zero_perturbation(ImageShape shape, double epsilon) {
  check_shape(shape);
  PerturbationField s;
  s.shape = shape;
  s.values.assign(shape.size(), 0.0f);
  s.epsilon = epsilon;
  return s;
}

PerturbationField to_perturbation(const NoiseField& field, double epsilon, PerturbationMode mode, int channels) {
  if (!field.normalized()) throw Error(Errc::not_normalized, "noise field must be normalized first");
  check_epsilon(epsilon);
  PerturbationField s;
  s.shape = {field.width(), field.height(), channels};
  check_shape(s.shape);
  s.epsilon = epsilon;
  s.values.resize(s.shape.size());
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      const double f = field.at(x, y);
      double v = 0.0;
      if (mode == PerturbationMode::scaled) {
        v = epsilon * f;
      } else {
        v = f > 0.0 ? epsilon : (f < 0.0 ? -epsilon : 0.0);
      }
      for (int c = 0; c < channels; ++c) s.values[s.shape.index(x, y, c)] = static_cast<float>(v);
    }
  }
  return s;
}

PerturbationField gabor_perturbation(const AnisotropicNoiseParams& params, int width, int height, double epsilon,
                                     PerturbationMode mode, double density, int channels) {
  PerturbationField s = to_perturbation(make_gabor_noise(params, width, height, density), epsilon, mode, channels);
  s.provenance = GaborProvenance{params.theta, params.kernel_size, density, mode};
  s.seed = params.seed;
  return s;
}

PerturbationField random_uniform_perturbation(int width, int height, double epsilon, std::uint64_t rng_seed,
                                              int channels) {
  check_epsilon(epsilon);
  PerturbationField s;
  s.shape = {width, height, channels};
  check_shape(s.shape);
  s.epsilon = epsilon;
  s.provenance = UniformRandomProvenance{};
  s.seed = rng_seed;
  s.values.resize(s.shape.size());
  const auto plus = static_cast<float>(epsilon);
  SplitMix64 rng(rng_seed);
  for (float& v : s.values) v = (rng.next() >> 63) != 0 ? plus : -plus;
  return s;
}

ImageTensor apply(const ImageTensor& x, const PerturbationField& s) {
  if (!(x.shape == s.shape)) {
    throw Error(Errc::shape_mismatch, "image " + to_string(x.shape) + " vs perturbation " + to_string(s.shape));
  }
  ImageTensor out;
  out.shape = x.shape;
  out.values.resize(x.values.size());
  for (std::size_t i = 0; i < x.values.size(); ++i) out.values[i] = std::clamp(x.values[i] + s.values[i], 0.0f, 255.0f);
  return out;
}

double linf_norm(const PerturbationField& s) noexcept {
  float peak = 0.0f;
  for (float v : s.values) peak = std::max(peak, std::abs(v));
  return peak;
}

}  // namespace gabornoise
