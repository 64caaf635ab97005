#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gabornoise {

inline constexpr int kDefaultKernelSize = 23;

/// Gabor kernel parameters: Gaussian magnitude and width, harmonic
/// frequency and orientation. Orientation is kept reduced to [0, pi) since
/// the kernel is pi-periodic in it.
class GaborKernelParams {
 public:
  GaborKernelParams(double kappa_mag, double sigma, double lambda_freq, double omega);

  double kappa_mag() const noexcept { return kappa_mag_; }
  double sigma() const noexcept { return sigma_; }
  double lambda_freq() const noexcept { return lambda_freq_; }
  double omega() const noexcept { return omega_; }

 private:
  double kappa_mag_;
  double sigma_;
  double lambda_freq_;
  double omega_;
};

/// Kernel whose Gaussian envelope has standard deviation sigma_px pixels and
/// whose harmonic has wavelength wavelength_px pixels, for evaluation at pixel
/// offsets: sigma = 1 / (sigma_px sqrt(2 pi)), lambda = 1 / wavelength_px.
GaborKernelParams kernel_from_pixel_units(double sigma_px, double wavelength_px, double omega);

/// The controlled noise parameters {sigma, omega, lambda}: envelope standard
/// deviation and harmonic wavelength in pixels, orientation in radians.
struct NoiseTheta {
  double sigma = 0.0;
  double omega = 0.0;
  double lambda_freq = 0.0;
};

struct AnisotropicNoiseParams {
  NoiseTheta theta;
  int kernel_size = kDefaultKernelSize;
  std::uint64_t seed = 0;

  void validate() const;
  /// Unit-magnitude kernel derived from theta via kernel_from_pixel_units
  /// (normalization cancels the magnitude).
  GaborKernelParams kernel() const;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct PointLattice {
  std::vector<Point> points;
  std::vector<double> weights;

  std::size_t size() const noexcept { return points.size(); }
  /// Throws unless sizes agree and every point lies in the K-padded image.
  void validate(int width, int height, int kernel_size) const;
  PointLattice concat(const PointLattice& other) const;
};

class NoiseField {
 public:
  NoiseField(int width, int height);
  NoiseField(int width, int height, std::vector<double> values, bool normalized);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool normalized() const noexcept { return normalized_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double at(int x, int y) const { return values_[index(x, y)]; }
  double& at(int x, int y) { return values_[index(x, y)]; }

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<double> values_;
  bool normalized_ = false;
};

/// kappa * exp(-pi sigma^2 (x^2 + y^2)) * cos(2 pi lambda (x cos omega + y sin omega)).
double eval_gabor_kernel(const GaborKernelParams& p, double x, double y) noexcept;

/// round(density * (width + 2K)(height + 2K) / K^2).
std::size_t lattice_point_count(int width, int height, int kernel_size, double density);

/// Uniform i.i.d. points over [-K, width + K) x [-K, height + K), unit
/// weights. Throws Errc::zero_points when the count rounds to zero.
PointLattice scatter_points(int width, int height, int kernel_size, double density, std::uint64_t rng_seed);

/// Sparse-convolution sum of params.kernel() over the lattice at pixel
/// offsets. Each point only touches pixels with |dx|, |dy| <= K.
NoiseField synth_gabor_noise(const AnisotropicNoiseParams& params, const PointLattice& lattice, int width,
                             int height);

/// (f - mean) / max|f - mean|. Throws Errc::degenerate_field on a flat field.
NoiseField normalize_field(const NoiseField& field);

/// scatter -> synth -> normalize, lattice seeded from params.seed.
NoiseField make_gabor_noise(const AnisotropicNoiseParams& params, int width, int height, double density = 1.0);

}  // namespace gabornoise
