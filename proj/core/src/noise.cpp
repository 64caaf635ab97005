#include "gabornoise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gabornoise/error.hpp"
#include "gabornoise/rng.hpp"

namespace gabornoise {

namespace {

double reduce_orientation(double omega) {
  double r = std::fmod(omega, std::numbers::pi);
  if (r < 0.0) r += std::numbers::pi;
  if (r >= std::numbers::pi) r = 0.0;
  return r;
}

}  // namespace

GaborKernelParams::GaborKernelParams(double kappa_mag, double sigma, double lambda_freq, double omega)
    : kappa_mag_(kappa_mag), sigma_(sigma), lambda_freq_(lambda_freq), omega_(0.0) {
  if (!std::isfinite(kappa_mag) || !std::isfinite(sigma) || !std::isfinite(lambda_freq) || !std::isfinite(omega)) {
    throw Error(Errc::invalid_argument, "Gabor kernel parameters must be finite");
  }
  if (kappa_mag <= 0.0) throw Error(Errc::invalid_argument, "kappa_mag must be > 0");
  if (sigma <= 0.0) throw Error(Errc::invalid_argument, "sigma must be > 0");
  if (lambda_freq < 0.0) throw Error(Errc::invalid_argument, "lambda must be >= 0");
  omega_ = reduce_orientation(omega);
}

void AnisotropicNoiseParams::validate() const {
  if (kernel_size < 1) throw Error(Errc::invalid_argument, "kernel_size must be >= 1");
  if (!std::isfinite(theta.sigma) || !std::isfinite(theta.omega) || !std::isfinite(theta.lambda_freq)) {
    throw Error(Errc::invalid_argument, "theta components must be finite");
  }
}

GaborKernelParams AnisotropicNoiseParams::kernel() const {
  validate();
  return kernel_from_pixel_units(theta.sigma, theta.lambda_freq, theta.omega);
}

GaborKernelParams kernel_from_pixel_units(double sigma_px, double wavelength_px, double omega) {
  if (!(sigma_px > 0.0)) throw Error(Errc::invalid_argument, "sigma must be > 0");
  if (!(wavelength_px > 0.0)) throw Error(Errc::invalid_argument, "lambda must be > 0");
  return GaborKernelParams(1.0, 1.0 / (sigma_px * std::sqrt(2.0 * std::numbers::pi)), 1.0 / wavelength_px, omega);
}

void PointLattice::validate(int width, int height, int kernel_size) const {
  if (points.size() != weights.size()) {
    throw Error(Errc::length_mismatch, "lattice has " + std::to_string(points.size()) + " points but " +
                                           std::to_string(weights.size()) + " weights");
  }
  const double k = kernel_size;
  for (const Point& p : points) {
    if (!(p.x >= -k && p.x <= width + k && p.y >= -k && p.y <= height + k)) {
      throw Error(Errc::invalid_argument, "lattice point outside the padded image bounds");
    }
  }
}

PointLattice PointLattice::concat(const PointLattice& other) const {
  PointLattice out = *this;
  out.points.insert(out.points.end(), other.points.begin(), other.points.end());
  out.weights.insert(out.weights.end(), other.weights.begin(), other.weights.end());
  return out;
}

NoiseField::NoiseField(int width, int height)
    : NoiseField(width, height, std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                                        static_cast<std::size_t>(std::max(height, 0))),
                 false) {}

NoiseField::NoiseField(int width, int height, std::vector<double> values, bool normalized)
    : width_(width), height_(height), values_(std::move(values)), normalized_(normalized) {
  if (width < 1 || height < 1) throw Error(Errc::invalid_argument, "noise field dimensions must be >= 1");
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(Errc::length_mismatch, "noise field value count does not match width x height");
  }
}

double eval_gabor_kernel(const GaborKernelParams& p, double x, double y) noexcept {
  const double pi = std::numbers::pi;
  const double s = p.sigma();
  const double envelope = p.kappa_mag() * std::exp(-pi * s * s * (x * x + y * y));
  const double phase = 2.0 * pi * p.lambda_freq() * (x * std::cos(p.omega()) + y * std::sin(p.omega()));
  return envelope * std::cos(phase);
}

std::size_t lattice_point_count(int width, int height, int kernel_size, double density) {
  if (width < 1 || height < 1) throw Error(Errc::invalid_argument, "width and height must be >= 1");
  if (kernel_size < 1) throw Error(Errc::invalid_argument, "kernel_size must be >= 1");
  if (!(density > 0.0) || !std::isfinite(density)) throw Error(Errc::invalid_argument, "density must be > 0");
  const double k = kernel_size;
  const double area = (width + 2.0 * k) * (height + 2.0 * k);
  return static_cast<std::size_t>(std::llround(density * area / (k * k)));
}

PointLattice scatter_points(int width, int height, int kernel_size, double density, std::uint64_t rng_seed) {
  const std::size_t count = lattice_point_count(width, height, kernel_size, density);
  if (count == 0) throw Error(Errc::zero_points, "point count formula yields 0 points");

  const double k = kernel_size;
  SplitMix64 rng(rng_seed);
  PointLattice lattice;
  lattice.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = rng.uniform(-k, width + k);
    const double y = rng.uniform(-k, height + k);
    lattice.points.push_back({x, y});
  }
  lattice.weights.assign(count, 1.0);
  return lattice;
}

NoiseField synth_gabor_noise(const AnisotropicNoiseParams& params, const PointLattice& lattice, int width,
                             int height) {
  const GaborKernelParams kernel = params.kernel();
  lattice.validate(width, height, params.kernel_size);

  const double k = params.kernel_size;
  NoiseField field(width, height);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const Point pt = lattice.points[i];
    const double w = lattice.weights[i];
    const int x0 = std::max(0, static_cast<int>(std::ceil(pt.x - k)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(pt.x + k)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(pt.y - k)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(pt.y + k)));
    for (int y = y0; y <= y1; ++y) {
      const double dy = y - pt.y;
      if (std::abs(dy) > k) continue;
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - pt.x;
        if (std::abs(dx) > k) continue;
        field.at(x, y) += w * eval_gabor_kernel(kernel, dx, dy);
      }
    }
  }
  return field;
}

NoiseField normalize_field(const NoiseField& field) {
  if (field.normalized()) throw Error(Errc::invalid_argument, "field is already normalized");
  const auto& v = field.values();
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());

  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::abs(x - mean));
  if (!(peak >= 1e-12)) throw Error(Errc::degenerate_field, "field has no dynamic range");

  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / peak;
  return NoiseField(field.width(), field.height(), std::move(out), true);
}

NoiseField make_gabor_noise(const AnisotropicNoiseParams& params, int width, int height, double density) {
  params.validate();
  const PointLattice lattice = scatter_points(width, height, params.kernel_size, density, params.seed);
  return normalize_field(synth_gabor_noise(params, lattice, width, height));
}

}  // namespace gabornoise
