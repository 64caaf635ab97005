#include "gabornoise/oracle.hpp"

#include <cmath>

#include "gabornoise/error.hpp"

namespace gabornoise {

std::size_t Prediction::argmax() const noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

bool Prediction::is_valid(double tol) const noexcept {
  if (probs.empty()) return false;
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

void ModelDescriptor::validate() const {
  if (input_width < 1 || input_height < 1 || input_channels < 1) {
    throw Error(Errc::invalid_argument, "model input dimensions must be >= 1");
  }
  if (num_classes < 2) throw Error(Errc::invalid_argument, "model must have at least 2 classes");
}

Prediction Oracle::predict(const ImageTensor& image) {
  auto out = predict_batch(std::span<const ImageTensor>(&image, 1));
  return std::move(out.front());
}

void Oracle::check_shapes(std::span<const ImageTensor> images) const {
  const ImageShape expected = descriptor().input_shape();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!(images[i].shape == expected)) {
      throw Error(Errc::shape_mismatch, "image " + std::to_string(i) + " is " + to_string(images[i].shape) +
                                            ", model '" + descriptor().name + "' expects " + to_string(expected));
    }
  }
}

}  // namespace gabornoise
