#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gabornoise/perturbation.hpp"

namespace gabornoise {

/// Probability vector over classes.
struct Prediction {
  std::vector<double> probs;

  /// Ties go to the lowest index.
  std::size_t argmax() const noexcept;
  /// Nonnegative entries summing to 1 within tol.
  bool is_valid(double tol = 1e-6) const noexcept;
};

struct ModelDescriptor {
  std::string name;
  int input_width = 0;
  int input_height = 0;
  int input_channels = 3;
  int num_classes = 0;

  ImageShape input_shape() const noexcept { return {input_width, input_height, input_channels}; }
  void validate() const;
};

// A classifier mapping raw-pixel images to probability vectors. Any
// preprocessing the model needs happens behind this interface.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual const ModelDescriptor& descriptor() const = 0;

  /// One prediction per image, in order. Throws Errc::shape_mismatch on a
  /// wrongly sized image and Errc::oracle_failure on transport errors.
  virtual std::vector<Prediction> predict_batch(std::span<const ImageTensor> images) = 0;

  Prediction predict(const ImageTensor& image);

 protected:
  void check_shapes(std::span<const ImageTensor> images) const;
};

}  // namespace gabornoise
