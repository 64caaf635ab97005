#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gabornoise/perturbation.hpp"
#include "gabornoise/reference_model.hpp"

namespace gabornoise {

/// Matrix-free access to a linear map J and its transpose.
struct LinearOperatorProbe {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::function<std::vector<double>(std::span<const double>)> apply;
  std::function<std::vector<double>(std::span<const double>)> apply_transpose;

  /// Size-checked products; throw Errc::dimension_mismatch.
  std::vector<double> forward(std::span<const double> v) const;
  std::vector<double> backward(std::span<const double> u) const;
};

/// Dense row-major matrix as an operator (copies the data).
LinearOperatorProbe dense_operator(std::size_t rows, std::size_t cols, std::vector<double> data);

/// Rows of J stacked: v -> [J_1 v; J_2 v; ...], u -> sum_i J_i^T u_i.
LinearOperatorProbe stack_operators(std::vector<LinearOperatorProbe> parts);

/// Defaults approximate q = inf with a large finite exponent; p = q = 2 is
/// classical power iteration on J^T J.
struct SingularConfig {
  double p = 2.0;
  double q = 10.0;
  double epsilon = kDefaultEpsilon;  // target ||s||_q
  double tol = 1e-6;
  int max_iter = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SingularResult {
  std::vector<double> vector;  // scaled to ||s||_q = epsilon
  double value = 0.0;          // ||J s||_p / ||s||_q
  int iterations = 0;
  bool converged = false;
};

/// Elementwise psi_r(z) = sign(z) |z|^(r - 1).
std::vector<double> dual_map(std::span<const double> z, double r);
double lp_norm(std::span<const double> v, double p);

/// Generalized power iteration for the (p, q)-singular vector:
///   s <- psi_{q'}(J^T psi_p(J s)),  s <- s / ||s||_q,   q' = q / (q - 1)
/// from a seeded random start, until ||s_{k+1} - s_k||_inf < tol. On hitting
/// max_iter the best iterate seen is returned with converged = false.
SingularResult power_method(const LinearOperatorProbe& op, const SingularConfig& cfg);

enum class Layer { post_conv, post_pool, logits };

std::string_view to_string(Layer layer) noexcept;
/// Throws Errc::invalid_layer.
Layer parse_layer(std::string_view name);

/// Exact Jacobian of the reference model's layer map at x (pixel inputs).
/// The ReLU derivative is 0 where the pre-activation is <= 0.
LinearOperatorProbe layer_jacobian(const GaborBankClassifier& model, Layer layer, const ImageTensor& x);

struct SingularUap {
  PerturbationField perturbation;
  SingularResult singular;
};

/// Power method on the stacked Jacobians of the batch, reshaped to the
/// image and turned into an l-inf perturbation eps * sign(s).
SingularUap singular_uap(const GaborBankClassifier& model, Layer layer, std::span<const ImageTensor> batch,
                         const SingularConfig& cfg);

}  // namespace gabornoise
