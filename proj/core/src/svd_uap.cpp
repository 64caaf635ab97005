#include "gabornoise/svd_uap.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "gabornoise/error.hpp"
#include "gabornoise/rng.hpp"

namespace gabornoise {

std::vector<double> LinearOperatorProbe::forward(std::span<const double> v) const {
  if (v.size() != input_dim) {
    throw Error(Errc::dimension_mismatch, "operator input has " + std::to_string(v.size()) + " entries, expected " +
                                              std::to_string(input_dim));
  }
  auto out = apply(v);
  if (out.size() != output_dim) throw Error(Errc::dimension_mismatch, "operator produced wrong output size");
  return out;
}

std::vector<double> LinearOperatorProbe::backward(std::span<const double> u) const {
  if (u.size() != output_dim) {
    throw Error(Errc::dimension_mismatch, "transpose input has " + std::to_string(u.size()) + " entries, expected " +
                                              std::to_string(output_dim));
  }
  auto out = apply_transpose(u);
  if (out.size() != input_dim) throw Error(Errc::dimension_mismatch, "transpose produced wrong output size");
  return out;
}

LinearOperatorProbe dense_operator(std::size_t rows, std::size_t cols, std::vector<double> data) {
  if (data.size() != rows * cols) throw Error(Errc::dimension_mismatch, "matrix data does not match rows x cols");
  auto m = std::make_shared<const std::vector<double>>(std::move(data));
  LinearOperatorProbe op;
  op.input_dim = cols;
  op.output_dim = rows;
  op.apply = [m, rows, cols](std::span<const double> v) {
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) acc += (*m)[r * cols + c] * v[c];
      out[r] = acc;
    }
    return out;
  };
  op.apply_transpose = [m, rows, cols](std::span<const double> u) {
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[c] += (*m)[r * cols + c] * u[r];
    }
    return out;
  };
  return op;
}

LinearOperatorProbe stack_operators(std::vector<LinearOperatorProbe> parts) {
  if (parts.empty()) throw Error(Errc::empty_list, "no operators to stack");
  const std::size_t in = parts.front().input_dim;
  std::size_t out = 0;
  for (const auto& p : parts) {
    if (p.input_dim != in) throw Error(Errc::dimension_mismatch, "stacked operators must share the input dimension");
    out += p.output_dim;
  }
  auto shared = std::make_shared<const std::vector<LinearOperatorProbe>>(std::move(parts));
  LinearOperatorProbe op;
  op.input_dim = in;
  op.output_dim = out;
  op.apply = [shared, out](std::span<const double> v) {
    std::vector<double> result;
    result.reserve(out);
    for (const auto& p : *shared) {
      auto part = p.forward(v);
      result.insert(result.end(), part.begin(), part.end());
    }
    return result;
  };
  op.apply_transpose = [shared, in](std::span<const double> u) {
    std::vector<double> result(in, 0.0);
    std::size_t offset = 0;
    for (const auto& p : *shared) {
      auto part = p.backward(u.subspan(offset, p.output_dim));
      for (std::size_t i = 0; i < in; ++i) result[i] += part[i];
      offset += p.output_dim;
    }
    return result;
  };
  return op;
}

void SingularConfig::validate() const {
  if (!(p > 1.0) || !std::isfinite(p)) throw Error(Errc::invalid_argument, "p must be finite and > 1");
  if (!(q > 1.0) || !std::isfinite(q)) throw Error(Errc::invalid_argument, "q must be finite and > 1");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(Errc::invalid_argument, "epsilon must be > 0");
  if (!(tol > 0.0)) throw Error(Errc::invalid_argument, "tol must be > 0");
  if (max_iter < 1) throw Error(Errc::invalid_argument, "max_iter must be >= 1");
}

std::vector<double> dual_map(std::span<const double> z, double r) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double a = std::abs(z[i]);
    const double m = r == 2.0 ? a : std::pow(a, r - 1.0);
    out[i] = z[i] < 0.0 ? -m : (z[i] > 0.0 ? m : 0.0);
  }
  return out;
}

double lp_norm(std::span<const double> v, double p) {
  // Scale by the max entry so large exponents neither overflow nor underflow.
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::abs(x));
  if (peak == 0.0) return 0.0;
  double acc = 0.0;
  for (double x : v) {
    const double r = std::abs(x) / peak;
    acc += p == 2.0 ? r * r : std::pow(r, p);
  }
  return peak * (p == 2.0 ? std::sqrt(acc) : std::pow(acc, 1.0 / p));
}

namespace {

void scale_to_unit(std::vector<double>& v, double q) {
  const double n = lp_norm(v, q);
  if (n == 0.0) throw Error(Errc::degenerate_field, "power iteration reached the zero vector");
  for (double& x : v) x /= n;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

SingularResult power_method(const LinearOperatorProbe& op, const SingularConfig& cfg) {
  cfg.validate();
  if (op.input_dim == 0 || op.output_dim == 0) throw Error(Errc::dimension_mismatch, "operator has an empty dimension");

  const double q_dual = cfg.q / (cfg.q - 1.0);
  SplitMix64 rng(cfg.seed);
  std::vector<double> s(op.input_dim);
  for (double& x : s) x = rng.symmetric();
  scale_to_unit(s, cfg.q);

  auto value_of = [&](std::span<const double> unit) { return lp_norm(op.forward(unit), cfg.p); };

  SingularResult result;
  std::vector<double> best = s;
  double best_value = value_of(s);
  for (int k = 1; k <= cfg.max_iter; ++k) {
    std::vector<double> next = dual_map(op.backward(dual_map(op.forward(s), cfg.p)), q_dual);
    scale_to_unit(next, cfg.q);
    const double diff = max_abs_diff(next, s);
    s = std::move(next);
    const double v = value_of(s);
    if (v >= best_value) {
      best_value = v;
      best = s;
    }
    result.iterations = k;
    if (diff < cfg.tol) {
      result.converged = true;
      break;
    }
  }
  if (result.converged) {
    best = s;
    best_value = value_of(s);
  }
  for (double& x : best) x *= cfg.epsilon;
  result.vector = std::move(best);
  result.value = best_value;
  return result;
}

std::string_view to_string(Layer layer) noexcept {
  switch (layer) {
    case Layer::post_conv: return "post_conv";
    case Layer::post_pool: return "post_pool";
    case Layer::logits: return "logits";
  }
  return "unknown";
}

Layer parse_layer(std::string_view name) {
  if (name == "post_conv") return Layer::post_conv;
  if (name == "post_pool") return Layer::post_pool;
  if (name == "logits") return Layer::logits;
  throw Error(Errc::invalid_layer, "unknown layer '" + std::string(name) + "' (post_conv, post_pool, logits)");
}

LinearOperatorProbe layer_jacobian(const GaborBankClassifier& model, Layer layer, const ImageTensor& x) {
  const auto act = model.forward(x);
  std::vector<double> mask(act.pre_activation.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = act.pre_activation[i] > 0.0 ? 1.0 : 0.0;
  auto gate = std::make_shared<const std::vector<double>>(std::move(mask));
  const GaborBankClassifier* m = &model;

  auto conv_jvp = [m, gate](std::span<const double> v) {
    auto r = m->convolve(m->luminance(v));
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= (*gate)[i];
    return r;
  };
  auto conv_vjp = [m, gate](std::span<const double> u) {
    std::vector<double> g(u.begin(), u.end());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= (*gate)[i];
    return m->luminance_transpose(m->convolve_transpose(g));
  };

  LinearOperatorProbe op;
  op.input_dim = GaborBankClassifier::kInputDim;
  switch (layer) {
    case Layer::post_conv:
      op.output_dim = GaborBankClassifier::kConvSize;
      op.apply = conv_jvp;
      op.apply_transpose = conv_vjp;
      break;
    case Layer::post_pool:
      op.output_dim = GaborBankClassifier::kFeatures;
      op.apply = [m, conv_jvp](std::span<const double> v) { return m->pool(conv_jvp(v)); };
      op.apply_transpose = [m, conv_vjp](std::span<const double> u) { return conv_vjp(m->pool_transpose(u)); };
      break;
    case Layer::logits:
      op.output_dim = GaborBankClassifier::kClasses;
      op.apply = [m, conv_jvp](std::span<const double> v) { return m->project(m->pool(conv_jvp(v))); };
      op.apply_transpose = [m, conv_vjp](std::span<const double> u) {
        return conv_vjp(m->pool_transpose(m->project_transpose(u)));
      };
      break;
  }
  return op;
}

SingularUap singular_uap(const GaborBankClassifier& model, Layer layer, std::span<const ImageTensor> batch,
                         const SingularConfig& cfg) {
  if (batch.empty()) throw Error(Errc::empty_dataset, "singular_uap needs at least one image");
  std::vector<LinearOperatorProbe> parts;
  parts.reserve(batch.size());
  for (const auto& x : batch) parts.push_back(layer_jacobian(model, layer, x));
  const LinearOperatorProbe op = parts.size() == 1 ? std::move(parts.front()) : stack_operators(std::move(parts));

  SingularUap out;
  out.singular = power_method(op, cfg);
  out.perturbation.shape = model.descriptor().input_shape();
  out.perturbation.epsilon = cfg.epsilon;
  out.perturbation.seed = cfg.seed;
  out.perturbation.values.resize(out.perturbation.shape.size());
  const auto eps = static_cast<float>(cfg.epsilon);
  for (std::size_t i = 0; i < out.singular.vector.size(); ++i) {
    const double v = out.singular.vector[i];
    out.perturbation.values[i] = v > 0.0 ? eps : (v < 0.0 ? -eps : 0.0f);
  }
  out.perturbation.provenance = SingularVectorProvenance{std::string(to_string(layer)), cfg.p, cfg.q,
                                                         static_cast<int>(batch.size()), out.singular.iterations,
                                                         out.singular.converged, model.seed()};
  return out;
}

}  // namespace gabornoise
