#include "gabornoise/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gabornoise/error.hpp"

namespace gabornoise {

double pairwise_sum(std::span<const double> values) noexcept {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double output_distance(const Prediction& a, const Prediction& b) {
  if (a.probs.size() != b.probs.size()) {
    throw Error(Errc::length_mismatch, "predictions over " + std::to_string(a.probs.size()) + " and " +
                                           std::to_string(b.probs.size()) + " classes");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.probs.size(); ++i) d = std::max(d, std::abs(a.probs[i] - b.probs[i]));
  return d;
}

bool decision_changed(const Prediction& a, const Prediction& b) noexcept { return a.argmax() != b.argmax(); }

std::vector<Prediction> predict_all(Oracle& oracle, std::span<const ImageTensor> images) {
  std::vector<Prediction> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, images.size() - start);
    auto chunk = oracle.predict_batch(images.subspan(start, n));
    if (chunk.size() != n) throw Error(Errc::oracle_failure, "oracle returned the wrong number of predictions");
    for (auto& p : chunk) out.push_back(std::move(p));
  }
  return out;
}

std::vector<ImageOutcome> perturbation_outcomes(Oracle& oracle, std::span<const ImageTensor> images,
                                                std::span<const Prediction> clean, const PerturbationField& s) {
  if (images.empty()) throw Error(Errc::empty_dataset, "dataset is empty");
  if (clean.size() != images.size()) throw Error(Errc::length_mismatch, "clean predictions do not match dataset");

  std::vector<ImageOutcome> outcomes;
  outcomes.reserve(images.size());
  std::vector<ImageTensor> perturbed;
  for (std::size_t start = 0; start < images.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, images.size() - start);
    perturbed.clear();
    for (std::size_t i = 0; i < n; ++i) perturbed.push_back(apply(images[start + i], s));
    const auto preds = oracle.predict_batch(perturbed);
    if (preds.size() != n) throw Error(Errc::oracle_failure, "oracle returned the wrong number of predictions");
    for (std::size_t i = 0; i < n; ++i) {
      const Prediction& c = clean[start + i];
      outcomes.push_back({output_distance(c, preds[i]), decision_changed(c, preds[i])});
    }
  }
  return outcomes;
}

UniversalMetrics universal_metrics(std::span<const ImageOutcome> outcomes) {
  if (outcomes.empty()) throw Error(Errc::empty_dataset, "dataset is empty");
  std::vector<double> d(outcomes.size());
  std::vector<double> f(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    d[i] = outcomes[i].distance;
    f[i] = outcomes[i].flipped ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(outcomes.size());
  return {pairwise_sum(d) / n, pairwise_sum(f) / n};
}

UniversalMetrics universal_metrics(Oracle& oracle, std::span<const ImageTensor> images,
                                   std::span<const Prediction> clean, const PerturbationField& s) {
  return universal_metrics(perturbation_outcomes(oracle, images, clean, s));
}

double universal_sensitivity(Oracle& oracle, std::span<const ImageTensor> images, const PerturbationField& s) {
  if (images.empty()) throw Error(Errc::empty_dataset, "dataset is empty");
  const auto clean = predict_all(oracle, images);
  return universal_metrics(oracle, images, clean, s).sensitivity;
}

double universal_evasion(Oracle& oracle, std::span<const ImageTensor> images, const PerturbationField& s) {
  if (images.empty()) throw Error(Errc::empty_dataset, "dataset is empty");
  const auto clean = predict_all(oracle, images);
  return universal_metrics(oracle, images, clean, s).evasion;
}

AverageMetrics average_metrics(Oracle& oracle, const ImageTensor& x, std::span<const PerturbationField> set) {
  if (set.empty()) throw Error(Errc::empty_perturbation_set, "perturbation set is empty");
  const Prediction clean = oracle.predict(x);
  std::vector<double> d;
  std::vector<double> f;
  d.reserve(set.size());
  f.reserve(set.size());
  std::vector<ImageTensor> perturbed;
  for (std::size_t start = 0; start < set.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, set.size() - start);
    perturbed.clear();
    for (std::size_t i = 0; i < n; ++i) perturbed.push_back(apply(x, set[start + i]));
    const auto preds = oracle.predict_batch(perturbed);
    if (preds.size() != n) throw Error(Errc::oracle_failure, "oracle returned the wrong number of predictions");
    for (const auto& p : preds) {
      d.push_back(output_distance(clean, p));
      f.push_back(decision_changed(clean, p) ? 1.0 : 0.0);
    }
  }
  const auto n = static_cast<double>(set.size());
  return {pairwise_sum(d) / n, pairwise_sum(f) / n};
}

double average_sensitivity(Oracle& oracle, const ImageTensor& x, std::span<const PerturbationField> set) {
  return average_metrics(oracle, x, set).sensitivity;
}

double average_evasion(Oracle& oracle, const ImageTensor& x, std::span<const PerturbationField> set) {
  return average_metrics(oracle, x, set).evasion;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(Errc::empty_list, "quantile of an empty list");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted[lo];
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

Quartiles quartiles(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::empty_list, "quartiles of an empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return {quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5), quantile_sorted(sorted, 0.75)};
}

std::size_t Histogram::total() const noexcept {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw Error(Errc::invalid_argument, "histogram needs at least one bin");
  if (!(hi > lo)) throw Error(Errc::invalid_argument, "histogram range must have hi > lo");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    if (!(v >= lo && v <= hi)) throw Error(Errc::out_of_range, "value " + std::to_string(v) + " outside histogram range");
    auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

MetricSummary summarize(std::span<const double> values) {
  return {quartiles(values), histogram(values), values.size()};
}

CorrelationMatrix pearson_correlation_matrix(std::span<const NamedColumn> columns) {
  const std::size_t k = columns.size();
  if (k == 0) throw Error(Errc::empty_list, "no columns");
  const std::size_t n = columns.front().values.size();
  for (const auto& c : columns) {
    if (c.values.size() != n) throw Error(Errc::length_mismatch, "column '" + c.name + "' has a different length");
  }
  if (n < 2) throw Error(Errc::length_mismatch, "correlation needs at least 2 rows");

  std::vector<std::vector<double>> centered(k, std::vector<double>(n));
  std::vector<double> norm(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double mean = pairwise_sum(columns[c].values) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
      centered[c][i] = columns[c].values[i] - mean;
      sq[i] = centered[c][i] * centered[c][i];
    }
    norm[c] = std::sqrt(pairwise_sum(sq));
  }

  CorrelationMatrix m;
  for (const auto& c : columns) m.labels.push_back(c.name);
  m.entries.assign(k * k, std::nullopt);
  std::vector<double> prod(n);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      if (norm[a] == 0.0 || norm[b] == 0.0) continue;
      double r = 1.0;
      if (a != b) {
        for (std::size_t i = 0; i < n; ++i) prod[i] = centered[a][i] * centered[b][i];
        r = std::clamp(pairwise_sum(prod) / (norm[a] * norm[b]), -1.0, 1.0);
      }
      m.entries[a * k + b] = r;
      m.entries[b * k + a] = r;
    }
  }
  return m;
}

}  // namespace gabornoise
