#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gabornoise/oracle.hpp"
#include "gabornoise/perturbation.hpp"

namespace gabornoise {

// Images are pushed through the oracle in chunks of this many.
inline constexpr std::size_t kEvalChunk = 64;

/// Pairwise summation in index order; identical results for identical input
/// regardless of how the values were produced.
double pairwise_sum(std::span<const double> values) noexcept;

/// ||a - b||_inf. Throws Errc::length_mismatch.
double output_distance(const Prediction& a, const Prediction& b);
bool decision_changed(const Prediction& a, const Prediction& b) noexcept;

struct UniversalMetrics {
  double sensitivity = 0.0;
  double evasion = 0.0;
};

struct AverageMetrics {
  double sensitivity = 0.0;
  double evasion = 0.0;
};

/// Per-image outcome of one perturbation.
struct ImageOutcome {
  double distance = 0.0;
  bool flipped = false;
};

/// Perturbed predictions for every image of X, compared to precomputed clean
/// predictions. The building block for both universal and average metrics.
std::vector<ImageOutcome> perturbation_outcomes(Oracle& oracle, std::span<const ImageTensor> images,
                                                std::span<const Prediction> clean, const PerturbationField& s);

UniversalMetrics universal_metrics(std::span<const ImageOutcome> outcomes);
UniversalMetrics universal_metrics(Oracle& oracle, std::span<const ImageTensor> images,
                                   std::span<const Prediction> clean, const PerturbationField& s);

std::vector<Prediction> predict_all(Oracle& oracle, std::span<const ImageTensor> images);

/// Mean over X of ||f(x) - f(x + s)||_inf. Throws Errc::empty_dataset.
double universal_sensitivity(Oracle& oracle, std::span<const ImageTensor> images, const PerturbationField& s);
/// Fraction of X whose argmax changes under s.
double universal_evasion(Oracle& oracle, std::span<const ImageTensor> images, const PerturbationField& s);

/// Mean over S of ||f(x) - f(x + s)||_inf. Throws Errc::empty_perturbation_set.
double average_sensitivity(Oracle& oracle, const ImageTensor& x, std::span<const PerturbationField> set);
/// Fraction of S that changes the argmax on x.
double average_evasion(Oracle& oracle, const ImageTensor& x, std::span<const PerturbationField> set);
AverageMetrics average_metrics(Oracle& oracle, const ImageTensor& x, std::span<const PerturbationField> set);

// ---------------------------------------------------------------------------
// Descriptive statistics.

struct Quartiles {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
};

/// Linear interpolation at h = (n - 1) p on the sorted values.
double quantile_sorted(std::span<const double> sorted, double p);
/// Throws Errc::empty_list.
Quartiles quartiles(std::span<const double> values);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  std::size_t total() const noexcept;
};

/// Equal-width bins, left-closed right-open except the last which is closed.
/// Values outside [lo, hi] throw Errc::out_of_range.
Histogram histogram(std::span<const double> values, std::size_t bins = 50, double lo = 0.0, double hi = 1.0);

struct MetricSummary {
  Quartiles quartiles;
  Histogram histogram;
  std::size_t n = 0;
};

MetricSummary summarize(std::span<const double> values);

struct NamedColumn {
  std::string name;
  std::vector<double> values;
};

/// Pearson r for every pair; entries involving a zero-variance column are
/// nullopt. Diagonal entries of well-defined columns are exactly 1.
struct CorrelationMatrix {
  std::vector<std::string> labels;
  std::vector<std::optional<double>> entries;

  std::size_t size() const noexcept { return labels.size(); }
  const std::optional<double>& at(std::size_t i, std::size_t j) const { return entries[i * labels.size() + j]; }
};

/// Throws Errc::length_mismatch on unequal columns or n < 2.
CorrelationMatrix pearson_correlation_matrix(std::span<const NamedColumn> columns);

}  // namespace gabornoise
