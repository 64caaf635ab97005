#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gabornoise/harness.hpp"

namespace gabornoise {

/// Plot-ready JSON: per-oracle quartiles and 50-bin histograms of universal
/// (and, given inputs, average) metrics split by Gabor and random noise, the
/// Pearson matrix over Gabor records (sigma, omega, lambda and every metric
/// column), the top-10 transfer table per source oracle, and the config echo
/// when given (a JSON object text). "method" names the quantile rule and
/// histogram bin count.
std::string build_report_json(const RecordTable& table, const std::vector<InputRecord>* inputs = nullptr,
                              const std::optional<std::string>& config_json = std::nullopt);

/// Quartile table for one oracle, values in percent:
///
///                Universal Sensitivity   Universal Evasion
///   Quartile       Gabor     Random       Gabor     Random
///   1st             34.2       13.8        49.3       20.8
///
/// Columns without records print "-".
std::string format_quartile_table(const RecordTable& table, std::size_t oracle);
/// Same layout over per-input average metrics.
std::string format_input_quartile_table(const std::vector<InputRecord>& inputs, const std::string& oracle_name,
                                        std::size_t oracle);

}  // namespace gabornoise
