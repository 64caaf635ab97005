#include "gabornoise/report.hpp"

#include <fmt/format.h>

#include <nlohmann/json.hpp>

#include "gabornoise/error.hpp"
#include "gabornoise/metrics.hpp"

namespace gabornoise {

using nlohmann::json;

namespace {

json summary_json(const std::vector<double>& values) {
  if (values.empty()) return nullptr;
  const MetricSummary s = summarize(values);
  return {{"n", s.n},
          {"quartiles", {{"q1", s.quartiles.q1}, {"q2", s.quartiles.q2}, {"q3", s.quartiles.q3}}},
          {"histogram", {{"lo", s.histogram.lo}, {"hi", s.histogram.hi}, {"counts", s.histogram.counts}}}};
}

std::vector<double> column(const RecordTable& t, RecordKind kind, std::size_t oracle, bool evasion) {
  std::vector<double> out;
  for (const auto& r : t.records) {
    if (r.kind != kind) continue;
    const auto& m = r.metrics.at(oracle);
    out.push_back(evasion ? m.evasion : m.sensitivity);
  }
  return out;
}

std::vector<double> input_column(const std::vector<InputRecord>& inputs, bool random, std::size_t oracle,
                                 bool evasion) {
  std::vector<double> out;
  for (const auto& r : inputs) {
    const auto& set = random ? r.random : r.gabor;
    if (set.empty()) continue;
    out.push_back(evasion ? set.at(oracle).evasion : set.at(oracle).sensitivity);
  }
  return out;
}

json record_json(const SweepRecord& r, const std::vector<std::string>& names) {
  json metrics = json::object();
  for (std::size_t o = 0; o < names.size(); ++o) {
    metrics[names[o]] = {{"usens", r.metrics[o].sensitivity}, {"uevas", r.metrics[o].evasion}};
  }
  json j = {{"id", r.id}, {"seed", r.seed}, {"metrics", std::move(metrics)}};
  if (r.theta) {
    j["sigma"] = r.theta->sigma;
    j["omega"] = r.theta->omega;
    j["lambda"] = r.theta->lambda_freq;
  }
  return j;
}

std::string cell(const std::vector<double>& values, int which) {
  if (values.empty()) return "-";
  const Quartiles q = quartiles(values);
  const double v = which == 0 ? q.q1 : which == 1 ? q.q2 : q.q3;
  return fmt::format("{:.1f}", 100.0 * v);
}

std::string quartile_table(const std::string& title, const std::string& left, const std::string& right,
                           const std::vector<double>* cols) {
  std::string out = title + "\n";
  out += fmt::format("{:<10}{:^22}{:^22}\n", "", left, right);
  out += fmt::format("{:<10}{:>11}{:>11}{:>11}{:>11}\n", "Quartile", "Gabor", "Random", "Gabor", "Random");
  const char* labels[] = {"1st", "2nd", "3rd"};
  for (int q = 0; q < 3; ++q) {
    out += fmt::format("{:<10}{:>11}{:>11}{:>11}{:>11}\n", labels[q], cell(cols[0], q), cell(cols[1], q),
                       cell(cols[2], q), cell(cols[3], q));
  }
  return out;
}

}  // namespace

std::string build_report_json(const RecordTable& table, const std::vector<InputRecord>* inputs,
                              const std::optional<std::string>& config_json) {
  const auto& names = table.oracle_names;
  json report;
  report["oracles"] = names;
  report["method"] = {{"quantiles", "linear interpolation, h = (n - 1) p"},
                      {"histogram_bins", 50},
                      {"correlation", "pearson over gabor records"}};
  report["counts"] = {{"gabor", column(table, RecordKind::gabor, 0, false).size()},
                      {"random", column(table, RecordKind::random, 0, false).size()}};

  json universal = json::object();
  for (std::size_t o = 0; o < names.size(); ++o) {
    json per = json::object();
    for (auto kind : {RecordKind::gabor, RecordKind::random}) {
      per[std::string(to_string(kind))] = {{"sensitivity", summary_json(column(table, kind, o, false))},
                                           {"evasion", summary_json(column(table, kind, o, true))}};
    }
    universal[names[o]] = std::move(per);
  }
  report["universal"] = std::move(universal);

  if (inputs != nullptr) {
    json average = json::object();
    for (std::size_t o = 0; o < names.size(); ++o) {
      json per = json::object();
      per["gabor"] = {{"sensitivity", summary_json(input_column(*inputs, false, o, false))},
                      {"evasion", summary_json(input_column(*inputs, false, o, true))}};
      per["random"] = {{"sensitivity", summary_json(input_column(*inputs, true, o, false))},
                       {"evasion", summary_json(input_column(*inputs, true, o, true))}};
      average[names[o]] = std::move(per);
    }
    report["average"] = std::move(average);
  }

  std::vector<NamedColumn> cols = {{"sigma", {}}, {"omega", {}}, {"lambda", {}}};
  for (const auto& n : names) {
    cols.push_back({n + "_usens", {}});
    cols.push_back({n + "_uevas", {}});
  }
  for (const auto& r : table.records) {
    if (r.kind != RecordKind::gabor || !r.theta) continue;
    cols[0].values.push_back(r.theta->sigma);
    cols[1].values.push_back(r.theta->omega);
    cols[2].values.push_back(r.theta->lambda_freq);
    for (std::size_t o = 0; o < names.size(); ++o) {
      cols[3 + 2 * o].values.push_back(r.metrics[o].sensitivity);
      cols[4 + 2 * o].values.push_back(r.metrics[o].evasion);
    }
  }
  if (cols[0].values.size() >= 2) {
    const CorrelationMatrix cm = pearson_correlation_matrix(cols);
    json rows = json::array();
    for (std::size_t i = 0; i < cm.size(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < cm.size(); ++j) {
        const auto& e = cm.at(i, j);
        row.push_back(e ? json(*e) : json(nullptr));
      }
      rows.push_back(std::move(row));
    }
    report["correlation"] = {{"labels", cm.labels}, {"matrix", std::move(rows)}};
  } else {
    report["correlation"] = nullptr;
  }

  json transfer = json::object();
  for (std::size_t o = 0; o < names.size(); ++o) {
    json rows = json::array();
    for (const auto& r : transfer_report(table, o, 10)) rows.push_back(record_json(r, names));
    transfer[names[o]] = std::move(rows);
  }
  report["transfer_top10"] = std::move(transfer);

  if (config_json) {
    try {
      report["config"] = json::parse(*config_json);
    } catch (const json::parse_error& e) {
      throw Error(Errc::format_error, std::string("config echo is not JSON: ") + e.what());
    }
  }
  return report.dump(2) + "\n";
}

std::string format_quartile_table(const RecordTable& table, std::size_t oracle) {
  if (oracle >= table.oracle_names.size()) throw Error(Errc::out_of_range, "no such oracle");
  const std::vector<double> cols[4] = {
      column(table, RecordKind::gabor, oracle, false), column(table, RecordKind::random, oracle, false),
      column(table, RecordKind::gabor, oracle, true), column(table, RecordKind::random, oracle, true)};
  return quartile_table("Universal metric quartiles (%), " + table.oracle_names[oracle], "Universal Sensitivity",
                        "Universal Evasion", cols);
}

std::string format_input_quartile_table(const std::vector<InputRecord>& inputs, const std::string& oracle_name,
                                        std::size_t oracle) {
  const std::vector<double> cols[4] = {
      input_column(inputs, false, oracle, false), input_column(inputs, true, oracle, false),
      input_column(inputs, false, oracle, true), input_column(inputs, true, oracle, true)};
  return quartile_table("Average metric quartiles over inputs (%), " + oracle_name, "Average Sensitivity",
                        "Average Evasion", cols);
}

}  // namespace gabornoise
