#include "gabornoise/harness.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "gabornoise/error.hpp"
#include "gabornoise/external_oracle.hpp"
#include "gabornoise/io.hpp"
#include "gabornoise/reference_model.hpp"

namespace gabornoise {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(std::string_view field, std::string_view what) {
  throw Error(Errc::invalid_config, fmt::format("config field '{}': {}", field, what));
}

bool valid_oracle_name(std::string_view name) {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

}  // namespace

void ThetaRanges::validate() const {
  auto check = [](const char* name, const Range& r, bool positive) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) config_error(name, "bounds must be finite");
    if (r.lo > r.hi) config_error(name, "lower bound exceeds upper bound");
    if (positive && !(r.lo > 0.0)) config_error(name, "lower bound must be > 0");
  };
  check("ranges.sigma", sigma, true);
  check("ranges.omega", omega, false);
  check("ranges.lambda", lambda, true);
}

NoiseTheta sample_theta(const ThetaRanges& ranges, SplitMix64& rng) {
  NoiseTheta t;
  t.sigma = rng.uniform(ranges.sigma.lo, ranges.sigma.hi);
  t.omega = rng.uniform(ranges.omega.lo, ranges.omega.hi);
  t.lambda_freq = rng.uniform(ranges.lambda.lo, ranges.lambda.hi);
  return t;
}

std::unique_ptr<Oracle> make_oracle(const std::string& command, std::chrono::milliseconds handshake_timeout) {
  constexpr std::string_view builtin = "builtin";
  if (command == builtin) return std::make_unique<GaborBankClassifier>(0);
  if (command.starts_with("builtin:")) {
    const std::string_view digits = std::string_view(command).substr(builtin.size() + 1);
    std::uint64_t seed = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
    if (ec != std::errc() || end != digits.data() + digits.size() || digits.empty()) {
      throw Error(Errc::invalid_argument, "bad builtin oracle seed in '" + command + "'");
    }
    return std::make_unique<GaborBankClassifier>(seed);
  }
  ExternalOracleOptions opts;
  opts.handshake_timeout = handshake_timeout;
  return std::make_unique<ExternalOracle>(command, opts);
}

// ---------------------------------------------------------------------------
// Configuration.

void SweepConfig::validate() const {
  if (n_perturbations < 1) config_error("n_perturbations", "must be >= 1");
  if (n_images < 1) config_error("n_images", "must be >= 1");
  if (dataset.empty()) config_error("dataset", "must name a dataset");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) config_error("epsilon", "must be > 0");
  if (kernel_size < 1) config_error("kernel_size", "must be >= 1");
  if (!(density > 0.0) || !std::isfinite(density)) config_error("density", "must be > 0");
  if (jobs < 1) config_error("jobs", "must be >= 1");
  ranges.validate();
  if (oracles.empty()) config_error("oracles", "at least one oracle is required");
  for (std::size_t i = 0; i < oracles.size(); ++i) {
    const auto& o = oracles[i];
    const std::string field = fmt::format("oracles[{}]", i);
    if (!valid_oracle_name(o.name)) config_error(field + ".name", "must be non-empty [A-Za-z0-9_-]");
    if (o.command.empty()) config_error(field + ".command", "must not be empty");
    for (std::size_t j = 0; j < i; ++j) {
      if (oracles[j].name == o.name) config_error(field + ".name", "duplicate oracle name '" + o.name + "'");
    }
  }
}

std::uint64_t SweepConfig::effective_subsample_seed() const noexcept {
  return subsample_seed ? *subsample_seed : mix_seed(master_seed, ~std::uint64_t{0});
}

namespace {

double number_field(const json& v, std::string_view field) {
  if (!v.is_number()) config_error(field, "expected a number");
  return v.get<double>();
}

std::uint64_t unsigned_field(const json& v, std::string_view field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) config_error(field, "must be nonnegative");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  config_error(field, "expected a nonnegative integer");
}

Range range_field(const json& v, std::string_view field) {
  if (!v.is_array() || v.size() != 2) config_error(field, "expected [lower, upper]");
  return {number_field(v[0], field), number_field(v[1], field)};
}

}  // namespace

SweepConfig parse_sweep_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::invalid_config, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::invalid_config, "config must be a JSON object");

  SweepConfig cfg;
  for (const auto& [key, v] : j.items()) {
    if (key == "n_perturbations") {
      cfg.n_perturbations = unsigned_field(v, key);
    } else if (key == "dataset" || key == "dataset_path") {
      if (!v.is_string()) config_error(key, "expected a string");
      cfg.dataset = v.get<std::string>();
    } else if (key == "n_images") {
      cfg.n_images = unsigned_field(v, key);
    } else if (key == "epsilon") {
      cfg.epsilon = number_field(v, key);
    } else if (key == "ranges") {
      if (!v.is_object()) config_error(key, "expected an object");
      for (const auto& [rk, rv] : v.items()) {
        const std::string field = "ranges." + rk;
        if (rk == "sigma") {
          cfg.ranges.sigma = range_field(rv, field);
        } else if (rk == "omega") {
          cfg.ranges.omega = range_field(rv, field);
        } else if (rk == "lambda") {
          cfg.ranges.lambda = range_field(rv, field);
        } else {
          config_error(field, "unknown field");
        }
      }
    } else if (key == "kernel_size") {
      const auto k = unsigned_field(v, key);
      if (k > 4096) config_error(key, "too large");
      cfg.kernel_size = static_cast<int>(k);
    } else if (key == "density") {
      cfg.density = number_field(v, key);
    } else if (key == "master_seed") {
      cfg.master_seed = unsigned_field(v, key);
    } else if (key == "subsample_seed") {
      if (!v.is_null()) cfg.subsample_seed = unsigned_field(v, key);
    } else if (key == "oracles") {
      if (!v.is_array()) config_error(key, "expected an array of {name, command}");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& o = v[i];
        const std::string field = fmt::format("oracles[{}]", i);
        if (!o.is_object()) config_error(field, "expected {name, command}");
        OracleSpec spec;
        for (const auto& [ok, ov] : o.items()) {
          if (ok != "name" && ok != "command") config_error(field + "." + ok, "unknown field");
          if (!ov.is_string()) config_error(field + "." + ok, "expected a string");
        }
        if (!o.contains("name")) config_error(field + ".name", "missing");
        if (!o.contains("command")) config_error(field + ".command", "missing");
        spec.name = o["name"].get<std::string>();
        spec.command = o["command"].get<std::string>();
        cfg.oracles.push_back(std::move(spec));
      }
    } else if (key == "include_random_baseline") {
      if (!v.is_boolean()) config_error(key, "expected true or false");
      cfg.include_random_baseline = v.get<bool>();
    } else if (key == "mode") {
      if (!v.is_string()) config_error(key, "expected \"scaled\" or \"sign\"");
      try {
        cfg.mode = parse_mode(v.get<std::string>());
      } catch (const Error&) {
        config_error(key, "expected \"scaled\" or \"sign\"");
      }
    } else if (key == "output_dir") {
      if (!v.is_string()) config_error(key, "expected a string");
      cfg.output_dir = v.get<std::string>();
    } else if (key == "save_perturbations") {
      if (!v.is_boolean()) config_error(key, "expected true or false");
      cfg.save_perturbations = v.get<bool>();
    } else if (key == "jobs") {
      const auto n = unsigned_field(v, key);
      if (n < 1 || n > 1024) config_error(key, "must be in [1, 1024]");
      cfg.jobs = static_cast<int>(n);
    } else {
      config_error(key, "unknown field");
    }
  }
  cfg.validate();
  return cfg;
}

SweepConfig load_sweep_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file_bytes(path);
  } catch (const Error& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  return parse_sweep_config(text);
}

namespace {

json config_echo(const SweepConfig& cfg) {
  json oracles = json::array();
  for (const auto& o : cfg.oracles) oracles.push_back({{"name", o.name}, {"command", o.command}});
  return {{"n_perturbations", cfg.n_perturbations},
          {"dataset", cfg.dataset},
          {"n_images", cfg.n_images},
          {"epsilon", cfg.epsilon},
          {"ranges",
           {{"sigma", {cfg.ranges.sigma.lo, cfg.ranges.sigma.hi}},
            {"omega", {cfg.ranges.omega.lo, cfg.ranges.omega.hi}},
            {"lambda", {cfg.ranges.lambda.lo, cfg.ranges.lambda.hi}}}},
          {"kernel_size", cfg.kernel_size},
          {"density", cfg.density},
          {"master_seed", cfg.master_seed},
          {"subsample_seed", cfg.effective_subsample_seed()},
          {"oracles", std::move(oracles)},
          {"include_random_baseline", cfg.include_random_baseline},
          {"mode", std::string(to_string(cfg.mode))},
          {"save_perturbations", cfg.save_perturbations}};
}

}  // namespace

std::string sweep_config_json(const SweepConfig& cfg) { return config_echo(cfg).dump(); }

// ---------------------------------------------------------------------------
// Perturbation identities.

std::uint64_t perturbation_seed(const SweepConfig& cfg, std::size_t id) noexcept {
  return mix_seed(cfg.master_seed, id);
}

NoiseTheta sweep_theta(const SweepConfig& cfg, std::size_t id) {
  SplitMix64 rng(mix_seed(perturbation_seed(cfg, id), 1));
  return sample_theta(cfg.ranges, rng);
}

PerturbationField sweep_perturbation(const SweepConfig& cfg, const ImageShape& shape, std::size_t id) {
  const std::uint64_t seed = perturbation_seed(cfg, id);
  if (id < cfg.n_perturbations) {
    AnisotropicNoiseParams params;
    params.theta = sweep_theta(cfg, id);
    params.kernel_size = cfg.kernel_size;
    params.seed = seed;
    return gabor_perturbation(params, shape.width, shape.height, cfg.epsilon, cfg.mode, cfg.density, shape.channels);
  }
  if (!cfg.include_random_baseline || id >= 2 * cfg.n_perturbations) {
    throw Error(Errc::out_of_range, "perturbation id " + std::to_string(id) + " is not part of the sweep");
  }
  return random_uniform_perturbation(shape.width, shape.height, cfg.epsilon, seed, shape.channels);
}

std::string_view to_string(RecordKind kind) noexcept { return kind == RecordKind::gabor ? "gabor" : "random"; }

// ---------------------------------------------------------------------------
// Pairwise accumulation.

namespace {
constexpr std::size_t kPairwiseLeaf = 8;
}

PairwiseAccumulator::PairwiseAccumulator(std::size_t n, std::size_t lanes) : n_(n), lanes_(lanes) {
  if (n_ > 0) leaf_ = leaf_for(0);
}

PairwiseAccumulator::Node PairwiseAccumulator::leaf_for(std::size_t pos) const {
  std::size_t lo = 0;
  std::size_t hi = n_;
  while (hi - lo > kPairwiseLeaf) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (pos < mid) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {lo, hi, std::vector<double>(lanes_, 0.0)};
}

bool PairwiseAccumulator::is_split(std::size_t lo, std::size_t mid, std::size_t hi) const {
  std::size_t l = 0;
  std::size_t h = n_;
  while (h - l > kPairwiseLeaf) {
    const std::size_t m = l + (h - l) / 2;
    if (l == lo && h == hi) return m == mid;
    if (hi <= m) {
      h = m;
    } else if (lo >= m) {
      l = m;
    } else {
      return false;
    }
  }
  return false;
}

void PairwiseAccumulator::add(std::span<const double> lane_values) {
  if (lane_values.size() != lanes_) throw Error(Errc::length_mismatch, "accumulator lane count mismatch");
  if (pos_ >= n_) throw Error(Errc::out_of_range, "accumulator already holds all values");
  for (std::size_t l = 0; l < lanes_; ++l) leaf_.sums[l] += lane_values[l];
  ++pos_;
  if (pos_ < leaf_.hi) return;

  stack_.push_back(std::move(leaf_));
  while (stack_.size() >= 2) {
    Node& left = stack_[stack_.size() - 2];
    Node& right = stack_.back();
    if (!is_split(left.lo, left.hi, right.hi)) break;
    for (std::size_t l = 0; l < lanes_; ++l) left.sums[l] = left.sums[l] + right.sums[l];
    left.hi = right.hi;
    stack_.pop_back();
  }
  if (pos_ < n_) leaf_ = leaf_for(pos_);
}

std::vector<double> PairwiseAccumulator::result() const {
  if (pos_ != n_) throw Error(Errc::out_of_range, "accumulator is incomplete");
  if (n_ == 0) return std::vector<double>(lanes_, 0.0);
  return stack_.front().sums;
}

PairwiseAccumulator PairwiseAccumulator::restore(std::size_t n, std::size_t lanes, std::size_t pos,
                                                 std::vector<Node> stack, Node leaf) {
  PairwiseAccumulator acc(n, lanes);
  if (pos > n) throw Error(Errc::format_error, "accumulator position beyond its length");
  auto check = [&](const Node& node) {
    if (node.sums.size() != lanes || node.lo > node.hi || node.hi > n) {
      throw Error(Errc::format_error, "accumulator state does not match its shape");
    }
  };
  for (const auto& node : stack) check(node);
  if (pos < n) check(leaf);
  acc.pos_ = pos;
  acc.stack_ = std::move(stack);
  if (pos < n) acc.leaf_ = std::move(leaf);
  return acc;
}

// ---------------------------------------------------------------------------
// CSV.

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::unreadable_file, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
  // strtod gives correctly rounded results, so shortest-form output reads back exactly.
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(Errc::format_error, fmt::format("{}:{}: '{}' is not a number", path.string(), line, s));
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, const fs::path& path, std::size_t line) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw Error(Errc::format_error, fmt::format("{}:{}: '{}' is not an unsigned integer", path.string(), line, s));
  }
  return v;
}

std::vector<std::string> oracle_names_from_header(const std::vector<std::string>& header, std::size_t fixed,
                                                  std::string_view s1, std::string_view s2, const fs::path& path) {
  std::vector<std::string> names;
  for (std::size_t c = fixed; c + 1 < header.size(); c += 2) {
    const std::string& a = header[c];
    const std::string& b = header[c + 1];
    if (!a.ends_with(s1) || !b.ends_with(s2) || a.substr(0, a.size() - s1.size()) != b.substr(0, b.size() - s2.size())) {
      break;
    }
    names.push_back(a.substr(0, a.size() - s1.size()));
  }
  if (names.empty()) throw Error(Errc::format_error, path.string() + ": header names no oracle columns");
  return names;
}

}  // namespace

std::string records_csv_header(const std::vector<std::string>& oracle_names) {
  std::string h = "id,kind,sigma,omega,lambda,seed";
  for (const auto& n : oracle_names) h += fmt::format(",{}_usens,{}_uevas", n, n);
  return h;
}

std::string records_csv_row(const SweepRecord& r) {
  std::string row = fmt::format("{},{},", r.id, to_string(r.kind));
  if (r.theta) {
    row += fmt::format("{},{},{}", r.theta->sigma, r.theta->omega, r.theta->lambda_freq);
  } else {
    row += ",,";
  }
  row += fmt::format(",{}", r.seed);
  for (const auto& m : r.metrics) row += fmt::format(",{},{}", m.sensitivity, m.evasion);
  return row;
}

void write_records_csv(const fs::path& path, const RecordTable& table) {
  std::string out = records_csv_header(table.oracle_names) + "\n";
  for (const auto& r : table.records) out += records_csv_row(r) + "\n";
  write_file_bytes(path, out);
}

RecordTable read_records_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw Error(Errc::format_error, path.string() + " is empty");
  const auto header = split_csv_line(lines.front());
  const std::vector<std::string> fixed = {"id", "kind", "sigma", "omega", "lambda", "seed"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw Error(Errc::format_error, path.string() + ": header must start with " + records_csv_header({}));
  }
  RecordTable table;
  table.oracle_names = oracle_names_from_header(header, fixed.size(), "_usens", "_uevas", path);
  const std::size_t width = fixed.size() + 2 * table.oracle_names.size();
  if (header.size() != width) throw Error(Errc::format_error, path.string() + ": unexpected header columns");

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_csv_line(lines[li]);
    if (f.size() != width) {
      throw Error(Errc::format_error, fmt::format("{}:{}: expected {} fields, got {}", path.string(), li + 1, width,
                                                  f.size()));
    }
    SweepRecord r;
    r.id = parse_u64(f[0], path, li + 1);
    if (f[1] == "gabor") {
      r.kind = RecordKind::gabor;
    } else if (f[1] == "random") {
      r.kind = RecordKind::random;
    } else {
      throw Error(Errc::format_error, fmt::format("{}:{}: unknown kind '{}'", path.string(), li + 1, f[1]));
    }
    if (!f[2].empty() || !f[3].empty() || !f[4].empty()) {
      r.theta = NoiseTheta{parse_double(f[2], path, li + 1), parse_double(f[3], path, li + 1),
                           parse_double(f[4], path, li + 1)};
    }
    r.seed = parse_u64(f[5], path, li + 1);
    for (std::size_t o = 0; o < table.oracle_names.size(); ++o) {
      r.metrics.push_back({parse_double(f[6 + 2 * o], path, li + 1), parse_double(f[7 + 2 * o], path, li + 1)});
    }
    table.records.push_back(std::move(r));
  }
  return table;
}

void write_inputs_csv(const fs::path& path, const std::vector<std::string>& oracle_names,
                      const std::vector<InputRecord>& inputs) {
  const bool random = !inputs.empty() && !inputs.front().random.empty();
  std::string out = "image_index,filename";
  for (const auto& n : oracle_names) out += fmt::format(",{}_asens,{}_aevas", n, n);
  if (random) {
    for (const auto& n : oracle_names) out += fmt::format(",{}_asens_random,{}_aevas_random", n, n);
  }
  out += "\n";
  for (const auto& r : inputs) {
    out += fmt::format("{},{}", r.image_index, csv_field(r.filename));
    for (const auto& m : r.gabor) out += fmt::format(",{},{}", m.sensitivity, m.evasion);
    for (const auto& m : r.random) out += fmt::format(",{},{}", m.sensitivity, m.evasion);
    out += "\n";
  }
  write_file_bytes(path, out);
}

std::vector<InputRecord> read_inputs_csv(const fs::path& path, std::vector<std::string>* oracle_names) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw Error(Errc::format_error, path.string() + " is empty");
  const auto header = split_csv_line(lines.front());
  if (header.size() < 2 || header[0] != "image_index" || header[1] != "filename") {
    throw Error(Errc::format_error, path.string() + ": header must start with image_index,filename");
  }
  const auto names = oracle_names_from_header(header, 2, "_asens", "_aevas", path);
  const std::size_t o = names.size();
  const bool random = header.size() == 2 + 4 * o;
  if (header.size() != 2 + 2 * o && !random) throw Error(Errc::format_error, path.string() + ": unexpected header");
  if (oracle_names != nullptr) *oracle_names = names;

  std::vector<InputRecord> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_csv_line(lines[li]);
    if (f.size() != header.size()) {
      throw Error(Errc::format_error, fmt::format("{}:{}: expected {} fields", path.string(), li + 1, header.size()));
    }
    InputRecord r;
    r.image_index = parse_u64(f[0], path, li + 1);
    r.filename = f[1];
    for (std::size_t k = 0; k < o; ++k) {
      r.gabor.push_back({parse_double(f[2 + 2 * k], path, li + 1), parse_double(f[3 + 2 * k], path, li + 1)});
    }
    if (random) {
      for (std::size_t k = 0; k < o; ++k) {
        r.random.push_back(
            {parse_double(f[2 + 2 * o + 2 * k], path, li + 1), parse_double(f[3 + 2 * o + 2 * k], path, li + 1)});
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep execution.

namespace {

struct PendingRecord {
  SweepRecord record;
  std::vector<double> lanes;  // per oracle, per image: distance, flipped
};

json node_json(const PairwiseAccumulator::Node& n) { return {{"lo", n.lo}, {"hi", n.hi}, {"sums", n.sums}}; }

PairwiseAccumulator::Node node_from_json(const json& j) {
  return {j.at("lo").get<std::size_t>(), j.at("hi").get<std::size_t>(), j.at("sums").get<std::vector<double>>()};
}

json accumulator_json(const PairwiseAccumulator& acc) {
  json stack = json::array();
  for (const auto& n : acc.stack()) stack.push_back(node_json(n));
  return {{"pos", acc.count()}, {"stack", std::move(stack)}, {"leaf", node_json(acc.leaf())}};
}

PairwiseAccumulator accumulator_from_json(const json& j, std::size_t n, std::size_t lanes) {
  std::vector<PairwiseAccumulator::Node> stack;
  for (const auto& s : j.at("stack")) stack.push_back(node_from_json(s));
  return PairwiseAccumulator::restore(n, lanes, j.at("pos").get<std::size_t>(), std::move(stack),
                                      node_from_json(j.at("leaf")));
}

std::string gnp_name(std::size_t id) { return fmt::format("{:06}.gnp", id); }

void write_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, bytes);
  fs::rename(tmp, path);
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", tm);
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg, const SweepOptions& options) {
  cfg.validate();
  const OracleFactory factory = options.factory ? options.factory : [](const OracleSpec& spec) {
    return make_oracle(spec.command);
  };

  const std::size_t workers = static_cast<std::size_t>(cfg.jobs);
  const std::size_t n_oracles = cfg.oracles.size();
  std::vector<std::vector<std::unique_ptr<Oracle>>> pool(workers);
  for (auto& set : pool) {
    for (const auto& spec : cfg.oracles) set.push_back(factory(spec));
  }
  const ImageShape shape = pool[0][0]->descriptor().input_shape();
  for (std::size_t o = 1; o < n_oracles; ++o) {
    if (!(pool[0][o]->descriptor().input_shape() == shape)) {
      config_error("oracles", "all oracles must share one input shape (" + to_string(shape) + " vs " +
                                  to_string(pool[0][o]->descriptor().input_shape()) + ")");
    }
  }

  const Dataset full = resolve_dataset(cfg.dataset, shape);
  const std::uint64_t subsample_seed = cfg.effective_subsample_seed();
  const auto indices = subsample_indices(full.size(), cfg.n_images, subsample_seed);
  const Dataset data = subset(full, indices);
  const std::size_t m = data.size();
  std::span<const ImageTensor> images(data.images);

  std::vector<std::vector<Prediction>> clean(n_oracles);
  for (std::size_t o = 0; o < n_oracles; ++o) {
    clean[o] = predict_all(*pool[0][o], images);
    for (const auto& p : clean[o]) {
      if (!p.is_valid()) throw Error(Errc::oracle_failure, "oracle '" + cfg.oracles[o].name + "' returned an invalid prediction");
    }
  }

  const std::size_t n = cfg.n_perturbations;
  const std::size_t total = cfg.include_random_baseline ? 2 * n : n;
  const std::size_t lanes = 2 * n_oracles * m;
  PairwiseAccumulator gabor_acc(n, lanes);
  PairwiseAccumulator random_acc(cfg.include_random_baseline ? n : 0, lanes);

  std::vector<std::string> names;
  for (const auto& o : cfg.oracles) names.push_back(o.name);

  SweepResult result;
  result.table.oracle_names = names;
  result.subsample_seed = subsample_seed;

  const bool writing = !cfg.output_dir.empty();
  const fs::path out_dir = cfg.output_dir;
  const fs::path records_path = out_dir / "records.csv";
  const fs::path checkpoint_path = out_dir / "checkpoint.json";
  const fs::path gnp_dir = out_dir / "perturbations";
  const std::string echo = sweep_config_json(cfg);

  std::size_t committed = 0;
  if (writing) {
    fs::create_directories(out_dir);
    if (cfg.save_perturbations) fs::create_directories(gnp_dir);
    if (options.resume && fs::exists(checkpoint_path)) {
      json ck;
      try {
        ck = json::parse(read_file_bytes(checkpoint_path));
        if (ck.at("config").get<std::string>() != echo) {
          throw Error(Errc::invalid_config, "checkpoint in " + out_dir.string() + " was written by a different config");
        }
        committed = ck.at("committed").get<std::size_t>();
        gabor_acc = accumulator_from_json(ck.at("gabor"), n, lanes);
        random_acc = accumulator_from_json(ck.at("random"), cfg.include_random_baseline ? n : 0, lanes);
      } catch (const json::exception& e) {
        throw Error(Errc::format_error, std::string("unreadable checkpoint: ") + e.what());
      }
      auto table = read_records_csv(records_path);
      if (table.oracle_names != names || table.records.size() < committed) {
        throw Error(Errc::format_error, "records.csv does not match the checkpoint");
      }
      table.records.resize(committed);
      write_records_csv(records_path, table);
      result.table.records = std::move(table.records);
      result.resumed_from = committed;
    } else {
      write_file_bytes(records_path, records_csv_header(names) + "\n");
      fs::remove(checkpoint_path);
    }
  }

  auto save_checkpoint = [&] {
    if (!writing) return;
    json ck = {{"config", echo},
               {"committed", committed},
               {"total", total},
               {"gabor", accumulator_json(gabor_acc)},
               {"random", accumulator_json(random_acc)}};
    write_atomic(checkpoint_path, ck.dump());
  };

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::size_t, PendingRecord> pending;
  std::size_t next_id = committed;
  std::exception_ptr failure;
  bool stop = false;
  const std::size_t window = 2 * workers + 2;

  auto work = [&](std::size_t w) {
    auto& oracles = pool[w];
    for (;;) {
      std::size_t id = 0;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return stop || next_id >= total || next_id < committed + window; });
        if (stop || next_id >= total) return;
        id = next_id++;
      }
      try {
        PendingRecord p;
        const PerturbationField s = sweep_perturbation(cfg, shape, id);
        if (writing && cfg.save_perturbations) write_gnp(gnp_dir / gnp_name(id), s);
        p.record.id = id;
        p.record.kind = id < n ? RecordKind::gabor : RecordKind::random;
        p.record.seed = s.seed;
        if (const auto* g = std::get_if<GaborProvenance>(&s.provenance)) p.record.theta = g->theta;
        p.lanes.resize(lanes);
        for (std::size_t o = 0; o < n_oracles; ++o) {
          const auto outcomes = perturbation_outcomes(*oracles[o], images, clean[o], s);
          p.record.metrics.push_back(universal_metrics(outcomes));
          for (std::size_t i = 0; i < m; ++i) {
            p.lanes[2 * (o * m + i)] = outcomes[i].distance;
            p.lanes[2 * (o * m + i) + 1] = outcomes[i].flipped ? 1.0 : 0.0;
          }
        }
        std::lock_guard lock(mu);
        pending.emplace(id, std::move(p));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
      cv.notify_all();
    }
  };

  {
    std::ofstream records_out;
    if (writing) {
      records_out.open(records_path, std::ios::binary | std::ios::app);
      if (!records_out) throw Error(Errc::unreadable_file, "cannot append to " + records_path.string());
    }
    using clock = std::chrono::steady_clock;
    auto last_checkpoint = clock::now();

    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);

    std::unique_lock lock(mu);
    for (;;) {
      cv.wait(lock, [&] { return stop || committed >= total || pending.contains(committed); });
      bool advanced = false;
      while (pending.contains(committed)) {
        auto node = pending.extract(committed);
        PendingRecord& p = node.mapped();
        lock.unlock();
        (p.record.kind == RecordKind::gabor ? gabor_acc : random_acc).add(p.lanes);
        if (writing) records_out << records_csv_row(p.record) << '\n' << std::flush;
        result.table.records.push_back(std::move(p.record));
        lock.lock();
        ++committed;
        advanced = true;
      }
      if (advanced) {
        cv.notify_all();
        if (options.progress) {
          lock.unlock();
          options.progress(committed, total);
          lock.lock();
        }
        if (writing && clock::now() - last_checkpoint > std::chrono::seconds(2) && committed < total) {
          save_checkpoint();
          last_checkpoint = clock::now();
        }
      }
      if (committed >= total || (stop && !pending.contains(committed))) break;
    }
    stop = true;
    lock.unlock();
    cv.notify_all();
    threads.clear();
  }

  if (failure) {
    save_checkpoint();
    const std::string note = writing ? fmt::format(" ({} of {} records checkpointed in {}; rerun with resume)",
                                                   committed, total, out_dir.string())
                                     : fmt::format(" ({} of {} records completed)", committed, total);
    try {
      std::rethrow_exception(failure);
    } catch (const Error& e) {
      throw Error(e.code(), e.what() + note);
    }
  }

  const auto gsum = gabor_acc.result();
  const auto rsum = random_acc.result();
  result.inputs.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    InputRecord r;
    r.image_index = indices[i];
    r.filename = data.names[i];
    for (std::size_t o = 0; o < n_oracles; ++o) {
      const std::size_t l = 2 * (o * m + i);
      r.gabor.push_back({gsum[l] / static_cast<double>(n), gsum[l + 1] / static_cast<double>(n)});
      if (cfg.include_random_baseline) {
        r.random.push_back({rsum[l] / static_cast<double>(n), rsum[l + 1] / static_cast<double>(n)});
      }
    }
    result.inputs.push_back(std::move(r));
  }

  if (writing) {
    write_inputs_csv(out_dir / "inputs.csv", names, result.inputs);
    json oracles = json::array();
    for (std::size_t o = 0; o < n_oracles; ++o) {
      const auto& d = pool[0][o]->descriptor();
      oracles.push_back({{"name", cfg.oracles[o].name},
                         {"model", d.name},
                         {"width", d.input_width},
                         {"height", d.input_height},
                         {"channels", d.input_channels},
                         {"classes", d.num_classes}});
    }
    json meta = {{"config", config_echo(cfg)},
                 {"subsample_seed", subsample_seed},
                 {"dataset_size", full.size()},
                 {"image_count", m},
                 {"records", total},
                 {"oracles", std::move(oracles)},
                 {"created", timestamp_utc()}};
    write_file_bytes(out_dir / "sweep_meta.json", meta.dump(2) + "\n");
    fs::remove(checkpoint_path);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Analysis.

std::vector<SweepRecord> transfer_report(const RecordTable& table, std::size_t source_oracle, std::size_t k) {
  if (source_oracle >= table.oracle_names.size()) throw Error(Errc::out_of_range, "no such source oracle");
  std::vector<SweepRecord> gabor;
  for (const auto& r : table.records) {
    if (r.kind == RecordKind::gabor) gabor.push_back(r);
  }
  std::sort(gabor.begin(), gabor.end(), [&](const SweepRecord& a, const SweepRecord& b) {
    const double ea = a.metrics.at(source_oracle).evasion;
    const double eb = b.metrics.at(source_oracle).evasion;
    if (ea != eb) return ea > eb;
    return a.id < b.id;
  });
  if (gabor.size() > k) gabor.resize(k);
  return gabor;
}

ThetaParam parse_theta_param(std::string_view name) {
  if (name == "sigma") return ThetaParam::sigma;
  if (name == "omega") return ThetaParam::omega;
  if (name == "lambda") return ThetaParam::lambda;
  throw Error(Errc::invalid_argument, "unknown parameter '" + std::string(name) + "' (sigma, omega, lambda)");
}

std::string_view to_string(ThetaParam p) noexcept {
  switch (p) {
    case ThetaParam::sigma: return "sigma";
    case ThetaParam::omega: return "omega";
    case ThetaParam::lambda: return "lambda";
  }
  return "unknown";
}

std::vector<GroupMean> parameter_group_means(const RecordTable& table, ThetaParam param, std::size_t bins,
                                             Range range, std::size_t oracle) {
  if (bins < 1) throw Error(Errc::invalid_argument, "bins must be >= 1");
  if (!(range.lo < range.hi)) throw Error(Errc::invalid_argument, "range must satisfy lo < hi");
  if (oracle >= table.oracle_names.size()) throw Error(Errc::out_of_range, "no such oracle");

  std::vector<std::vector<double>> members(bins);
  const double width = (range.hi - range.lo) / static_cast<double>(bins);
  for (const auto& r : table.records) {
    if (r.kind != RecordKind::gabor || !r.theta) continue;
    const double v = param == ThetaParam::sigma ? r.theta->sigma
                     : param == ThetaParam::omega ? r.theta->omega
                                                  : r.theta->lambda_freq;
    if (v < range.lo || v > range.hi) continue;
    auto b = static_cast<std::size_t>((v - range.lo) / width);
    if (b >= bins) b = bins - 1;
    members[b].push_back(r.metrics.at(oracle).evasion);
  }

  std::vector<GroupMean> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = range.lo + width * static_cast<double>(b);
    out[b].hi = b + 1 == bins ? range.hi : range.lo + width * static_cast<double>(b + 1);
    out[b].count = members[b].size();
    if (!members[b].empty()) out[b].mean = pairwise_sum(members[b]) / static_cast<double>(members[b].size());
  }
  return out;
}

}  // namespace gabornoise
