#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gabornoise/dataset.hpp"
#include "gabornoise/metrics.hpp"
#include "gabornoise/noise.hpp"
#include "gabornoise/oracle.hpp"
#include "gabornoise/perturbation.hpp"
#include "gabornoise/rng.hpp"

namespace gabornoise {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct ThetaRanges {
  Range sigma{1.5, 9.0};
  Range omega{0.0, std::numbers::pi};
  Range lambda{1.5, 9.0};

  void validate() const;
};

/// sigma, omega, lambda in that order, one uniform draw each.
NoiseTheta sample_theta(const ThetaRanges& ranges, SplitMix64& rng);

struct OracleSpec {
  std::string name;
  std::string command;
};

/// "builtin" or "builtin:<seed>" is the reference classifier (seed 0 by
/// default); anything else goes to ExternalOracle.
std::unique_ptr<Oracle> make_oracle(const std::string& command,
                                    std::chrono::milliseconds handshake_timeout = std::chrono::seconds(30));

struct SweepConfig {
  std::size_t n_perturbations = 1000;
  std::string dataset;  // path or synthetic:<count>:<seed>
  std::size_t n_images = 5000;
  double epsilon = kDefaultEpsilon;
  ThetaRanges ranges;
  int kernel_size = kDefaultKernelSize;
  double density = 1.0;
  std::uint64_t master_seed = 0;
  std::optional<std::uint64_t> subsample_seed;
  std::vector<OracleSpec> oracles;
  bool include_random_baseline = true;
  PerturbationMode mode = PerturbationMode::scaled;
  std::string output_dir;  // empty: nothing is written
  bool save_perturbations = true;
  int jobs = 1;

  /// Throws Errc::invalid_config with the field name in the message.
  void validate() const;
  std::uint64_t effective_subsample_seed() const noexcept;
};

/// Missing fields keep their defaults; unknown fields are rejected.
SweepConfig parse_sweep_config(std::string_view json_text);
SweepConfig load_sweep_config(const std::filesystem::path& path);
/// Canonical JSON echo of everything that affects results (jobs and
/// output_dir excluded).
std::string sweep_config_json(const SweepConfig& cfg);

/// Gabor ids are 0..n-1, random baseline ids n..2n-1. Each id's seed is
/// mix_seed(master_seed, id); Gabor lattices use it directly and theta comes
/// from SplitMix64(mix_seed(seed, 1)).
std::uint64_t perturbation_seed(const SweepConfig& cfg, std::size_t id) noexcept;
NoiseTheta sweep_theta(const SweepConfig& cfg, std::size_t id);
PerturbationField sweep_perturbation(const SweepConfig& cfg, const ImageShape& shape, std::size_t id);

enum class RecordKind { gabor, random };

std::string_view to_string(RecordKind kind) noexcept;

struct SweepRecord {
  std::size_t id = 0;
  RecordKind kind = RecordKind::gabor;
  std::optional<NoiseTheta> theta;
  std::uint64_t seed = 0;
  std::vector<UniversalMetrics> metrics;  // one per oracle
};

struct InputRecord {
  std::size_t image_index = 0;  // index in the full, filename-sorted dataset
  std::string filename;
  std::vector<AverageMetrics> gabor;   // one per oracle
  std::vector<AverageMetrics> random;  // empty without the random baseline
};

struct RecordTable {
  std::vector<std::string> oracle_names;
  std::vector<SweepRecord> records;
};

struct SweepResult {
  RecordTable table;
  std::vector<InputRecord> inputs;
  std::uint64_t subsample_seed = 0;
  std::size_t resumed_from = 0;
};

using OracleFactory = std::function<std::unique_ptr<Oracle>(const OracleSpec&)>;

struct SweepOptions {
  /// Defaults to make_oracle(spec.command).
  OracleFactory factory;
  /// Continue from the checkpoint in output_dir when one exists.
  bool resume = false;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Runs every perturbation against every oracle over the subsampled
/// dataset. Workers each own one oracle instance per spec; results are
/// committed in id order, so output is independent of cfg.jobs. With an
/// output_dir, records.csv grows as records commit and checkpoint.json
/// allows resuming after a failure (it is removed on success); inputs.csv
/// and sweep_meta.json are written at the end, plus perturbations/<id>.gnp
/// when save_perturbations is set.
SweepResult run_sweep(const SweepConfig& cfg, const SweepOptions& options = {});

void write_records_csv(const std::filesystem::path& path, const RecordTable& table);
RecordTable read_records_csv(const std::filesystem::path& path);
void write_inputs_csv(const std::filesystem::path& path, const std::vector<std::string>& oracle_names,
                      const std::vector<InputRecord>& inputs);
std::vector<InputRecord> read_inputs_csv(const std::filesystem::path& path, std::vector<std::string>* oracle_names);

std::string records_csv_header(const std::vector<std::string>& oracle_names);
std::string records_csv_row(const SweepRecord& r);

/// Top k Gabor records by the source oracle's universal evasion, ties by
/// ascending id. k >= count returns them all, sorted.
std::vector<SweepRecord> transfer_report(const RecordTable& table, std::size_t source_oracle, std::size_t k = 10);

enum class ThetaParam { sigma, omega, lambda };

ThetaParam parse_theta_param(std::string_view name);
std::string_view to_string(ThetaParam p) noexcept;

struct GroupMean {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::optional<double> mean;  // nullopt for an empty bin
};

/// Equal-width bins over range (last bin closed) of the chosen parameter;
/// mean universal evasion of oracle `oracle` per bin, over Gabor records.
std::vector<GroupMean> parameter_group_means(const RecordTable& table, ThetaParam param, std::size_t bins,
                                             Range range, std::size_t oracle = 0);

/// Streams values into the same summation tree pairwise_sum uses for a
/// total of n values, so the final sum is bit-identical to it. Carries one
/// lane per accumulated quantity.
class PairwiseAccumulator {
 public:
  PairwiseAccumulator(std::size_t n, std::size_t lanes);

  void add(std::span<const double> lane_values);
  std::size_t count() const noexcept { return pos_; }
  std::size_t lanes() const noexcept { return lanes_; }
  /// Requires count() == n.
  std::vector<double> result() const;

  // Serialization of the in-flight state for checkpoints.
  struct Node {
    std::size_t lo = 0;
    std::size_t hi = 0;
    std::vector<double> sums;
  };
  const std::vector<Node>& stack() const noexcept { return stack_; }
  const Node& leaf() const noexcept { return leaf_; }
  static PairwiseAccumulator restore(std::size_t n, std::size_t lanes, std::size_t pos, std::vector<Node> stack,
                                     Node leaf);

 private:
  Node leaf_for(std::size_t pos) const;
  bool is_split(std::size_t lo, std::size_t mid, std::size_t hi) const;

  std::size_t n_;
  std::size_t lanes_;
  std::size_t pos_ = 0;
  std::vector<Node> stack_;
  Node leaf_;
};

}  // namespace gabornoise
