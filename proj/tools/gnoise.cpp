// gnoise: command-line front end for Gabor noise synthesis, evaluation and
// sweeps.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gabornoise/dataset.hpp"
#include "gabornoise/error.hpp"
#include "gabornoise/harness.hpp"
#include "gabornoise/io.hpp"
#include "gabornoise/metrics.hpp"
#include "gabornoise/noise.hpp"
#include "gabornoise/perturbation.hpp"
#include "gabornoise/reference_model.hpp"
#include "gabornoise/report.hpp"
#include "gabornoise/svd_uap.hpp"

namespace fs = std::filesystem;
using namespace gabornoise;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitOracle = 3;
constexpr int kExitData = 4;

int exit_code_for(const Error& e) {
  if (e.is_oracle_error()) return kExitOracle;
  switch (e.code()) {
    case Errc::invalid_argument:
    case Errc::invalid_config:
    case Errc::invalid_layer:
    case Errc::zero_points:
    case Errc::out_of_range:
      return kExitUsage;
    default:
      return kExitData;
  }
}

std::string default_oracle_command() {
  const char* env = std::getenv("ORACLE_CMD");
  return env != nullptr && *env != '\0' ? env : "builtin";
}

// Writes s to every requested output; the extension picks the format.
void write_outputs(const std::vector<std::string>& outs, const PerturbationField& s) {
  for (const auto& out : outs) {
    const fs::path p(out);
    if (p.extension() == ".png") {
      write_perturbation_png(p, s);
    } else if (p.extension() == ".gnp") {
      write_gnp(p, s);
    } else {
      throw Error(Errc::invalid_argument, "output '" + out + "' must end in .gnp or .png");
    }
  }
}

void add_size_options(CLI::App* cmd, int& width, int& height) {
  cmd->add_option("--size", width, "Square image side in pixels (sets width and height)")
      ->check(CLI::PositiveNumber)
      ->each([&height](const std::string& v) { height = std::stoi(v); });
  cmd->add_option("--height", height, "Image height when not square (after --size)")->check(CLI::PositiveNumber);
}

struct GenArgs {
  double sigma = 4.0;
  double omega = 0.0;
  double lambda = 8.0;
  int width = 224;
  int height = 224;
  int kernel_size = kDefaultKernelSize;
  double epsilon = kDefaultEpsilon;
  double density = 1.0;
  std::string mode = "scaled";
  std::uint64_t seed = 0;
  std::vector<std::string> out;
};

int run_gen(const GenArgs& a) {
  AnisotropicNoiseParams params;
  params.theta = {a.sigma, a.omega, a.lambda};
  params.kernel_size = a.kernel_size;
  params.seed = a.seed;
  const auto s = gabor_perturbation(params, a.width, a.height, a.epsilon, parse_mode(a.mode), a.density);
  write_outputs(a.out, s);
  fmt::print("linf_norm {}\n", linf_norm(s));
  return 0;
}

struct BaselineArgs {
  int width = 224;
  int height = 224;
  double epsilon = kDefaultEpsilon;
  std::uint64_t seed = 0;
  std::vector<std::string> out;
};

int run_baseline(const BaselineArgs& a) {
  const auto s = random_uniform_perturbation(a.width, a.height, a.epsilon, a.seed);
  write_outputs(a.out, s);
  fmt::print("linf_norm {}\n", linf_norm(s));
  return 0;
}

struct EvalArgs {
  std::string perturbation;
  std::string dataset;
  std::string oracle_cmd;
  std::size_t n_images = 0;
  std::uint64_t subsample_seed = 0;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const auto oracle = make_oracle(a.oracle_cmd.empty() ? default_oracle_command() : a.oracle_cmd);
  const ImageShape shape = oracle->descriptor().input_shape();
  const PerturbationField s = read_gnp(a.perturbation);
  if (!(s.shape == shape)) {
    throw Error(Errc::shape_mismatch, "perturbation is " + to_string(s.shape) + " but the oracle expects " +
                                          to_string(shape));
  }
  Dataset data = resolve_dataset(a.dataset, shape);
  if (a.n_images > 0) data = subset(data, subsample_indices(data.size(), a.n_images, a.subsample_seed));

  const auto clean = predict_all(*oracle, data.images);
  const UniversalMetrics m = universal_metrics(*oracle, data.images, clean, s);
  fmt::print("universal_sensitivity {}\nuniversal_evasion {}\n", m.sensitivity, m.evasion);
  if (!a.out.empty()) {
    json j = {{"perturbation", a.perturbation},
              {"dataset", a.dataset},
              {"images", data.size()},
              {"oracle", oracle->descriptor().name},
              {"universal_sensitivity", m.sensitivity},
              {"universal_evasion", m.evasion}};
    write_file_bytes(a.out, j.dump(2) + "\n");
  }
  return 0;
}

struct SweepArgs {
  std::string config;
  std::optional<int> jobs;
  std::optional<std::string> output_dir;
  std::optional<std::string> dataset;
  std::optional<std::size_t> n_perturbations;
  std::optional<std::size_t> n_images;
  std::optional<std::uint64_t> master_seed;
  std::optional<std::string> mode;
  bool resume = false;
  bool quiet = false;
};

int run_sweep_cmd(const SweepArgs& a) {
  SweepConfig cfg = load_sweep_config(a.config);
  if (a.jobs) cfg.jobs = *a.jobs;
  if (a.output_dir) cfg.output_dir = *a.output_dir;
  if (a.dataset) cfg.dataset = *a.dataset;
  if (a.n_perturbations) cfg.n_perturbations = *a.n_perturbations;
  if (a.n_images) cfg.n_images = *a.n_images;
  if (a.master_seed) cfg.master_seed = *a.master_seed;
  if (a.mode) cfg.mode = parse_mode(*a.mode);
  if (cfg.oracles.empty()) cfg.oracles.push_back({"model", default_oracle_command()});
  cfg.validate();

  SweepOptions opts;
  opts.resume = a.resume;
  if (!a.quiet) {
    opts.progress = [](std::size_t done, std::size_t total) {
      if (done == total || done % 50 == 0) std::fprintf(stderr, "\r%zu/%zu records", done, total);
      if (done == total) std::fputc('\n', stderr);
    };
  }
  const SweepResult r = run_sweep(cfg, opts);
  for (std::size_t o = 0; o < r.table.oracle_names.size(); ++o) {
    std::cout << format_quartile_table(r.table, o) << "\n";
  }
  if (!cfg.output_dir.empty()) fmt::print("records written to {}\n", (fs::path(cfg.output_dir) / "records.csv").string());
  return 0;
}

struct SvdArgs {
  std::string layer = "post_conv";
  double p = 2.0;
  double q = 10.0;
  double epsilon = kDefaultEpsilon;
  int batch = 8;
  std::uint64_t seed = 0;
  std::uint64_t model_seed = 0;
  std::string dataset;
  double tol = 1e-6;
  int max_iter = 1000;
  std::vector<std::string> out;
};

int run_svd(const SvdArgs& a) {
  const GaborBankClassifier model(a.model_seed);
  const ImageShape shape = model.descriptor().input_shape();
  const std::string source = a.dataset.empty() ? fmt::format("synthetic:{}:{}", a.batch, a.seed) : a.dataset;
  Dataset data = resolve_dataset(source, shape);
  data = subset(data, subsample_indices(data.size(), static_cast<std::size_t>(a.batch), a.seed));

  SingularConfig cfg;
  cfg.p = a.p;
  cfg.q = a.q;
  cfg.epsilon = a.epsilon;
  cfg.tol = a.tol;
  cfg.max_iter = a.max_iter;
  cfg.seed = a.seed;
  const SingularUap uap = singular_uap(model, parse_layer(a.layer), data.images, cfg);
  write_outputs(a.out, uap.perturbation);
  fmt::print("singular_value {}\niterations {}\nconverged {}\nlinf_norm {}\n", uap.singular.value,
             uap.singular.iterations, uap.singular.converged, linf_norm(uap.perturbation));
  return 0;
}

struct ReportArgs {
  std::string records;
  std::string inputs;
  std::string meta;
  std::string out;
};

int run_report(const ReportArgs& a) {
  const RecordTable table = read_records_csv(a.records);
  const fs::path dir = fs::path(a.records).parent_path();

  std::optional<std::vector<InputRecord>> inputs;
  fs::path inputs_path = a.inputs;
  if (inputs_path.empty() && fs::exists(dir / "inputs.csv")) inputs_path = dir / "inputs.csv";
  if (!inputs_path.empty()) inputs = read_inputs_csv(inputs_path, nullptr);

  std::optional<std::string> config;
  fs::path meta_path = a.meta;
  if (meta_path.empty() && fs::exists(dir / "sweep_meta.json")) meta_path = dir / "sweep_meta.json";
  if (!meta_path.empty()) {
    const json meta = json::parse(read_file_bytes(meta_path), nullptr, false);
    if (meta.is_discarded() || !meta.contains("config")) {
      throw Error(Errc::format_error, meta_path.string() + " has no config echo");
    }
    config = meta["config"].dump();
  }

  for (std::size_t o = 0; o < table.oracle_names.size(); ++o) {
    std::cout << format_quartile_table(table, o) << "\n";
    if (inputs) std::cout << format_input_quartile_table(*inputs, table.oracle_names[o], o) << "\n";
  }
  if (!a.out.empty()) write_file_bytes(a.out, build_report_json(table, inputs ? &*inputs : nullptr, config));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gabor noise perturbations: synthesis, evaluation and sweeps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gnoise 0.1.0");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Synthesize one Gabor noise perturbation");
  gen_cmd->add_option("--sigma", gen.sigma, "Envelope standard deviation in pixels")->capture_default_str();
  gen_cmd->add_option("--omega", gen.omega, "Orientation in radians")->capture_default_str();
  gen_cmd->add_option("--lambda", gen.lambda, "Harmonic wavelength in pixels")->capture_default_str();
  add_size_options(gen_cmd, gen.width, gen.height);
  gen_cmd->add_option("--kernel-size", gen.kernel_size, "Kernel support K")->capture_default_str();
  gen_cmd->add_option("--epsilon", gen.epsilon, "l-inf budget in pixel units")->capture_default_str();
  gen_cmd->add_option("--density", gen.density, "Points per K x K cell")->capture_default_str();
  gen_cmd->add_option("--mode", gen.mode, "scaled or sign")
      ->check(CLI::IsMember({"scaled", "sign"}))
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Lattice seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output files (.gnp and/or .png)")->required();

  BaselineArgs base;
  auto* base_cmd = app.add_subcommand("baseline", "Random +-epsilon baseline perturbation");
  add_size_options(base_cmd, base.width, base.height);
  base_cmd->add_option("--epsilon", base.epsilon, "l-inf budget in pixel units")->capture_default_str();
  base_cmd->add_option("--seed", base.seed, "Generator seed")->capture_default_str();
  base_cmd->add_option("--out", base.out, "Output files (.gnp and/or .png)")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Universal metrics of one perturbation");
  eval_cmd->add_option("--perturbation", eval.perturbation, "Perturbation .gnp file")->required();
  eval_cmd->add_option("--dataset", eval.dataset, "PNG directory, tensor file, or synthetic:<count>:<seed>")
      ->required();
  eval_cmd->add_option("--oracle-cmd", eval.oracle_cmd,
                       "builtin[:seed], tcp://host:port or a command speaking the wire protocol "
                       "(default: $ORACLE_CMD, else builtin)");
  eval_cmd->add_option("--n-images", eval.n_images, "Seeded subsample size (0 = all)");
  eval_cmd->add_option("--subsample-seed", eval.subsample_seed, "Subsample seed")->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "JSON result file");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep from a JSON config");
  sweep_cmd->add_option("--config", sweep.config, "Sweep config JSON")->required();
  sweep_cmd->add_option("--jobs", sweep.jobs, "Worker count (each owns its oracle connections)")
      ->check(CLI::Range(1, 1024));
  sweep_cmd->add_option("--output-dir", sweep.output_dir, "Override output_dir");
  sweep_cmd->add_option("--dataset", sweep.dataset, "Override dataset");
  sweep_cmd->add_option("--n-perturbations", sweep.n_perturbations, "Override n_perturbations");
  sweep_cmd->add_option("--n-images", sweep.n_images, "Override n_images");
  sweep_cmd->add_option("--master-seed", sweep.master_seed, "Override master_seed");
  sweep_cmd->add_option("--mode", sweep.mode, "Override mode")->check(CLI::IsMember({"scaled", "sign"}));
  sweep_cmd->add_flag("--resume", sweep.resume, "Continue from the checkpoint in output_dir");
  sweep_cmd->add_flag("--quiet", sweep.quiet, "No progress output");

  SvdArgs svd;
  auto* svd_cmd = app.add_subcommand("svd", "Singular-vector UAP against the built-in classifier");
  svd_cmd->add_option("--layer", svd.layer, "post_conv, post_pool or logits")
      ->check(CLI::IsMember({"post_conv", "post_pool", "logits"}))
      ->capture_default_str();
  svd_cmd->add_option("--p", svd.p, "Output norm exponent")->capture_default_str();
  svd_cmd->add_option("--q", svd.q, "Input norm exponent")->capture_default_str();
  svd_cmd->add_option("--epsilon", svd.epsilon, "l-inf budget of the final perturbation")->capture_default_str();
  svd_cmd->add_option("--batch", svd.batch, "Images whose Jacobians are stacked")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  svd_cmd->add_option("--seed", svd.seed, "Start vector and subsample seed")->capture_default_str();
  svd_cmd->add_option("--model-seed", svd.model_seed, "Built-in classifier seed")->capture_default_str();
  svd_cmd->add_option("--dataset", svd.dataset, "Image source (default synthetic:<batch>:<seed>)");
  svd_cmd->add_option("--tol", svd.tol, "Convergence tolerance")->capture_default_str();
  svd_cmd->add_option("--max-iter", svd.max_iter, "Iteration cap")->capture_default_str();
  svd_cmd->add_option("--out", svd.out, "Output files (.gnp and/or .png)")->required();

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Quartile tables and plot-ready JSON from sweep records");
  report_cmd->add_option("--records", report.records, "records.csv from a sweep")->required();
  report_cmd->add_option("--inputs", report.inputs, "inputs.csv (default: next to the records)");
  report_cmd->add_option("--meta", report.meta, "sweep_meta.json (default: next to the records)");
  report_cmd->add_option("--out", report.out, "Report JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*base_cmd) return run_baseline(base);
    if (*eval_cmd) return run_eval(eval);
    if (*sweep_cmd) return run_sweep_cmd(sweep);
    if (*svd_cmd) return run_svd(svd);
    if (*report_cmd) return run_report(report);
  } catch (const Error& e) {
    std::fprintf(stderr, "gnoise: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gnoise: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}
