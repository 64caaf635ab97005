#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <nlohmann/json.hpp>

#include "gabornoise/io.hpp"
#include "support/util.hpp"

using namespace gabornoise;
using nlohmann::json;

namespace {

const std::string kGnoise = GNOISE_BINARY;
const std::string kServer = GNOISE_ORACLE_SERVER;

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult run(const std::string& args) {
  CliResult r;
  FILE* p = ::popen((kGnoise + " " + args + " 2>/dev/null").c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, GenIsDeterministicAndReportsNorm) {
  testutil::TempDir dir;
  const CliResult a = run("gen --sigma 3 --omega 0.7 --lambda 6 --size 32 --seed 5 --mode sign --out " + q(dir / "a.gnp") +
                    " " + q(dir / "a.png"));
  ASSERT_EQ(a.status, 0);
  EXPECT_NE(a.out.find("linf_norm 12"), std::string::npos) << a.out;
  ASSERT_EQ(run("gen --sigma 3 --omega 0.7 --lambda 6 --size 32 --seed 5 --mode sign --out " + q(dir / "b.gnp")).status,
            0);
  EXPECT_EQ(read_file_bytes(dir / "a.gnp"), read_file_bytes(dir / "b.gnp"));
  const auto s = read_gnp(dir / "a.gnp");
  EXPECT_EQ(s.shape, (ImageShape{32, 32, 3}));
  EXPECT_TRUE(std::filesystem::exists(dir / "a.png"));
}

TEST(Cli, SizeAndHeight) {
  testutil::TempDir dir;
  ASSERT_EQ(run("baseline --size 20 --height 10 --out " + q(dir / "r.gnp")).status, 0);
  EXPECT_EQ(read_gnp(dir / "r.gnp").shape, (ImageShape{20, 10, 3}));
}

TEST(Cli, EvalSameThroughBuiltinAndServer) {
  testutil::TempDir dir;
  ASSERT_EQ(run("gen --size 32 --mode sign --seed 2 --out " + q(dir / "p.gnp")).status, 0);
  const std::string common = "eval --perturbation " + q(dir / "p.gnp") + " --dataset synthetic:20:1";
  const CliResult builtin = run(common + " --oracle-cmd builtin:3 --out " + q(dir / "a.json"));
  const CliResult served = run(common + " --oracle-cmd '" + kServer + " --model-seed 3' --out " + q(dir / "b.json"));
  ASSERT_EQ(builtin.status, 0);
  ASSERT_EQ(served.status, 0);
  EXPECT_EQ(builtin.out, served.out);
  EXPECT_NE(builtin.out.find("universal_evasion"), std::string::npos);
  const json a = json::parse(read_file_bytes(dir / "a.json"));
  const json b = json::parse(read_file_bytes(dir / "b.json"));
  EXPECT_EQ(a["universal_sensitivity"], b["universal_sensitivity"]);
}

TEST(Cli, ExitCodes) {
  testutil::TempDir dir;
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("gen --bogus 1 --out x.gnp").status, 2);
  EXPECT_EQ(run("gen --sigma -1 --out " + q(dir / "x.gnp")).status, 2);
  ASSERT_EQ(run("gen --size 32 --out " + q(dir / "p.gnp")).status, 0);
  EXPECT_EQ(run("eval --perturbation " + q(dir / "p.gnp") + " --dataset " + q(dir / "missing")).status, 4);
  EXPECT_EQ(run("eval --perturbation " + q(dir / "p.gnp") + " --dataset synthetic:2:1 --oracle-cmd 'exit 1'").status, 3);
  EXPECT_EQ(run("eval --perturbation " + q(dir / "nope.gnp") + " --dataset synthetic:2:1").status, 4);
  EXPECT_EQ(run("svd --layer fc9 --out " + q(dir / "s.gnp")).status, 2);
  write_file_bytes(dir / "bad.json", R"({"dataset": "synthetic:3:1", "n_perturbations": 0})");
  EXPECT_EQ(run("sweep --config " + q(dir / "bad.json")).status, 2);
}

TEST(Cli, SvdWritesPerturbation) {
  testutil::TempDir dir;
  ASSERT_EQ(run("svd --layer post_pool --batch 2 --max-iter 20 --out " + q(dir / "s.gnp")).status, 0);
  const auto s = read_gnp(dir / "s.gnp");
  EXPECT_EQ(provenance_kind(s.provenance), "singular_vector");
  EXPECT_EQ(linf_norm(s), 12.0);
}

TEST(Cli, SweepThenReport) {
  testutil::TempDir dir;
  write_file_bytes(dir / "cfg.json", R"({"n_perturbations": 4, "dataset": "synthetic:12:2", "n_images": 6,
    "master_seed": 3, "mode": "sign", "oracles": [{"name": "ref", "command": "builtin"}]})");
  const std::string out = (dir / "out").string();
  ASSERT_EQ(run("sweep --quiet --config " + q(dir / "cfg.json") + " --output-dir '" + out + "' --jobs 2").status, 0);
  const CliResult rep = run("report --records '" + out + "/records.csv' --out " + q(dir / "report.json"));
  ASSERT_EQ(rep.status, 0);
  EXPECT_NE(rep.out.find("Universal Evasion"), std::string::npos);
  EXPECT_NE(rep.out.find("Average Evasion"), std::string::npos);
  const json r = json::parse(read_file_bytes(dir / "report.json"));
  EXPECT_EQ(r["counts"]["gabor"], 4);
  EXPECT_EQ(r["config"]["master_seed"], 3);
  EXPECT_TRUE(r.contains("average"));
}

TEST(Cli, ReportOnHandWrittenRecords) {
  testutil::TempDir dir;
  write_file_bytes(dir / "records.csv",
                   "id,kind,sigma,omega,lambda,seed,m_usens,m_uevas\n"
                   "0,gabor,2,0,3,0,0.01,0.01\n"
                   "1,gabor,2,0,3,1,0.02,0.02\n"
                   "2,gabor,2,0,3,2,0.03,0.03\n"
                   "3,gabor,2,0,3,3,0.04,0.04\n");
  const CliResult rep = run("report --records " + q(dir / "records.csv") + " --out " + q(dir / "r.json"));
  ASSERT_EQ(rep.status, 0);
  EXPECT_NE(rep.out.find("2.5"), std::string::npos) << rep.out;
  const json r = json::parse(read_file_bytes(dir / "r.json"));
  const json& qs = r["universal"]["m"]["gabor"]["evasion"]["quartiles"];
  EXPECT_NEAR(qs["q1"].get<double>(), 0.0175, 1e-15);
  EXPECT_NEAR(qs["q2"].get<double>(), 0.025, 1e-15);
  EXPECT_NEAR(qs["q3"].get<double>(), 0.0325, 1e-15);
  EXPECT_TRUE(r["universal"]["m"]["random"]["evasion"].is_null());
}
