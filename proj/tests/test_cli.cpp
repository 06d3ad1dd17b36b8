#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>

#include "faitheval/io.hpp"
#include "test_support.hpp"

using faitheval::testing::TempDir;
using faitheval::testing::read_file;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

// Runs the CLI with stdout and stderr merged.
Result cli(const std::string& args) {
  const std::string command = std::string(FAITHEVAL_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST(Cli, MissingExamplesFileExitsTwoAndNamesIt) {
  TempDir dir;
  const auto r = cli("attribute --examples " + dir / "nope.jsonl" + " --out " + dir / "out");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find(dir / "nope.jsonl"), std::string::npos) << r.output;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("attribute").code, 2);
  EXPECT_EQ(cli("score --examples x.jsonl --bins 0,2").code, 2);
  EXPECT_EQ(cli("score --examples x.jsonl --ranking sideways").code, 2);
  EXPECT_EQ(cli("selftest --inject-fault cosmic-ray").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, MalformedExampleFileExitsTwoWithLine) {
  TempDir dir;
  faitheval::write_text(dir / "bad.jsonl", "{\"id\":\"a\"}\n");
  const auto r = cli("attribute --examples " + dir / "bad.jsonl" + " --out " + dir / "out");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("line 1"), std::string::npos) << r.output;
}

TEST(Cli, SelftestPasses) {
  const auto r = cli("selftest");
  EXPECT_EQ(r.code, 0) << r.output;
  for (const char* name : {"ig-linear-exactness", "ig-completeness", "autodiff-finite-difference",
                           "cosine-scale-invariance", "aopc-brute-force"}) {
    EXPECT_NE(r.output.find(std::string("PASS ") + name), std::string::npos) << r.output;
  }
}

TEST(Cli, InjectedGradientFaultIsCaught) {
  const auto r = cli("selftest --inject-fault gradient");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("FAIL autodiff-finite-difference"), std::string::npos) << r.output;
}

TEST(Cli, PipelineRerunsAreByteIdentical) {
  TempDir dir;
  ASSERT_EQ(cli("synth --count 8 --seed 3 --out " + dir / "ex.jsonl").code, 0);
  for (const char* run : {"a", "b"}) {
    const std::string out = dir / run;
    const std::string jobs = std::string(run) == "a" ? "1" : "3";
    ASSERT_EQ(cli("attribute --examples " + dir / "ex.jsonl" + " --steps 10 --jobs " + jobs + " --out " + out).code, 0);
    ASSERT_EQ(cli("score --examples " + dir / "ex.jsonl" + " --attributions " + out +
                  "/attributions.jsonl --steps 10 --out " + out).code, 0);
    ASSERT_EQ(cli("analyze --attributions " + out + "/attributions.jsonl --groups 'head=0,1' --out " + out).code, 0);
  }
  for (const char* name : {"attributions.jsonl", "metrics.csv", "report.json", "histograms.csv",
                           "correlation.csv", "influence.csv"}) {
    EXPECT_EQ(read_file(dir / ("a/" + std::string(name))), read_file(dir / ("b/" + std::string(name)))) << name;
  }
  EXPECT_EQ(faitheval::read_metrics(dir / "a/metrics.csv").size(), 8u);
}

TEST(Cli, ScoreWithoutAttributionsComputesThem) {
  TempDir dir;
  ASSERT_EQ(cli("synth --count 3 --out " + dir / "ex.jsonl").code, 0);
  const auto r = cli("score --examples " + dir / "ex.jsonl" + " --steps 5 --bins 50%,100% --out " + dir / "out");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(faitheval::read_metrics(dir / "out/metrics.csv").size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(dir / "out/attributions.jsonl"));
}

TEST(Cli, PerExampleFailureExitsOneAndLogs) {
  TempDir dir;
  faitheval::write_text(dir / "ex.jsonl",
                        R"({"id":"ok","words":["a","b"],"tokens":[{"text":"a","word_index":0},{"text":"b","word_index":1}],"visual_features":[[0,1,0,1,0,1]]})"
                        "\n"
                        R"({"id":"bad","words":["a"],"tokens":[{"text":"a","word_index":0,"id":400}],"visual_features":[[0,1,0,1,0,1]]})"
                        "\n");
  const auto r = cli("attribute --examples " + dir / "ex.jsonl" + " --steps 4 --out " + dir / "out");
  EXPECT_EQ(r.code, 1);
  const auto log = read_file(dir / "out/errors.log");
  EXPECT_EQ(log.rfind("bad\t", 0), 0u) << log;
  EXPECT_EQ(faitheval::load_attributions(dir / "out/attributions.jsonl").size(), 2u);
}

TEST(Cli, ServeAnswersOverStdio) {
  TempDir dir;
  faitheval::write_text(dir / "req.jsonl", "{\"id\":3,\"op\":\"info\"}\n");
  const auto r = cli("serve --oracle 'builtin:toy(7)' < " + dir / "req.jsonl");
  EXPECT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.output);
  EXPECT_EQ(j["id"], 3);
  EXPECT_EQ(j["classes"], 3);
}
