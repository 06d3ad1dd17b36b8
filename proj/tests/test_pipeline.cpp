#include <gtest/gtest.h>

#include <set>

#include "faitheval/pipeline.hpp"
#include "test_support.hpp"

using namespace faitheval;
using faitheval::testing::TempDir;
using faitheval::testing::data_path;
using faitheval::testing::read_file;

namespace {

OracleFactory builtin(const std::string& spec = "builtin:toy") {
  return make_oracle_factory(parse_oracle_spec(spec, 42), std::chrono::seconds(10));
}

RunConfig small_config(const std::string& out = "out") {
  RunConfig c;
  c.steps = 16;
  c.jobs = 2;
  c.out = out;
  return c;
}

}  // namespace

TEST(OracleSpec, ParsesAllForms) {
  auto s = parse_oracle_spec("builtin:toy", 7);
  EXPECT_EQ(s.kind, OracleSpec::Kind::BuiltinToy);
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.dims, toy::ToyDims{});

  s = parse_oracle_spec("builtin:toy(42,32x8x3,NU)", 7);
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.dims.vocab, 32);
  EXPECT_EQ(s.dims.embed_dim, 8u);
  EXPECT_EQ(s.dims.hidden_dim, 8u);
  EXPECT_EQ(s.dims.classes, 3);
  EXPECT_EQ(s.ablation, toy::Ablation::NU);

  s = parse_oracle_spec("builtin:toy(seed=9,ablation=OU,hidden=5,vis=4,max_len=3)", 7);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.ablation, toy::Ablation::OU);
  EXPECT_EQ(s.dims.hidden_dim, 5u);
  EXPECT_EQ(s.dims.vis_dim, 4u);
  EXPECT_EQ(s.dims.max_explanation_length, 3u);

  s = parse_oracle_spec("file:/tmp/w.json", 7);
  EXPECT_EQ(s.kind, OracleSpec::Kind::File);
  EXPECT_EQ(s.path, "/tmp/w.json");
  s = parse_oracle_spec("tcp:localhost:9000", 7);
  EXPECT_EQ(s.kind, OracleSpec::Kind::Tcp);
  EXPECT_EQ(s.host, "localhost");
  EXPECT_EQ(s.port, "9000");
  s = parse_oracle_spec("python3 server.py --x", 7);
  EXPECT_EQ(s.kind, OracleSpec::Kind::Command);
  EXPECT_EQ(s.command, "python3 server.py --x");
}

TEST(OracleSpec, RejectsBadSpecs) {
  for (const char* bad : {"", "builtin:bert", "builtin:toy(1", "builtin:toy(1,2,3,4)",
                          "builtin:toy(1,32x8,NU)", "builtin:toy(color=red)", "builtin:toy(1,32x8x3,ZZ)",
                          "file:", "tcp:nohost", "builtin:toy(seed=abc)"}) {
    EXPECT_THROW(parse_oracle_spec(bad, 1), InvalidInput) << bad;
  }
}

TEST(Bins, FractionsAndPercentages) {
  EXPECT_EQ(parse_bins("0.01,0.05"), (std::vector<double>{0.01, 0.05}));
  EXPECT_EQ(parse_bins("1%, 50%,100%"), (std::vector<double>{0.01, 0.5, 1.0}));
  EXPECT_THROW(parse_bins(""), InvalidInput);
  EXPECT_THROW(parse_bins("0"), InvalidInput);
  EXPECT_THROW(parse_bins("150%"), InvalidInput);
  EXPECT_THROW(parse_bins("0.1,,0.2"), InvalidInput);
  EXPECT_THROW(parse_bins("abc"), InvalidInput);
  EXPECT_EQ(default_bins(), (std::vector<double>{0.01, 0.05, 0.10, 0.20, 0.50}));
}

TEST(Groups, ListsAndRanges) {
  const auto g = parse_groups("question=0-2;object=4,6");
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].name, "question");
  EXPECT_EQ(g[0].feature_ids, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(g[1].feature_ids, (std::vector<int>{4, 6}));
  EXPECT_TRUE(parse_groups("").empty());
  EXPECT_THROW(parse_groups("=1"), InvalidInput);
  EXPECT_THROW(parse_groups("a=3-1"), InvalidInput);
  EXPECT_THROW(parse_groups("a=1;a=2"), InvalidInput);
}

TEST(RunConfig, Validation) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  c.steps = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = RunConfig{};
  c.bins = {0.5, 2.0};
  EXPECT_THROW(c.validate(), InvalidInput);
  c = RunConfig{};
  c.timeout_seconds = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = RunConfig{};
  c.baseline = BaselinePolicy::Custom;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = RunConfig{};
  EXPECT_EQ(c.to_json()["integration"], "left_riemann");
  EXPECT_GE(c.effective_jobs(), 1u);
}

TEST(Pipeline, FiveFixtureExamplesGiveTenRecordsAndFiveRows) {
  const auto examples = load_examples(data_path("fixture_examples.jsonl"));
  ASSERT_EQ(examples.size(), 5u);
  const auto config = small_config();
  const auto attributed = compute_attributions(config, examples, builtin());
  EXPECT_TRUE(attributed.errors.empty());
  ASSERT_EQ(attributed.records.size(), 10u);
  for (std::size_t i = 0; i < 10; i += 2) {
    EXPECT_EQ(attributed.records[i].target, AttributionTarget::Answer);
    EXPECT_EQ(attributed.records[i + 1].target, AttributionTarget::Explanation);
    EXPECT_EQ(attributed.records[i].example_id, attributed.records[i + 1].example_id);
    EXPECT_EQ(attributed.records[i].explanation_tokens, attributed.records[i + 1].explanation_tokens);
  }
  EXPECT_EQ(attributed.records[4].explanation_tokens, (std::vector<int>{14, 3, 27}));
  const auto scored = compute_metrics(config, examples, attributed.records, builtin());
  EXPECT_TRUE(scored.errors.empty());
  ASSERT_EQ(scored.rows.size(), 5u);
  for (const auto& r : scored.rows) {
    EXPECT_GE(r.sf_nlp, 0.0);
    EXPECT_LE(r.sf_nlp, 1.0);
    ASSERT_TRUE(r.sf_img);
    EXPECT_NEAR(r.sf_overall, 0.5 * (r.sf_nlp + *r.sf_img), 1e-15);
  }
  faitheval::testing::expect_golden("fixture_metrics.csv", metrics_csv(scored.rows));
}

TEST(Pipeline, JobsDoNotChangeResults) {
  const auto examples = synthesize_examples(12, 5);
  auto config = small_config();
  config.jobs = 1;
  const auto serial = compute_attributions(config, examples, builtin());
  config.jobs = 4;
  const auto parallel = compute_attributions(config, examples, builtin());
  EXPECT_EQ(serial.records, parallel.records);
  EXPECT_EQ(metrics_csv(compute_metrics(config, examples, parallel.records, builtin()).rows),
            metrics_csv(compute_metrics(small_config(), examples, serial.records, builtin()).rows));
}

TEST(Pipeline, NoVisionAblationLeavesImageCellsEmpty) {
  const auto examples = load_examples(data_path("fixture_examples.jsonl"));
  const auto config = small_config();
  const auto factory = builtin("builtin:toy(42,32x8x3,NU)");
  const auto attributed = compute_attributions(config, examples, factory);
  const auto scored = compute_metrics(config, examples, attributed.records, factory);
  ASSERT_EQ(scored.rows.size(), 5u);
  for (const auto& r : scored.rows) {
    EXPECT_FALSE(r.sf_img.has_value());
    EXPECT_FALSE(r.suff_img.has_value());
    EXPECT_FALSE(r.comp_img.has_value());
    EXPECT_EQ(r.sf_overall, r.sf_nlp);
  }
  const auto csv = metrics_csv(scored.rows);
  EXPECT_NE(csv.find(",,"), std::string::npos);
}

TEST(Pipeline, PerExampleFailuresAreIsolated) {
  auto examples = load_examples(data_path("fixture_examples.jsonl"));
  examples[2].tokens[0].id = 500;
  examples[3].answer_class = 9;
  const auto result = compute_attributions(small_config(), examples, builtin());
  ASSERT_EQ(result.errors.size(), 2u);
  EXPECT_EQ(result.errors[0].example_id, "fx3");
  EXPECT_EQ(result.errors[1].example_id, "fx4");
  EXPECT_EQ(result.records.size(), 6u);
}

TEST(Pipeline, ScoringRejectsStaleAttributions) {
  const auto examples = load_examples(data_path("fixture_examples.jsonl"));
  auto attributed = compute_attributions(small_config(), examples, builtin());
  attributed.records[0].answer_class = (attributed.records[0].answer_class + 1) % 3;
  const auto scored = compute_metrics(small_config(), examples, attributed.records, builtin());
  ASSERT_EQ(scored.errors.size(), 1u);
  EXPECT_EQ(scored.errors[0].example_id, attributed.records[0].example_id);
  EXPECT_EQ(scored.rows.size(), 4u);
}

TEST(Pipeline, RemoteOracleCommandProducesTheSameMetrics) {
  auto examples = load_examples(data_path("fixture_examples.jsonl"));
  auto config = small_config();
  const auto local = compute_attributions(config, examples, builtin());
  // The line protocol has no decoding op, so remote runs need the explanation up front.
  for (auto& ex : examples) {
    for (const auto& r : local.records) {
      if (r.example_id == ex.id && r.target == AttributionTarget::Explanation) ex.explanation_tokens = r.explanation_tokens;
    }
  }
  const auto remote_factory = builtin(std::string(FAITHEVAL_TOY_SERVER) + " --seed 42");
  const auto remote = compute_attributions(config, examples, remote_factory);
  ASSERT_EQ(remote.records.size(), local.records.size());
  for (std::size_t i = 0; i < local.records.size(); ++i) {
    const auto& a = local.records[i].attribution.language.values();
    const auto& b = remote.records[i].attribution.language.values();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  }
}

TEST(Pipeline, ReportStructure) {
  const auto examples = synthesize_examples(20, 3);
  const auto config = small_config();
  const auto attributed = compute_attributions(config, examples, builtin());
  const auto scored = compute_metrics(config, examples, attributed.records, builtin());
  const auto groups = parse_groups("first=0;second=1");
  const auto report = build_report(scored.rows, &attributed.records, groups);
  EXPECT_EQ(report["rows"], 20);
  for (const auto& name : metric_columns()) {
    const auto& h = report["histograms"][name];
    EXPECT_EQ(h["counts"].size(), 20u);
    std::size_t total = 0;
    for (const auto& c : h["counts"]) total += c.get<std::size_t>();
    EXPECT_EQ(total, 20u) << name;
  }
  const auto corr = correlation_from_json(nlohmann::json::parse(report["correlation"].dump()));
  for (std::size_t a = 0; a < corr.names.size(); ++a) {
    for (std::size_t b = 0; b < corr.names.size(); ++b) EXPECT_EQ(corr.r[a][b], corr.r[b][a]);
  }
  const auto& per = report["influence"]["per_example"];
  EXPECT_EQ(per.size(), 40u);
  EXPECT_TRUE(per[0]["groups"].contains("first"));
  EXPECT_TRUE(per[0]["groups"].contains("other"));
  EXPECT_TRUE(report["influence"]["aggregate"]["answer"].contains("language"));
  EXPECT_TRUE(build_report(scored.rows, nullptr, {})["influence"].is_null());
  faitheval::testing::expect_golden("report_golden.json", report.dump(2) + "\n");
}

TEST(Pipeline, SubcommandsWriteTheirOutputs) {
  TempDir dir;
  write_examples(synthesize_examples(6, 8), dir / "ex.jsonl");
  RunConfig config = small_config(dir / "out");
  config.examples = dir / "ex.jsonl";
  EXPECT_EQ(run_attribute(config), 0);
  config.attributions = dir / "out/attributions.jsonl";
  EXPECT_EQ(run_score(config), 0);
  EXPECT_EQ(run_analyze(config), 0);
  for (const char* name : {"attributions.jsonl", "attributions.json", "errors.log", "metrics.csv",
                           "metrics.json", "report.json", "histograms.csv", "correlation.csv",
                           "influence.csv", "analyze.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / ("out/" + std::string(name)))) << name;
  }
  const auto meta = read_json(dir / "out/metrics.json");
  EXPECT_EQ(meta["command"], "score");
  EXPECT_EQ(meta["rows"], 6);
  EXPECT_EQ(read_file(dir / "out/errors.log"), "");
  EXPECT_EQ(read_metrics(dir / "out/metrics.csv").size(), 6u);
}

TEST(Synthesis, DeterministicAndWellFormed) {
  const auto a = synthesize_examples(50, 42);
  const auto b = synthesize_examples(50, 42);
  ASSERT_EQ(a.size(), 50u);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(example_to_json(a[i]), example_to_json(b[i]));
    EXPECT_NO_THROW(validate(a[i]));
    EXPECT_GE(a[i].visual_features.rows, 1u);
    EXPECT_LE(a[i].visual_features.rows, 4u);
    EXPECT_GE(a[i].words.size(), 4u);
    EXPECT_LE(a[i].words.size(), 9u);
    ids.insert(a[i].id);
  }
  EXPECT_EQ(ids.size(), 50u);
  EXPECT_EQ(a[0].id, "syn00");
  EXPECT_NE(example_to_json(synthesize_examples(1, 43)[0]), example_to_json(a[0]));
}
