#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faitheval/analysis.hpp"
#include "faitheval/attribution.hpp"
#include "faitheval/faithfulness.hpp"
#include "faitheval/io.hpp"
#include "faitheval/oracle.hpp"
#include "faitheval/toy_model.hpp"
#include "json.hpp"

namespace faitheval {

// Where predictions and gradients come from.
//   builtin:toy                          seeded toy model, default dims
//   builtin:toy(42,32x8x3,NU)            seed, vocab x embed x classes, ablation
//   builtin:toy(seed=7,ablation=OU)      the same as key=value pairs
//   file:PATH                            weight file (toy or linear model)
//   tcp:HOST:PORT                        protocol server
//   anything else                        shell command speaking the protocol
struct OracleSpec {
  enum class Kind { BuiltinToy, File, Tcp, Command };

  Kind kind = Kind::BuiltinToy;
  std::uint64_t seed = 42;
  toy::ToyDims dims;
  toy::Ablation ablation = toy::Ablation::Default;
  std::string path;
  std::string host;
  std::string port;
  std::string command;
};

OracleSpec parse_oracle_spec(const std::string& spec, std::uint64_t default_seed);

// Produces one independent session per call.
using OracleFactory = std::function<std::unique_ptr<Oracle>()>;

OracleFactory make_oracle_factory(const OracleSpec& spec, std::chrono::milliseconds timeout);

// Accepts fractions ("0.01,0.05") and percentages ("1%,5%").
std::vector<double> parse_bins(const std::string& csv);

// Group syntax: "name=0,1,2" or "name=0-3", several groups separated by ';'.
std::vector<InputGroup> parse_groups(const std::string& spec);

struct RunConfig {
  std::string examples;
  std::string attributions;
  std::string metrics;
  std::string oracle = "builtin:toy";
  std::size_t steps = 50;
  std::vector<double> bins = default_bins();
  RankingMode ranking = RankingMode::SignedDescending;
  VisionGranularity vision = VisionGranularity::PerRegion;
  BaselinePolicy baseline = BaselinePolicy::ZeroVisionPadText;
  std::string out = "out";
  std::size_t jobs = 0;  // 0: one per logical core
  std::uint64_t seed = 42;
  double timeout_seconds = 30.0;
  std::vector<InputGroup> groups;

  // Throws InvalidInput naming the offending setting.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  std::size_t effective_jobs() const;
  IGConfig ig_config() const;
};

struct ExampleError {
  std::string example_id;
  std::string message;
};

struct AttributeResult {
  std::vector<AttributionRecord> records;  // sorted by id, answer first
  std::vector<ExampleError> errors;        // sorted by id
};

AttributeResult compute_attributions(const RunConfig& config,
                                     const std::vector<TaskExample>& examples,
                                     const OracleFactory& factory);

struct ScoreResult {
  std::vector<MetricRow> rows;  // sorted by id
  std::vector<ExampleError> errors;
  std::vector<std::string> zero_norm_language;
  std::vector<std::string> zero_norm_vision;
};

// Metrics of one example from its answer and explanation records.
MetricRow score_example(Oracle& oracle, const TaskExample& example,
                        const AttributionRecord& answer, const AttributionRecord& explanation,
                        const RunConfig& config, SFScore* sf_out = nullptr);

ScoreResult compute_metrics(const RunConfig& config, const std::vector<TaskExample>& examples,
                            const std::vector<AttributionRecord>& attributions,
                            const OracleFactory& factory);

// The analysis report: histograms, correlation matrix, summary statistics
// and, when attributions are given, modality and group influence.
nlohmann::ordered_json build_report(const std::vector<MetricRow>& rows,
                                    const std::vector<AttributionRecord>* attributions,
                                    const std::vector<InputGroup>& groups);

// Subcommands. Each validates the config, writes its outputs under
// config.out and returns the process exit code (0 success, 1 failure of at
// least one example). Usage and I/O problems are thrown.
int run_attribute(const RunConfig& config);
int run_score(const RunConfig& config);
int run_analyze(const RunConfig& config);

// Random examples with WordPiece-style splits, punctuation and one to four
// visual regions. Explanations are left empty for the model to generate.
std::vector<TaskExample> synthesize_examples(std::size_t n, std::uint64_t seed,
                                             std::size_t vis_dim = toy::ToyDims{}.vis_dim);

}  // namespace faitheval
