#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "faitheval/io.hpp"
#include "faitheval/pipeline.hpp"
#include "faitheval/protocol.hpp"
#include "faitheval/selftest.hpp"

namespace {

using namespace faitheval;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("faitheval");
  logger->set_pattern("%^[%l]%$ %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("FAITHEVAL_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("ignoring unknown FAITHEVAL_LOG level '{}'", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

struct CommonFlags {
  std::string bins;
  std::string ranking = "signed";
  std::string vision = "region";
  std::string baseline = "zero_vision_pad_text";
  std::string groups;
};

void add_oracle_flags(CLI::App* cmd, RunConfig& config) {
  cmd->add_option("--oracle", config.oracle,
                  "builtin:toy(SEED,VxDxC,ABLATION), file:WEIGHTS, tcp:HOST:PORT or a command")
      ->capture_default_str();
  cmd->add_option("--seed", config.seed, "seed for the builtin toy model")->capture_default_str();
  cmd->add_option("--timeout", config.timeout_seconds, "oracle response timeout in seconds")
      ->capture_default_str();
  cmd->add_option("--jobs", config.jobs, "parallel examples (0: one per logical core)")
      ->capture_default_str();
  cmd->add_option("--out", config.out, "output directory")->capture_default_str();
}

void add_ig_flags(CLI::App* cmd, RunConfig& config, CommonFlags& flags) {
  cmd->add_option("--steps", config.steps, "Integrated Gradients steps m")->capture_default_str();
  cmd->add_option("--baseline", flags.baseline, "zero_vision_pad_text or all_zero")
      ->capture_default_str();
  cmd->add_option("--vision", flags.vision, "vision granularity: region or feature")
      ->capture_default_str();
}

void apply(RunConfig& config, const CommonFlags& flags) {
  if (!flags.bins.empty()) config.bins = parse_bins(flags.bins);
  config.ranking = ranking_from_string(flags.ranking);
  config.vision = granularity_from_string(flags.vision);
  config.baseline = baseline_from_string(flags.baseline);
  config.groups = parse_groups(flags.groups);
}

int run_selftest_command(std::uint64_t seed, const std::string& fault) {
  SelftestOptions options;
  options.seed = seed;
  if (fault == "gradient") options.inject_gradient_bug = true;
  else if (!fault.empty()) throw InvalidInput("unknown fault '" + fault + "' (expected gradient)");
  bool all = true;
  for (const auto& r : run_selftest(options)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "  ("
              << r.seconds << " s)\n";
    all = all && r.passed;
  }
  std::cout << (all ? "selftest passed" : "selftest FAILED") << std::endl;
  return all ? 0 : kExitFailure;
}

int run_serve(const RunConfig& config, const std::string& listen) {
  const auto spec = parse_oracle_spec(config.oracle, config.seed);
  if (spec.kind != OracleSpec::Kind::BuiltinToy && spec.kind != OracleSpec::Kind::File) {
    throw InvalidInput("serve needs a builtin: or file: oracle");
  }
  auto oracle = make_oracle_factory(spec, std::chrono::seconds(30))();
  if (listen.empty()) {
    protocol::serve(*oracle, std::cin, std::cout);
    return 0;
  }
  const auto colon = listen.rfind(':');
  const std::string host = colon == std::string::npos ? "127.0.0.1" : listen.substr(0, colon);
  const std::string port = colon == std::string::npos ? listen : listen.substr(colon + 1);
  protocol::serve_tcp(*oracle, host, port, 0, [](unsigned short bound) {
    std::cerr << "listening on port " << bound << std::endl;
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Faithfulness metrics for natural-language explanations"};
  app.require_subcommand(1);

  RunConfig config;
  CommonFlags flags;

  auto* attribute = app.add_subcommand("attribute", "Integrated Gradients for answers and explanations");
  attribute->add_option("--examples", config.examples, "example JSONL file")->required();
  add_oracle_flags(attribute, config);
  add_ig_flags(attribute, config, flags);

  auto* score = app.add_subcommand("score", "S_F, sufficiency and comprehensiveness per example");
  score->add_option("--examples", config.examples, "example JSONL file")->required();
  score->add_option("--attributions", config.attributions,
                    "attribution JSONL from 'attribute' (computed inline when omitted)");
  score->add_option("--bins", flags.bins, "top-k fractions, e.g. 0.01,0.05 or 1%,5%");
  score->add_option("--ranking", flags.ranking, "signed or abs")->capture_default_str();
  add_oracle_flags(score, config);
  add_ig_flags(score, config, flags);

  auto* analyze = app.add_subcommand("analyze", "Histograms, correlations and influence");
  analyze->add_option("--metrics", config.metrics, "metrics CSV (default OUT/metrics.csv)");
  analyze->add_option("--attributions", config.attributions, "attribution JSONL for influence");
  analyze->add_option("--groups", flags.groups, "language word groups, e.g. 'question=0-3;rest=4,5'");
  analyze->add_option("--out", config.out, "output directory")->capture_default_str();

  std::string fault;
  std::uint64_t selftest_seed = SelftestOptions{}.seed;
  auto* selftest = app.add_subcommand("selftest", "Run the built-in property suites");
  selftest->add_option("--seed", selftest_seed, "seed of the random instances")->capture_default_str();
  selftest->add_option("--inject-fault", fault, "break a component on purpose (gradient)");

  std::size_t count = 50;
  std::size_t vis_dim = toy::ToyDims{}.vis_dim;
  std::string synth_out = "examples.jsonl";
  auto* synth = app.add_subcommand("synth", "Write synthetic examples");
  synth->add_option("--count", count, "number of examples")->capture_default_str();
  synth->add_option("--seed", config.seed, "generator seed")->capture_default_str();
  synth->add_option("--vis-dim", vis_dim, "visual feature width")->capture_default_str();
  synth->add_option("--out", synth_out, "output JSONL file")->capture_default_str();

  std::string listen;
  auto* serve = app.add_subcommand("serve", "Serve a model over the line protocol");
  serve->add_option("--oracle", config.oracle, "builtin:... or file:WEIGHTS")->capture_default_str();
  serve->add_option("--seed", config.seed, "seed for the builtin toy model")->capture_default_str();
  serve->add_option("--listen", listen, "[HOST:]PORT for TCP instead of stdin/stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*selftest) return run_selftest_command(selftest_seed, fault);
    if (*synth) {
      write_examples(synthesize_examples(count, config.seed, vis_dim), synth_out);
      return 0;
    }
    if (*serve) return run_serve(config, listen);
    apply(config, flags);
    if (*attribute) return run_attribute(config);
    if (*score) return run_score(config);
    if (*analyze) return run_analyze(config);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const IngestError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
  return kExitUsage;
}
