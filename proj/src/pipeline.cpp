#include "faitheval/pipeline.hpp"

#include <omp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "faitheval/protocol.hpp"

namespace faitheval {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& what) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw InvalidInput(what + " '" + s + "' is not a valid number");
  }
  return v;
}

toy::ToyDims parse_dims(const std::string& s) {
  const auto parts = split(s, 'x');
  if (parts.size() != 3) throw InvalidInput("dims '" + s + "' must be VOCABxEMBEDxCLASSES");
  toy::ToyDims d;
  d.vocab = parse_number<int>(parts[0], "vocab");
  d.embed_dim = parse_number<std::size_t>(parts[1], "embedding width");
  d.hidden_dim = d.embed_dim;
  d.classes = parse_number<int>(parts[2], "class count");
  return d;
}

void sort_errors(std::vector<ExampleError>& errors) {
  std::sort(errors.begin(), errors.end(),
            [](const ExampleError& a, const ExampleError& b) { return a.example_id < b.example_id; });
}

std::string errors_log(const std::vector<ExampleError>& errors) {
  std::string out;
  for (const auto& e : errors) out += e.example_id + "\t" + e.message + "\n";
  return out;
}

// Runs `work` for every index on `jobs` threads, each with its own oracle
// session. Failures are recorded per index; a session that failed with an
// oracle error is replaced before the next example.
void for_each_example(std::size_t n, std::size_t jobs, const OracleFactory& factory,
                      const std::function<void(Oracle&, std::size_t)>& work,
                      std::vector<std::optional<std::string>>& failures) {
  failures.assign(n, std::nullopt);
  const int threads = static_cast<int>(std::max<std::size_t>(1, std::min(jobs, n)));
  const auto count = static_cast<long>(n);
#pragma omp parallel num_threads(threads)
  {
    std::unique_ptr<Oracle> session;
#pragma omp for schedule(dynamic, 1)
    for (long i = 0; i < count; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      try {
        if (!session) session = factory();
        work(*session, idx);
      } catch (const OracleError& e) {
        failures[idx] = e.what();
        session.reset();
      } catch (const std::exception& e) {
        failures[idx] = e.what();
      } catch (...) {
        failures[idx] = "unknown failure";
      }
    }
  }
}

ordered_json stat_json(const std::optional<SummaryStat>& s) {
  if (!s) return nullptr;
  return ordered_json{{"mean", s->mean}, {"stddev", s->stddev}, {"n", s->n}};
}

std::pair<double, double> histogram_range(const std::string& column) {
  if (column.rfind("sf_", 0) == 0) return {0.0, 1.0};
  return {-1.0, 1.0};
}

std::vector<double> present(const MetricColumn& column) {
  std::vector<double> out;
  for (const auto& v : column) {
    if (v) out.push_back(*v);
  }
  return out;
}

std::string output_path(const RunConfig& config, const std::string& name) {
  return (std::filesystem::path(config.out) / name).string();
}

}  // namespace

// ---------------------------------------------------------------------------
// Oracle specs

OracleSpec parse_oracle_spec(const std::string& spec, std::uint64_t default_seed) {
  OracleSpec out;
  out.seed = default_seed;
  if (spec.empty()) throw InvalidInput("empty oracle spec");
  if (spec.rfind("builtin:", 0) == 0) {
    const std::string rest = spec.substr(8);
    const auto open = rest.find('(');
    const std::string name = open == std::string::npos ? rest : rest.substr(0, open);
    if (name != "toy") throw InvalidInput("unknown builtin oracle '" + name + "' (expected toy)");
    out.kind = OracleSpec::Kind::BuiltinToy;
    if (open == std::string::npos) return out;
    if (rest.back() != ')') throw InvalidInput("oracle spec '" + spec + "' lacks a closing ')'");
    const auto args = split(rest.substr(open + 1, rest.size() - open - 2), ',');
    const char* positional[] = {"seed", "dims", "ablation"};
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i].empty()) continue;
      std::string key, value;
      if (const auto eq = args[i].find('='); eq != std::string::npos) {
        key = trim(args[i].substr(0, eq));
        value = trim(args[i].substr(eq + 1));
      } else if (i < 3) {
        key = positional[i];
        value = args[i];
      } else {
        throw InvalidInput("too many positional arguments in oracle spec '" + spec + "'");
      }
      if (key == "seed") out.seed = parse_number<std::uint64_t>(value, "seed");
      else if (key == "dims") {
        const auto d = parse_dims(value);
        out.dims.vocab = d.vocab;
        out.dims.embed_dim = d.embed_dim;
        out.dims.hidden_dim = d.hidden_dim;
        out.dims.classes = d.classes;
      } else if (key == "ablation") out.ablation = toy::ablation_from_string(value);
      else if (key == "hidden") out.dims.hidden_dim = parse_number<std::size_t>(value, "hidden");
      else if (key == "vis") out.dims.vis_dim = parse_number<std::size_t>(value, "vis");
      else if (key == "max_len") {
        out.dims.max_explanation_length = parse_number<std::size_t>(value, "max_len");
      } else {
        throw InvalidInput("unknown oracle option '" + key + "'");
      }
    }
    return out;
  }
  if (spec.rfind("file:", 0) == 0) {
    out.kind = OracleSpec::Kind::File;
    out.path = spec.substr(5);
    if (out.path.empty()) throw InvalidInput("file: oracle needs a path");
    return out;
  }
  if (spec.rfind("tcp:", 0) == 0) {
    out.kind = OracleSpec::Kind::Tcp;
    const std::string rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
      throw InvalidInput("tcp oracle spec must be tcp:HOST:PORT");
    }
    out.host = rest.substr(0, colon);
    out.port = rest.substr(colon + 1);
    return out;
  }
  out.kind = OracleSpec::Kind::Command;
  out.command = spec;
  return out;
}

OracleFactory make_oracle_factory(const OracleSpec& spec, std::chrono::milliseconds timeout) {
  switch (spec.kind) {
    case OracleSpec::Kind::BuiltinToy: {
      std::shared_ptr<const toy::VisionLanguageModel> model =
          std::make_shared<toy::ToyVLModel>(toy::make_toy_model(spec.seed, spec.dims, spec.ablation));
      return [model] { return std::make_unique<toy::InProcessOracle>(model); };
    }
    case OracleSpec::Kind::File: {
      auto model = toy::load_model(spec.path);
      return [model] { return std::make_unique<toy::InProcessOracle>(model); };
    }
    case OracleSpec::Kind::Tcp:
      return [spec, timeout] {
        return std::make_unique<protocol::RemoteOracle>(
            std::make_unique<protocol::TcpChannel>(spec.host, spec.port), timeout);
      };
    case OracleSpec::Kind::Command:
      return [spec, timeout] {
        return std::make_unique<protocol::RemoteOracle>(
            std::make_unique<protocol::ProcessChannel>(spec.command), timeout);
      };
  }
  throw InvalidInput("unknown oracle kind");
}

std::vector<double> parse_bins(const std::string& csv) {
  std::vector<double> bins;
  for (auto item : split(csv, ',')) {
    if (item.empty()) throw InvalidInput("empty entry in bins '" + csv + "'");
    bool percent = false;
    if (item.back() == '%') {
      percent = true;
      item.pop_back();
    }
    double v = parse_number<double>(item, "bin");
    if (percent) v /= 100.0;
    if (!(v > 0.0 && v <= 1.0)) {
      throw InvalidInput("bin '" + item + (percent ? "%" : "") + "' is outside (0, 1]");
    }
    bins.push_back(v);
  }
  if (bins.empty()) throw InvalidInput("at least one bin is required");
  return bins;
}

std::vector<InputGroup> parse_groups(const std::string& spec) {
  std::vector<InputGroup> groups;
  if (trim(spec).empty()) return groups;
  for (const auto& part : split(spec, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidInput("group '" + part + "' must be NAME=IDS");
    InputGroup g;
    g.name = trim(part.substr(0, eq));
    for (const auto& item : split(part.substr(eq + 1), ',')) {
      if (item.empty()) continue;
      if (const auto dash = item.find('-'); dash != std::string::npos && dash > 0) {
        const int lo = parse_number<int>(trim(item.substr(0, dash)), "group id");
        const int hi = parse_number<int>(trim(item.substr(dash + 1)), "group id");
        if (hi < lo) throw InvalidInput("group range '" + item + "' is reversed");
        for (int id = lo; id <= hi; ++id) g.feature_ids.push_back(id);
      } else {
        g.feature_ids.push_back(parse_number<int>(item, "group id"));
      }
    }
    groups.push_back(std::move(g));
  }
  std::set<std::string> names;
  for (const auto& g : groups) {
    if (!names.insert(g.name).second) throw InvalidInput("group '" + g.name + "' defined twice");
  }
  return groups;
}

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  if (steps < 1) throw InvalidInput("--steps must be at least 1");
  if (bins.empty()) throw InvalidInput("--bins needs at least one bin");
  for (double b : bins) {
    if (!(b > 0.0 && b <= 1.0)) throw InvalidInput("bin " + std::to_string(b) + " outside (0, 1]");
  }
  if (out.empty()) throw InvalidInput("--out must name a directory");
  if (!(timeout_seconds > 0.0)) throw InvalidInput("timeout must be positive");
  if (baseline == BaselinePolicy::Custom) {
    throw InvalidInput("the custom baseline policy is only available through the library");
  }
  parse_oracle_spec(oracle, seed);
  std::set<std::string> names;
  for (const auto& g : groups) {
    if (g.name == "other") throw InvalidInput("group name 'other' is reserved");
    if (!names.insert(g.name).second) throw InvalidInput("group '" + g.name + "' defined twice");
  }
}

ordered_json RunConfig::to_json() const {
  ordered_json g = ordered_json::object();
  for (const auto& group : groups) g[group.name] = group.feature_ids;
  return ordered_json{{"examples", examples},
                      {"attributions", attributions},
                      {"metrics", metrics},
                      {"oracle", oracle},
                      {"steps", steps},
                      {"bins", bins},
                      {"ranking", to_string(ranking)},
                      {"vision", to_string(vision)},
                      {"baseline", to_string(baseline)},
                      {"integration", "left_riemann"},
                      {"out", out},
                      {"jobs", jobs},
                      {"seed", seed},
                      {"timeout_seconds", timeout_seconds},
                      {"groups", g}};
}

std::size_t RunConfig::effective_jobs() const {
  return jobs > 0 ? jobs : static_cast<std::size_t>(std::max(1, omp_get_num_procs()));
}

IGConfig RunConfig::ig_config() const {
  IGConfig c;
  c.steps = steps;
  c.baseline = baseline;
  c.vision = vision;
  return c;
}

// ---------------------------------------------------------------------------
// Attribution

AttributeResult compute_attributions(const RunConfig& config,
                                     const std::vector<TaskExample>& examples,
                                     const OracleFactory& factory) {
  const IGConfig ig = config.ig_config();
  std::vector<std::optional<std::pair<AttributionRecord, AttributionRecord>>> results(examples.size());
  std::vector<std::optional<std::string>> failures;
  for_each_example(
      examples.size(), config.effective_jobs(), factory,
      [&](Oracle& oracle, std::size_t i) {
        TaskExample ex = examples[i];
        resolve_token_ids(ex, oracle.info().vocab);
        if (ex.answer_class && *ex.answer_class >= oracle.info().classes) {
          throw InvalidInput("answer_class " + std::to_string(*ex.answer_class) +
                             " outside the model's " + std::to_string(oracle.info().classes) +
                             " classes");
        }
        const auto input = embed_example(oracle, ex);
        const int j = static_cast<int>(oracle.predict(input).argmax());
        const auto generated =
            ex.explanation_tokens.empty() ? oracle.generate(input, j) : ex.explanation_tokens;

        AttributionRecord answer;
        answer.example_id = ex.id;
        answer.target = AttributionTarget::Answer;
        answer.answer_class = j;
        answer.explanation_tokens = generated;
        answer.steps = ig.steps;
        answer.baseline = ig.baseline;
        answer.vision = ig.vision;
        AttributionRecord explanation = answer;
        explanation.target = AttributionTarget::Explanation;
        answer.attribution = attribute_answer(oracle, ex, j, ig);
        explanation.attribution = attribute_explanation(oracle, ex, generated, j, ig);
        results[i].emplace(std::move(answer), std::move(explanation));
        spdlog::debug("attributed example '{}'", ex.id);
      },
      failures);

  AttributeResult out;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return examples[a].id < examples[b].id; });
  for (std::size_t i : order) {
    if (failures[i]) {
      out.errors.push_back({examples[i].id, *failures[i]});
      spdlog::warn("example '{}' failed: {}", examples[i].id, *failures[i]);
    } else {
      out.records.push_back(std::move(results[i]->first));
      out.records.push_back(std::move(results[i]->second));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

MetricRow score_example(Oracle& oracle, const TaskExample& example,
                        const AttributionRecord& answer, const AttributionRecord& explanation,
                        const RunConfig& config, SFScore* sf_out) {
  if (answer.target != AttributionTarget::Answer ||
      explanation.target != AttributionTarget::Explanation) {
    throw InvalidInput("attribution records of '" + example.id + "' have the wrong targets");
  }
  const int j = predicted_class(oracle, example);
  if (j != answer.answer_class || j != explanation.answer_class) {
    throw InvalidInput("attributions of '" + example.id + "' were computed for class " +
                       std::to_string(answer.answer_class) + " but the oracle predicts " +
                       std::to_string(j));
  }
  const auto& a = answer.attribution;
  const auto& e = explanation.attribution;
  const AttributionPair nlp(a.language, e.language);
  std::optional<AttributionPair> img;
  if (a.vision && e.vision) img.emplace(*a.vision, *e.vision);
  const SFScore sf = attribution_similarity(nlp, img);
  if (sf_out) *sf_out = sf;

  MetricRow row;
  row.example_id = example.id;
  row.sf_nlp = sf.sf_nlp;
  row.sf_img = sf.sf_img;
  row.sf_overall = sf.overall;
  const AopcOptions options{config.ranking, explanation.vision};
  row.suff_nlp = nle_sufficiency(oracle, example, e.language, config.bins, j, options).value;
  row.comp_nlp = nle_comprehensiveness(oracle, example, e.language, config.bins, j, options).value;
  if (e.vision && !e.vision->empty()) {
    row.suff_img = nle_sufficiency(oracle, example, *e.vision, config.bins, j, options).value;
    row.comp_img = nle_comprehensiveness(oracle, example, *e.vision, config.bins, j, options).value;
  }
  return row;
}

ScoreResult compute_metrics(const RunConfig& config, const std::vector<TaskExample>& examples,
                            const std::vector<AttributionRecord>& attributions,
                            const OracleFactory& factory) {
  std::map<std::string, const AttributionRecord*> answers, explanations;
  for (const auto& r : attributions) {
    auto& index = r.target == AttributionTarget::Answer ? answers : explanations;
    if (!index.emplace(r.example_id, &r).second) {
      throw InvalidInput("duplicate " + to_string(r.target) + " attribution for '" + r.example_id + "'");
    }
  }
  std::vector<std::optional<MetricRow>> rows(examples.size());
  std::vector<SFScore> scores(examples.size());
  std::vector<std::optional<std::string>> failures;
  for_each_example(
      examples.size(), config.effective_jobs(), factory,
      [&](Oracle& oracle, std::size_t i) {
        TaskExample ex = examples[i];
        const auto a = answers.find(ex.id);
        const auto e = explanations.find(ex.id);
        if (a == answers.end()) throw InvalidInput("no answer attribution");
        if (e == explanations.end()) throw InvalidInput("no explanation attribution");
        resolve_token_ids(ex, oracle.info().vocab);
        rows[i] = score_example(oracle, ex, *a->second, *e->second, config, &scores[i]);
        spdlog::debug("scored example '{}'", ex.id);
      },
      failures);

  ScoreResult out;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return examples[a].id < examples[b].id; });
  for (std::size_t i : order) {
    if (failures[i]) {
      out.errors.push_back({examples[i].id, *failures[i]});
      spdlog::warn("example '{}' failed: {}", examples[i].id, *failures[i]);
      continue;
    }
    out.rows.push_back(*rows[i]);
    if (scores[i].zero_norm_nlp) out.zero_norm_language.push_back(examples[i].id);
    if (scores[i].zero_norm_img) out.zero_norm_vision.push_back(examples[i].id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

ordered_json build_report(const std::vector<MetricRow>& rows,
                          const std::vector<AttributionRecord>* attributions,
                          const std::vector<InputGroup>& groups) {
  std::vector<MetricRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const MetricRow& a, const MetricRow& b) { return a.example_id < b.example_id; });

  ordered_json report;
  report["rows"] = sorted.size();
  ordered_json histograms = ordered_json::object();
  ordered_json summary = ordered_json::object();
  for (const auto& name : metric_columns()) {
    const auto column = metric_column(sorted, name);
    const auto [lo, hi] = histogram_range(name);
    histograms[name] = histogram_to_json(histogram(present(column), 20, lo, hi));
    summary[name] = stat_json(summarize(column));
  }
  report["histograms"] = histograms;
  report["correlation"] = correlation_to_json(pearson_matrix(sorted, metric_columns()));
  report["summary"] = summary;

  if (!attributions) {
    report["influence"] = nullptr;
    return report;
  }
  std::vector<const AttributionRecord*> records;
  for (const auto& r : *attributions) records.push_back(&r);
  std::sort(records.begin(), records.end(), [](const auto* a, const auto* b) {
    if (a->example_id != b->example_id) return a->example_id < b->example_id;
    return a->target < b->target;
  });

  ordered_json per_example = ordered_json::array();
  std::map<std::string, std::map<std::string, MetricColumn>> columns;  // target -> series
  for (const auto* r : records) {
    const auto totals = modality_influence(r->attribution);
    const std::string target = to_string(r->target);
    ordered_json entry{{"id", r->example_id}, {"target", target}, {"language", totals.language}};
    entry["vision"] = r->attribution.vision ? ordered_json(totals.vision) : ordered_json(nullptr);
    columns[target]["language"].emplace_back(totals.language);
    columns[target]["vision"].push_back(r->attribution.vision ? std::optional(totals.vision)
                                                               : std::nullopt);
    ordered_json g = ordered_json::object();
    for (const auto& [name, value] : input_group_influence(r->attribution.language, groups)) {
      g[name] = value;
      columns[target]["group:" + name].emplace_back(value);
    }
    entry["groups"] = g;
    per_example.push_back(std::move(entry));
  }

  ordered_json aggregate = ordered_json::object();
  ordered_json influence_histograms = ordered_json::object();
  for (const char* target : {"answer", "explanation"}) {
    ordered_json agg = ordered_json::object();
    const auto it = columns.find(target);
    if (it != columns.end()) {
      for (const auto& [series, column] : it->second) {
        agg[series] = stat_json(summarize(column));
        influence_histograms[std::string(target) + ":" + series] =
            histogram_to_json(histogram_data_range(present(column)));
      }
    }
    aggregate[target] = agg;
  }
  report["influence"] = ordered_json{
      {"per_example", per_example}, {"aggregate", aggregate}, {"histograms", influence_histograms}};
  return report;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

OracleFactory factory_for(const RunConfig& config) {
  const auto timeout = std::chrono::milliseconds(
      static_cast<long long>(std::llround(config.timeout_seconds * 1000.0)));
  return make_oracle_factory(parse_oracle_spec(config.oracle, config.seed), timeout);
}

std::vector<TaskExample> require_examples(const RunConfig& config) {
  if (config.examples.empty()) throw InvalidInput("--examples is required");
  return load_examples(config.examples);
}

ordered_json sidecar(const RunConfig& config, const char* command) {
  return ordered_json{{"command", command}, {"config", config.to_json()}};
}

}  // namespace

int run_attribute(const RunConfig& config) {
  config.validate();
  const auto examples = require_examples(config);
  const auto factory = factory_for(config);
  const auto result = compute_attributions(config, examples, factory);
  write_attributions(result.records, output_path(config, "attributions.jsonl"));
  write_text(output_path(config, "errors.log"), errors_log(result.errors));
  auto meta = sidecar(config, "attribute");
  meta["examples_read"] = examples.size();
  meta["records"] = result.records.size();
  meta["failed"] = result.errors.size();
  write_json(output_path(config, "attributions.json"), meta);
  spdlog::info("wrote {} attribution records, {} failures", result.records.size(),
               result.errors.size());
  return result.errors.empty() ? 0 : 1;
}

int run_score(const RunConfig& config) {
  config.validate();
  const auto examples = require_examples(config);
  const auto factory = factory_for(config);
  std::vector<ExampleError> errors;
  std::vector<AttributionRecord> records;
  if (config.attributions.empty()) {
    auto attributed = compute_attributions(config, examples, factory);
    write_attributions(attributed.records, output_path(config, "attributions.jsonl"));
    records = std::move(attributed.records);
    errors = std::move(attributed.errors);
  } else {
    records = load_attributions(config.attributions);
  }
  std::set<std::string> failed;
  for (const auto& e : errors) failed.insert(e.example_id);
  std::vector<TaskExample> remaining;
  for (const auto& ex : examples) {
    if (!failed.count(ex.id)) remaining.push_back(ex);
  }
  auto scored = compute_metrics(config, remaining, records, factory);
  errors.insert(errors.end(), scored.errors.begin(), scored.errors.end());
  sort_errors(errors);

  auto meta = sidecar(config, "score");
  meta["rows"] = scored.rows.size();
  meta["failed"] = errors.size();
  ordered_json aggregate = ordered_json::object();
  for (const auto& name : metric_columns()) {
    aggregate[name] = stat_json(summarize(metric_column(scored.rows, name)));
  }
  meta["aggregate"] = aggregate;
  meta["zero_norm"] = ordered_json{{"language", scored.zero_norm_language},
                                   {"vision", scored.zero_norm_vision}};
  write_metrics(scored.rows, output_path(config, "metrics.csv"), meta);
  write_text(output_path(config, "errors.log"), errors_log(errors));
  spdlog::info("wrote {} metric rows, {} failures", scored.rows.size(), errors.size());
  return errors.empty() ? 0 : 1;
}

int run_analyze(const RunConfig& config) {
  config.validate();
  const std::string metrics_path =
      config.metrics.empty() ? output_path(config, "metrics.csv") : config.metrics;
  const auto rows = read_metrics(metrics_path);
  std::optional<std::vector<AttributionRecord>> attributions;
  if (!config.attributions.empty()) attributions = load_attributions(config.attributions);
  const auto report = build_report(rows, attributions ? &*attributions : nullptr, config.groups);
  write_json(output_path(config, "report.json"), report);

  std::string hist = "metric,bucket,lo,hi,count\n";
  for (const auto& [name, h] : report["histograms"].items()) {
    const auto& counts = h["counts"];
    const double lo = h["lo"].get<double>(), hi = h["hi"].get<double>();
    for (std::size_t b = 0; b < counts.size(); ++b) {
      Histogram edges{lo, hi, std::vector<std::size_t>(counts.size()), 0};
      hist += name + "," + std::to_string(b) + "," + format_double(edges.edge(b)) + "," +
              format_double(edges.edge(b + 1)) + "," + std::to_string(counts[b].get<std::size_t>()) +
              "\n";
    }
  }
  write_text(output_path(config, "histograms.csv"), hist);
  write_text(output_path(config, "correlation.csv"),
             correlation_csv(correlation_from_json(json::parse(report["correlation"].dump()))));
  if (attributions) {
    std::string csv = "id,target,language,vision";
    for (const auto& g : config.groups) csv += ",group:" + g.name;
    if (!config.groups.empty()) csv += ",group:other";
    csv += "\n";
    for (const auto& e : report["influence"]["per_example"]) {
      csv += e["id"].get<std::string>() + "," + e["target"].get<std::string>() + "," +
             format_double(e["language"].get<double>()) + "," +
             (e["vision"].is_null() ? std::string() : format_double(e["vision"].get<double>()));
      if (!config.groups.empty()) {
        for (const auto& [name, value] : e["groups"].items()) csv += "," + format_double(value.get<double>());
      }
      csv += "\n";
    }
    write_text(output_path(config, "influence.csv"), csv);
  }
  auto meta = sidecar(config, "analyze");
  meta["metrics"] = metrics_path;
  meta["rows"] = rows.size();
  write_json(output_path(config, "analyze.json"), meta);
  return 0;
}

// ---------------------------------------------------------------------------
// Synthetic data

std::vector<TaskExample> synthesize_examples(std::size_t n, std::uint64_t seed, std::size_t vis_dim) {
  static const std::vector<std::string> lexicon = {
      "a",        "man",      "woman",   "dog",       "cat",     "is",      "riding",
      "holding",  "the",      "red",     "bicycle",   "umbrella", "street", "playing",
      "frisbee",  "near",     "water",   "two",       "children", "splendour", "visions",
      "weight",   "under",    "sink",    "wearing",   "hat",     "table",   "kitchen",
      "looking",  "window",   "sunny",   "beach",     "camera",  "running", "green"};
  static const std::vector<std::string> endings = {"?", ".", "!"};
  toy::WeightRng rng(seed);
  auto pick = [&](std::size_t size) {
    return std::min(size - 1, static_cast<std::size_t>(rng.unit() * static_cast<double>(size)));
  };
  const std::size_t width = std::to_string(std::max<std::size_t>(n, 1) - 1).size();
  std::vector<TaskExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    TaskExample ex;
    std::string id = std::to_string(i);
    ex.id = "syn" + std::string(width - id.size(), '0') + id;
    const std::size_t n_words = 3 + pick(6);
    for (std::size_t w = 0; w < n_words; ++w) ex.words.push_back(lexicon[pick(lexicon.size())]);
    ex.words.push_back(endings[pick(endings.size())]);
    for (std::size_t w = 0; w < ex.words.size(); ++w) {
      const auto& word = ex.words[w];
      if (word.size() >= 7) {
        const std::size_t cut = word.size() / 2;
        ex.tokens.push_back({-1, word.substr(0, cut), w});
        ex.tokens.push_back({-1, "##" + word.substr(cut), w});
      } else {
        ex.tokens.push_back({-1, word, w});
      }
    }
    const std::size_t regions = 1 + pick(4);
    ex.visual_features = Matrix(regions, vis_dim);
    for (double& v : ex.visual_features.data) v = rng.uniform(1.0);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace faitheval
