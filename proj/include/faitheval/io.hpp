#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "faitheval/analysis.hpp"
#include "faitheval/attribution.hpp"
#include "faitheval/core.hpp"
#include "json.hpp"

namespace faitheval {

// Example file: one JSON object per line,
//   {"id", "words":[...], "tokens":[{"text", "word_index", "id"?}],
//    "visual_features":[[...]], "answer_class"?, "explanation_tokens":[...]}
// Blank lines are skipped. Every failure carries its 1-based line number.
std::vector<TaskExample> load_examples(const std::string& path);
std::vector<TaskExample> parse_examples(std::istream& in);
void write_examples(const std::vector<TaskExample>& examples, const std::string& path);

nlohmann::ordered_json example_to_json(const TaskExample& example);
// Throws InvalidInput on schema violations.
TaskExample example_from_json(const nlohmann::json& j);

enum class AttributionTarget { Answer, Explanation };

std::string to_string(AttributionTarget t);
AttributionTarget attribution_target_from_string(const std::string& s);

// One line of an attribution file: the answer-side or explanation-side
// relevance of one example, both modalities.
struct AttributionRecord {
  std::string example_id;
  AttributionTarget target = AttributionTarget::Answer;
  int answer_class = 0;
  std::vector<int> explanation_tokens;
  ModalAttribution attribution;
  std::size_t steps = 0;
  BaselinePolicy baseline = BaselinePolicy::ZeroVisionPadText;
  VisionGranularity vision = VisionGranularity::PerRegion;

  bool operator==(const AttributionRecord& other) const;
};

nlohmann::ordered_json attribution_to_json(const AttributionRecord& record);
AttributionRecord attribution_from_json(const nlohmann::json& j);

std::vector<AttributionRecord> load_attributions(const std::string& path);
std::vector<AttributionRecord> parse_attributions(std::istream& in);
void write_attributions(const std::vector<AttributionRecord>& records, const std::string& path);

// Header of the metrics CSV.
const std::string& metrics_header();

// Shortest-exact decimal (17 significant digits).
std::string format_double(double v);

// CSV with one row per MetricRow in the given order; absent values are empty
// cells. Output is byte-deterministic.
std::string metrics_csv(const std::vector<MetricRow>& rows);
void write_metrics(const std::vector<MetricRow>& rows, const std::string& path);
// Writes the CSV and `sidecar` next to it with the extension replaced by .json.
void write_metrics(const std::vector<MetricRow>& rows, const std::string& path,
                   const nlohmann::ordered_json& sidecar);
std::vector<MetricRow> read_metrics(const std::string& path);
std::vector<MetricRow> parse_metrics(std::istream& in);

std::string sidecar_path(const std::string& csv_path);

// Pretty-printed with a trailing newline.
void write_json(const std::string& path, const nlohmann::ordered_json& doc);
nlohmann::json read_json(const std::string& path);

void write_text(const std::string& path, const std::string& content);

nlohmann::ordered_json histogram_to_json(const Histogram& h);
nlohmann::ordered_json correlation_to_json(const CorrelationMatrix& m);
CorrelationMatrix correlation_from_json(const nlohmann::json& j);

std::string correlation_csv(const CorrelationMatrix& m);

}  // namespace faitheval
