#include "faitheval/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace faitheval {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
  return in;
}

std::ofstream open_output(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "': " + std::strerror(errno));
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

template <class F>
auto parse_lines(std::istream& in, F&& parse) {
  std::vector<decltype(parse(json{}))> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw IngestError(e.what(), number);
    } catch (const InvalidInput& e) {
      throw IngestError(e.what(), number);
    }
  }
  return out;
}

const json& require(const json& j, const char* key) {
  if (!j.is_object()) throw InvalidInput("record is not a JSON object");
  if (!j.contains(key)) throw InvalidInput(std::string("missing field '") + key + "'");
  return j[key];
}

Matrix matrix_field(const json& j) {
  if (!j.is_array()) throw InvalidInput("visual_features must be an array of rows");
  if (j.empty()) return {};
  if (!j[0].is_array()) throw InvalidInput("visual_features must be an array of rows");
  Matrix m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != m.cols) {
      throw InvalidInput("visual_features rows differ in length");
    }
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (!j[r][c].is_number()) throw InvalidInput("visual feature is not a number");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

std::vector<int> int_list(const json& j, const char* what) {
  if (!j.is_array()) throw InvalidInput(std::string(what) + " must be an array of integers");
  std::vector<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw InvalidInput(std::string(what) + " must be an array of integers");
    out.push_back(v.get<int>());
  }
  return out;
}

ordered_json vector_to_json(const AttributionVector& v) {
  return ordered_json{{"feature_ids", v.feature_ids()}, {"values", v.values()}};
}

AttributionVector vector_from_json(const json& j, Modality modality) {
  const auto ids = int_list(require(j, "feature_ids"), "feature_ids");
  const auto& vals = require(j, "values");
  if (!vals.is_array()) throw InvalidInput("values must be an array of numbers");
  std::vector<double> values;
  for (const auto& v : vals) {
    if (!v.is_number()) throw InvalidInput("values must be an array of numbers");
    values.push_back(v.get<double>());
  }
  if (ids.size() != values.size()) throw InvalidInput("feature_ids and values differ in length");
  return AttributionVector(modality, ids, values);
}

std::optional<double> parse_cell(const std::string& cell, std::size_t line, const char* column) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || end != cell.data() + cell.size()) {
    throw IngestError(std::string("column ") + column + ": '" + cell + "' is not a number", line);
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Examples

ordered_json example_to_json(const TaskExample& example) {
  ordered_json tokens = ordered_json::array();
  for (const auto& t : example.tokens) {
    ordered_json tok{{"text", t.text}, {"word_index", t.word_index}};
    if (t.id >= 0) tok["id"] = t.id;
    tokens.push_back(std::move(tok));
  }
  ordered_json vis = ordered_json::array();
  for (std::size_t r = 0; r < example.visual_features.rows; ++r) {
    auto row = example.visual_features.row(r);
    vis.push_back(std::vector<double>(row.begin(), row.end()));
  }
  ordered_json j{{"id", example.id}, {"words", example.words}, {"tokens", tokens},
                 {"visual_features", vis}};
  j["answer_class"] = example.answer_class ? ordered_json(*example.answer_class) : ordered_json(nullptr);
  j["explanation_tokens"] = example.explanation_tokens;
  return j;
}

TaskExample example_from_json(const json& j) {
  TaskExample ex;
  const auto& id = require(j, "id");
  if (!id.is_string() || id.get<std::string>().empty()) throw InvalidInput("id must be a non-empty string");
  ex.id = id.get<std::string>();
  const auto& words = require(j, "words");
  if (!words.is_array()) throw InvalidInput("words must be an array of strings");
  for (const auto& w : words) {
    if (!w.is_string()) throw InvalidInput("words must be an array of strings");
    ex.words.push_back(w.get<std::string>());
  }
  const auto& tokens = require(j, "tokens");
  if (!tokens.is_array()) throw InvalidInput("tokens must be an array");
  for (const auto& t : tokens) {
    TextToken tok;
    const auto& text = require(t, "text");
    if (!text.is_string()) throw InvalidInput("token text must be a string");
    tok.text = text.get<std::string>();
    const auto& wi = require(t, "word_index");
    if (!wi.is_number_unsigned()) throw InvalidInput("word_index must be a non-negative integer");
    tok.word_index = wi.get<std::size_t>();
    if (t.contains("id") && !t["id"].is_null()) {
      if (!t["id"].is_number_unsigned()) throw InvalidInput("token id must be a non-negative integer");
      tok.id = t["id"].get<int>();
    }
    ex.tokens.push_back(std::move(tok));
  }
  if (j.contains("visual_features")) ex.visual_features = matrix_field(j["visual_features"]);
  if (j.contains("answer_class") && !j["answer_class"].is_null()) {
    if (!j["answer_class"].is_number_integer()) throw InvalidInput("answer_class must be an integer");
    ex.answer_class = j["answer_class"].get<int>();
  }
  if (j.contains("explanation_tokens")) {
    ex.explanation_tokens = int_list(j["explanation_tokens"], "explanation_tokens");
  }
  validate(ex);
  return ex;
}

std::vector<TaskExample> parse_examples(std::istream& in) {
  std::set<std::string> seen;
  std::vector<TaskExample> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    try {
      auto ex = example_from_json(json::parse(line));
      if (!seen.insert(ex.id).second) throw InvalidInput("duplicate example id '" + ex.id + "'");
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw IngestError(e.what(), number);
    } catch (const InvalidInput& e) {
      throw IngestError(e.what(), number);
    }
  }
  return out;
}

std::vector<TaskExample> load_examples(const std::string& path) {
  auto in = open_input(path);
  try {
    return parse_examples(in);
  } catch (const IngestError& e) {
    throw IngestError(e, path);
  }
}

void write_examples(const std::vector<TaskExample>& examples, const std::string& path) {
  auto out = open_output(path);
  for (const auto& ex : examples) out << example_to_json(ex).dump() << '\n';
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Attributions

std::string to_string(AttributionTarget t) {
  return t == AttributionTarget::Answer ? "answer" : "explanation";
}

AttributionTarget attribution_target_from_string(const std::string& s) {
  if (s == "answer") return AttributionTarget::Answer;
  if (s == "explanation") return AttributionTarget::Explanation;
  throw InvalidInput("unknown attribution target '" + s + "'");
}

bool AttributionRecord::operator==(const AttributionRecord& o) const {
  return example_id == o.example_id && target == o.target && answer_class == o.answer_class &&
         explanation_tokens == o.explanation_tokens &&
         attribution.language == o.attribution.language &&
         attribution.vision == o.attribution.vision &&
         attribution.target_class == o.attribution.target_class && steps == o.steps &&
         baseline == o.baseline && vision == o.vision;
}

ordered_json attribution_to_json(const AttributionRecord& r) {
  ordered_json modality{{"language", vector_to_json(r.attribution.language)}};
  modality["vision"] =
      r.attribution.vision ? vector_to_json(*r.attribution.vision) : ordered_json(nullptr);
  return ordered_json{{"id", r.example_id},
                      {"target", to_string(r.target)},
                      {"answer_class", r.answer_class},
                      {"explanation_tokens", r.explanation_tokens},
                      {"config",
                       {{"m", r.steps},
                        {"baseline", to_string(r.baseline)},
                        {"vision", to_string(r.vision)}}},
                      {"modality", modality}};
}

AttributionRecord attribution_from_json(const json& j) {
  AttributionRecord r;
  const auto& id = require(j, "id");
  if (!id.is_string()) throw InvalidInput("id must be a string");
  r.example_id = id.get<std::string>();
  r.target = attribution_target_from_string(require(j, "target").get<std::string>());
  r.answer_class = require(j, "answer_class").get<int>();
  if (j.contains("explanation_tokens")) {
    r.explanation_tokens = int_list(j["explanation_tokens"], "explanation_tokens");
  }
  const auto& config = require(j, "config");
  const auto& m = require(config, "m");
  if (!m.is_number_unsigned() || m.get<std::size_t>() == 0) throw InvalidInput("config.m must be positive");
  r.steps = m.get<std::size_t>();
  r.baseline = baseline_from_string(require(config, "baseline").get<std::string>());
  r.vision = granularity_from_string(config.value("vision", std::string("region")));
  const auto& modality = require(j, "modality");
  r.attribution.language = vector_from_json(require(modality, "language"), Modality::Language);
  if (modality.contains("vision") && !modality["vision"].is_null()) {
    r.attribution.vision = vector_from_json(modality["vision"], Modality::Vision);
  }
  r.attribution.target_class = r.answer_class;
  return r;
}

std::vector<AttributionRecord> parse_attributions(std::istream& in) {
  return parse_lines(in, [](const json& j) { return attribution_from_json(j); });
}

std::vector<AttributionRecord> load_attributions(const std::string& path) {
  auto in = open_input(path);
  try {
    return parse_attributions(in);
  } catch (const IngestError& e) {
    throw IngestError(e, path);
  }
}

void write_attributions(const std::vector<AttributionRecord>& records, const std::string& path) {
  auto out = open_output(path);
  for (const auto& r : records) out << attribution_to_json(r).dump() << '\n';
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Metrics

const std::string& metrics_header() {
  static const std::string header = "id,sf_nlp,sf_img,sf_overall,suff_nlp,comp_nlp,suff_img,comp_img";
  return header;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string out = metrics_header() + "\n";
  for (const auto& r : rows) {
    if (r.example_id.find_first_of(",\"\n\r") != std::string::npos) {
      throw InvalidInput("example id '" + r.example_id + "' cannot be written to CSV");
    }
    out += r.example_id + "," + format_double(r.sf_nlp) + "," + cell(r.sf_img) + "," +
           format_double(r.sf_overall) + "," + format_double(r.suff_nlp) + "," +
           format_double(r.comp_nlp) + "," + cell(r.suff_img) + "," + cell(r.comp_img) + "\n";
  }
  return out;
}

void write_metrics(const std::vector<MetricRow>& rows, const std::string& path) {
  write_text(path, metrics_csv(rows));
}

std::string sidecar_path(const std::string& csv_path) {
  return std::filesystem::path(csv_path).replace_extension(".json").string();
}

void write_metrics(const std::vector<MetricRow>& rows, const std::string& path,
                   const ordered_json& sidecar) {
  write_metrics(rows, path);
  write_json(sidecar_path(path), sidecar);
}

std::vector<MetricRow> parse_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IngestError("missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_header()) throw IngestError("unexpected header '" + line + "'", 1);
  std::vector<MetricRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 8) {
      throw IngestError("expected 8 cells, found " + std::to_string(cells.size()), number);
    }
    auto required = [&](std::size_t i, const char* name) {
      const auto v = parse_cell(cells[i], number, name);
      if (!v) throw IngestError(std::string("column ") + name + " is empty", number);
      return *v;
    };
    MetricRow r;
    r.example_id = cells[0];
    if (r.example_id.empty()) throw IngestError("empty id", number);
    r.sf_nlp = required(1, "sf_nlp");
    r.sf_img = parse_cell(cells[2], number, "sf_img");
    r.sf_overall = required(3, "sf_overall");
    r.suff_nlp = required(4, "suff_nlp");
    r.comp_nlp = required(5, "comp_nlp");
    r.suff_img = parse_cell(cells[6], number, "suff_img");
    r.comp_img = parse_cell(cells[7], number, "comp_img");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricRow> read_metrics(const std::string& path) {
  auto in = open_input(path);
  try {
    return parse_metrics(in);
  } catch (const IngestError& e) {
    throw IngestError(e, path);
  }
}

// ---------------------------------------------------------------------------
// Generic files and report pieces

void write_text(const std::string& path, const std::string& content) {
  auto out = open_output(path);
  out << content;
  finish(out, path);
}

void write_json(const std::string& path, const ordered_json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

json read_json(const std::string& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

ordered_json histogram_to_json(const Histogram& h) {
  return ordered_json{{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}, {"clamped", h.clamped}};
}

ordered_json correlation_to_json(const CorrelationMatrix& m) {
  ordered_json matrix = ordered_json::array();
  for (const auto& row : m.r) {
    ordered_json out = ordered_json::array();
    for (const auto& v : row) out.push_back(v ? ordered_json(*v) : ordered_json("NoVariance"));
    matrix.push_back(std::move(out));
  }
  return ordered_json{{"names", m.names}, {"matrix", matrix}};
}

CorrelationMatrix correlation_from_json(const json& j) {
  CorrelationMatrix m;
  m.names = require(j, "names").get<std::vector<std::string>>();
  const auto& matrix = require(j, "matrix");
  if (!matrix.is_array() || matrix.size() != m.names.size()) {
    throw InvalidInput("correlation matrix does not match its names");
  }
  for (const auto& row : matrix) {
    if (!row.is_array() || row.size() != m.names.size()) {
      throw InvalidInput("correlation matrix is not square");
    }
    std::vector<std::optional<double>> out;
    for (const auto& v : row) {
      if (v.is_number()) out.emplace_back(v.get<double>());
      else if (v == "NoVariance") out.emplace_back(std::nullopt);
      else throw InvalidInput("correlation entry must be a number or \"NoVariance\"");
    }
    m.r.push_back(std::move(out));
  }
  return m;
}

std::string correlation_csv(const CorrelationMatrix& m) {
  std::string out = "metric";
  for (const auto& n : m.names) out += "," + n;
  out += "\n";
  for (std::size_t a = 0; a < m.names.size(); ++a) {
    out += m.names[a];
    for (const auto& v : m.r[a]) out += "," + (v ? format_double(*v) : std::string("NoVariance"));
    out += "\n";
  }
  return out;
}

}  // namespace faitheval
