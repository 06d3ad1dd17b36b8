#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace faitheval {

// Error hierarchy. Every failure surfaced by the toolkit derives from Error so
// callers can catch one type at the boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

class OracleTimeout : public OracleError {
 public:
  using OracleError::OracleError;
};

class ProtocolError : public OracleError {
 public:
  ProtocolError(const std::string& what, std::size_t byte_offset)
      : OracleError(what + " (byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class EmptyExplanation : public Error {
 public:
  using Error::Error;
};

// A file that cannot be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  IngestError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}
  // The same failure attributed to a file: "PATH: line N: what".
  IngestError(const IngestError& inner, const std::string& path)
      : Error(path + ": " + inner.what()), line_(inner.line_), detail_(inner.detail_) {}
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

enum class Modality { Language, Vision };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

// Signed relevance per feature of one modality. Feature ids are unique and
// every relevance is finite; the constructor enforces both.
class AttributionVector {
 public:
  AttributionVector() = default;
  AttributionVector(Modality modality, std::vector<int> feature_ids, std::vector<double> values);

  // Ids 0..n-1 in order.
  static AttributionVector dense(Modality modality, std::vector<double> values);

  Modality modality() const { return modality_; }
  const std::vector<int>& feature_ids() const { return ids_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  bool operator==(const AttributionVector&) const = default;

 private:
  Modality modality_ = Modality::Language;
  std::vector<int> ids_;
  std::vector<double> values_;
};

// Answer-side and explanation-side attributions over one feature space.
class AttributionPair {
 public:
  AttributionPair(AttributionVector answer, AttributionVector explanation);

  const AttributionVector& answer() const { return answer_; }
  const AttributionVector& explanation() const { return explanation_; }

 private:
  AttributionVector answer_;
  AttributionVector explanation_;
};

struct PredictionDistribution {
  std::vector<double> probs;

  // Validates range and normalization (1e-6).
  static PredictionDistribution from_probs(std::vector<double> probs);
  std::size_t argmax() const;
};

struct TextToken {
  int id = -1;  // vocabulary id; -1 until resolved against an oracle
  std::string text;
  std::size_t word_index = 0;
};

// One evaluation instance.
struct TaskExample {
  std::string id;
  std::vector<std::string> words;
  std::vector<TextToken> tokens;
  Matrix visual_features;  // n_regions x d
  std::optional<int> answer_class;
  std::vector<int> explanation_tokens;

  // Token indices of each word, in order.
  std::vector<std::vector<std::size_t>> word_tokens() const;
};

// Throws InvalidInput when tokens do not map onto a word, or when a word has
// no token.
void validate(const TaskExample& example);

struct MetricRow {
  std::string example_id;
  double sf_nlp = 0.0;
  std::optional<double> sf_img;
  double sf_overall = 0.0;
  double suff_nlp = 0.0;
  double comp_nlp = 0.0;
  std::optional<double> suff_img;
  std::optional<double> comp_img;

  bool operator==(const MetricRow&) const = default;
};

// Mean of the present per-modality scores.
double overall_score(double sf_nlp, std::optional<double> sf_img);

PredictionDistribution softmax_normalize(std::span<const double> logits);

// Cosine similarity. Zero-norm operands yield 0.
double cosine(std::span<const double> a, std::span<const double> b);

bool has_zero_norm(std::span<const double> v);

}  // namespace faitheval
