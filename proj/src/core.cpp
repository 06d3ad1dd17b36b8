#include "faitheval/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace faitheval {

std::string to_string(Modality m) { return m == Modality::Language ? "language" : "vision"; }

Modality modality_from_string(const std::string& s) {
  if (s == "language") return Modality::Language;
  if (s == "vision") return Modality::Vision;
  throw InvalidInput("unknown modality '" + s + "'");
}

AttributionVector::AttributionVector(Modality modality, std::vector<int> feature_ids,
                                     std::vector<double> values)
    : modality_(modality), ids_(std::move(feature_ids)), values_(std::move(values)) {
  if (ids_.size() != values_.size()) {
    throw InvalidInput("attribution has " + std::to_string(ids_.size()) + " ids but " +
                       std::to_string(values_.size()) + " values");
  }
  std::unordered_set<int> seen;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) {
      throw InvalidInput("duplicate feature id " + std::to_string(ids_[i]));
    }
    if (!std::isfinite(values_[i])) {
      throw InvalidInput("non-finite relevance for feature " + std::to_string(ids_[i]));
    }
  }
}

AttributionVector AttributionVector::dense(Modality modality, std::vector<double> values) {
  std::vector<int> ids(values.size());
  std::iota(ids.begin(), ids.end(), 0);
  return AttributionVector(modality, std::move(ids), std::move(values));
}

AttributionPair::AttributionPair(AttributionVector answer, AttributionVector explanation)
    : answer_(std::move(answer)), explanation_(std::move(explanation)) {
  if (answer_.modality() != explanation_.modality()) {
    throw InvalidInput("attribution pair mixes modalities");
  }
  if (answer_.feature_ids() != explanation_.feature_ids()) {
    throw InvalidInput("attribution pair is not aligned on the same feature ids");
  }
}

PredictionDistribution PredictionDistribution::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw InvalidInput("empty probability vector");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("probability outside [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw InvalidInput("probabilities sum to " + std::to_string(total));
  }
  return PredictionDistribution{std::move(probs)};
}

std::size_t PredictionDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<std::vector<std::size_t>> TaskExample::word_tokens() const {
  std::vector<std::vector<std::size_t>> out(words.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t].word_index >= words.size()) {
      throw InvalidInput("token " + std::to_string(t) + " of example '" + id +
                         "' refers to word " + std::to_string(tokens[t].word_index) +
                         " of " + std::to_string(words.size()));
    }
    out[tokens[t].word_index].push_back(t);
  }
  return out;
}

void validate(const TaskExample& example) {
  const auto spans = example.word_tokens();
  for (std::size_t w = 0; w < spans.size(); ++w) {
    if (spans[w].empty()) {
      throw InvalidInput("word " + std::to_string(w) + " of example '" + example.id +
                         "' has no tokens");
    }
    for (std::size_t i = 1; i < spans[w].size(); ++i) {
      if (spans[w][i] != spans[w][i - 1] + 1) {
        throw InvalidInput("word " + std::to_string(w) + " of example '" + example.id +
                           "' is not a contiguous token span");
      }
    }
  }
  for (std::size_t w = 1; w < spans.size(); ++w) {
    if (spans[w].front() < spans[w - 1].back()) {
      throw InvalidInput("words of example '" + example.id + "' are out of token order");
    }
  }
  if (example.visual_features.data.size() !=
      example.visual_features.rows * example.visual_features.cols) {
    throw InvalidInput("visual feature matrix of example '" + example.id + "' is ragged");
  }
  for (double v : example.visual_features.data) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite visual feature in '" + example.id + "'");
  }
  if (example.answer_class && *example.answer_class < 0) {
    throw InvalidInput("negative answer class in '" + example.id + "'");
  }
}

double overall_score(double sf_nlp, std::optional<double> sf_img) {
  return sf_img ? (sf_nlp + *sf_img) / 2.0 : sf_nlp;
}

PredictionDistribution softmax_normalize(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax of an empty vector");
  const double peak = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(peak)) throw InvalidInput("non-finite logit");
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw InvalidInput("non-finite logit");
    probs[i] = std::exp(logits[i] - peak);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return PredictionDistribution{std::move(probs)};
}

bool has_zero_norm(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidInput("cosine of vectors with lengths " + std::to_string(a.size()) + " and " +
                       std::to_string(b.size()));
  }
  // Scale by the max magnitude first so huge or tiny relevances do not
  // overflow the squared norms.
  double scale_a = 0.0, scale_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale_a = std::max(scale_a, std::abs(a[i]));
    scale_b = std::max(scale_b, std::abs(b[i]));
  }
  if (scale_a == 0.0 || scale_b == 0.0) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] / scale_a;
    const double y = b[i] / scale_b;
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace faitheval
