#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "faitheval/core.hpp"

using namespace faitheval;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(Softmax, SymmetricPairIsUniform) {
  const auto p = softmax_normalize(std::vector<double>{0.0, 0.0});
  EXPECT_DOUBLE_EQ(p.probs[0], 0.5);
  EXPECT_DOUBLE_EQ(p.probs[1], 0.5);
}

TEST(Softmax, SingleLogitIsCertain) {
  EXPECT_DOUBLE_EQ(softmax_normalize(std::vector<double>{-7.25}).probs[0], 1.0);
}

TEST(Softmax, OneTwoThree) {
  const std::vector<double> logits = {1.0, 2.0, 3.0};
  const auto p = softmax_normalize(logits);
  long double total = 0.0L;
  for (double l : logits) total += std::exp(static_cast<long double>(l));
  const double expected[] = {0.09003, 0.24473, 0.66524};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto reference = static_cast<double>(std::exp(static_cast<long double>(logits[i])) / total);
    EXPECT_NEAR(p.probs[i], reference, 1e-15);
    EXPECT_NEAR(p.probs[i], expected[i], 5e-6);
  }
}

TEST(Softmax, EmptyIsInvalid) {
  EXPECT_THROW(softmax_normalize(std::vector<double>{}), InvalidInput);
}

TEST(Softmax, NonFiniteIsInvalid) {
  EXPECT_THROW(softmax_normalize(std::vector<double>{1.0, std::nan("")}), InvalidInput);
  EXPECT_THROW(softmax_normalize(std::vector<double>{std::numeric_limits<double>::infinity()}),
               InvalidInput);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const auto p = softmax_normalize(std::vector<double>{1000.0, 1000.0});
  EXPECT_DOUBLE_EQ(p.probs[0], 0.5);
}

TEST(Softmax, ShiftAndArgmaxInvariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int n = 0; n < 1000; ++n) {
    const auto x = random_vector(rng, 1 + n % 9);
    auto shifted = x;
    const double c = shift(rng);
    for (double& v : shifted) v += c;
    const auto p = softmax_normalize(x);
    const auto q = softmax_normalize(shifted);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(p.probs[i], q.probs[i], 1e-9);
      total += p.probs[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    const auto argmax_x = static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
    EXPECT_EQ(p.argmax(), argmax_x);
  }
}

TEST(Cosine, Identity) {
  const std::vector<double> a = {0.3, -1.2, 4.0};
  EXPECT_DOUBLE_EQ(cosine(a, a), 1.0);
}

TEST(Cosine, Antipodal) {
  const std::vector<double> a = {0.3, -1.2, 4.0};
  const std::vector<double> b = {-0.3, 1.2, -4.0};
  EXPECT_DOUBLE_EQ(cosine(a, b), -1.0);
}

TEST(Cosine, DiagonalIsInverseSqrtTwo) {
  EXPECT_NEAR(cosine(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 1.0}), 0.70711, 5e-6);
  EXPECT_NEAR(cosine(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 1.0}), 1.0 / std::sqrt(2.0),
              1e-15);
}

TEST(Cosine, ZeroNormYieldsZero) {
  const std::vector<double> zero = {0.0, 0.0};
  const std::vector<double> b = {1.0, 2.0};
  EXPECT_EQ(cosine(zero, b), 0.0);
  EXPECT_EQ(cosine(b, zero), 0.0);
  EXPECT_TRUE(has_zero_norm(zero));
  EXPECT_FALSE(has_zero_norm(b));
  EXPECT_TRUE(has_zero_norm(std::vector<double>{}));
}

TEST(Cosine, LengthMismatchIsInvalid) {
  EXPECT_THROW(cosine(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), InvalidInput);
}

TEST(Cosine, ExtremeMagnitudes) {
  const std::vector<double> a = {1e200, 2e200};
  const std::vector<double> b = {1e-200, 2e-200};
  EXPECT_NEAR(cosine(a, b), 1.0, 1e-15);
}

TEST(Cosine, ScaleInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> scale(0.0, 10.0);
  for (int n = 0; n < 1000; ++n) {
    const auto a = random_vector(rng, 1 + n % 17);
    const auto b = random_vector(rng, a.size());
    double c = scale(rng);
    if (c == 0.0) c = 10.0;
    auto cb = b;
    for (double& v : cb) v *= c;
    EXPECT_LE(std::abs(cosine(a, cb) - cosine(a, b)), 1e-9);
  }
}

TEST(Cosine, RangeIsClamped) {
  std::mt19937_64 rng(6);
  for (int n = 0; n < 200; ++n) {
    const auto a = random_vector(rng, 4);
    const double c = cosine(a, a);
    EXPECT_LE(c, 1.0);
    EXPECT_GE(c, -1.0);
  }
}

TEST(OverallScore, MeanOfPresentModalities) {
  EXPECT_EQ(overall_score(0.25, 0.75), 0.5);
  EXPECT_EQ(overall_score(0.3, std::nullopt), 0.3);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 100; ++n) {
    const double a = u(rng), b = u(rng);
    EXPECT_EQ(overall_score(a, b), (a + b) / 2.0);
  }
}

TEST(AttributionVector, RejectsDuplicateIds) {
  EXPECT_THROW(AttributionVector(Modality::Language, {0, 1, 0}, {0.1, 0.2, 0.3}), InvalidInput);
}

TEST(AttributionVector, RejectsNonFinite) {
  EXPECT_THROW(AttributionVector(Modality::Vision, {0, 1}, {0.1, std::nan("")}), InvalidInput);
  EXPECT_THROW(AttributionVector(Modality::Vision, {0}, {std::numeric_limits<double>::infinity()}),
               InvalidInput);
}

TEST(AttributionVector, RejectsLengthMismatch) {
  EXPECT_THROW(AttributionVector(Modality::Vision, {0, 1}, {0.1}), InvalidInput);
}

TEST(AttributionVector, DenseAssignsSequentialIds) {
  const auto v = AttributionVector::dense(Modality::Vision, {0.5, -0.5, 1.5});
  EXPECT_EQ(v.feature_ids(), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(v.modality(), Modality::Vision);
}

TEST(AttributionPair, RequiresSameModalityAndIds) {
  const auto lang = AttributionVector::dense(Modality::Language, {1.0, 2.0});
  const auto vis = AttributionVector::dense(Modality::Vision, {1.0, 2.0});
  EXPECT_THROW(AttributionPair(lang, vis), InvalidInput);
  const AttributionVector reordered(Modality::Language, {1, 0}, {1.0, 2.0});
  EXPECT_THROW(AttributionPair(lang, reordered), InvalidInput);
  EXPECT_NO_THROW(AttributionPair(lang, lang));
}

TEST(PredictionDistribution, ValidatesProbabilities) {
  EXPECT_NO_THROW(PredictionDistribution::from_probs({0.25, 0.75}));
  EXPECT_NO_THROW(PredictionDistribution::from_probs({0.25, 0.7500005}));
  EXPECT_THROW(PredictionDistribution::from_probs({0.25, 0.7}), InvalidInput);
  EXPECT_THROW(PredictionDistribution::from_probs({-0.25, 1.25}), InvalidInput);
  EXPECT_THROW(PredictionDistribution::from_probs({}), InvalidInput);
}

TEST(Modality, StringRoundTrip) {
  EXPECT_EQ(modality_from_string(to_string(Modality::Language)), Modality::Language);
  EXPECT_EQ(modality_from_string(to_string(Modality::Vision)), Modality::Vision);
  EXPECT_THROW(modality_from_string("audio"), InvalidInput);
}

TEST(TaskExample, ValidateAcceptsWellFormed) {
  TaskExample ex;
  ex.id = "a";
  ex.words = {"splendour", "!"};
  ex.tokens = {{-1, "s", 0}, {-1, "##ple", 0}, {-1, "!", 1}};
  ex.visual_features = Matrix(2, 3);
  EXPECT_NO_THROW(validate(ex));
  const auto spans = ex.word_tokens();
  EXPECT_EQ(spans[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(spans[1], (std::vector<std::size_t>{2}));
}

TEST(TaskExample, ValidateRejectsBrokenSpans) {
  TaskExample ex;
  ex.id = "a";
  ex.words = {"x", "y"};
  ex.tokens = {{-1, "x", 0}};
  EXPECT_THROW(validate(ex), InvalidInput);  // word without tokens
  ex.tokens = {{-1, "x", 0}, {-1, "y", 1}, {-1, "x", 0}};
  EXPECT_THROW(validate(ex), InvalidInput);  // non-contiguous
  ex.tokens = {{-1, "y", 1}, {-1, "x", 0}};
  EXPECT_THROW(validate(ex), InvalidInput);  // out of order
  ex.tokens = {{-1, "x", 0}, {-1, "y", 5}};
  EXPECT_THROW(validate(ex), InvalidInput);  // unknown word
}

TEST(TaskExample, ValidateRejectsNonFiniteFeaturesAndNegativeClass) {
  TaskExample ex;
  ex.id = "a";
  ex.visual_features = Matrix(1, 2);
  ex.visual_features(0, 1) = std::nan("");
  EXPECT_THROW(validate(ex), InvalidInput);
  ex.visual_features(0, 1) = 0.0;
  ex.answer_class = -1;
  EXPECT_THROW(validate(ex), InvalidInput);
}
