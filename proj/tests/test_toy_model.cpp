#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "faitheval/toy_model.hpp"
#include "test_support.hpp"

using namespace faitheval;
using namespace faitheval::toy;

namespace {

std::vector<double> matvec(const Matrix& w, const std::vector<double>& b, const std::vector<double>& x) {
  std::vector<double> y(w.rows);
  for (std::size_t r = 0; r < w.rows; ++r) {
    long double acc = 0.0L;
    for (std::size_t c = 0; c < w.cols; ++c) acc += static_cast<long double>(w(r, c)) * x[c];
    y[r] = static_cast<double>(acc) + b[r];
  }
  return y;
}

std::vector<double> tanh_all(std::vector<double> v) {
  for (double& x : v) x = std::tanh(x);
  return v;
}

// Plain forward pass written directly from the layer equations.
std::vector<double> reference_class_logits(const ToyVLModel& model, const ModelInput& input) {
  const auto& w = model.weights();
  const std::size_t H = model.dims().hidden_dim;
  std::vector<double> pooled(2 * H, 0.0);
  for (std::size_t t = 0; t < input.text.rows; ++t) {
    const auto row = input.text.row(t);
    const auto u = tanh_all(matvec(w.token_w, w.token_b, {row.begin(), row.end()}));
    for (std::size_t k = 0; k < H; ++k) pooled[k] += u[k] / static_cast<double>(input.text.rows);
  }
  for (std::size_t r = 0; r < input.vision.rows; ++r) {
    const auto row = input.vision.row(r);
    const auto v = tanh_all(matvec(w.vision_w, w.vision_b, {row.begin(), row.end()}));
    for (std::size_t k = 0; k < H; ++k) pooled[H + k] += v[k] / static_cast<double>(input.vision.rows);
  }
  const auto h = tanh_all(matvec(w.encoder_w, w.encoder_b, pooled));
  return matvec(w.classifier_w, w.classifier_b, h);
}

ModelInput sample_input(const ToyVLModel& model, std::vector<int> ids, std::size_t regions) {
  ModelInput in;
  in.text = model.embed(ids);
  in.vision = Matrix(regions, model.dims().vis_dim);
  WeightRng rng(99);
  for (double& v : in.vision.data) v = rng.unit();
  return in;
}

std::string format_vector(const std::vector<double>& v) {
  std::ostringstream out;
  char buf[64];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, "%.17g\n", x);
    out << buf;
  }
  return out.str();
}

ToyVLModel zero_model(Ablation ablation = Ablation::Default) {
  auto model = make_toy_model(1, {}, ablation);
  auto w = model.weights();
  for (auto* m : {&w.embedding, &w.token_w, &w.vision_w, &w.encoder_w, &w.classifier_w,
                  &w.answer_embedding, &w.explainer_w}) {
    std::fill(m->data.begin(), m->data.end(), 0.0);
  }
  for (auto* v : {&w.token_b, &w.vision_b, &w.encoder_b, &w.classifier_b, &w.explainer_b}) {
    std::fill(v->begin(), v->end(), 0.0);
  }
  return ToyVLModel(model.dims(), ablation, 1, w);
}

}  // namespace

TEST(WeightRng, SplitMixReferenceSequence) {
  // First splitmix64 outputs for seed 0, as published with the generator.
  WeightRng rng(0);
  const std::uint64_t expected[] = {0xE220A8397B1DCDAFULL, 0x6E789E6AA1B965F4ULL,
                                    0x06C45D188009454FULL};
  for (std::uint64_t e : expected) {
    EXPECT_EQ(rng.unit(), static_cast<double>(e >> 11) * 0x1.0p-53);
  }
}

TEST(WeightRng, UniformStaysInBound) {
  WeightRng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform(0.25);
    EXPECT_GE(v, -0.25);
    EXPECT_LT(v, 0.25);
  }
}

TEST(ToyModel, ZeroWeightsGiveZeroLogitsAndUniformExplainer) {
  const auto model = zero_model();
  const auto in = sample_input(model, {2, 3, 4}, 2);
  for (double l : model.class_logits(in)) EXPECT_EQ(l, 0.0);
  const auto step = model.explainer_step(in, 0, {});
  for (double p : step.probs) EXPECT_NEAR(p, 1.0 / model.dims().vocab, 1e-15);
}

TEST(ToyModel, ClassLogitsMatchPlainForwardPass) {
  for (std::uint64_t seed : {1u, 42u, 777u}) {
    const auto model = make_toy_model(seed);
    for (std::size_t regions : {0u, 1u, 3u}) {
      const auto in = sample_input(model, {5, 9, 2, 17}, regions);
      const auto got = model.class_logits(in);
      const auto want = reference_class_logits(model, in);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t c = 0; c < got.size(); ++c) EXPECT_NEAR(got[c], want[c], 1e-14);
    }
  }
}

TEST(ToyModel, SeedFortyTwoLogitsAreFrozen) {
  const auto model = make_toy_model(42);
  const auto in = sample_input(model, {5, 9, 2, 17}, 3);
  faitheval::testing::expect_golden("toy_seed42_logits.txt", format_vector(model.class_logits(in)));
}

TEST(ToyModel, GreedyDecodeIsFrozenAndSkipsReservedIds) {
  const auto model = make_toy_model(42);
  const auto in = sample_input(model, {5, 9, 2, 17}, 3);
  std::string text;
  for (int c = 0; c < model.dims().classes; ++c) {
    const auto tokens = model.greedy_decode(in, c);
    EXPECT_EQ(tokens.size(), model.dims().max_explanation_length);
    for (int t : tokens) {
      EXPECT_GE(t, 2);
      text += std::to_string(t) + ' ';
    }
    text += '\n';
  }
  faitheval::testing::expect_golden("toy_seed42_decode.txt", text);
}

TEST(ToyModel, DeterministicPerSeedAndDistinctAcrossSeeds) {
  EXPECT_EQ(make_toy_model(42).weights(), make_toy_model(42).weights());
  EXPECT_NE(make_toy_model(42).weights(), make_toy_model(43).weights());
}

TEST(ToyModel, JsonRoundTripPreservesEverything) {
  const auto model = make_toy_model(11, {40, 6, 5, 4, 3, 4}, Ablation::NQ);
  const auto back = ToyVLModel::from_json(model.to_json());
  EXPECT_EQ(back.weights(), model.weights());
  EXPECT_EQ(back.dims(), model.dims());
  EXPECT_EQ(back.ablation(), Ablation::NQ);
  EXPECT_EQ(back.info(), model.info());
}

TEST(ToyModel, SaveAndLoadThroughFile) {
  faitheval::testing::TempDir dir;
  const auto model = make_toy_model(3);
  save_model(model, dir / "w.json");
  const auto loaded = load_model(dir / "w.json");
  const auto in = sample_input(model, {4, 5}, 1);
  EXPECT_EQ(loaded->class_logits(in), model.class_logits(in));
  EXPECT_THROW(load_model(dir / "missing.json"), IoError);
}

TEST(ToyModel, RejectsMalformedWeights) {
  auto j = make_toy_model(3).to_json();
  j["weights"]["token_b"].push_back(0.0);
  EXPECT_THROW(ToyVLModel::from_json(j), InvalidInput);
  EXPECT_THROW(make_toy_model(1, {2, 8, 8, 3, 6, 5}), InvalidInput);
}

TEST(ToyModel, PrefixAtMaximumLengthThrows) {
  const auto model = make_toy_model(42);
  const auto in = sample_input(model, {5, 6}, 1);
  const std::vector<int> prefix(model.dims().max_explanation_length, 3);
  EXPECT_THROW(model.explainer_logits(in, 0, prefix), InvalidInput);
  EXPECT_THROW(model.explainer_logits(in, 7, {}), InvalidInput);
}

TEST(ToyModel, AblationControlsExplainerInputs) {
  const auto in_a = [](const ToyVLModel& m) { return sample_input(m, {5, 6, 7}, 2); };
  // NU and OA ignore task features, so vision gradients of the explainer vanish.
  for (auto ab : {Ablation::NU, Ablation::OA}) {
    const auto model = make_toy_model(42, {}, ab);
    EXPECT_FALSE(model.info().explainer_uses_vision);
    const auto g = model.explainer_gradient(in_a(model), TokenTarget{0, 4, 0, {}});
    for (double v : g.vision.data) EXPECT_EQ(v, 0.0);
  }
  // OU sees neither answer nor question: the logits do not depend on the answer class.
  const auto ou = make_toy_model(42, {}, Ablation::OU);
  EXPECT_EQ(ou.explainer_logits(in_a(ou), 0, {}), ou.explainer_logits(in_a(ou), 1, {}));
  const auto def = make_toy_model(42);
  EXPECT_NE(def.explainer_logits(in_a(def), 0, {}), def.explainer_logits(in_a(def), 1, {}));
  for (auto ab : {Ablation::Default, Ablation::NQ, Ablation::NA, Ablation::OU, Ablation::NU,
                  Ablation::OA}) {
    EXPECT_EQ(ablation_from_string(to_string(ab)), ab);
  }
  EXPECT_THROW(ablation_from_string("XX"), InvalidInput);
}

TEST(ToyModel, ClassGradientMatchesFiniteDifferences) {
  const auto model = make_toy_model(42);
  const auto in = sample_input(model, {5, 9, 2}, 2);
  const auto g = model.class_gradient(in, 1);
  auto flat = in.flatten();
  const auto grad = g.flatten();
  const double h = 1e-6;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    const double up = model.class_logits(in.with_values(flat))[1];
    flat[i] = keep - h;
    const double down = model.class_logits(in.with_values(flat))[1];
    flat[i] = keep;
    EXPECT_NEAR(grad[i], (up - down) / (2 * h), 1e-7);
  }
}

TEST(LinearModel, GradientIsTheWeightColumn) {
  const auto model = LinearModel::random(8, 20, 3, 4, 2, 5, 3);
  const auto& info = model.info();
  ModelInput in{model.embed(std::vector<int>{2, 3, 4, 5}), Matrix(2, info.vis_dim, 0.3)};
  const auto g = model.class_gradient(in, 2).flatten();
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], model.weights()(i, 2));
  const auto logits = model.class_logits(in);
  const auto x = in.flatten();
  long double acc = model.bias()[2];
  for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<long double>(x[i]) * model.weights()(i, 2);
  EXPECT_NEAR(logits[2], static_cast<double>(acc), 1e-13);
  const auto back = LinearModel::from_json(model.to_json());
  EXPECT_EQ(back.weights(), model.weights());
}

TEST(LinearModel, ConstantHeadHasZeroGradient) {
  const auto base = LinearModel::random(8, 20, 3, 2, 1, 4, 2);
  Matrix zero(base.weights().rows, base.weights().cols);
  LinearModel model(base.embedding(), 2, 1, 4, zero, {0.5, -0.5});
  ModelInput in{model.embed(std::vector<int>{2, 3}), Matrix(1, 4, 1.0)};
  for (double v : model.class_gradient(in, 0).flatten()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(model.class_logits(in), (std::vector<double>{0.5, -0.5}));
}

TEST(InProcessOracle, PredictIsSoftmaxOfLogits) {
  auto model = std::make_shared<ToyVLModel>(make_toy_model(42));
  InProcessOracle oracle(model);
  const auto in = sample_input(*model, {5, 6}, 1);
  const auto logits = model->class_logits(in);
  const auto p = oracle.predict(in);
  long double z = 0.0L;
  for (double l : logits) z += std::exp(static_cast<long double>(l));
  for (std::size_t c = 0; c < logits.size(); ++c) {
    EXPECT_NEAR(p.probs[c], static_cast<double>(std::exp(static_cast<long double>(logits[c])) / z), 1e-15);
  }
  EXPECT_EQ(oracle.generate(in, 1), model->greedy_decode(in, 1));
  EXPECT_THROW(model->embed(std::vector<int>{99}), InvalidInput);
}
