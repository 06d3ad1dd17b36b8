#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "faitheval/autodiff.hpp"
#include "faitheval/core.hpp"
#include "faitheval/oracle.hpp"
#include "json.hpp"

namespace faitheval::toy {

// Deterministic uniform draws in [-bound, bound], independent of the
// standard library's distribution implementations.
class WeightRng {
 public:
  explicit WeightRng(std::uint64_t seed);
  double uniform(double bound);
  double unit();  // [0, 1)

 private:
  std::uint64_t state_;
};

// Fully connected network: tanh on every hidden layer, linear output layer.
class TanhMlp {
 public:
  // Sizes include input and output, e.g. {10, 8, 3}.
  static TanhMlp random(std::uint64_t seed, std::vector<std::size_t> sizes);

  std::size_t inputs() const { return sizes_.front(); }
  std::size_t outputs() const { return sizes_.back(); }

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<ad::Var> forward(ad::Tape& tape, std::span<const ad::Var> x) const;
  double value(std::span<const double> x, std::size_t output) const;
  std::vector<double> gradient(std::span<const double> x, std::size_t output) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::vector<double>> weights_;  // [layer] row-major [out x in]
  std::vector<std::vector<double>> biases_;
};

// Common surface of the in-process vision-language models.
class VisionLanguageModel {
 public:
  virtual ~VisionLanguageModel() = default;

  virtual const OracleInfo& info() const = 0;
  virtual const Matrix& embedding() const = 0;

  virtual std::vector<double> class_logits(const ModelInput& input) const = 0;
  virtual GradientRecord class_gradient(const ModelInput& input, int class_index) const = 0;

  virtual std::vector<double> explainer_logits(const ModelInput& input, int answer_class,
                                               std::span<const int> prefix) const;
  virtual GradientRecord explainer_gradient(const ModelInput& input,
                                            const TokenTarget& target) const;

  virtual nlohmann::json to_json() const = 0;

  Matrix embed(std::span<const int> token_ids) const;
};

// logits = W^T flatten(input) + b over a fixed input shape. Gradients are
// the weight columns.
class LinearModel final : public VisionLanguageModel {
 public:
  LinearModel(Matrix embedding, std::size_t n_tokens, std::size_t n_regions, std::size_t vis_dim,
              Matrix weights, std::vector<double> bias);

  static LinearModel random(std::uint64_t seed, int vocab, std::size_t text_dim,
                            std::size_t n_tokens, std::size_t n_regions, std::size_t vis_dim,
                            int classes);

  const OracleInfo& info() const override { return info_; }
  const Matrix& embedding() const override { return embedding_; }
  const Matrix& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }

  std::vector<double> class_logits(const ModelInput& input) const override;
  GradientRecord class_gradient(const ModelInput& input, int class_index) const override;

  nlohmann::json to_json() const override;
  static LinearModel from_json(const nlohmann::json& j);

 private:
  OracleInfo info_;
  Matrix embedding_;
  Matrix weights_;  // [n_features x classes]
  std::vector<double> bias_;
};

// Inputs the explainer head receives, named after the e-UG ablations.
enum class Ablation { Default, NQ, NA, OU, NU, OA };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

struct ExplainerInputs {
  bool task_features;
  bool answer;
  bool question;
};

ExplainerInputs explainer_inputs(Ablation a);

struct ToyDims {
  int vocab = 32;
  std::size_t embed_dim = 8;
  std::size_t hidden_dim = 8;
  int classes = 3;
  std::size_t vis_dim = 6;
  std::size_t max_explanation_length = 5;

  bool operator==(const ToyDims&) const = default;
};

// Two-headed toy vision-language model.
//
//   u_t = tanh(A e_t + a)           per text token
//   v_r = tanh(B x_r + b)           per visual region
//   h   = tanh(H [mean u; mean v] + c)
//   answer logits = C h + c0
//
// At explanation step s the explainer reads [h; answer_emb[j]; mean e_t;
// mean of prefix embeddings] (ablated parts are zero) and maps it linearly
// to vocabulary logits. Token 0 is PAD.
class ToyVLModel final : public VisionLanguageModel {
 public:
  struct Weights {
    Matrix embedding;         // [vocab x embed]
    Matrix token_w;           // [hidden x embed]
    std::vector<double> token_b;
    Matrix vision_w;          // [hidden x vis]
    std::vector<double> vision_b;
    Matrix encoder_w;         // [hidden x 2 hidden]
    std::vector<double> encoder_b;
    Matrix classifier_w;      // [classes x hidden]
    std::vector<double> classifier_b;
    Matrix answer_embedding;  // [classes x hidden]
    Matrix explainer_w;       // [vocab x (2 hidden + 2 embed)]
    std::vector<double> explainer_b;

    bool operator==(const Weights&) const = default;
  };

  ToyVLModel(ToyDims dims, Ablation ablation, std::uint64_t seed, Weights weights);

  const ToyDims& dims() const { return dims_; }
  Ablation ablation() const { return ablation_; }
  std::uint64_t seed() const { return seed_; }
  const Weights& weights() const { return weights_; }

  const OracleInfo& info() const override { return info_; }
  const Matrix& embedding() const override { return weights_.embedding; }

  std::vector<double> class_logits(const ModelInput& input) const override;
  GradientRecord class_gradient(const ModelInput& input, int class_index) const override;
  std::vector<double> explainer_logits(const ModelInput& input, int answer_class,
                                       std::span<const int> prefix) const override;
  GradientRecord explainer_gradient(const ModelInput& input,
                                    const TokenTarget& target) const override;

  // Next-token distribution given the prefix.
  PredictionDistribution explainer_step(const ModelInput& input, int answer_class,
                                        std::span<const int> prefix) const;
  // Greedy decoding to max_explanation_length tokens.
  std::vector<int> greedy_decode(const ModelInput& input, int answer_class) const;

  nlohmann::json to_json() const override;
  static ToyVLModel from_json(const nlohmann::json& j);

 private:
  struct Leaves {
    std::vector<ad::Var> text;
    std::vector<ad::Var> vision;
  };

  Leaves make_leaves(ad::Tape& tape, const ModelInput& input) const;
  std::vector<ad::Var> encode(ad::Tape& tape, const Leaves& leaves, std::size_t n_tokens,
                              std::size_t n_regions) const;
  std::vector<ad::Var> classifier(ad::Tape& tape, const Leaves& leaves, std::size_t n_tokens,
                                  std::size_t n_regions) const;
  std::vector<ad::Var> explainer(ad::Tape& tape, const Leaves& leaves, std::size_t n_tokens,
                                 std::size_t n_regions, int answer_class,
                                 std::span<const int> prefix) const;
  GradientRecord collect(const ad::Tape& tape, const ad::Var& out, const Leaves& leaves,
                         const ModelInput& input) const;
  void check(const ModelInput& input) const;

  ToyDims dims_;
  Ablation ablation_;
  std::uint64_t seed_;
  Weights weights_;
  OracleInfo info_;
};

// Uniform ±0.5/sqrt(fan_in) initialization, drawn in field order, row-major,
// weights before biases. The embedding table and answer embeddings use fan_in 1.
ToyVLModel make_toy_model(std::uint64_t seed, ToyDims dims = {}, Ablation ablation = Ablation::Default);

// Reads either model kind from a weight file document.
std::shared_ptr<const VisionLanguageModel> model_from_json(const nlohmann::json& j);
std::shared_ptr<const VisionLanguageModel> load_model(const std::string& path);
void save_model(const VisionLanguageModel& model, const std::string& path);

// Oracle over an in-process model. Reentrant.
class InProcessOracle final : public Oracle {
 public:
  explicit InProcessOracle(std::shared_ptr<const VisionLanguageModel> model);

  const OracleInfo& info() const override { return model_->info(); }
  Matrix embed(std::span<const int> token_ids) override;
  PredictionDistribution predict(const ModelInput& input) override;
  GradientRecord gradient(const ModelInput& input, const GradientTarget& target) override;
  std::vector<int> generate(const ModelInput& input, int answer_class) override;
  bool reentrant() const override { return true; }

  const VisionLanguageModel& model() const { return *model_; }

 private:
  std::shared_ptr<const VisionLanguageModel> model_;
};

}  // namespace faitheval::toy
