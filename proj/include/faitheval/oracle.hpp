#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "faitheval/core.hpp"

namespace faitheval {

// Fully materialized model input: one embedding row per text token and one
// feature row per visual region.
struct ModelInput {
  Matrix text;
  Matrix vision;

  std::size_t size() const { return text.data.size() + vision.data.size(); }
  std::vector<double> flatten() const;
  // Inverse of flatten() using this input's shapes.
  ModelInput with_values(std::span<const double> flat) const;

  bool operator==(const ModelInput&) const = default;
};

// Partial derivatives of one scalar output, shaped like the ModelInput.
using GradientRecord = ModelInput;

// The class logit of the answer head.
struct ClassTarget {
  int class_index = 0;
};

// The logit of `token` at generation step `step` of the explainer head, with
// the previously generated tokens held fixed.
struct TokenTarget {
  std::size_t step = 0;
  int token = 0;
  int answer_class = 0;
  std::vector<int> prefix;
};

using GradientTarget = std::variant<ClassTarget, TokenTarget>;

struct OracleInfo {
  int classes = 0;
  int vocab = 0;
  int pad_id = 0;
  std::size_t text_dim = 0;
  std::size_t vis_dim = 0;
  std::optional<std::size_t> n_regions;  // unset: any region count
  std::optional<std::size_t> n_tokens;   // unset: any token count
  bool explainer = false;
  bool explainer_uses_vision = false;
  std::size_t max_explanation_length = 0;

  bool operator==(const OracleInfo&) const = default;
};

// A prediction/gradient provider: an in-process model or an external
// process speaking the line protocol. Inputs are always fully materialized;
// perturbation and interpolation happen on the caller's side.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual const OracleInfo& info() const = 0;
  virtual Matrix embed(std::span<const int> token_ids) = 0;
  virtual PredictionDistribution predict(const ModelInput& input) = 0;
  virtual GradientRecord gradient(const ModelInput& input, const GradientTarget& target) = 0;

  // Greedy explanation decoding. Only in-process models can generate.
  virtual std::vector<int> generate(const ModelInput& input, int answer_class);

  // True when concurrent calls on this object are safe.
  virtual bool reentrant() const { return false; }
};

// Checks the input shape against the declared dimensions.
void check_input_shape(const OracleInfo& info, const ModelInput& input);

ModelInput embed_example(Oracle& oracle, const TaskExample& example);

// Vocabulary id for a token read without an explicit id: FNV-1a of the text
// folded into [2, vocab). Ids 0 and 1 are reserved for PAD and EOS.
int hashed_token_id(std::string_view text, int vocab);

// Fills missing token ids and rejects ids outside the vocabulary.
void resolve_token_ids(TaskExample& example, int vocab);

}  // namespace faitheval
