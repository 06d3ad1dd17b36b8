#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "faitheval/core.hpp"
#include "faitheval/oracle.hpp"

namespace faitheval {

enum class BaselinePolicy { ZeroVisionPadText, AllZero, Custom };

enum class VisionGranularity { PerRegion, PerFeature };

std::string to_string(BaselinePolicy p);
BaselinePolicy baseline_from_string(const std::string& s);
std::string to_string(VisionGranularity g);
VisionGranularity granularity_from_string(const std::string& s);

struct IGConfig {
  std::size_t steps = 50;
  BaselinePolicy baseline = BaselinePolicy::ZeroVisionPadText;
  std::optional<ModelInput> custom_baseline;  // required for BaselinePolicy::Custom
  VisionGranularity vision = VisionGranularity::PerRegion;
  // Evaluate interpolation points concurrently; honoured only for reentrant
  // oracles.
  bool parallel = true;
};

// Language relevance is word-level; vision is absent when the example has no
// regions or the explained head does not read visual input.
struct ModalAttribution {
  AttributionVector language;
  std::optional<AttributionVector> vision;
  int target_class = 0;
};

// Same example with every token replaced by PAD and every visual feature
// zeroed.
TaskExample baseline_example(const TaskExample& example, int pad_id);

// PAD embeddings at every token position and a zero visual matrix.
ModelInput default_baseline(Oracle& oracle, const TaskExample& example);

ModelInput make_baseline(Oracle& oracle, const TaskExample& example, const IGConfig& config);

// Argmax class of the oracle on the unperturbed example.
int predicted_class(Oracle& oracle, const TaskExample& example);

// Raw IG over the flattened ModelInput for one gradient target.
std::vector<double> integrated_gradients(Oracle& oracle, const ModelInput& input,
                                         const ModelInput& baseline, const GradientTarget& target,
                                         const IGConfig& config);

// Reduces a flat IG vector to word-level language relevance (summing over the
// embedding dimension and then over each word's tokens) and to per-region or
// per-feature vision relevance.
ModalAttribution reduce_attribution(const TaskExample& example, const ModelInput& shape,
                                    const std::vector<double>& flat, VisionGranularity vision,
                                    bool include_vision);

// IG of the predicted class logit.
ModalAttribution attribute_answer(Oracle& oracle, const TaskExample& example,
                                  const IGConfig& config);
ModalAttribution attribute_answer(Oracle& oracle, const TaskExample& example, int answer_class,
                                  const IGConfig& config);

// Flat IG of each generated token's logit at its own step, with earlier
// generated tokens held fixed.
std::vector<std::vector<double>> explanation_step_attributions(
    Oracle& oracle, const TaskExample& example, const std::vector<int>& generated_tokens,
    int answer_class, const IGConfig& config);

// Sum over generation steps of the per-step IG, reduced to modalities.
ModalAttribution attribute_explanation(Oracle& oracle, const TaskExample& example,
                                       const std::vector<int>& generated_tokens, int answer_class,
                                       const IGConfig& config);

}  // namespace faitheval
