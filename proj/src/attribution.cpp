#include "faitheval/attribution.hpp"

#include <algorithm>

#include "faitheval/alignment.hpp"
#include "faitheval/integrated_gradients.hpp"

namespace faitheval {

std::string to_string(BaselinePolicy p) {
  switch (p) {
    case BaselinePolicy::ZeroVisionPadText: return "zero_vision_pad_text";
    case BaselinePolicy::AllZero: return "all_zero";
    case BaselinePolicy::Custom: return "custom";
  }
  return "zero_vision_pad_text";
}

BaselinePolicy baseline_from_string(const std::string& s) {
  if (s == "zero_vision_pad_text") return BaselinePolicy::ZeroVisionPadText;
  if (s == "all_zero") return BaselinePolicy::AllZero;
  if (s == "custom") return BaselinePolicy::Custom;
  throw InvalidInput("unknown baseline policy '" + s + "'");
}

std::string to_string(VisionGranularity g) {
  return g == VisionGranularity::PerRegion ? "region" : "feature";
}

VisionGranularity granularity_from_string(const std::string& s) {
  if (s == "region") return VisionGranularity::PerRegion;
  if (s == "feature") return VisionGranularity::PerFeature;
  throw InvalidInput("unknown vision granularity '" + s + "' (expected region or feature)");
}

TaskExample baseline_example(const TaskExample& example, int pad_id) {
  TaskExample out = example;
  for (auto& t : out.tokens) {
    t.id = pad_id;
    t.text = "[PAD]";
  }
  std::fill(out.visual_features.data.begin(), out.visual_features.data.end(), 0.0);
  return out;
}

ModelInput default_baseline(Oracle& oracle, const TaskExample& example) {
  return embed_example(oracle, baseline_example(example, oracle.info().pad_id));
}

ModelInput make_baseline(Oracle& oracle, const TaskExample& example, const IGConfig& config) {
  switch (config.baseline) {
    case BaselinePolicy::ZeroVisionPadText: return default_baseline(oracle, example);
    case BaselinePolicy::AllZero: {
      auto input = embed_example(oracle, example);
      std::fill(input.text.data.begin(), input.text.data.end(), 0.0);
      std::fill(input.vision.data.begin(), input.vision.data.end(), 0.0);
      return input;
    }
    case BaselinePolicy::Custom: {
      if (!config.custom_baseline) throw InvalidInput("custom baseline policy without a baseline");
      const auto shape = embed_example(oracle, example);
      const auto& b = *config.custom_baseline;
      if (b.text.rows != shape.text.rows || b.text.cols != shape.text.cols ||
          b.vision.rows != shape.vision.rows || b.vision.cols != shape.vision.cols) {
        throw InvalidInput("custom baseline shape does not match example '" + example.id + "'");
      }
      return b;
    }
  }
  throw InvalidInput("unknown baseline policy");
}

int predicted_class(Oracle& oracle, const TaskExample& example) {
  return static_cast<int>(oracle.predict(embed_example(oracle, example)).argmax());
}

std::vector<double> integrated_gradients(Oracle& oracle, const ModelInput& input,
                                         const ModelInput& baseline, const GradientTarget& target,
                                         const IGConfig& config) {
  if (input.text.rows != baseline.text.rows || input.text.cols != baseline.text.cols ||
      input.vision.rows != baseline.vision.rows || input.vision.cols != baseline.vision.cols) {
    throw InvalidInput("input and baseline shapes differ");
  }
  GradientFn fn = [&](std::span<const double> point) {
    return oracle.gradient(input.with_values(point), target).flatten();
  };
  const auto x = input.flatten();
  const auto x0 = baseline.flatten();
  return integrated_gradients(fn, x, x0, config.steps, config.parallel && oracle.reentrant());
}

ModalAttribution reduce_attribution(const TaskExample& example, const ModelInput& shape,
                                    const std::vector<double>& flat, VisionGranularity vision,
                                    bool include_vision) {
  if (flat.size() != shape.size()) throw InvalidInput("attribution does not match input shape");
  const auto& text = shape.text;
  std::vector<double> token_scores(text.rows, 0.0);
  for (std::size_t t = 0; t < text.rows; ++t) {
    for (std::size_t k = 0; k < text.cols; ++k) token_scores[t] += flat[t * text.cols + k];
  }
  ModalAttribution out;
  out.language = aggregate_to_words(
      AttributionVector::dense(Modality::Language, std::move(token_scores)), WordMap::of(example));

  const auto& vis = shape.vision;
  if (include_vision && vis.rows > 0) {
    const std::size_t offset = text.data.size();
    std::vector<double> values;
    if (vision == VisionGranularity::PerRegion) {
      values.assign(vis.rows, 0.0);
      for (std::size_t r = 0; r < vis.rows; ++r) {
        for (std::size_t c = 0; c < vis.cols; ++c) values[r] += flat[offset + r * vis.cols + c];
      }
    } else {
      values.assign(flat.begin() + static_cast<std::ptrdiff_t>(offset), flat.end());
    }
    out.vision = AttributionVector::dense(Modality::Vision, std::move(values));
  }
  return out;
}

ModalAttribution attribute_answer(Oracle& oracle, const TaskExample& example,
                                  const IGConfig& config) {
  return attribute_answer(oracle, example, predicted_class(oracle, example), config);
}

ModalAttribution attribute_answer(Oracle& oracle, const TaskExample& example, int answer_class,
                                  const IGConfig& config) {
  const auto input = embed_example(oracle, example);
  const auto baseline = make_baseline(oracle, example, config);
  const auto flat =
      integrated_gradients(oracle, input, baseline, ClassTarget{answer_class}, config);
  auto out = reduce_attribution(example, input, flat, config.vision, true);
  out.target_class = answer_class;
  return out;
}

std::vector<std::vector<double>> explanation_step_attributions(
    Oracle& oracle, const TaskExample& example, const std::vector<int>& generated_tokens,
    int answer_class, const IGConfig& config) {
  if (generated_tokens.empty()) {
    throw EmptyExplanation("example '" + example.id + "' has no generated explanation tokens");
  }
  const auto input = embed_example(oracle, example);
  const auto baseline = make_baseline(oracle, example, config);
  std::vector<std::vector<double>> steps;
  for (std::size_t s = 0; s < generated_tokens.size(); ++s) {
    TokenTarget target;
    target.step = s;
    target.token = generated_tokens[s];
    target.answer_class = answer_class;
    target.prefix.assign(generated_tokens.begin(),
                         generated_tokens.begin() + static_cast<std::ptrdiff_t>(s));
    steps.push_back(integrated_gradients(oracle, input, baseline, target, config));
  }
  return steps;
}

ModalAttribution attribute_explanation(Oracle& oracle, const TaskExample& example,
                                       const std::vector<int>& generated_tokens, int answer_class,
                                       const IGConfig& config) {
  const auto steps =
      explanation_step_attributions(oracle, example, generated_tokens, answer_class, config);
  std::vector<double> total(steps.front().size(), 0.0);
  for (const auto& step : steps) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += step[i];
  }
  const auto input = embed_example(oracle, example);
  auto out = reduce_attribution(example, input, total, config.vision,
                                oracle.info().explainer_uses_vision);
  out.target_class = answer_class;
  return out;
}

}  // namespace faitheval
