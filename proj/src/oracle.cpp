#include "faitheval/oracle.hpp"

#include <algorithm>

namespace faitheval {

std::vector<double> ModelInput::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  flat.insert(flat.end(), text.data.begin(), text.data.end());
  flat.insert(flat.end(), vision.data.begin(), vision.data.end());
  return flat;
}

ModelInput ModelInput::with_values(std::span<const double> flat) const {
  if (flat.size() != size()) {
    throw InvalidInput("flat input has " + std::to_string(flat.size()) + " values, expected " +
                       std::to_string(size()));
  }
  ModelInput out{Matrix(text.rows, text.cols), Matrix(vision.rows, vision.cols)};
  std::copy_n(flat.begin(), text.data.size(), out.text.data.begin());
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(text.data.size()), flat.end(),
            out.vision.data.begin());
  return out;
}

std::vector<int> Oracle::generate(const ModelInput&, int) {
  throw OracleError("this oracle cannot generate explanations; supply explanation_tokens");
}

void check_input_shape(const OracleInfo& info, const ModelInput& input) {
  if (input.text.rows > 0 && input.text.cols != info.text_dim) {
    throw InvalidInput("text embedding width " + std::to_string(input.text.cols) +
                       " does not match model width " + std::to_string(info.text_dim));
  }
  if (input.vision.rows > 0 && input.vision.cols != info.vis_dim) {
    throw InvalidInput("visual feature width " + std::to_string(input.vision.cols) +
                       " does not match model width " + std::to_string(info.vis_dim));
  }
  if (info.n_tokens && input.text.rows != *info.n_tokens) {
    throw InvalidInput("model expects " + std::to_string(*info.n_tokens) + " tokens, got " +
                       std::to_string(input.text.rows));
  }
  if (info.n_regions && input.vision.rows != *info.n_regions) {
    throw InvalidInput("model expects " + std::to_string(*info.n_regions) + " regions, got " +
                       std::to_string(input.vision.rows));
  }
}

ModelInput embed_example(Oracle& oracle, const TaskExample& example) {
  std::vector<int> ids;
  ids.reserve(example.tokens.size());
  for (const auto& t : example.tokens) {
    if (t.id < 0 || t.id >= oracle.info().vocab) {
      throw InvalidInput("token '" + t.text + "' of example '" + example.id +
                         "' has id outside the vocabulary");
    }
    ids.push_back(t.id);
  }
  ModelInput input;
  input.text = oracle.embed(ids);
  input.vision = example.visual_features;
  if (input.vision.rows == 0) input.vision.cols = oracle.info().vis_dim;
  check_input_shape(oracle.info(), input);
  return input;
}

int hashed_token_id(std::string_view text, int vocab) {
  if (vocab <= 2) throw InvalidInput("vocabulary too small for hashed token ids");
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return static_cast<int>(h % static_cast<std::uint64_t>(vocab - 2)) + 2;
}

void resolve_token_ids(TaskExample& example, int vocab) {
  for (auto& t : example.tokens) {
    if (t.id < 0) t.id = hashed_token_id(t.text, vocab);
    if (t.id >= vocab) {
      throw InvalidInput("token '" + t.text + "' of example '" + example.id + "' has id " +
                         std::to_string(t.id) + " outside vocabulary of " + std::to_string(vocab));
    }
  }
  for (int t : example.explanation_tokens) {
    if (t < 0 || t >= vocab) {
      throw InvalidInput("explanation token " + std::to_string(t) + " of example '" + example.id +
                         "' outside vocabulary");
    }
  }
}

}  // namespace faitheval
