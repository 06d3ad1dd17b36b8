#include "faitheval/toy_model.hpp"

#include <cmath>
#include <fstream>
#include <optional>

namespace faitheval::toy {

using nlohmann::json;

WeightRng::WeightRng(std::uint64_t seed) : state_(seed) {}

double WeightRng::unit() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

double WeightRng::uniform(double bound) { return (2.0 * unit() - 1.0) * bound; }

namespace {

void fill(WeightRng& rng, std::vector<double>& v, double fan_in) {
  const double bound = 0.5 / std::sqrt(fan_in);
  for (double& x : v) x = rng.uniform(bound);
}

Matrix random_matrix(WeightRng& rng, std::size_t rows, std::size_t cols, double fan_in) {
  Matrix m(rows, cols);
  fill(rng, m.data, fan_in);
  return m;
}

std::vector<double> random_vector(WeightRng& rng, std::size_t n, double fan_in) {
  std::vector<double> v(n);
  fill(rng, v, fan_in);
  return v;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* name) {
  if (!j.is_array() || j.size() != rows) {
    throw InvalidInput(std::string("weight '") + name + "' must have " + std::to_string(rows) +
                       " rows");
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = j[r].get<std::vector<double>>();
    if (row.size() != cols) {
      throw InvalidInput(std::string("weight '") + name + "' row " + std::to_string(r) +
                         " must have " + std::to_string(cols) + " columns");
    }
    std::copy(row.begin(), row.end(), m.row(r).begin());
  }
  return m;
}

std::vector<double> vector_from_json(const json& j, std::size_t n, const char* name) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != n) {
    throw InvalidInput(std::string("weight '") + name + "' must have " + std::to_string(n) +
                       " entries");
  }
  return v;
}

void check_finite(std::span<const double> v, const char* name) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput(std::string("non-finite weight in '") + name + "'");
  }
}

constexpr const char* kFormat = "faitheval-model/1";

}  // namespace

// ---------------------------------------------------------------------------
// TanhMlp

TanhMlp TanhMlp::random(std::uint64_t seed, std::vector<std::size_t> sizes) {
  if (sizes.size() < 2) throw InvalidInput("an MLP needs at least input and output sizes");
  for (auto s : sizes) {
    if (s == 0) throw InvalidInput("MLP layer sizes must be positive");
  }
  WeightRng rng(seed);
  TanhMlp mlp;
  mlp.sizes_ = std::move(sizes);
  for (std::size_t l = 0; l + 1 < mlp.sizes_.size(); ++l) {
    const auto in = mlp.sizes_[l], out = mlp.sizes_[l + 1];
    mlp.weights_.push_back(random_vector(rng, in * out, static_cast<double>(in)));
    mlp.biases_.push_back(random_vector(rng, out, static_cast<double>(in)));
  }
  return mlp;
}

std::vector<ad::Var> TanhMlp::forward(ad::Tape&, std::span<const ad::Var> x) const {
  if (x.size() != inputs()) throw InvalidInput("MLP input size mismatch");
  std::vector<ad::Var> a(x.begin(), x.end());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    a = ad::affine(weights_[l], biases_[l], a);
    if (l + 1 < weights_.size()) a = ad::tanh(a);
  }
  return a;
}

std::vector<double> TanhMlp::forward(std::span<const double> x) const {
  if (x.size() != inputs()) throw InvalidInput("MLP input size mismatch");
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto in = sizes_[l], out = sizes_[l + 1];
    std::vector<double> next(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = biases_[l][o];
      for (std::size_t i = 0; i < in; ++i) acc += weights_[l][o * in + i] * a[i];
      next[o] = l + 1 < weights_.size() ? std::tanh(acc) : acc;
    }
    a = std::move(next);
  }
  return a;
}

double TanhMlp::value(std::span<const double> x, std::size_t output) const {
  if (output >= outputs()) throw InvalidInput("MLP output index out of range");
  return forward(x)[output];
}

std::vector<double> TanhMlp::gradient(std::span<const double> x, std::size_t output) const {
  if (output >= outputs()) throw InvalidInput("MLP output index out of range");
  ad::Tape tape;
  auto leaves = tape.variables(x);
  auto out = forward(tape, leaves);
  return tape.gradient(out[output], leaves);
}

// ---------------------------------------------------------------------------
// VisionLanguageModel

std::vector<double> VisionLanguageModel::explainer_logits(const ModelInput&, int,
                                                          std::span<const int>) const {
  throw OracleError("model has no explainer head");
}

GradientRecord VisionLanguageModel::explainer_gradient(const ModelInput&, const TokenTarget&) const {
  throw OracleError("model has no explainer head");
}

Matrix VisionLanguageModel::embed(std::span<const int> token_ids) const {
  const Matrix& table = embedding();
  Matrix out(token_ids.size(), table.cols);
  for (std::size_t t = 0; t < token_ids.size(); ++t) {
    const int id = token_ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows) {
      throw InvalidInput("token id " + std::to_string(id) + " outside vocabulary");
    }
    auto src = table.row(static_cast<std::size_t>(id));
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// LinearModel

LinearModel::LinearModel(Matrix embedding, std::size_t n_tokens, std::size_t n_regions,
                         std::size_t vis_dim, Matrix weights, std::vector<double> bias)
    : embedding_(std::move(embedding)), weights_(std::move(weights)), bias_(std::move(bias)) {
  const std::size_t features = n_tokens * embedding_.cols + n_regions * vis_dim;
  if (embedding_.rows < 3) throw InvalidInput("linear model vocabulary must exceed 2 tokens");
  if (weights_.rows != features || weights_.cols != bias_.size() || bias_.empty()) {
    throw InvalidInput("linear model weights must be [" + std::to_string(features) +
                       " x classes] with one bias per class");
  }
  check_finite(embedding_.data, "embedding");
  check_finite(weights_.data, "weights");
  check_finite(bias_, "bias");
  info_.classes = static_cast<int>(bias_.size());
  info_.vocab = static_cast<int>(embedding_.rows);
  info_.pad_id = 0;
  info_.text_dim = embedding_.cols;
  info_.vis_dim = vis_dim;
  info_.n_tokens = n_tokens;
  info_.n_regions = n_regions;
}

LinearModel LinearModel::random(std::uint64_t seed, int vocab, std::size_t text_dim,
                                std::size_t n_tokens, std::size_t n_regions, std::size_t vis_dim,
                                int classes) {
  if (vocab < 3 || text_dim == 0 || classes < 1) throw InvalidInput("invalid linear model dims");
  WeightRng rng(seed);
  const std::size_t features = n_tokens * text_dim + n_regions * vis_dim;
  auto embedding = random_matrix(rng, static_cast<std::size_t>(vocab), text_dim, 1.0);
  auto weights = random_matrix(rng, features, static_cast<std::size_t>(classes),
                               static_cast<double>(std::max<std::size_t>(features, 1)));
  auto bias = random_vector(rng, static_cast<std::size_t>(classes),
                            static_cast<double>(std::max<std::size_t>(features, 1)));
  return LinearModel(std::move(embedding), n_tokens, n_regions, vis_dim, std::move(weights),
                     std::move(bias));
}

std::vector<double> LinearModel::class_logits(const ModelInput& input) const {
  check_input_shape(info_, input);
  const auto flat = input.flatten();
  std::vector<double> logits(bias_);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += weights_(i, c) * flat[i];
  }
  return logits;
}

GradientRecord LinearModel::class_gradient(const ModelInput& input, int class_index) const {
  check_input_shape(info_, input);
  if (class_index < 0 || class_index >= info_.classes) {
    throw InvalidInput("class index " + std::to_string(class_index) + " out of range");
  }
  std::vector<double> column(weights_.rows);
  for (std::size_t i = 0; i < weights_.rows; ++i) {
    column[i] = weights_(i, static_cast<std::size_t>(class_index));
  }
  return input.with_values(column);
}

json LinearModel::to_json() const {
  return json{{"format", kFormat},
              {"kind", "linear"},
              {"n_tokens", *info_.n_tokens},
              {"n_regions", *info_.n_regions},
              {"vis_dim", info_.vis_dim},
              {"embedding", matrix_json(embedding_)},
              {"weights", matrix_json(weights_)},
              {"bias", bias_}};
}

LinearModel LinearModel::from_json(const json& j) {
  const auto n_tokens = j.at("n_tokens").get<std::size_t>();
  const auto n_regions = j.at("n_regions").get<std::size_t>();
  const auto vis_dim = j.at("vis_dim").get<std::size_t>();
  const auto& emb = j.at("embedding");
  if (!emb.is_array() || emb.empty()) throw InvalidInput("linear model embedding is empty");
  const auto text_dim = emb[0].size();
  auto embedding = matrix_from_json(emb, emb.size(), text_dim, "embedding");
  auto bias = j.at("bias").get<std::vector<double>>();
  const std::size_t features = n_tokens * text_dim + n_regions * vis_dim;
  auto weights = matrix_from_json(j.at("weights"), features, bias.size(), "weights");
  return LinearModel(std::move(embedding), n_tokens, n_regions, vis_dim, std::move(weights),
                     std::move(bias));
}

// ---------------------------------------------------------------------------
// ToyVLModel

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Default: return "default";
    case Ablation::NQ: return "NQ";
    case Ablation::NA: return "NA";
    case Ablation::OU: return "OU";
    case Ablation::NU: return "NU";
    case Ablation::OA: return "OA";
  }
  return "default";
}

Ablation ablation_from_string(const std::string& s) {
  for (auto a : {Ablation::Default, Ablation::NQ, Ablation::NA, Ablation::OU, Ablation::NU,
                 Ablation::OA}) {
    if (s == to_string(a)) return a;
  }
  throw InvalidInput("unknown ablation '" + s + "' (expected default, NQ, NA, OU, NU or OA)");
}

ExplainerInputs explainer_inputs(Ablation a) {
  switch (a) {
    case Ablation::Default: return {true, true, true};
    case Ablation::NQ: return {true, true, false};
    case Ablation::NA: return {true, false, true};
    case Ablation::OU: return {true, false, false};
    case Ablation::NU: return {false, true, true};
    case Ablation::OA: return {false, true, false};
  }
  return {true, true, true};
}

ToyVLModel::ToyVLModel(ToyDims dims, Ablation ablation, std::uint64_t seed, Weights weights)
    : dims_(dims), ablation_(ablation), seed_(seed), weights_(std::move(weights)) {
  if (dims_.vocab < 3 || dims_.embed_dim == 0 || dims_.hidden_dim == 0 || dims_.classes < 1 ||
      dims_.vis_dim == 0) {
    throw InvalidInput("toy model dims must be positive (vocab >= 3)");
  }
  const auto V = static_cast<std::size_t>(dims_.vocab), E = dims_.embed_dim,
             H = dims_.hidden_dim, C = static_cast<std::size_t>(dims_.classes),
             D = dims_.vis_dim;
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows != r || m.cols != c || m.data.size() != r * c) {
      throw InvalidInput(std::string("toy weight '") + name + "' has the wrong shape");
    }
    check_finite(m.data, name);
  };
  auto expect_vec = [](const std::vector<double>& v, std::size_t n, const char* name) {
    if (v.size() != n) throw InvalidInput(std::string("toy weight '") + name + "' has the wrong size");
    check_finite(v, name);
  };
  const auto& w = weights_;
  expect(w.embedding, V, E, "embedding");
  expect(w.token_w, H, E, "token_w");
  expect_vec(w.token_b, H, "token_b");
  expect(w.vision_w, H, D, "vision_w");
  expect_vec(w.vision_b, H, "vision_b");
  expect(w.encoder_w, H, 2 * H, "encoder_w");
  expect_vec(w.encoder_b, H, "encoder_b");
  expect(w.classifier_w, C, H, "classifier_w");
  expect_vec(w.classifier_b, C, "classifier_b");
  expect(w.answer_embedding, C, H, "answer_embedding");
  expect(w.explainer_w, V, 2 * H + 2 * E, "explainer_w");
  expect_vec(w.explainer_b, V, "explainer_b");

  info_.classes = dims_.classes;
  info_.vocab = dims_.vocab;
  info_.pad_id = 0;
  info_.text_dim = E;
  info_.vis_dim = D;
  info_.explainer = true;
  info_.explainer_uses_vision = explainer_inputs(ablation_).task_features;
  info_.max_explanation_length = dims_.max_explanation_length;
}

ToyVLModel make_toy_model(std::uint64_t seed, ToyDims dims, Ablation ablation) {
  if (dims.vocab < 3 || dims.embed_dim == 0 || dims.hidden_dim == 0 || dims.classes < 1 ||
      dims.vis_dim == 0) {
    throw InvalidInput("toy model dims must be positive (vocab >= 3)");
  }
  WeightRng rng(seed);
  const auto V = static_cast<std::size_t>(dims.vocab), E = dims.embed_dim, H = dims.hidden_dim,
             C = static_cast<std::size_t>(dims.classes), D = dims.vis_dim;
  const auto fe = static_cast<double>(E), fh = static_cast<double>(H),
             fd = static_cast<double>(D);
  ToyVLModel::Weights w;
  w.embedding = random_matrix(rng, V, E, 1.0);
  w.token_w = random_matrix(rng, H, E, fe);
  w.token_b = random_vector(rng, H, fe);
  w.vision_w = random_matrix(rng, H, D, fd);
  w.vision_b = random_vector(rng, H, fd);
  w.encoder_w = random_matrix(rng, H, 2 * H, 2 * fh);
  w.encoder_b = random_vector(rng, H, 2 * fh);
  w.classifier_w = random_matrix(rng, C, H, fh);
  w.classifier_b = random_vector(rng, C, fh);
  w.answer_embedding = random_matrix(rng, C, H, 1.0);
  w.explainer_w = random_matrix(rng, V, 2 * H + 2 * E, 2 * fh + 2 * fe);
  w.explainer_b = random_vector(rng, V, 2 * fh + 2 * fe);
  return ToyVLModel(dims, ablation, seed, std::move(w));
}

void ToyVLModel::check(const ModelInput& input) const {
  check_input_shape(info_, input);
  if (input.text.data.size() != input.text.rows * input.text.cols ||
      input.vision.data.size() != input.vision.rows * input.vision.cols) {
    throw InvalidInput("ragged model input");
  }
}

ToyVLModel::Leaves ToyVLModel::make_leaves(ad::Tape& tape, const ModelInput& input) const {
  return Leaves{tape.variables(input.text.data), tape.variables(input.vision.data)};
}

namespace {

// Mean over rows of per-row features; zeros when there are no rows.
std::vector<ad::Var> mean_rows(ad::Tape& tape, const std::vector<std::vector<ad::Var>>& rows,
                               std::size_t width) {
  std::vector<ad::Var> out;
  out.reserve(width);
  if (rows.empty()) {
    for (std::size_t k = 0; k < width; ++k) out.push_back(tape.variable(0.0));
    return out;
  }
  std::vector<ad::Var> column(rows.size());
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t k = 0; k < width; ++k) {
    for (std::size_t r = 0; r < rows.size(); ++r) column[r] = rows[r][k];
    out.push_back(ad::sum(column) * inv);
  }
  return out;
}

std::vector<std::vector<ad::Var>> split_rows(const std::vector<ad::Var>& flat, std::size_t n,
                                             std::size_t width) {
  std::vector<std::vector<ad::Var>> rows(n);
  for (std::size_t r = 0; r < n; ++r) {
    rows[r].assign(flat.begin() + static_cast<std::ptrdiff_t>(r * width),
                   flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
  }
  return rows;
}

}  // namespace

std::vector<ad::Var> ToyVLModel::encode(ad::Tape& tape, const Leaves& leaves, std::size_t n_tokens,
                                        std::size_t n_regions) const {
  const auto E = dims_.embed_dim, H = dims_.hidden_dim, D = dims_.vis_dim;
  std::vector<std::vector<ad::Var>> token_units;
  for (const auto& e : split_rows(leaves.text, n_tokens, E)) {
    token_units.push_back(ad::tanh(ad::affine(weights_.token_w.data, weights_.token_b, e)));
  }
  std::vector<std::vector<ad::Var>> region_units;
  for (const auto& x : split_rows(leaves.vision, n_regions, D)) {
    region_units.push_back(ad::tanh(ad::affine(weights_.vision_w.data, weights_.vision_b, x)));
  }
  auto pooled = mean_rows(tape, token_units, H);
  auto pooled_vision = mean_rows(tape, region_units, H);
  pooled.insert(pooled.end(), pooled_vision.begin(), pooled_vision.end());
  return ad::tanh(ad::affine(weights_.encoder_w.data, weights_.encoder_b, pooled));
}

std::vector<ad::Var> ToyVLModel::classifier(ad::Tape& tape, const Leaves& leaves,
                                            std::size_t n_tokens, std::size_t n_regions) const {
  const auto h = encode(tape, leaves, n_tokens, n_regions);
  return ad::affine(weights_.classifier_w.data, weights_.classifier_b, h);
}

std::vector<ad::Var> ToyVLModel::explainer(ad::Tape& tape, const Leaves& leaves,
                                           std::size_t n_tokens, std::size_t n_regions,
                                           int answer_class, std::span<const int> prefix) const {
  if (answer_class < 0 || answer_class >= dims_.classes) {
    throw InvalidInput("answer class " + std::to_string(answer_class) + " out of range");
  }
  if (prefix.size() >= dims_.max_explanation_length) {
    throw InvalidInput("explanation prefix of " + std::to_string(prefix.size()) +
                       " tokens reaches the configured maximum of " +
                       std::to_string(dims_.max_explanation_length));
  }
  const auto E = dims_.embed_dim, H = dims_.hidden_dim;
  const auto inputs = explainer_inputs(ablation_);
  std::vector<ad::Var> z;
  z.reserve(2 * H + 2 * E);
  auto zeros = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) z.push_back(tape.variable(0.0));
  };
  if (inputs.task_features) {
    const auto h = encode(tape, leaves, n_tokens, n_regions);
    z.insert(z.end(), h.begin(), h.end());
  } else {
    zeros(H);
  }
  if (inputs.answer) {
    for (double v : weights_.answer_embedding.row(static_cast<std::size_t>(answer_class))) {
      z.push_back(tape.variable(v));
    }
  } else {
    zeros(H);
  }
  if (inputs.question) {
    const auto q = mean_rows(tape, split_rows(leaves.text, n_tokens, E), E);
    z.insert(z.end(), q.begin(), q.end());
  } else {
    zeros(E);
  }
  std::vector<double> prefix_state(E, 0.0);
  for (int t : prefix) {
    if (t < 0 || t >= dims_.vocab) throw InvalidInput("prefix token outside vocabulary");
    auto row = weights_.embedding.row(static_cast<std::size_t>(t));
    for (std::size_t k = 0; k < E; ++k) prefix_state[k] += row[k];
  }
  for (std::size_t k = 0; k < E; ++k) {
    const double mean = prefix.empty() ? 0.0 : prefix_state[k] / static_cast<double>(prefix.size());
    z.push_back(tape.variable(mean));
  }
  return ad::affine(weights_.explainer_w.data, weights_.explainer_b, z);
}

GradientRecord ToyVLModel::collect(const ad::Tape& tape, const ad::Var& out, const Leaves& leaves,
                                   const ModelInput& input) const {
  const auto adj = tape.adjoints(out);
  GradientRecord g{Matrix(input.text.rows, input.text.cols),
                   Matrix(input.vision.rows, input.vision.cols)};
  for (std::size_t i = 0; i < leaves.text.size(); ++i) g.text.data[i] = adj[leaves.text[i].index()];
  for (std::size_t i = 0; i < leaves.vision.size(); ++i) {
    g.vision.data[i] = adj[leaves.vision[i].index()];
  }
  return g;
}

std::vector<double> ToyVLModel::class_logits(const ModelInput& input) const {
  check(input);
  ad::Tape tape;
  const auto leaves = make_leaves(tape, input);
  const auto out = classifier(tape, leaves, input.text.rows, input.vision.rows);
  std::vector<double> logits;
  for (const auto& v : out) logits.push_back(v.value());
  return logits;
}

GradientRecord ToyVLModel::class_gradient(const ModelInput& input, int class_index) const {
  check(input);
  if (class_index < 0 || class_index >= dims_.classes) {
    throw InvalidInput("class index " + std::to_string(class_index) + " out of range");
  }
  ad::Tape tape;
  const auto leaves = make_leaves(tape, input);
  const auto out = classifier(tape, leaves, input.text.rows, input.vision.rows);
  return collect(tape, out[static_cast<std::size_t>(class_index)], leaves, input);
}

std::vector<double> ToyVLModel::explainer_logits(const ModelInput& input, int answer_class,
                                                 std::span<const int> prefix) const {
  check(input);
  ad::Tape tape;
  const auto leaves = make_leaves(tape, input);
  const auto out =
      explainer(tape, leaves, input.text.rows, input.vision.rows, answer_class, prefix);
  std::vector<double> logits;
  for (const auto& v : out) logits.push_back(v.value());
  return logits;
}

GradientRecord ToyVLModel::explainer_gradient(const ModelInput& input,
                                              const TokenTarget& target) const {
  check(input);
  if (target.step != target.prefix.size()) {
    throw InvalidInput("explainer step " + std::to_string(target.step) + " does not match prefix of " +
                       std::to_string(target.prefix.size()) + " tokens");
  }
  if (target.token < 0 || target.token >= dims_.vocab) {
    throw InvalidInput("target token " + std::to_string(target.token) + " outside vocabulary");
  }
  ad::Tape tape;
  const auto leaves = make_leaves(tape, input);
  const auto out = explainer(tape, leaves, input.text.rows, input.vision.rows, target.answer_class,
                             target.prefix);
  return collect(tape, out[static_cast<std::size_t>(target.token)], leaves, input);
}

PredictionDistribution ToyVLModel::explainer_step(const ModelInput& input, int answer_class,
                                                  std::span<const int> prefix) const {
  return softmax_normalize(explainer_logits(input, answer_class, prefix));
}

std::vector<int> ToyVLModel::greedy_decode(const ModelInput& input, int answer_class) const {
  std::vector<int> tokens;
  while (tokens.size() < dims_.max_explanation_length) {
    const auto logits = explainer_logits(input, answer_class, tokens);
    // PAD (0) and EOS (1) are never emitted; ties go to the lower id.
    int best = 2;
    for (int t = 3; t < dims_.vocab; ++t) {
      if (logits[static_cast<std::size_t>(t)] > logits[static_cast<std::size_t>(best)]) best = t;
    }
    tokens.push_back(best);
  }
  return tokens;
}

json ToyVLModel::to_json() const {
  const auto& w = weights_;
  return json{{"format", kFormat},
              {"kind", "toy_vl"},
              {"seed", seed_},
              {"ablation", to_string(ablation_)},
              {"dims",
               {{"vocab", dims_.vocab},
                {"embed_dim", dims_.embed_dim},
                {"hidden_dim", dims_.hidden_dim},
                {"classes", dims_.classes},
                {"vis_dim", dims_.vis_dim},
                {"max_explanation_length", dims_.max_explanation_length}}},
              {"weights",
               {{"embedding", matrix_json(w.embedding)},
                {"token_w", matrix_json(w.token_w)},
                {"token_b", w.token_b},
                {"vision_w", matrix_json(w.vision_w)},
                {"vision_b", w.vision_b},
                {"encoder_w", matrix_json(w.encoder_w)},
                {"encoder_b", w.encoder_b},
                {"classifier_w", matrix_json(w.classifier_w)},
                {"classifier_b", w.classifier_b},
                {"answer_embedding", matrix_json(w.answer_embedding)},
                {"explainer_w", matrix_json(w.explainer_w)},
                {"explainer_b", w.explainer_b}}}};
}

ToyVLModel ToyVLModel::from_json(const json& j) {
  ToyDims dims;
  const auto& d = j.at("dims");
  dims.vocab = d.at("vocab").get<int>();
  dims.embed_dim = d.at("embed_dim").get<std::size_t>();
  dims.hidden_dim = d.at("hidden_dim").get<std::size_t>();
  dims.classes = d.at("classes").get<int>();
  dims.vis_dim = d.at("vis_dim").get<std::size_t>();
  dims.max_explanation_length = d.at("max_explanation_length").get<std::size_t>();
  if (dims.vocab < 3 || dims.classes < 1) throw InvalidInput("invalid toy model dims");
  const auto V = static_cast<std::size_t>(dims.vocab), E = dims.embed_dim, H = dims.hidden_dim,
             C = static_cast<std::size_t>(dims.classes), D = dims.vis_dim;
  const auto& w = j.at("weights");
  Weights weights;
  weights.embedding = matrix_from_json(w.at("embedding"), V, E, "embedding");
  weights.token_w = matrix_from_json(w.at("token_w"), H, E, "token_w");
  weights.token_b = vector_from_json(w.at("token_b"), H, "token_b");
  weights.vision_w = matrix_from_json(w.at("vision_w"), H, D, "vision_w");
  weights.vision_b = vector_from_json(w.at("vision_b"), H, "vision_b");
  weights.encoder_w = matrix_from_json(w.at("encoder_w"), H, 2 * H, "encoder_w");
  weights.encoder_b = vector_from_json(w.at("encoder_b"), H, "encoder_b");
  weights.classifier_w = matrix_from_json(w.at("classifier_w"), C, H, "classifier_w");
  weights.classifier_b = vector_from_json(w.at("classifier_b"), C, "classifier_b");
  weights.answer_embedding = matrix_from_json(w.at("answer_embedding"), C, H, "answer_embedding");
  weights.explainer_w = matrix_from_json(w.at("explainer_w"), V, 2 * H + 2 * E, "explainer_w");
  weights.explainer_b = vector_from_json(w.at("explainer_b"), V, "explainer_b");
  return ToyVLModel(dims, ablation_from_string(j.at("ablation").get<std::string>()),
                    j.value("seed", std::uint64_t{0}), std::move(weights));
}

std::shared_ptr<const VisionLanguageModel> model_from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != kFormat) {
      throw InvalidInput(std::string("weight file format must be '") + kFormat + "'");
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "toy_vl") return std::make_shared<ToyVLModel>(ToyVLModel::from_json(j));
    if (kind == "linear") return std::make_shared<LinearModel>(LinearModel::from_json(j));
    throw InvalidInput("unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed weight file: ") + e.what());
  }
}

std::shared_ptr<const VisionLanguageModel> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weight file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput("weight file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

void save_model(const VisionLanguageModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write weight file '" + path + "'");
  out << model.to_json().dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// InProcessOracle

InProcessOracle::InProcessOracle(std::shared_ptr<const VisionLanguageModel> model)
    : model_(std::move(model)) {
  if (!model_) throw InvalidInput("null model");
}

Matrix InProcessOracle::embed(std::span<const int> token_ids) { return model_->embed(token_ids); }

PredictionDistribution InProcessOracle::predict(const ModelInput& input) {
  return softmax_normalize(model_->class_logits(input));
}

GradientRecord InProcessOracle::gradient(const ModelInput& input, const GradientTarget& target) {
  if (const auto* c = std::get_if<ClassTarget>(&target)) {
    return model_->class_gradient(input, c->class_index);
  }
  return model_->explainer_gradient(input, std::get<TokenTarget>(target));
}

std::vector<int> InProcessOracle::generate(const ModelInput& input, int answer_class) {
  if (const auto* toy = dynamic_cast<const ToyVLModel*>(model_.get())) {
    return toy->greedy_decode(input, answer_class);
  }
  return Oracle::generate(input, answer_class);
}

}  // namespace faitheval::toy
