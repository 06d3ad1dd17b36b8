#include "faitheval/faithfulness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "faitheval/alignment.hpp"

namespace faitheval {

std::string to_string(RankingMode m) {
  return m == RankingMode::SignedDescending ? "signed" : "abs";
}

RankingMode ranking_from_string(const std::string& s) {
  if (s == "signed") return RankingMode::SignedDescending;
  if (s == "abs") return RankingMode::AbsoluteDescending;
  throw InvalidInput("unknown ranking mode '" + s + "' (expected signed or abs)");
}

double normalized_similarity(double cos) { return 0.5 * (1.0 + cos); }

SFScore attribution_similarity(const AttributionPair& nlp,
                               const std::optional<AttributionPair>& img) {
  if (nlp.answer().modality() != Modality::Language) {
    throw InvalidInput("language pair carries vision attributions");
  }
  SFScore s;
  s.zero_norm_nlp = has_zero_norm(nlp.answer().values()) || has_zero_norm(nlp.explanation().values());
  s.cos_nlp = cosine(nlp.answer().values(), nlp.explanation().values());
  s.sf_nlp = normalized_similarity(s.cos_nlp);
  if (img) {
    if (img->answer().modality() != Modality::Vision) {
      throw InvalidInput("vision pair carries language attributions");
    }
    s.zero_norm_img =
        has_zero_norm(img->answer().values()) || has_zero_norm(img->explanation().values());
    s.cos_img = cosine(img->answer().values(), img->explanation().values());
    s.sf_img = normalized_similarity(*s.cos_img);
  }
  s.overall = overall_score(s.sf_nlp, s.sf_img);
  return s;
}

std::vector<double> default_bins() { return {0.01, 0.05, 0.10, 0.20, 0.50}; }

std::size_t top_k_count(double fraction, std::size_t n) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidInput("bin fraction " + std::to_string(fraction) + " outside (0, 1]");
  }
  // The slack keeps products such as 0.07 * 100 = 7.000000000000001 from
  // rounding up to the next integer.
  const double scaled = fraction * static_cast<double>(n);
  auto count = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
  return std::clamp<std::size_t>(count, n == 0 ? 0 : 1, n);
}

FeatureBin select_top_k(const AttributionVector& explanation, double fraction, RankingMode mode) {
  if (explanation.empty()) throw InvalidInput("cannot select top-k of an empty attribution");
  const std::size_t n = explanation.size();
  const std::size_t count = top_k_count(fraction, n);
  const auto& ids = explanation.feature_ids();
  const auto& values = explanation.values();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto score = [&](std::size_t i) {
    return mode == RankingMode::SignedDescending ? values[i] : std::abs(values[i]);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score(a) != score(b)) return score(a) > score(b);
    return ids[a] < ids[b];
  });
  FeatureBin bin;
  bin.modality = explanation.modality();
  bin.fraction = fraction;
  bin.mode = mode;
  for (std::size_t r = 0; r < count; ++r) bin.selected.push_back(ids[order[r]]);
  return bin;
}

std::vector<int> feature_universe(const TaskExample& example, Modality modality,
                                  VisionGranularity granularity) {
  std::size_t n = 0;
  if (modality == Modality::Language) {
    n = example.words.size();
  } else {
    n = granularity == VisionGranularity::PerRegion ? example.visual_features.rows
                                                    : example.visual_features.data.size();
  }
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

FeatureBin complement(const FeatureBin& bin, const TaskExample& example,
                      VisionGranularity granularity) {
  const std::set<int> selected(bin.selected.begin(), bin.selected.end());
  FeatureBin out = bin;
  out.selected.clear();
  for (int id : feature_universe(example, bin.modality, granularity)) {
    if (!selected.count(id)) out.selected.push_back(id);
  }
  return out;
}

TaskExample perturb_remove(const TaskExample& example, const FeatureBin& bin, int pad_id,
                           VisionGranularity granularity) {
  TaskExample out = example;
  const auto universe = feature_universe(example, bin.modality, granularity);
  for (int id : bin.selected) {
    if (id < 0 || static_cast<std::size_t>(id) >= universe.size()) {
      throw InvalidInput("feature id " + std::to_string(id) + " is not a " +
                         to_string(bin.modality) + " feature of example '" + example.id + "'");
    }
  }
  if (bin.modality == Modality::Language) {
    const auto spans = example.word_tokens();
    for (int w : bin.selected) {
      for (std::size_t t : spans[static_cast<std::size_t>(w)]) {
        out.tokens[t].id = pad_id;
        out.tokens[t].text = "[PAD]";
      }
    }
  } else {
    auto& vis = out.visual_features;
    for (int id : bin.selected) {
      if (granularity == VisionGranularity::PerRegion) {
        auto row = vis.row(static_cast<std::size_t>(id));
        std::fill(row.begin(), row.end(), 0.0);
      } else {
        vis.data[static_cast<std::size_t>(id)] = 0.0;
      }
    }
  }
  return out;
}

TaskExample perturb_keep_only(const TaskExample& example, const FeatureBin& bin, int pad_id,
                              VisionGranularity granularity) {
  return perturb_remove(example, complement(bin, example, granularity), pad_id, granularity);
}

namespace {

enum class Perturbation { Remove, KeepOnly };

AopcResult aopc(Oracle& oracle, const TaskExample& example, const AttributionVector& explanation,
                std::span<const double> bins, int target_class, const AopcOptions& options,
                Perturbation kind) {
  if (bins.empty()) throw InvalidInput("AOPC needs at least one bin");
  if (target_class < 0 || target_class >= oracle.info().classes) {
    throw InvalidInput("target class " + std::to_string(target_class) + " out of range");
  }
  const auto universe = feature_universe(example, explanation.modality(), options.granularity);
  if (explanation.size() != universe.size()) {
    throw InvalidInput("explanation attribution has " + std::to_string(explanation.size()) +
                       " features but example '" + example.id + "' has " +
                       std::to_string(universe.size()));
  }
  const auto j = static_cast<std::size_t>(target_class);
  const double reference = oracle.predict(embed_example(oracle, example)).probs[j];
  const int pad = oracle.info().pad_id;
  AopcResult result;
  for (double k : bins) {
    const auto bin = select_top_k(explanation, k, options.ranking);
    const auto perturbed = kind == Perturbation::Remove
                               ? perturb_remove(example, bin, pad, options.granularity)
                               : perturb_keep_only(example, bin, pad, options.granularity);
    const double p = oracle.predict(embed_example(oracle, perturbed)).probs[j];
    result.terms.push_back(reference - p);
  }
  double total = 0.0;
  for (double t : result.terms) total += t;
  result.value = total / static_cast<double>(result.terms.size());
  return result;
}

}  // namespace

AopcResult nle_comprehensiveness(Oracle& oracle, const TaskExample& example,
                                 const AttributionVector& explanation,
                                 std::span<const double> bins, int target_class,
                                 const AopcOptions& options) {
  return aopc(oracle, example, explanation, bins, target_class, options, Perturbation::Remove);
}

AopcResult nle_sufficiency(Oracle& oracle, const TaskExample& example,
                           const AttributionVector& explanation, std::span<const double> bins,
                           int target_class, const AopcOptions& options) {
  return aopc(oracle, example, explanation, bins, target_class, options, Perturbation::KeepOnly);
}

}  // namespace faitheval
