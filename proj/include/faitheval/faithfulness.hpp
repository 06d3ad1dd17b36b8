#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faitheval/attribution.hpp"
#include "faitheval/core.hpp"
#include "faitheval/oracle.hpp"

namespace faitheval {

// Signed: most positively contributing features first. Absolute: largest
// magnitude first. Ties go to the lower feature id in both modes.
enum class RankingMode { SignedDescending, AbsoluteDescending };

std::string to_string(RankingMode m);
RankingMode ranking_from_string(const std::string& s);

// Top ceil(k*N) features of an explanation attribution.
struct FeatureBin {
  Modality modality = Modality::Language;
  double fraction = 1.0;
  std::vector<int> selected;  // rank order
  RankingMode mode = RankingMode::SignedDescending;
};

struct SFScore {
  double cos_nlp = 0.0;
  double sf_nlp = 0.5;
  std::optional<double> cos_img;
  std::optional<double> sf_img;
  double overall = 0.5;
  bool zero_norm_nlp = false;  // cosine forced to 0 by a zero-norm operand
  bool zero_norm_img = false;
};

// 0.5 * (1 + cos)
double normalized_similarity(double cos);

SFScore attribution_similarity(const AttributionPair& nlp, const std::optional<AttributionPair>& img);

std::vector<double> default_bins();

std::size_t top_k_count(double fraction, std::size_t n);

FeatureBin select_top_k(const AttributionVector& explanation, double fraction,
                        RankingMode mode = RankingMode::SignedDescending);

// All feature ids of one modality of the example: word indices, region
// indices, or flat visual feature indices.
std::vector<int> feature_universe(const TaskExample& example, Modality modality,
                                  VisionGranularity granularity = VisionGranularity::PerRegion);

FeatureBin complement(const FeatureBin& bin, const TaskExample& example,
                      VisionGranularity granularity = VisionGranularity::PerRegion);

// Selected words become PAD at every constituent token; selected visual
// features become zero. The input example is not modified.
TaskExample perturb_remove(const TaskExample& example, const FeatureBin& bin, int pad_id,
                           VisionGranularity granularity = VisionGranularity::PerRegion);

// Removes everything in the bin's modality except the selected features.
TaskExample perturb_keep_only(const TaskExample& example, const FeatureBin& bin, int pad_id,
                              VisionGranularity granularity = VisionGranularity::PerRegion);

struct AopcResult {
  double value = 0.0;
  std::vector<double> terms;  // one per bin, in bin order
};

struct AopcOptions {
  RankingMode ranking = RankingMode::SignedDescending;
  VisionGranularity granularity = VisionGranularity::PerRegion;
};

// (1/|bins|) * sum over bins of p_j(x) - p_j(x without the bin's top-k).
AopcResult nle_comprehensiveness(Oracle& oracle, const TaskExample& example,
                                 const AttributionVector& explanation,
                                 std::span<const double> bins, int target_class,
                                 const AopcOptions& options = {});

// (1/|bins|) * sum over bins of p_j(x) - p_j(only the bin's top-k).
AopcResult nle_sufficiency(Oracle& oracle, const TaskExample& example,
                           const AttributionVector& explanation, std::span<const double> bins,
                           int target_class, const AopcOptions& options = {});

}  // namespace faitheval
