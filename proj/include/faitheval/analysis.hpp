#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "faitheval/attribution.hpp"
#include "faitheval/core.hpp"

namespace faitheval {

// Equal-width buckets over [lo, hi]; right-open except the last, which is
// closed. Values outside the range are clamped into the end buckets and
// counted in `clamped`.
struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;
  std::size_t clamped = 0;

  double edge(std::size_t i) const;
  std::size_t total() const;
};

Histogram histogram(std::span<const double> scores, std::size_t n_buckets = 20, double lo = 0.0,
                    double hi = 1.0);
// Range taken from the data's min and max.
Histogram histogram_data_range(std::span<const double> scores, std::size_t n_buckets = 20);

// Missing cells (absent modalities) are skipped pairwise.
using MetricColumn = std::vector<std::optional<double>>;

// Entries without a defined coefficient (constant column or fewer than two
// paired values) hold std::nullopt, written as "NoVariance".
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> r;
};

std::optional<double> pearson(const MetricColumn& x, const MetricColumn& y);

const std::vector<std::string>& metric_columns();
MetricColumn metric_column(std::span<const MetricRow> rows, const std::string& name);

CorrelationMatrix pearson_matrix(std::vector<std::string> names,
                                 const std::vector<MetricColumn>& columns);
CorrelationMatrix pearson_matrix(std::span<const MetricRow> rows,
                                 const std::vector<std::string>& columns);

struct ModalityInfluence {
  double language = 0.0;
  double vision = 0.0;
};

// Signed relevance totals per modality.
ModalityInfluence modality_influence(const ModalAttribution& attribution);

struct InputGroup {
  std::string name;
  std::vector<int> feature_ids;
};

// Signed total per named group, in group order, followed by "other" for the
// uncovered ids. Overlapping groups are rejected.
std::vector<std::pair<std::string, double>> input_group_influence(
    const AttributionVector& attribution, const std::vector<InputGroup>& groups);

struct SummaryStat {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t n = 0;
};

std::optional<SummaryStat> summarize(const MetricColumn& column);

}  // namespace faitheval
