#include "faitheval/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace faitheval {

double Histogram::edge(std::size_t i) const {
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(counts.size());
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Histogram histogram(std::span<const double> scores, std::size_t n_buckets, double lo, double hi) {
  if (n_buckets < 1) throw InvalidInput("histogram needs at least one bucket");
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw InvalidInput("histogram range must be finite with lo <= hi");
  }
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(n_buckets, 0);
  for (double x : scores) {
    if (!std::isfinite(x)) throw InvalidInput("histogram of a non-finite score");
    if (x < lo || x > hi) ++h.clamped;
    std::size_t b = 0;
    if (hi > lo && x > lo) {
      if (x >= hi) {
        b = n_buckets - 1;
      } else {
        b = std::min(n_buckets - 1,
                     static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(n_buckets)));
        // Settle rounding so that edge(b) <= x < edge(b + 1) holds exactly.
        while (b > 0 && x < h.edge(b)) --b;
        while (b + 1 < n_buckets && x >= h.edge(b + 1)) ++b;
      }
    }
    ++h.counts[b];
  }
  return h;
}

Histogram histogram_data_range(std::span<const double> scores, std::size_t n_buckets) {
  if (scores.empty()) return histogram(scores, n_buckets, 0.0, 0.0);
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  return histogram(scores, n_buckets, *mn, *mx);
}

std::optional<double> pearson(const MetricColumn& x, const MetricColumn& y) {
  if (x.size() != y.size()) throw InvalidInput("correlated columns differ in length");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] && y[i]) {
      xs.push_back(*x[i]);
      ys.push_back(*y[i]);
    }
  }
  if (xs.size() < 2) return std::nullopt;
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> names = {"sf_nlp",   "sf_img",   "sf_overall", "suff_nlp",
                                                 "comp_nlp", "suff_img", "comp_img"};
  return names;
}

MetricColumn metric_column(std::span<const MetricRow> rows, const std::string& name) {
  MetricColumn col;
  col.reserve(rows.size());
  for (const auto& r : rows) {
    if (name == "sf_nlp") col.emplace_back(r.sf_nlp);
    else if (name == "sf_img") col.push_back(r.sf_img);
    else if (name == "sf_overall") col.emplace_back(r.sf_overall);
    else if (name == "suff_nlp") col.emplace_back(r.suff_nlp);
    else if (name == "comp_nlp") col.emplace_back(r.comp_nlp);
    else if (name == "suff_img") col.push_back(r.suff_img);
    else if (name == "comp_img") col.push_back(r.comp_img);
    else throw InvalidInput("unknown metric column '" + name + "'");
  }
  return col;
}

CorrelationMatrix pearson_matrix(std::vector<std::string> names,
                                 const std::vector<MetricColumn>& columns) {
  if (names.size() != columns.size()) throw InvalidInput("column names and columns differ");
  for (const auto& c : columns) {
    if (c.size() < 2) throw InvalidInput("correlation needs at least two rows");
    if (c.size() != columns.front().size()) throw InvalidInput("columns differ in length");
  }
  const std::size_t k = columns.size();
  CorrelationMatrix m;
  m.names = std::move(names);
  m.r.assign(k, std::vector<std::optional<double>>(k));
  for (std::size_t a = 0; a < k; ++a) {
    const auto self = pearson(columns[a], columns[a]);
    if (self) m.r[a][a] = 1.0;
    for (std::size_t b = a + 1; b < k; ++b) {
      m.r[a][b] = pearson(columns[a], columns[b]);
      m.r[b][a] = m.r[a][b];
    }
  }
  return m;
}

CorrelationMatrix pearson_matrix(std::span<const MetricRow> rows,
                                 const std::vector<std::string>& columns) {
  if (rows.size() < 2) throw InvalidInput("correlation needs at least two rows");
  std::vector<MetricColumn> cols;
  for (const auto& name : columns) cols.push_back(metric_column(rows, name));
  return pearson_matrix(columns, cols);
}

ModalityInfluence modality_influence(const ModalAttribution& attribution) {
  ModalityInfluence out;
  for (double v : attribution.language.values()) out.language += v;
  if (attribution.vision) {
    for (double v : attribution.vision->values()) out.vision += v;
  }
  return out;
}

std::vector<std::pair<std::string, double>> input_group_influence(
    const AttributionVector& attribution, const std::vector<InputGroup>& groups) {
  std::map<int, std::size_t> owner;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].name == "other") throw InvalidInput("group name 'other' is reserved");
    for (int id : groups[g].feature_ids) {
      const auto [it, inserted] = owner.emplace(id, g);
      if (!inserted && it->second != g) {
        throw InvalidInput("feature " + std::to_string(id) + " belongs to groups '" +
                           groups[it->second].name + "' and '" + groups[g].name + "'");
      }
    }
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& g : groups) out.emplace_back(g.name, 0.0);
  out.emplace_back("other", 0.0);
  const auto& ids = attribution.feature_ids();
  const auto& values = attribution.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = owner.find(ids[i]);
    out[it == owner.end() ? groups.size() : it->second].second += values[i];
  }
  return out;
}

std::optional<SummaryStat> summarize(const MetricColumn& column) {
  std::vector<double> xs;
  for (const auto& v : column) {
    if (v) xs.push_back(*v);
  }
  if (xs.empty()) return std::nullopt;
  SummaryStat s;
  s.n = xs.size();
  const double n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / n);
  return s;
}

}  // namespace faitheval
