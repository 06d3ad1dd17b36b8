#include "faitheval/autodiff.hpp"

#include <array>
#include <cmath>

#include "faitheval/core.hpp"

namespace faitheval::ad {

std::uint32_t Tape::push(double value, std::span<const std::uint32_t> parents,
                         std::span<const double> partials) {
  const auto first = static_cast<std::uint32_t>(edge_parent_.size());
  edge_parent_.insert(edge_parent_.end(), parents.begin(), parents.end());
  edge_partial_.insert(edge_partial_.end(), partials.begin(), partials.end());
  nodes_.push_back(Node{value, first, static_cast<std::uint32_t>(parents.size())});
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

Var make_node(Tape& tape, double value, std::span<const std::uint32_t> parents,
              std::span<const double> partials) {
  return Var(&tape, tape.push(value, parents, partials));
}

Var Tape::variable(double value) { return Var(this, push(value, {}, {})); }

std::vector<Var> Tape::variables(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(variable(v));
  return out;
}

std::vector<double> Tape::adjoints(const Var& output) const {
  if (output.tape_ != this) throw InvalidInput("output does not belong to this tape");
  std::vector<double> adj(nodes_.size(), 0.0);
  adj[output.index_] = 1.0;
  for (std::size_t n = output.index_ + 1; n-- > 0;) {
    const double a = adj[n];
    if (a == 0.0) continue;
    const Node& node = nodes_[n];
    for (std::uint32_t e = node.first_edge; e < node.first_edge + node.n_edges; ++e) {
      adj[edge_parent_[e]] += a * edge_partial_[e];
    }
  }
  return adj;
}

std::vector<double> Tape::gradient(const Var& output, std::span<const Var> inputs) const {
  const auto adj = adjoints(output);
  std::vector<double> out(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = adj[inputs[i].index_];
  return out;
}

void Tape::clear() {
  nodes_.clear();
  edge_parent_.clear();
  edge_partial_.clear();
}

double Var::value() const { return tape_->nodes_[index_].value; }

namespace {

Var unary(const Var& a, double value, double partial) {
  const std::array<std::uint32_t, 1> p{a.index()};
  const std::array<double, 1> d{partial};
  return make_node(a.tape(), value, p, d);
}

Var binary(const Var& a, const Var& b, double value, double da, double db) {
  const std::array<std::uint32_t, 2> p{a.index(), b.index()};
  const std::array<double, 2> d{da, db};
  return make_node(a.tape(), value, p, d);
}

}  // namespace

Var operator+(const Var& a, const Var& b) { return binary(a, b, a.value() + b.value(), 1.0, 1.0); }
Var operator+(const Var& a, double b) { return unary(a, a.value() + b, 1.0); }
Var operator+(double a, const Var& b) { return b + a; }
Var operator-(const Var& a, const Var& b) { return binary(a, b, a.value() - b.value(), 1.0, -1.0); }
Var operator-(const Var& a, double b) { return unary(a, a.value() - b, 1.0); }
Var operator-(double a, const Var& b) { return unary(b, a - b.value(), -1.0); }
Var operator-(const Var& a) { return unary(a, -a.value(), -1.0); }
Var operator*(const Var& a, const Var& b) {
  return binary(a, b, a.value() * b.value(), b.value(), a.value());
}
Var operator*(const Var& a, double b) { return unary(a, a.value() * b, b); }
Var operator*(double a, const Var& b) { return b * a; }
Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.value();
  return binary(a, b, a.value() * inv, inv, -a.value() * inv * inv);
}
Var operator/(const Var& a, double b) { return unary(a, a.value() / b, 1.0 / b); }

Var tanh(const Var& a) {
  const double t = std::tanh(a.value());
  return unary(a, t, 1.0 - t * t);
}

Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return unary(a, e, e);
}

Var log(const Var& a) { return unary(a, std::log(a.value()), 1.0 / a.value()); }

Var dot(std::span<const Var> x, std::span<const double> w, double bias) {
  if (x.size() != w.size()) throw InvalidInput("dot of mismatched lengths");
  if (x.empty()) throw InvalidInput("dot of empty vectors");
  std::vector<std::uint32_t> parents(x.size());
  double value = bias;
  for (std::size_t i = 0; i < x.size(); ++i) {
    parents[i] = x[i].index();
    value += w[i] * x[i].value();
  }
  return make_node(x[0].tape(), value, parents, w);
}

Var sum(std::span<const Var> x) {
  if (x.empty()) throw InvalidInput("sum of an empty vector");
  std::vector<std::uint32_t> parents(x.size());
  std::vector<double> ones(x.size(), 1.0);
  double value = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    parents[i] = x[i].index();
    value += x[i].value();
  }
  return make_node(x[0].tape(), value, parents, ones);
}

std::vector<Var> affine(std::span<const double> weights, std::span<const double> bias,
                        std::span<const Var> x) {
  const std::size_t out = bias.size();
  if (weights.size() != out * x.size()) throw InvalidInput("affine weight shape mismatch");
  std::vector<Var> y;
  y.reserve(out);
  for (std::size_t o = 0; o < out; ++o) {
    y.push_back(dot(x, weights.subspan(o * x.size(), x.size()), bias[o]));
  }
  return y;
}

std::vector<Var> tanh(std::span<const Var> x) {
  std::vector<Var> y;
  y.reserve(x.size());
  for (const auto& v : x) y.push_back(tanh(v));
  return y;
}

}  // namespace faitheval::ad
