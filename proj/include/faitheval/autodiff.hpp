#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace faitheval::ad {

class Var;

// Wengert list for scalar reverse-mode differentiation. Nodes may have any
// number of parents; each edge stores the local partial derivative, so the
// backward sweep is a single pass over the edges in reverse creation order.
//
// A tape is not thread-safe. Use one tape per thread.
class Tape {
 public:
  Var variable(double value);
  std::vector<Var> variables(std::span<const double> values);

  // Adjoints d(output)/d(node) for every node on the tape.
  std::vector<double> adjoints(const Var& output) const;

  // d(output)/d(input) for the given leaves, in order.
  std::vector<double> gradient(const Var& output, std::span<const Var> inputs) const;

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  friend class Var;
  friend Var make_node(Tape&, double, std::span<const std::uint32_t>, std::span<const double>);

  struct Node {
    double value;
    std::uint32_t first_edge;
    std::uint32_t n_edges;
  };

  std::uint32_t push(double value, std::span<const std::uint32_t> parents,
                     std::span<const double> partials);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> edge_parent_;
  std::vector<double> edge_partial_;
};

class Var {
 public:
  Var() = default;

  double value() const;
  Tape& tape() const { return *tape_; }
  std::uint32_t index() const { return index_; }

 private:
  friend class Tape;
  friend Var make_node(Tape&, double, std::span<const std::uint32_t>, std::span<const double>);
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

Var make_node(Tape& tape, double value, std::span<const std::uint32_t> parents,
              std::span<const double> partials);

Var operator+(const Var& a, const Var& b);
Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator-(const Var& a);
Var operator*(const Var& a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator/(const Var& a, double b);

Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);

// Σ w_i x_i + bias as one node.
Var dot(std::span<const Var> x, std::span<const double> w, double bias = 0.0);
Var sum(std::span<const Var> x);

// y = W x + b with W row-major [out x in].
std::vector<Var> affine(std::span<const double> weights, std::span<const double> bias,
                        std::span<const Var> x);
std::vector<Var> tanh(std::span<const Var> x);

}  // namespace faitheval::ad
