#include "faitheval/integrated_gradients.hpp"

#include <exception>
#include <mutex>

#include "faitheval/core.hpp"

namespace faitheval {

namespace {

void check_arguments(std::span<const double> input, std::span<const double> baseline,
                     std::size_t steps) {
  if (input.size() != baseline.size()) {
    throw InvalidInput("input has " + std::to_string(input.size()) + " features but baseline has " +
                       std::to_string(baseline.size()));
  }
  if (steps == 0) throw InvalidInput("integrated gradients needs at least one step");
}

std::vector<double> checked_gradient(const GradientFn& gradient, std::span<const double> point) {
  std::vector<double> g;
  try {
    g = gradient(point);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw OracleError(std::string("gradient oracle failed: ") + e.what());
  }
  if (g.size() != point.size()) {
    throw OracleError("gradient oracle returned " + std::to_string(g.size()) + " values for " +
                      std::to_string(point.size()) + " inputs");
  }
  return g;
}

std::vector<double> finish(std::span<const double> input, std::span<const double> baseline,
                           const std::vector<double>& gradient_sum, std::size_t steps) {
  std::vector<double> ig(input.size());
  const auto m = static_cast<double>(steps);
  for (std::size_t i = 0; i < input.size(); ++i) {
    ig[i] = (input[i] - baseline[i]) * (gradient_sum[i] / m);
  }
  return ig;
}

}  // namespace

std::vector<double> interpolation_point(std::span<const double> input,
                                        std::span<const double> baseline, std::size_t k,
                                        std::size_t steps) {
  const double alpha = static_cast<double>(k) / static_cast<double>(steps);
  std::vector<double> p(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    p[i] = baseline[i] + alpha * (input[i] - baseline[i]);
  }
  return p;
}

std::vector<double> integrated_gradients_serial(const GradientFn& gradient,
                                                std::span<const double> input,
                                                std::span<const double> baseline,
                                                std::size_t steps) {
  check_arguments(input, baseline, steps);
  std::vector<double> sum(input.size(), 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto g = checked_gradient(gradient, interpolation_point(input, baseline, k, steps));
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g[i];
  }
  return finish(input, baseline, sum, steps);
}

std::vector<double> integrated_gradients(const GradientFn& gradient, std::span<const double> input,
                                         std::span<const double> baseline, std::size_t steps,
                                         bool parallel) {
  if (!parallel) return integrated_gradients_serial(gradient, input, baseline, steps);
  check_arguments(input, baseline, steps);

  std::vector<std::vector<double>> grads(steps);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto n = static_cast<long>(steps);

#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k) {
    try {
      grads[static_cast<std::size_t>(k)] = checked_gradient(
          gradient, interpolation_point(input, baseline, static_cast<std::size_t>(k), steps));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> sum(input.size(), 0.0);
  for (const auto& g : grads) {
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g[i];
  }
  return finish(input, baseline, sum, steps);
}

}  // namespace faitheval
