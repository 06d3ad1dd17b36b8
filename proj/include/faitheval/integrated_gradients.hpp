#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace faitheval {

// Gradient of the target scalar at a point of the flat input space.
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

// Left-Riemann Integrated Gradients:
//
//   IG_i = (x_i - x'_i) * (1/m) * sum_{k=0}^{m-1} df(x' + (k/m)(x - x'))/dx_i
//
// Gradients are evaluated concurrently with OpenMP when `parallel` is set and
// reduced in k order afterwards, so the result is bitwise identical to
// integrated_gradients_serial. Non-faitheval exceptions thrown by the
// gradient function are rethrown as OracleError.
std::vector<double> integrated_gradients(const GradientFn& gradient, std::span<const double> input,
                                         std::span<const double> baseline, std::size_t steps,
                                         bool parallel = true);

// Single-threaded reference used to check the parallel kernel.
std::vector<double> integrated_gradients_serial(const GradientFn& gradient,
                                                std::span<const double> input,
                                                std::span<const double> baseline,
                                                std::size_t steps);

// The k-th interpolation point x' + (k/m)(x - x').
std::vector<double> interpolation_point(std::span<const double> input,
                                        std::span<const double> baseline, std::size_t k,
                                        std::size_t steps);

}  // namespace faitheval
