#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace faitheval {

struct SelftestOptions {
  std::uint64_t seed = 2024;
  // Perturbs every reverse-mode gradient the suites evaluate. Exists so the
  // harness can confirm that a broken gradient is caught.
  bool inject_gradient_bug = false;
};

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// ig-linear-exactness, ig-completeness, autodiff-finite-difference,
// cosine-scale-invariance, aopc-brute-force.
std::vector<PropertyResult> run_selftest(const SelftestOptions& options = {});

}  // namespace faitheval
