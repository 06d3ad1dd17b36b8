#pragma once

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "faitheval/core.hpp"

namespace faitheval::testing {

inline std::string data_path(const std::string& name) {
  return (std::filesystem::path(FAITHEVAL_TEST_DATA) / name).string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Compares against a frozen fixture. With FAITHEVAL_UPDATE_GOLDEN=1 the
// fixture is rewritten instead.
inline void expect_golden(const std::string& name, const std::string& actual) {
  const auto path = data_path(name);
  if (const char* update = std::getenv("FAITHEVAL_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    std::ofstream(path, std::ios::binary) << actual;
    return;
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << "missing golden file " << path;
  EXPECT_EQ(read_file(path), actual) << "golden mismatch for " << name;
}

// One token per word with the given vocabulary ids, and `regions` rows of
// visual features filled with a simple ramp.
inline TaskExample make_example(const std::string& id, const std::vector<std::string>& words,
                                const std::vector<int>& token_ids, std::size_t regions,
                                std::size_t vis_dim) {
  TaskExample ex;
  ex.id = id;
  ex.words = words;
  for (std::size_t i = 0; i < words.size(); ++i) {
    ex.tokens.push_back(TextToken{token_ids.at(i), words[i], i});
  }
  ex.visual_features = Matrix(regions, vis_dim);
  for (std::size_t i = 0; i < ex.visual_features.data.size(); ++i) {
    ex.visual_features.data[i] = 0.1 + 0.05 * static_cast<double>(i % 7);
  }
  return ex;
}

class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path() / "faitheval-test-XXXXXX";
    std::string pattern = base.string();
    path_ = mkdtemp(pattern.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace faitheval::testing
