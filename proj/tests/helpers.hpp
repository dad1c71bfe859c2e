#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mlctr/model.hpp"
#include "mlctr/rng.hpp"
#include "mlctr/tensor.hpp"

namespace testutil {

// Scratch directory for tests that touch the file system; removed on
// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    dir_ = std::filesystem::temp_directory_path() /
           ("mlctr_test_" + tag + "_" + std::to_string(++counter) + "_" +
            std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string root() const { return dir_.string(); }

 private:
  std::filesystem::path dir_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Random observed samples over the given extents, with distinct cells.
inline std::vector<mlctr::Sample> random_samples(mlctr::TensorTag tag,
                                                 std::int64_t d1, std::int64_t d2,
                                                 std::int64_t d3, std::size_t n,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<mlctr::Sample> out;
  std::vector<std::uint64_t> used;
  while (out.size() < n) {
    const auto i = static_cast<std::int32_t>(mlctr::uniform_index(rng, d1));
    const auto j = static_cast<std::int32_t>(mlctr::uniform_index(rng, d2));
    const auto k = static_cast<std::int32_t>(mlctr::uniform_index(rng, d3));
    const std::uint64_t key =
        (static_cast<std::uint64_t>(i) << 42) |
        (static_cast<std::uint64_t>(j) << 21) | static_cast<std::uint64_t>(k);
    bool dup = false;
    for (const std::uint64_t u : used) dup = dup || u == key;
    if (dup) continue;
    used.push_back(key);
    out.push_back({tag, i, j, k, 2.0 * mlctr::uniform01(rng) - 1.0});
  }
  return out;
}

}  // namespace testutil
