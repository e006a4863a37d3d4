#pragma once

// Shared test helpers: hand-rolled random generators and temporary files.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "boxdraw/core.hpp"

namespace testing_support {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(eng_() >> 11) * 0x1.0p-53); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }
  bool coin() { return (eng_() & 1) != 0; }

  /// Values on a coarse lattice so ties and repeated coordinates occur.
  double lattice(int steps) { return -1.0 + 2.0 * static_cast<double>(index(steps + 1)) / steps; }

 private:
  std::mt19937_64 eng_;
};

/// m points in [-1,1]^n with at least one example of each class.
inline boxdraw::Dataset random_dataset(Gen& g, std::size_t m, std::size_t n, double positive_rate = 0.3,
                                       int lattice_steps = 0) {
  boxdraw::Matrix x(m, n);
  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) x(i, j) = lattice_steps > 0 ? g.lattice(lattice_steps) : g.uniform(-1, 1);
    y[i] = g.uniform(0, 1) < positive_rate ? 1 : -1;
  }
  y[0] = 1;
  y[m - 1] = -1;
  return boxdraw::Dataset(std::move(x), std::move(y));
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("boxdraw_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string data_file(const std::string& name) { return std::string(BOXDRAW_DATA_DIR) + "/" + name; }

}  // namespace testing_support
