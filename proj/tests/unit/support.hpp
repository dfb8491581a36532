#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "unmt/tensor.hpp"

namespace unmt::testing {

inline std::vector<double> randn(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> out(n);
  for (double& v : out) v = d(rng);
  return out;
}

// Reduces y to a scalar through fixed random weights so every output
// coordinate contributes a distinct gradient.
template <typename T>
Var<T> project(Graph<T>& g, Var<T> y, std::uint64_t seed = 99) {
  std::vector<double> c = randn(y.size(), seed);
  return sum(mul(y, g.constant(y.shape(), std::vector<T>(c.begin(), c.end()))));
}

// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("unmt-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace unmt::testing
