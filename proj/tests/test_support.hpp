#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "layerprobe/linalg.hpp"
#include "layerprobe/tensorio.hpp"
#include "oracles.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("layerprobe_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
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

inline layerprobe::Matrix to_matrix(const oracle::Dense& d) {
  std::vector<double> data;
  for (const auto& r : d) data.insert(data.end(), r.begin(), r.end());
  return layerprobe::Matrix(d.size(), d.empty() ? 0 : d[0].size(), std::move(data));
}

inline oracle::Dense to_dense(const layerprobe::Matrix& m) {
  oracle::Dense d(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

inline layerprobe::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  return to_matrix(oracle::random_dense(rows, cols, rng, scale));
}

inline std::string slurp(const std::filesystem::path& p) { return layerprobe::read_file_bytes(p); }

}  // namespace testing_support
