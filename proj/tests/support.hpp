#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "aec/environment.hpp"

namespace aec::testing {

// Smallest convenient scene for the default limits (valid region 112..127).
inline constexpr int kSmallSide = 240;

inline StereoScene plane_scene(int disparity, std::uint64_t seed = 5, int side = kSmallSide) {
  SceneSpec spec;
  spec.rows = side;
  spec.cols = side;
  spec.background_disparity = disparity;
  return generate_scene(spec, seed);
}

inline Eigen::VectorXd random_unit(Rng& rng, int n) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (auto& x : v) x = normal(rng);
  return v.normalized();
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("aec-test-" + name + "-" + std::to_string(std::random_device{}()));
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
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

}  // namespace aec::testing
