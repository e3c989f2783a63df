#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mfd/flow.hpp"
#include "mfd/image.hpp"

namespace mfd::testing {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mfd") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
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

inline Image random_image(int h, int w, int channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(h, w, channels);
  for (auto& p : img.planes())
    for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = unit(rng);
  return img;
}

/// Random flow with |u| <= u_max, |v| <= v_max (not folded).
inline MotionFlow random_flow(int h, int w, int u_max, int v_max, std::mt19937_64& rng, bool folded = true) {
  std::uniform_int_distribution<int> du(folded ? 0 : -u_max, u_max);
  std::uniform_int_distribution<int> dv(-v_max, v_max);
  MotionFlow f(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) f.set(r, c, {du(rng), dv(rng)});
  return f;
}

}  // namespace mfd::testing
