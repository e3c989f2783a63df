#include "mfd/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace mfd {

namespace {

using Color = std::array<double, 3>;

Color random_color(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  return {unit(rng), unit(rng), unit(rng)};
}

}  // namespace

Image synth_scene(int height, int width, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(height, width, 3);

  // Linear background gradient between two colors.
  const Color c0 = random_color(rng);
  const Color c1 = random_color(rng);
  const double ang = unit(rng) * 2.0 * std::numbers::pi;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const double t = 0.5 + 0.5 * (std::cos(ang) * (c - width / 2.0) / width + std::sin(ang) * (r - height / 2.0) / height);
      for (int ch = 0; ch < 3; ++ch) img(r, c, ch) = (1 - t) * c0[ch] + t * c1[ch];
    }

  const int shapes = 6 + static_cast<int>(unit(rng) * 10);
  for (int s = 0; s < shapes; ++s) {
    const Color col = random_color(rng);
    const int kind = static_cast<int>(unit(rng) * 4);
    const double cx = unit(rng) * width;
    const double cy = unit(rng) * height;
    const double rx = (0.05 + 0.3 * unit(rng)) * width;
    const double ry = (0.05 + 0.3 * unit(rng)) * height;
    const double rot = unit(rng) * std::numbers::pi;
    const double period = 2.0 + unit(rng) * 6.0;
    // Triangle vertices.
    std::array<double, 6> tri{};
    for (int k = 0; k < 3; ++k) {
      const double a = rot + k * 2.0 * std::numbers::pi / 3.0 + (unit(rng) - 0.5);
      tri[2 * k] = cx + rx * std::cos(a);
      tri[2 * k + 1] = cy + ry * std::sin(a);
    }
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) {
        const double dx = c - cx;
        const double dy = r - cy;
        const double lx = std::cos(rot) * dx + std::sin(rot) * dy;
        const double ly = -std::sin(rot) * dx + std::cos(rot) * dy;
        bool inside = false;
        double shade = 1.0;
        switch (kind) {
          case 0: inside = std::abs(lx) <= rx && std::abs(ly) <= ry; break;
          case 1: inside = (lx * lx) / (rx * rx) + (ly * ly) / (ry * ry) <= 1.0; break;
          case 2: {
            auto edge = [&](int a, int b) {
              return (tri[2 * b] - tri[2 * a]) * (r - tri[2 * a + 1]) - (tri[2 * b + 1] - tri[2 * a + 1]) * (c - tri[2 * a]);
            };
            const double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
            inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
            break;
          }
          default:
            inside = std::abs(lx) <= rx && std::abs(ly) <= ry;
            shade = std::fmod(std::floor(lx / period) + 1000.0, 2.0) == 0.0 ? 1.0 : 0.35;
            break;
        }
        if (inside)
          for (int ch = 0; ch < 3; ++ch) img(r, c, ch) = col[ch] * shade + (1.0 - shade) * img(r, c, ch) * 0.5;
      }
  }

  // Multi-octave value noise with equal energy per octave (1/f amplitude).
  Plane<double> texture = Plane<double>::Zero(height, width);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int cell = 2; cell <= 16; cell *= 2) {
    const int gh = height / cell + 2;
    const int gw = width / cell + 2;
    Plane<double> grid(gh, gw);
    for (Eigen::Index k = 0; k < grid.size(); ++k) grid.data()[k] = n01(rng);
    const double amp = 0.035;
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) {
        const double gy = static_cast<double>(r) / cell;
        const double gx = static_cast<double>(c) / cell;
        const int y0 = static_cast<int>(gy);
        const int x0 = static_cast<int>(gx);
        const double fy = gy - y0;
        const double fx = gx - x0;
        const double sy = fy * fy * (3 - 2 * fy);
        const double sx = fx * fx * (3 - 2 * fx);
        const double top = grid(y0, x0) * (1 - sx) + grid(y0, x0 + 1) * sx;
        const double bot = grid(y0 + 1, x0) * (1 - sx) + grid(y0 + 1, x0 + 1) * sx;
        texture(r, c) += amp * (top * (1 - sy) + bot * sy);
      }
  }
  for (auto& p : img.planes()) p = (p + texture).max(0.0).min(1.0);
  return img;
}

}  // namespace mfd
