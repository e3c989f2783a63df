#pragma once

#include <cmath>
#include <map>
#include <utility>

namespace mfd::testing {

/// Sub-sampling reference for the line kernel: `samples` midpoints on the
/// segment from -m/2 to +m/2, each depositing 1/samples into the pixel cell
/// that contains it. Keyed by (dj, di).
inline std::map<std::pair<int, int>, double> subsampled_kernel(double u, double v, long samples) {
  std::map<std::pair<int, int>, double> taps;
  if (u == 0.0 && v == 0.0) {
    taps[{0, 0}] = 1.0;
    return taps;
  }
  for (long k = 0; k < samples; ++k) {
    const double t = (k + 0.5) / static_cast<double>(samples);
    const double x = -0.5 * u + t * u;
    const double y = -0.5 * v + t * v;
    taps[{static_cast<int>(std::floor(y + 0.5)), static_cast<int>(std::floor(x + 0.5))}] += 1.0 / samples;
  }
  return taps;
}

/// Sample count used by the reference rasterizer: max(64, 32 * ceil(|m|)).
inline long reference_samples(double u, double v) {
  return std::max(64L, 32L * static_cast<long>(std::ceil(std::hypot(u, v))));
}

}  // namespace mfd::testing
