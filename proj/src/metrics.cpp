#include "mfd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mfd {

double flow_mse(const MotionFlow& est, const MotionFlow& gt) {
  if (est.height() != gt.height() || est.width() != gt.width()) throw ShapeError("flow_mse: flow sizes differ");
  const double du = (est.u() - gt.u()).cast<double>().square().sum();
  const double dv = (est.v() - gt.v()).cast<double>().square().sum();
  return (du + dv) / (2.0 * est.height() * est.width());
}

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  double se = 0.0;
  for (int ch = 0; ch < a.channels(); ++ch) se += (a.plane(ch) - b.plane(ch)).square().sum();
  const double mse = se / (static_cast<double>(a.height()) * a.width() * a.channels());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

Eigen::Matrix<double, kWindow, 1> gaussian_window() {
  Eigen::Matrix<double, kWindow, 1> g;
  for (int k = 0; k < kWindow; ++k) {
    const double d = k - kWindow / 2;
    g[k] = std::exp(-d * d / (2.0 * kSigma * kSigma));
  }
  return g / g.sum();
}

// Separable valid-mode filtering.
Plane<double> filter_valid(const Plane<double>& p, const Eigen::Matrix<double, kWindow, 1>& g) {
  const Eigen::Index rows = p.rows() - kWindow + 1;
  const Eigen::Index cols = p.cols() - kWindow + 1;
  Plane<double> tmp = Plane<double>::Zero(p.rows(), cols);
  for (int k = 0; k < kWindow; ++k) tmp += g[k] * p.middleCols(k, cols);
  Plane<double> out = Plane<double>::Zero(rows, cols);
  for (int k = 0; k < kWindow; ++k) out += g[k] * tmp.middleRows(k, rows);
  return out;
}

double ssim_plane(const Plane<double>& x, const Plane<double>& y) {
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  const auto g = gaussian_window();
  const Plane<double> mx = filter_valid(x, g);
  const Plane<double> my = filter_valid(y, g);
  const Plane<double> sxx = filter_valid(x * x, g) - mx * mx;
  const Plane<double> syy = filter_valid(y * y, g) - my * my;
  const Plane<double> sxy = filter_valid(x * y, g) - mx * my;
  const Plane<double> map =
      ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
  return map.mean();
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  if (a.height() < kWindow || a.width() < kWindow) throw ShapeError("ssim: image smaller than the 11x11 window");
  double acc = 0.0;
  for (int ch = 0; ch < a.channels(); ++ch) acc += ssim_plane(a.plane(ch), b.plane(ch));
  return std::clamp(acc / a.channels(), -1.0, 1.0);
}

Image colorize_flow(const MotionFlow& flow, const FlowDomain& dom) {
  Image out(flow.height(), flow.width(), 3, 1.0);
  const double full = std::hypot(dom.u_max(), dom.v_max());
  for (int r = 0; r < flow.height(); ++r)
    for (int c = 0; c < flow.width(); ++c) {
      const Motion m = flow.at(r, c);
      const double mag = std::hypot(m.u, m.v);
      if (mag == 0.0 || full == 0.0) continue;
      const double sat = std::min(1.0, mag / full);
      double hue = std::atan2(static_cast<double>(m.v), static_cast<double>(m.u)) * 180.0 / std::numbers::pi;
      if (hue < 0.0) hue += 360.0;
      // HSV -> RGB with V = 1.
      const double h6 = hue / 60.0;
      const int sector = static_cast<int>(std::floor(h6)) % 6;
      const double f = h6 - std::floor(h6);
      const double p = 1.0 - sat;
      const double q = 1.0 - sat * f;
      const double t = 1.0 - sat * (1.0 - f);
      double rgb[3];
      switch (sector) {
        case 0: rgb[0] = 1; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = 1; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = 1; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = 1; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = 1; break;
        default: rgb[0] = 1; rgb[1] = p; rgb[2] = q; break;
      }
      for (int ch = 0; ch < 3; ++ch) out(r, c, ch) = rgb[ch];
    }
  return out;
}

}  // namespace mfd
