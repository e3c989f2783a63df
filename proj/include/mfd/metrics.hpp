#pragma once

#include <limits>

#include "mfd/flow.hpp"
#include "mfd/image.hpp"

namespace mfd {

/// (1 / 2|M|) * sum[(U - U')^2 + (V - V')^2].
double flow_mse(const MotionFlow& est, const MotionFlow& gt);

/// 10 log10(1 / MSE) over all channels, peak 1.0. Identical images give +inf.
double psnr(const Image& a, const Image& b);

/// Value written to reports in place of an infinite PSNR.
inline constexpr double kPsnrReportCap = 99.0;
inline double report_psnr(double db) { return db > kPsnrReportCap ? kPsnrReportCap : db; }

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, mean over valid window positions, averaged
/// over channels.
double ssim(const Image& a, const Image& b);

/// HSV rendering: hue = atan2(v, u), saturation = |m| / |(u_max, v_max)|,
/// value = 1. Zero motion is white.
Image colorize_flow(const MotionFlow& flow, const FlowDomain& dom);

}  // namespace mfd
