#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

#include "mfd/flow.hpp"
#include "mfd/random.hpp"

namespace mfd {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

/// Uniform priors for the four camera-motion components. Centers (the
/// translation anchors, the vanishing point and the rotation center) are
/// drawn as fractions of (width-1, height-1) from `center`.
struct SimConfig {
  Range t_x, r_x;
  Range t_y, r_y;
  Range t_z, zeta;
  Range omega;  // radians, |omega| < pi
  Range center{0.2, 0.8};
  bool enable_tx = true;
  bool enable_ty = true;
  bool enable_tz = true;
  bool enable_rz = true;
  double zero_flow_probability = 0.02;
  std::uint64_t seed = 0;

  /// Default priors scaled to the domain.
  static SimConfig defaults(const FlowDomain& dom);

  /// Throws ParameterError on inverted or non-finite ranges, |omega| >= pi,
  /// a probability outside [0,1] or centers outside the image.
  void validate(const FlowDomain& dom, int height, int width) const;

  bool operator==(const SimConfig&) const = default;
};

void to_json(nlohmann::json& j, const SimConfig& cfg);
/// Starts from SimConfig::defaults(dom) and applies the keys present in j.
/// Unknown keys throw ParameterError.
SimConfig sim_config_from_json(const nlohmann::json& j, const FlowDomain& dom);

/// One set of sampled component parameters. Centers are pixel coordinates
/// (i = column, j = row).
struct SimDraw {
  bool zero = false;
  bool tx = false, ty = false, tz = false, rz = false;
  double tx_i = 0, tx_t = 0, tx_r = 0;
  double ty_j = 0, ty_t = 0, ty_r = 0;
  double tz_i = 0, tz_j = 0, tz_t = 0, tz_zeta = 1;
  double rz_i = 0, rz_j = 0, rz_omega = 0;
};

nlohmann::json to_json(const SimDraw& draw);

/// U(i,j) = (i - center_i) * accel + base, V = 0.
FlowField sim_translation_x(int height, int width, double center_i, double base, double accel);
/// V(i,j) = (j - center_j) * accel + base, U = 0.
FlowField sim_translation_y(int height, int width, double center_j, double base, double accel);
/// Radial field t * d^zeta * (i - i0, j - j0) about the vanishing point.
FlowField sim_translation_z(int height, int width, double center_i, double center_j, double speed, double zeta);
/// Tangential field of magnitude 2 d tan(omega/2); omega > 0 turns clockwise
/// as displayed (rows grow downward).
FlowField sim_rotation_z(int height, int width, double center_i, double center_j, double omega);

/// Canonical representative of {m, -m}: u >= 0, and v >= 0 when u == 0.
Motion fold(Motion m);

SimDraw sample_draw(int height, int width, const SimConfig& cfg, Rng& rng);

/// Sum of the enabled components in the continuous domain.
FlowField render_draw(const SimDraw& draw, int height, int width);

struct SimResult {
  MotionFlow flow;
  FlowField continuous;  // after rescaling, before rounding
  SimDraw draw;
  double scale = 1.0;    // rescale applied to fit the domain
};

/// Samples, sums, rescales to fit the domain, rounds, clamps and folds.
SimResult simulate_flow_detailed(int height, int width, const FlowDomain& dom, const SimConfig& cfg, Rng& rng);

inline MotionFlow simulate_flow(int height, int width, const FlowDomain& dom, const SimConfig& cfg, Rng& rng) {
  return simulate_flow_detailed(height, width, dom, cfg, rng).flow;
}

/// Draw `index` of a seeded sequence, on its own generator stream.
MotionFlow simulate_flow_indexed(int height, int width, const FlowDomain& dom, const SimConfig& cfg,
                                 std::uint64_t index);

}  // namespace mfd
