#include "mfd/flowsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace mfd {

namespace {

void check_range(const Range& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) throw ParameterError(std::string(name) + ": range must be finite");
  if (r.lo > r.hi) throw ParameterError(std::string(name) + ": lo > hi");
}

double draw(const Range& r, Rng& rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

Range range_from(const nlohmann::json& j, const char* key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParameterError(std::string("sim.") + key + ": expected [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

SimConfig SimConfig::defaults(const FlowDomain& dom) {
  SimConfig cfg;
  cfg.t_x = {-dom.u_max() / 2.0, dom.u_max() / 2.0};
  cfg.t_y = {-dom.v_max() / 2.0, dom.v_max() / 2.0};
  cfg.r_x = {-0.005, 0.005};
  cfg.r_y = {-0.005, 0.005};
  cfg.t_z = {-0.005, 0.005};
  cfg.zeta = {0.8, 1.2};
  cfg.omega = {-0.05, 0.05};
  return cfg;
}

void SimConfig::validate(const FlowDomain& dom, int height, int width) const {
  (void)dom;
  if (height < 1 || width < 1) throw ParameterError("simulation size must be positive");
  check_range(t_x, "t_x");
  check_range(r_x, "r_x");
  check_range(t_y, "t_y");
  check_range(r_y, "r_y");
  check_range(t_z, "t_z");
  check_range(zeta, "zeta");
  check_range(omega, "omega");
  check_range(center, "center");
  if (std::abs(omega.lo) >= std::numbers::pi || std::abs(omega.hi) >= std::numbers::pi)
    throw ParameterError("omega: |omega| must be < pi");
  if (center.lo < 0.0 || center.hi > 1.0) throw ParameterError("center: fractions must lie in [0,1]");
  if (!(zero_flow_probability >= 0.0 && zero_flow_probability <= 1.0))
    throw ParameterError("zero_flow_probability must lie in [0,1]");
}

void to_json(nlohmann::json& j, const SimConfig& cfg) {
  j = nlohmann::json{{"t_x", range_json(cfg.t_x)},
                     {"r_x", range_json(cfg.r_x)},
                     {"t_y", range_json(cfg.t_y)},
                     {"r_y", range_json(cfg.r_y)},
                     {"t_z", range_json(cfg.t_z)},
                     {"zeta", range_json(cfg.zeta)},
                     {"omega", range_json(cfg.omega)},
                     {"center", range_json(cfg.center)},
                     {"enable", {{"tx", cfg.enable_tx}, {"ty", cfg.enable_ty}, {"tz", cfg.enable_tz}, {"rz", cfg.enable_rz}}},
                     {"zero_flow_probability", cfg.zero_flow_probability},
                     {"seed", cfg.seed}};
}

SimConfig sim_config_from_json(const nlohmann::json& j, const FlowDomain& dom) {
  if (!j.is_object()) throw ParameterError("sim: expected an object");
  SimConfig cfg = SimConfig::defaults(dom);
  const std::pair<const char*, Range SimConfig::*> ranges[] = {
      {"t_x", &SimConfig::t_x}, {"r_x", &SimConfig::r_x},   {"t_y", &SimConfig::t_y},
      {"r_y", &SimConfig::r_y}, {"t_z", &SimConfig::t_z},   {"zeta", &SimConfig::zeta},
      {"omega", &SimConfig::omega}, {"center", &SimConfig::center}};
  for (const auto& [key, value] : j.items()) {
    bool handled = false;
    for (const auto& [name, member] : ranges)
      if (key == name) {
        cfg.*member = range_from(value, name);
        handled = true;
      }
    if (handled) continue;
    if (key == "enable") {
      if (!value.is_object()) throw ParameterError("sim.enable: expected an object");
      for (const auto& [flag, on] : value.items()) {
        if (!on.is_boolean()) throw ParameterError("sim.enable." + flag + ": expected a boolean");
        if (flag == "tx") cfg.enable_tx = on;
        else if (flag == "ty") cfg.enable_ty = on;
        else if (flag == "tz") cfg.enable_tz = on;
        else if (flag == "rz") cfg.enable_rz = on;
        else throw ParameterError("sim.enable: unknown key \"" + flag + "\"");
      }
    } else if (key == "zero_flow_probability") {
      if (!value.is_number()) throw ParameterError("sim.zero_flow_probability: expected a number");
      cfg.zero_flow_probability = value.get<double>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ParameterError("sim.seed: expected an unsigned integer");
      cfg.seed = value.get<std::uint64_t>();
    } else {
      throw ParameterError("sim: unknown key \"" + key + "\"");
    }
  }
  return cfg;
}

nlohmann::json to_json(const SimDraw& d) {
  nlohmann::json j{{"zero", d.zero}};
  if (d.tx) j["tx"] = {{"center_i", d.tx_i}, {"base", d.tx_t}, {"accel", d.tx_r}};
  if (d.ty) j["ty"] = {{"center_j", d.ty_j}, {"base", d.ty_t}, {"accel", d.ty_r}};
  if (d.tz) j["tz"] = {{"center_i", d.tz_i}, {"center_j", d.tz_j}, {"speed", d.tz_t}, {"zeta", d.tz_zeta}};
  if (d.rz) j["rz"] = {{"center_i", d.rz_i}, {"center_j", d.rz_j}, {"omega", d.rz_omega}};
  return j;
}

FlowField sim_translation_x(int height, int width, double center_i, double base, double accel) {
  FlowField f(height, width);
  for (int i = 0; i < width; ++i) f.u.col(i).setConstant((i - center_i) * accel + base);
  return f;
}

FlowField sim_translation_y(int height, int width, double center_j, double base, double accel) {
  FlowField f(height, width);
  for (int j = 0; j < height; ++j) f.v.row(j).setConstant((j - center_j) * accel + base);
  return f;
}

FlowField sim_translation_z(int height, int width, double center_i, double center_j, double speed, double zeta) {
  FlowField f(height, width);
  for (int j = 0; j < height; ++j)
    for (int i = 0; i < width; ++i) {
      const double di = i - center_i;
      const double dj = j - center_j;
      const double d = std::hypot(di, dj);
      const double gain = d == 0.0 ? 0.0 : speed * std::pow(d, zeta);
      f.u(j, i) = gain * di;
      f.v(j, i) = gain * dj;
    }
  return f;
}

FlowField sim_rotation_z(int height, int width, double center_i, double center_j, double omega) {
  if (!(std::abs(omega) < std::numbers::pi)) throw ParameterError("rotation: |omega| must be < pi");
  FlowField f(height, width);
  const double k = 2.0 * std::tan(omega / 2.0);
  for (int j = 0; j < height; ++j)
    for (int i = 0; i < width; ++i) {
      const double di = i - center_i;
      const double dj = j - center_j;
      const double s = k * std::hypot(di, dj);
      const double theta = std::atan2(dj, di);
      f.u(j, i) = s * std::cos(theta + std::numbers::pi / 2);
      f.v(j, i) = s * std::sin(theta + std::numbers::pi / 2);
    }
  return f;
}

Motion fold(Motion m) {
  if (m.u < 0 || (m.u == 0 && m.v < 0)) return {-m.u, -m.v};
  return m;
}

SimDraw sample_draw(int height, int width, const SimConfig& cfg, Rng& rng) {
  SimDraw d;
  const double zero_roll = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto ci = [&] { return draw(cfg.center, rng) * (width - 1); };
  const auto cj = [&] { return draw(cfg.center, rng) * (height - 1); };
  // Parameters are always drawn so the stream layout does not depend on flags.
  d.tx_i = ci();
  d.tx_t = draw(cfg.t_x, rng);
  d.tx_r = draw(cfg.r_x, rng);
  d.ty_j = cj();
  d.ty_t = draw(cfg.t_y, rng);
  d.ty_r = draw(cfg.r_y, rng);
  d.tz_i = ci();
  d.tz_j = cj();
  d.tz_t = draw(cfg.t_z, rng);
  d.tz_zeta = draw(cfg.zeta, rng);
  d.rz_i = ci();
  d.rz_j = cj();
  d.rz_omega = draw(cfg.omega, rng);
  d.zero = zero_roll < cfg.zero_flow_probability;
  d.tx = cfg.enable_tx && !d.zero;
  d.ty = cfg.enable_ty && !d.zero;
  d.tz = cfg.enable_tz && !d.zero;
  d.rz = cfg.enable_rz && !d.zero;
  return d;
}

FlowField render_draw(const SimDraw& d, int height, int width) {
  FlowField sum(height, width);
  if (d.tx) sum += sim_translation_x(height, width, d.tx_i, d.tx_t, d.tx_r);
  if (d.ty) sum += sim_translation_y(height, width, d.ty_j, d.ty_t, d.ty_r);
  if (d.tz) sum += sim_translation_z(height, width, d.tz_i, d.tz_j, d.tz_t, d.tz_zeta);
  if (d.rz) sum += sim_rotation_z(height, width, d.rz_i, d.rz_j, d.rz_omega);
  return sum;
}

SimResult simulate_flow_detailed(int height, int width, const FlowDomain& dom, const SimConfig& cfg, Rng& rng) {
  cfg.validate(dom, height, width);
  SimResult res;
  res.draw = sample_draw(height, width, cfg, rng);
  res.continuous = render_draw(res.draw, height, width);

  const double max_u = res.continuous.u.abs().maxCoeff();
  const double max_v = res.continuous.v.abs().maxCoeff();
  if (max_u > dom.u_max()) res.scale = std::min(res.scale, dom.u_max() / max_u);
  if (max_v > dom.v_max()) res.scale = std::min(res.scale, dom.v_max() / max_v);
  if (res.scale < 1.0) {
    res.continuous.u *= res.scale;
    res.continuous.v *= res.scale;
  }

  res.flow = MotionFlow(height, width);
  for (int j = 0; j < height; ++j)
    for (int i = 0; i < width; ++i) {
      const int u = std::clamp(static_cast<int>(std::lround(res.continuous.u(j, i))), -dom.u_max(), dom.u_max());
      const int v = std::clamp(static_cast<int>(std::lround(res.continuous.v(j, i))), -dom.v_max(), dom.v_max());
      res.flow.set(j, i, fold({u, v}));
    }
  return res;
}

MotionFlow simulate_flow_indexed(int height, int width, const FlowDomain& dom, const SimConfig& cfg,
                                 std::uint64_t index) {
  Rng rng(derive_seed(cfg.seed, {index}));
  return simulate_flow(height, width, dom, cfg, rng);
}

}  // namespace mfd
