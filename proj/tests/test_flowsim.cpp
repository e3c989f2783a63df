#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "mfd/blur.hpp"
#include "mfd/flowsim.hpp"
#include "flowsim_oracle.hpp"

using namespace mfd;

namespace {

SimConfig only(SimConfig cfg, bool tx, bool ty, bool tz, bool rz) {
  cfg.enable_tx = tx;
  cfg.enable_ty = ty;
  cfg.enable_tz = tz;
  cfg.enable_rz = rz;
  cfg.zero_flow_probability = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("translation along x") {
  SUBCASE("no acceleration gives a constant field") {
    const FlowField f = sim_translation_x(8, 9, 3.5, 5.0, 0.0);
    CHECK((f.u == 5.0).all());
    CHECK((f.v == 0.0).all());
  }
  SUBCASE("acceleration") {
    const FlowField f = sim_translation_x(4, 130, 10.0, 2.0, 0.01);
    CHECK(f.u(2, 110) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.u(0, 10) == 2.0);
    CHECK((f.v == 0.0).all());
  }
  SUBCASE("y translation mirrors x") {
    const FlowField f = sim_translation_y(130, 4, 10.0, 2.0, 0.01);
    CHECK(f.v(110, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.v(10, 3) == 2.0);
    CHECK((f.u == 0.0).all());
  }
}

TEST_CASE("translation along z") {
  const FlowField f = sim_translation_z(41, 41, 20.0, 20.0, 0.01, 1.0);
  CHECK(f.u(20, 20) == 0.0);
  CHECK(f.v(20, 20) == 0.0);
  CHECK(f.u(20, 30) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.v(20, 30) == doctest::Approx(0.0));
  // Rotating the offset by 90 degrees rotates the vector.
  const FlowField g = sim_translation_z(41, 41, 20.0, 20.0, 0.003, 1.1);
  for (auto [di, dj] : {std::pair{7, 3}, std::pair{-5, 11}, std::pair{12, -4}}) {
    // (di, dj) -> (-dj, di)
    const double u0 = g.u(20 + dj, 20 + di);
    const double v0 = g.v(20 + dj, 20 + di);
    CHECK(g.u(20 + di, 20 - dj) == doctest::Approx(-v0).epsilon(1e-12));
    CHECK(g.v(20 + di, 20 - dj) == doctest::Approx(u0).epsilon(1e-12));
  }
}

TEST_CASE("rotation about z") {
  SUBCASE("center is still") {
    const FlowField f = sim_rotation_z(21, 21, 10.0, 10.0, 0.2);
    CHECK(f.u(10, 10) == 0.0);
    CHECK(f.v(10, 10) == 0.0);
  }
  SUBCASE("magnitude") {
    const FlowField f = sim_rotation_z(21, 31, 10.0, 10.0, 0.2);
    const double s = std::hypot(f.u(10, 20), f.v(10, 20));
    CHECK(s == doctest::Approx(2.0 * 10.0 * std::tan(0.1)).epsilon(1e-12));
    CHECK(s == doctest::Approx(2.00669).epsilon(1e-5));
  }
  SUBCASE("vectors are orthogonal to the radius") {
    const FlowField f = sim_rotation_z(37, 29, 11.3, 17.8, -0.4);
    for (int j = 0; j < 37; ++j)
      for (int i = 0; i < 29; ++i) {
        const double di = i - 11.3;
        const double dj = j - 17.8;
        const double s = std::hypot(f.u(j, i), f.v(j, i));
        CHECK(std::abs(f.u(j, i) * di + f.v(j, i) * dj) <= 1e-9 * s * std::hypot(di, dj) + 1e-300);
      }
  }
  SUBCASE("positive omega turns clockwise as displayed") {
    const FlowField f = sim_rotation_z(21, 21, 10.0, 10.0, 0.3);
    CHECK(f.v(10, 15) > 0.0);  // right of center moves down
    CHECK(f.u(15, 10) < 0.0);  // below center moves left
  }
  SUBCASE("invalid omega") { CHECK_THROWS_AS(sim_rotation_z(4, 4, 1, 1, std::numbers::pi), ParameterError); }
}

TEST_CASE("fold") {
  CHECK(fold({-3, 2}) == Motion{3, -2});
  CHECK(fold({4, -1}) == Motion{4, -1});
  CHECK(fold({0, -5}) == Motion{0, 5});
  CHECK(fold({0, 0}) == Motion{0, 0});
}

TEST_CASE("fold properties over dom(8,8)") {
  const FlowDomain dom(8, 8);
  for (int u = -8; u <= 8; ++u)
    for (int v = -8; v <= 8; ++v) {
      const Motion m{u, v};
      const Motion f = fold(m);
      CHECK(fold(f) == f);
      CHECK(dom.contains(f));
      CHECK(fold(Motion{-u, -v}) == f);
      CHECK(rasterize_kernel(m).taps == rasterize_kernel(f).taps);
    }
}

TEST_CASE("every component matches its closed form") {
  const FlowDomain dom(8, 8);
  SimConfig cfg = SimConfig::defaults(dom);
  cfg.zero_flow_probability = 0.0;
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const SimDraw d = sample_draw(48, 64, cfg, rng);
    const FlowField sum = render_draw(d, 48, 64);
    for (int j = 0; j < 48; ++j)
      for (int i = 0; i < 64; ++i) {
        const auto [u, v] = mfd::testing::closed_form(d, i, j);
        CHECK(std::abs(sum.u(j, i) - u) <= 1e-9);
        CHECK(std::abs(sum.v(j, i) - v) <= 1e-9);
      }
  }
}

TEST_CASE("simulated flows stay in the domain") {
  for (auto [um, vm] : {std::pair{8, 8}, std::pair{3, 5}, std::pair{36, 36}}) {
    const FlowDomain dom(um, vm);
    SimConfig cfg = SimConfig::defaults(dom);
    cfg.t_z = {-0.05, 0.05};  // large radial motions force rescaling
    cfg.omega = {-0.5, 0.5};
    Rng rng(um * 100 + vm);
    for (int trial = 0; trial < 30; ++trial) {
      const SimResult r = simulate_flow_detailed(40, 56, dom, cfg, rng);
      CHECK(r.flow.in_domain(dom));
      CHECK(r.scale <= 1.0);
      CHECK(r.scale > 0.0);
    }
  }
}

TEST_CASE("all components disabled gives the zero flow") {
  const FlowDomain dom(8, 8);
  Rng rng(1);
  const MotionFlow f = simulate_flow(16, 16, dom, only(SimConfig::defaults(dom), false, false, false, false), rng);
  CHECK(f == MotionFlow(16, 16));
}

TEST_CASE("zero-flow probability one always emits the zero flow") {
  const FlowDomain dom(8, 8);
  SimConfig cfg = SimConfig::defaults(dom);
  cfg.zero_flow_probability = 1.0;
  Rng rng(1);
  for (int k = 0; k < 5; ++k) CHECK(simulate_flow(16, 16, dom, cfg, rng) == MotionFlow(16, 16));
}

TEST_CASE("centered rotation is antisymmetric before folding") {
  const FlowDomain dom(8, 8);
  SimConfig cfg = only(SimConfig::defaults(dom), false, false, false, true);
  cfg.center = {0.5, 0.5};
  cfg.omega = {0.1, 0.1};
  Rng rng(4);
  const SimResult r = simulate_flow_detailed(33, 33, dom, cfg, rng);
  CHECK((r.flow.u() >= 0).all());
  CHECK(std::abs(r.continuous.u.mean()) < 1e-9);
  CHECK(std::abs(r.continuous.v.mean()) < 1e-9);
  // Rounded but unfolded field keeps a zero mean.
  long su = 0;
  long sv = 0;
  for (int j = 0; j < 33; ++j)
    for (int i = 0; i < 33; ++i) {
      su += std::lround(r.continuous.u(j, i));
      sv += std::lround(r.continuous.v(j, i));
    }
  CHECK(su == 0);
  CHECK(sv == 0);
}

TEST_CASE("simulation is deterministic and varied") {
  const FlowDomain dom(8, 8);
  SimConfig cfg = SimConfig::defaults(dom);
  cfg.seed = 1234;
  CHECK(simulate_flow_indexed(64, 64, dom, cfg, 7) == simulate_flow_indexed(64, 64, dom, cfg, 7));
  cfg.zero_flow_probability = 0.0;
  std::vector<MotionFlow> draws;
  for (std::uint64_t k = 0; k < 100; ++k) draws.push_back(simulate_flow_indexed(64, 64, dom, cfg, k));
  int collisions = 0;
  for (std::size_t a = 0; a < draws.size(); ++a)
    for (std::size_t b = a + 1; b < draws.size(); ++b) collisions += draws[a] == draws[b];
  CHECK(collisions == 0);
}

TEST_CASE("summed field is Lipschitz with the analytic constant") {
  const FlowDomain dom(8, 8);
  SimConfig cfg = SimConfig::defaults(dom);
  cfg.zero_flow_probability = 0.0;
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const int h = 48;
    const int w = 64;
    const SimDraw d = sample_draw(h, w, cfg, rng);
    const FlowField f = render_draw(d, h, w);
    double max_dist = 0.0;
    for (auto [ci, cj] : {std::pair{0.0, 0.0}, std::pair{w - 1.0, 0.0}, std::pair{0.0, h - 1.0}, std::pair{w - 1.0, h - 1.0}})
      max_dist = std::max(max_dist, std::hypot(ci - d.tz_i, cj - d.tz_j));
    const double bound = std::abs(d.tx_r) + std::abs(d.ty_r) +
                         std::abs(d.tz_t) * (1.0 + d.tz_zeta) * std::pow(max_dist, d.tz_zeta) +
                         2.0 * std::tan(std::abs(d.rz_omega) / 2.0);
    const double du_i = (f.u.rightCols(w - 1) - f.u.leftCols(w - 1)).abs().maxCoeff();
    const double dv_i = (f.v.rightCols(w - 1) - f.v.leftCols(w - 1)).abs().maxCoeff();
    const double du_j = (f.u.bottomRows(h - 1) - f.u.topRows(h - 1)).abs().maxCoeff();
    const double dv_j = (f.v.bottomRows(h - 1) - f.v.topRows(h - 1)).abs().maxCoeff();
    CHECK(std::max({du_i, dv_i, du_j, dv_j}) <= bound + 1e-12);
  }
}

TEST_CASE("config validation") {
  const FlowDomain dom(8, 8);
  SimConfig cfg = SimConfig::defaults(dom);
  CHECK_NOTHROW(cfg.validate(dom, 32, 32));
  SimConfig bad = cfg;
  bad.t_x = {2.0, 1.0};
  CHECK_THROWS_AS(bad.validate(dom, 32, 32), ParameterError);
  bad = cfg;
  bad.omega = {-4.0, 0.0};
  CHECK_THROWS_AS(bad.validate(dom, 32, 32), ParameterError);
  bad = cfg;
  bad.zero_flow_probability = 1.5;
  CHECK_THROWS_AS(bad.validate(dom, 32, 32), ParameterError);
  bad = cfg;
  bad.center = {-0.1, 0.5};
  CHECK_THROWS_AS(bad.validate(dom, 32, 32), ParameterError);
}

TEST_CASE("config json round trip and strictness") {
  const FlowDomain dom(8, 8);
  SimConfig cfg = SimConfig::defaults(dom);
  cfg.seed = 42;
  cfg.enable_tz = false;
  cfg.omega = {-0.01, 0.02};
  const nlohmann::json j = cfg;
  CHECK(sim_config_from_json(j, dom) == cfg);
  CHECK(nlohmann::json(sim_config_from_json(j, dom)) == j);
  CHECK_THROWS_AS(sim_config_from_json({{"bogus", 1}}, dom), ParameterError);
  CHECK_THROWS_AS(sim_config_from_json({{"enable", {{"xx", true}}}}, dom), ParameterError);
  CHECK(sim_config_from_json(nlohmann::json::object(), dom) == SimConfig::defaults(dom));
}
