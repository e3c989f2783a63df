#include "checks.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "blur_oracle.hpp"
#include "fd_check.hpp"
#include "flowsim_oracle.hpp"
#include "kernel_oracle.hpp"
#include "mfd/blur.hpp"
#include "mfd/flowsim.hpp"
#include "mfd/metrics.hpp"
#include "mfd/net/layers.hpp"
#include "mfd/synth.hpp"
#include "support.hpp"

namespace mfd::checks {

namespace {

using Clock = std::chrono::steady_clock;
using namespace mfd::testing;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double image_dot(const Image& a, const Image& b) {
  double s = 0.0;
  for (int ch = 0; ch < a.channels(); ++ch) s += (a.plane(ch) * b.plane(ch)).sum();
  return s;
}

Eigen::VectorXd flatten(const Plane<double>& p) { return Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()); }

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

}  // namespace

Result operator_check() {
  const auto t0 = Clock::now();
  Result r{1, "blur operator adjoint and dense equivalence", false, {}, 0.0};
  std::mt19937_64 rng(17);
  double worst_adj = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Image x = random_image(16, 16, 1, rng);
    const Image y = random_image(16, 16, 1, rng);
    const MotionFlow flow = random_flow(16, 16, 8, 8, rng);
    const double gap = std::abs(image_dot(apply_blur(x, flow), y) - image_dot(x, apply_adjoint(y, flow)));
    worst_adj = std::max(worst_adj, gap / (std::sqrt(image_dot(x, x)) * std::sqrt(image_dot(y, y))));
  }
  double worst_dense = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const MotionFlow flow = random_flow(12, 12, 8, 8, rng);
    const Image x = random_image(12, 12, 1, rng);
    const Eigen::MatrixXd h = dense_blur_matrix(flow);
    worst_dense = std::max(worst_dense, (h * flatten(x.plane(0)) - flatten(apply_blur(x, flow).plane(0)))
                                            .cwiseAbs()
                                            .maxCoeff());
    worst_dense = std::max(worst_dense, (h.transpose() * flatten(x.plane(0)) -
                                         flatten(apply_adjoint(x, flow).plane(0)))
                                            .cwiseAbs()
                                            .maxCoeff());
  }
  r.seconds = seconds_since(t0);
  r.passed = worst_adj <= 1e-6 && worst_dense <= 1e-10 && r.seconds < 60.0;
  r.detail = fmt("adjoint rel gap %.2e", worst_adj) + fmt(", dense gap %.2e", worst_dense);
  return r;
}

Result kernel_check() {
  const auto t0 = Clock::now();
  Result r{2, "linear kernel suite over dom(8,8)", false, {}, 0.0};
  double mass_gap = 0.0, sym_gap = 0.0, oracle_gap = 0.0;
  bool fold_equal = true;
  for (int u = -8; u <= 8; ++u)
    for (int v = -8; v <= 8; ++v) {
      const LinearKernel k = rasterize_kernel(u, v);
      mass_gap = std::max(mass_gap, std::abs(k.mass() - 1.0));
      for (const auto& t : k.taps) sym_gap = std::max(sym_gap, std::abs(tap_weight(k, -t.di, -t.dj) - t.w));
      fold_equal = fold_equal && k.taps == rasterize_kernel(-u, -v).taps &&
                   k.taps == rasterize_kernel(fold(Motion{u, v})).taps;
      oracle_gap = std::max(oracle_gap, max_oracle_gap(k, subsampled_kernel(u, v, 64 * reference_samples(u, v))));
    }
  const LinearKernel k2 = rasterize_kernel(2, 0);
  const LinearKernel k3 = rasterize_kernel(3, 0);
  double analytic = 0.0;
  for (int di = -1; di <= 1; ++di) {
    analytic = std::max(analytic, std::abs(tap_weight(k2, di, 0) - (di == 0 ? 0.5 : 0.25)));
    analytic = std::max(analytic, std::abs(tap_weight(k3, di, 0) - 1.0 / 3.0));
  }
  analytic = std::max(analytic, max_oracle_gap(k2, subsampled_kernel(2, 0, reference_samples(2, 0))));
  analytic = std::max(analytic, max_oracle_gap(k3, subsampled_kernel(3, 0, reference_samples(3, 0))));
  r.seconds = seconds_since(t0);
  r.passed = mass_gap <= 1e-6 && sym_gap <= 1e-6 && fold_equal && analytic <= 1e-3 && oracle_gap <= 1e-3 &&
             r.seconds < 60.0;
  r.detail = fmt("mass gap %.2e", mass_gap) + fmt(", symmetry gap %.2e", sym_gap) +
             fmt(", analytic gap %.2e", analytic) + fmt(", oracle gap %.2e", oracle_gap) +
             (fold_equal ? "" : ", fold mismatch");
  return r;
}

Result simulation_check() {
  const auto t0 = Clock::now();
  Result r{3, "flow simulation fidelity", false, {}, 0.0};
  const FlowDomain dom(8, 8);
  double closed_gap = 0.0;
  Rng rng(99);
  for (int mask = 1; mask < 16; ++mask) {
    SimConfig cfg = SimConfig::defaults(dom);
    cfg.enable_tx = mask & 1;
    cfg.enable_ty = mask & 2;
    cfg.enable_tz = mask & 4;
    cfg.enable_rz = mask & 8;
    cfg.zero_flow_probability = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
      const SimDraw d = sample_draw(48, 64, cfg, rng);
      const FlowField sum = render_draw(d, 48, 64);
      for (int j = 0; j < 48; ++j)
        for (int i = 0; i < 64; ++i) {
          const auto [u, v] = closed_form(d, i, j);
          closed_gap = std::max({closed_gap, std::abs(sum.u(j, i) - u), std::abs(sum.v(j, i) - v)});
        }
    }
  }
  int outside = 0, flows = 0;
  for (auto [um, vm] : {std::pair{8, 8}, std::pair{3, 5}, std::pair{36, 36}}) {
    const FlowDomain d2(um, vm);
    SimConfig cfg = SimConfig::defaults(d2);
    cfg.t_z = {-0.05, 0.05};
    cfg.omega = {-0.5, 0.5};
    for (int trial = 0; trial < 30; ++trial, ++flows)
      if (!simulate_flow(40, 56, d2, cfg, rng).in_domain(d2)) ++outside;
  }
  bool fold_ok = true;
  for (int u = -8; u <= 8; ++u)
    for (int v = -8; v <= 8; ++v) {
      const Motion f = fold(Motion{u, v});
      fold_ok = fold_ok && fold(f) == f && dom.contains(f) && fold(Motion{-u, -v}) == f &&
                rasterize_kernel(Motion{u, v}).taps == rasterize_kernel(f).taps;
    }
  r.seconds = seconds_since(t0);
  r.passed = closed_gap <= 1e-9 && outside == 0 && fold_ok;
  r.detail = fmt("closed-form gap %.2e", closed_gap) + ", " + std::to_string(outside) + "/" +
             std::to_string(flows) + " flows outside the domain" + (fold_ok ? "" : ", fold property violated");
  return r;
}

Result gradient_check() {
  using namespace mfd::net;
  const auto t0 = Clock::now();
  Result r{4, "finite-difference gradients", false, {}, 0.0};
  Rng rng(1);
  double worst = 0.0;
  for (const bool relu : {false, true})
    for (const int k : {1, 3, 5}) {
      Feature<double> x = random_feature(2, 6, 5, rng);
      Mat<double> w = random_mat(3, 2 * k * k, rng);
      Vec<double> b = random_vec(3, rng);
      const Mat<double> probe = random_mat(3, 30, rng);
      const auto loss = [&] { return dot(conv_forward(x, w, b, k, relu).data, probe); };
      const Feature<double> y = conv_forward(x, w, b, k, relu);
      Mat<double> dw;
      Vec<double> db;
      Feature<double> dx;
      conv_backward(x, y, w, k, relu, probe, dw, db, &dx);
      worst = std::max({worst, max_fd_error(x.data, dx.data, loss), max_fd_error(w, dw, loss),
                        max_fd_error_vec(b, db, loss)});
    }
  {
    Feature<double> x = random_feature(3, 6, 8, rng);
    const Mat<double> probe = random_mat(3, 12, rng);
    std::vector<int> idx;
    const auto loss = [&] {
      std::vector<int> tmp;
      return dot(maxpool_forward(x, tmp).data, probe);
    };
    Feature<double> dy = maxpool_forward(x, idx);
    dy.data = probe;
    Feature<double> dx(3, 6, 8);
    maxpool_backward(dy, idx, dx);
    worst = std::max(worst, max_fd_error(x.data, dx.data, loss));
  }
  for (const int f : {2, 4}) {
    Feature<double> x = random_feature(2, 3, 4, rng);
    Mat<double> w = random_mat(2, 3 * 4 * f * f, rng);
    const Mat<double> probe = random_mat(3, 12L * f * f, rng);
    const auto loss = [&] { return dot(upconv_forward(x, w, f).data, probe); };
    Feature<double> dy = upconv_forward(x, w, f);
    dy.data = probe;
    Mat<double> dw;
    Feature<double> dx;
    upconv_backward(x, w, f, dy, dw, dx);
    worst = std::max({worst, max_fd_error(x.data, dx.data, loss), max_fd_error(w, dw, loss)});
  }
  {
    Feature<double> x = random_feature(3, 4, 4, rng);
    Feature<double> src = random_feature(5, 4, 4, rng);
    Mat<double> w = random_mat(3, 5, rng);
    Vec<double> b = random_vec(3, rng);
    const Mat<double> probe = random_mat(3, 16, rng);
    const auto loss = [&] { return dot(skip_forward(x, src, w, b).data, probe); };
    Mat<double> dw, dsrc;
    Vec<double> db;
    skip_backward(src, w, probe, dw, db, dsrc);
    worst = std::max({worst, max_fd_error(x.data, probe, loss), max_fd_error(src.data, dsrc, loss),
                      max_fd_error(w, dw, loss), max_fd_error_vec(b, db, loss)});
  }
  {
    Mat<double> logits = random_mat(7, 10, rng, 3.0);
    std::vector<int> lu(10), lv(10);
    for (int k = 0; k < 10; ++k) {
      lu[k] = k % 3;
      lv[k] = (3 * k) % 4;
    }
    const auto loss = [&] {
      return softmax_ce<double>(logits, 0, 3, lu, 1.0, nullptr) + softmax_ce<double>(logits, 3, 4, lv, 1.0, nullptr);
    };
    Mat<double> g = Mat<double>::Zero(7, 10);
    softmax_ce(logits, 0, 3, lu, 1.0, &g);
    softmax_ce(logits, 3, 4, lv, 1.0, &g);
    worst = std::max(worst, max_fd_error(logits, g, loss));
  }
  const double layer_worst = worst;

  const FlowDomain dom(8, 8);
  Rng nrng(7);
  const Image y = random_image(16, 16, 3, nrng);
  const MotionFlow m = random_flow(16, 16, 8, 8, nrng);
  NetworkParams<double> p = init_params<double>(toy_arch(dom), 3);
  for (auto& l : p.layers) l.bias = Vec<double>::Random(l.bias.size()) * 0.05;
  const FdOutcome fd = network_fd(p, y, m, LossMode::sum, 16, nrng);
  r.seconds = seconds_since(t0);
  r.passed = layer_worst <= kRelTol && fd.worst <= kRelTol && fd.probes - fd.skipped >= 200 &&
             fd.skipped * 4 <= fd.probes && r.seconds < 300.0;
  r.detail = fmt("layers %.2e", layer_worst) + fmt(", toy network %.2e", fd.worst) + " over " +
             std::to_string(fd.probes - fd.skipped) + " probes (" + std::to_string(fd.skipped) + " across kinks)";
  return r;
}

std::vector<DeblurReport> small_deblur_runs() {
  std::mt19937_64 rng(31);
  Rng srng(31);
  const Image x = synth_scene(24, 24, srng);
  std::vector<DeblurReport> runs;
  for (int trial = 0; trial < 4; ++trial) {
    const MotionFlow flow = random_flow(24, 24, 5, 5, rng);
    const Image y = add_noise(apply_blur(x, flow), {0.01, static_cast<std::uint64_t>(trial)});
    runs.push_back(deblur_detailed(y, flow, DeconvConfig{}));
  }
  return runs;
}

double max_objective_increase(const std::vector<DeblurReport>& runs) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& run : runs)
    for (const auto& obj : run.objective)
      for (std::size_t k = 1; k < obj.size(); ++k) worst = std::max(worst, obj[k] - obj[k - 1]);
  return worst;
}

Result solver_check(double max_rise, std::size_t runs) {
  const auto t0 = Clock::now();
  Result r{7, "conjugate gradient and monotone objective", false, {}, 0.0};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  double cg_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a(8, 8);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = n01(rng);
    const Eigen::MatrixXd spd = a.transpose() * a + Eigen::MatrixXd::Identity(8, 8);
    Vector<double> b(8);
    for (auto& x : b) x = n01(rng);
    const Vector<double> direct = spd.ldlt().solve(b);
    const auto res =
        cg_solve<double>([&](const Vector<double>& v) -> Vector<double> { return spd * v; }, b, 1e-14, 100);
    cg_gap = std::max(cg_gap, (res.x - direct).cwiseAbs().maxCoeff());
  }
  r.seconds = seconds_since(t0);
  r.passed = cg_gap <= 1e-8 && runs > 0 && max_rise <= 1e-8;
  r.detail = fmt("cg gap %.2e", cg_gap) + fmt(", largest objective step %.2e", max_rise) + " over " +
             std::to_string(runs) + " deconvolutions";
  return r;
}

Result metrics_check() {
  const auto t0 = Clock::now();
  Result r{8, "metric analytic cases", false, {}, 0.0};
  const Image zero(8, 8, 3, 0.0);
  const double p0 = psnr(zero, Image(8, 8, 3, 1.0));
  const double p24 = psnr(Image(8, 8, 3, 0.5), Image(8, 8, 3, 0.5 + 16.0 / 255.0));
  MotionFlow gt(5, 7);
  gt.u().setConstant(3);
  gt.v().setConstant(4);
  const double mse = flow_mse(MotionFlow(5, 7), gt);
  std::mt19937_64 rng(2);
  const Image a = random_image(24, 30, 3, rng);
  const double s = ssim(a, a);
  const double gap = std::max({std::abs(p0), std::abs(p24 - 20.0 * std::log10(255.0 / 16.0)),
                               std::abs(mse - 12.5), std::abs(s - 1.0)});
  r.seconds = seconds_since(t0);
  r.passed = gap <= 1e-6 && std::abs(p24 - 24.05) < 5e-3;
  r.detail = fmt("psnr %.6f dB", p0) + fmt(" and %.6f dB", p24) + fmt(", flow mse %.6f", mse) +
             fmt(", ssim(a,a) %.9f", s);
  return r;
}

namespace {

Result solver_check_small() {
  const auto runs = small_deblur_runs();
  return solver_check(max_objective_increase(runs), runs.size());
}

}  // namespace

std::vector<Result> quick_suite() {
  return {operator_check(), kernel_check(),  simulation_check(), gradient_check(),
          solver_check_small(), metrics_check()};
}

std::string format(const Result& r) {
  std::ostringstream os;
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.1f s", r.seconds);
  os << "criterion " << r.criterion << ": " << (r.passed ? "PASS" : "FAIL") << "  " << r.name << " (" << r.detail
     << "; " << secs << ")";
  return os.str();
}

}  // namespace mfd::checks
