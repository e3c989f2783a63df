#include "mfd/deconv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfd/blur.hpp"
#include "mfd/parallel.hpp"

namespace mfd {

namespace {

// g(w) = w^alpha + beta (w - a)^2 on w >= 0.
double shrink_energy(double w, double a, double alpha, double beta) {
  return (w == 0.0 ? 0.0 : std::pow(w, alpha)) + beta * (w - a) * (w - a);
}

double pick(double w, double a, double alpha, double beta) {
  if (!(w > 0.0) || !std::isfinite(w)) return 0.0;
  return shrink_energy(w, a, alpha, beta) < shrink_energy(0.0, a, alpha, beta) ? w : 0.0;
}

// Largest real root of t^3 + p t + q = 0 when three real roots exist.
double largest_trig_root(double p, double q) {
  const double r = 2.0 * std::sqrt(-p / 3.0);
  const double arg = std::clamp(3.0 * q / (p * r), -1.0, 1.0);
  return r * std::cos(std::acos(arg) / 3.0);
}

// Positive root of m^3 - q m - c = 0 (q, c > 0), Cardano or trigonometric.
double resolvent_root(double q, double c) {
  const double p = -q;
  const double disc = c * c / 4.0 + p * p * p / 27.0;
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    return std::cbrt(c / 2.0 + s) + std::cbrt(c / 2.0 - s);
  }
  return largest_trig_root(p, -c);
}

double shrink_half(double a, double beta) {
  // w = t^2 with t^3 - a t + 1/(4 beta) = 0.
  const double p = -a;
  const double q = 1.0 / (4.0 * beta);
  if (a <= 0.0 || 4.0 * p * p * p + 27.0 * q * q >= 0.0) return 0.0;
  const double t = largest_trig_root(p, q);
  return pick(t * t, a, 0.5, beta);
}

double shrink_two_thirds(double a, double beta) {
  // w = t^3 with t^4 - a t + 1/(3 beta) = 0, solved by Ferrari's method.
  if (a <= 0.0) return 0.0;
  const double q = 1.0 / (3.0 * beta);
  const double m = resolvent_root(q, a * a / 8.0);
  if (!(m > 0.0)) return 0.0;
  const double s = std::sqrt(2.0 * m);
  const double disc = -2.0 * m + 2.0 * a / s;
  if (disc < 0.0) return 0.0;
  const double t = 0.5 * (s + std::sqrt(disc));
  return pick(t * t * t, a, 2.0 / 3.0, beta);
}

}  // namespace

void DeconvConfig::validate() const {
  if (!(lambda > 0.0)) throw ParameterError("deconv: lambda must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("deconv: alpha must lie in (0, 1]");
  if (!(beta0 > 0.0)) throw ParameterError("deconv: beta0 must be > 0");
  if (!(beta_multiplier > 1.0)) throw ParameterError("deconv: beta multiplier must be > 1");
  if (!(beta_max >= beta0)) throw ParameterError("deconv: beta_max must be >= beta0");
  if (!(cg_tol > 0.0)) throw ParameterError("deconv: CG tolerance must be > 0");
  if (cg_max_iters < 1) throw ParameterError("deconv: CG iteration cap must be >= 1");
}

double shrink_newton(double v, double alpha, double beta) {
  const double a = std::abs(v);
  if (a == 0.0) return 0.0;
  if (alpha == 1.0) return std::copysign(std::max(a - 0.5 / beta, 0.0), v);
  // phi(w) = alpha w^(alpha-1) + 2 beta (w - a) is convex on w > 0; its
  // largest root (if any) lies right of the minimizer of phi.
  const auto phi = [&](double w) { return alpha * std::pow(w, alpha - 1.0) + 2.0 * beta * (w - a); };
  const double w_turn = std::pow(alpha * (1.0 - alpha) / (2.0 * beta), 1.0 / (2.0 - alpha));
  if (w_turn >= a || phi(w_turn) > 0.0) return 0.0;
  double w = a;
  for (int it = 0; it < 100; ++it) {
    const double d = alpha * (alpha - 1.0) * std::pow(w, alpha - 2.0) + 2.0 * beta;
    const double step = phi(w) / d;
    w -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, w)) break;
  }
  return std::copysign(pick(w, a, alpha, beta), v);
}

double shrink(double v, double alpha, double beta) {
  const double a = std::abs(v);
  if (alpha == 1.0) return std::copysign(std::max(a - 0.5 / beta, 0.0), v);
  if (alpha == 0.5) return std::copysign(shrink_half(a, beta), v);
  if (std::abs(alpha - 2.0 / 3.0) < 1e-12) return std::copysign(shrink_two_thirds(a, beta), v);
  return shrink_newton(v, alpha, beta);
}

Eigen::SparseMatrix<double, Eigen::RowMajor> gradient_operator(int height, int width) {
  const Eigen::Index n = static_cast<Eigen::Index>(height) * width;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(4 * n));
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const Eigen::Index k = static_cast<Eigen::Index>(r) * width + c;
      if (c + 1 < width) {
        t.emplace_back(k, k + 1, 1.0);
        t.emplace_back(k, k, -1.0);
      }
      if (r + 1 < height) {
        t.emplace_back(n + k, k + width, 1.0);
        t.emplace_back(n + k, k, -1.0);
      }
    }
  Eigen::SparseMatrix<double, Eigen::RowMajor> d(2 * n, n);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

double deconv_objective(const Eigen::SparseMatrix<double, Eigen::RowMajor>& h,
                        const Eigen::SparseMatrix<double, Eigen::RowMajor>& grad, const Vector<double>& y,
                        const Vector<double>& x, double lambda, double alpha) {
  const Vector<double> g = grad * x;
  double prior = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (g[k] != 0.0) prior += std::pow(std::abs(g[k]), alpha);
  return (y - h * x).squaredNorm() + lambda * prior;
}

namespace {

using SparseRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct ChannelResult {
  Vector<double> x;
  std::vector<double> objective;
  std::vector<int> cg_iterations;
};

ChannelResult deblur_channel(const SparseRM& h, const SparseRM& ht, const SparseRM& grad, const SparseRM& grad_t,
                             const Vector<double>& y, const DeconvConfig& cfg) {
  ChannelResult out;
  Vector<double> x = y.cwiseMax(0.0).cwiseMin(1.0);
  double energy = deconv_objective(h, grad, y, x, cfg.lambda, cfg.alpha);
  out.objective.push_back(energy);
  const Vector<double> hty = ht * y;

  for (double beta = cfg.beta0; beta <= cfg.beta_max * (1.0 + 1e-12); beta *= cfg.beta_multiplier) {
    // z-step: per-gradient generalized shrinkage.
    Vector<double> z = grad * x;
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = shrink(z[k], cfg.alpha, beta);

    // x-step: (H^T H + lambda beta D^T D) x = H^T y + lambda beta D^T z.
    const double coupling = cfg.lambda * beta;
    const Vector<double> rhs = hty + coupling * (grad_t * z);
    const auto op = [&](const Vector<double>& v) -> Vector<double> {
      return ht * (h * v) + coupling * (grad_t * (grad * v));
    };
    const CgResult<double> cg = cg_solve<double>(op, rhs, cfg.cg_tol, cfg.cg_max_iters, &x);
    out.cg_iterations.push_back(cg.iterations);

    // Accept the clamped step, or the largest fraction of it that lowers the objective.
    const Vector<double> step = cg.x.cwiseMax(0.0).cwiseMin(1.0) - x;
    double t = 1.0;
    for (int k = 0; k < 30; ++k, t *= 0.5) {
      const Vector<double> trial = x + t * step;
      const double e = deconv_objective(h, grad, y, trial, cfg.lambda, cfg.alpha);
      if (e <= energy) {
        x = trial;
        energy = e;
        break;
      }
    }
    out.objective.push_back(energy);
  }
  out.x = std::move(x);
  return out;
}

}  // namespace

DeblurReport deblur_detailed(const Image& y, const MotionFlow& flow, const DeconvConfig& cfg) {
  cfg.validate();
  if (y.height() != flow.height() || y.width() != flow.width())
    throw ShapeError("deblur: image and flow sizes differ");
  const int hgt = y.height();
  const int wid = y.width();
  const BlurOperator blur(flow);
  const SparseRM h = blur.sparse<double>();
  const SparseRM ht = SparseRM(h.transpose());
  const SparseRM grad = gradient_operator(hgt, wid);
  const SparseRM grad_t = SparseRM(grad.transpose());

  std::vector<Plane<double>> inputs;
  if (cfg.channels == ChannelStrategy::luminance && y.channels() == 3)
    inputs.push_back(y.luminance().plane(0));
  else
    inputs = y.planes();

  std::vector<ChannelResult> results(inputs.size());
  parallel_for(0, static_cast<std::ptrdiff_t>(inputs.size()), [&](std::ptrdiff_t ch) {
    const Vector<double> yv = Eigen::Map<const Vector<double>>(inputs[ch].data(), inputs[ch].size());
    results[ch] = deblur_channel(h, ht, grad, grad_t, yv, cfg);
  });

  DeblurReport report;
  std::vector<Plane<double>> planes;
  for (auto& r : results) {
    Plane<double> p(hgt, wid);
    Eigen::Map<Vector<double>>(p.data(), p.size()) = r.x;
    planes.push_back(std::move(p));
    report.objective.push_back(r.objective);
  }
  if (planes.size() == 1 && y.channels() == 3) {
    // Luminance mode: shift each input channel by the recovered luminance change.
    const Plane<double> delta = planes[0] - inputs[0];
    std::vector<Plane<double>> color;
    for (const auto& p : y.planes()) color.push_back((p + delta).max(0.0).min(1.0));
    planes = std::move(color);
  }
  report.image = Image::from_planes(std::move(planes));
  report.outer_iterations = static_cast<int>(results.front().cg_iterations.size());
  report.cg_iterations.assign(static_cast<std::size_t>(report.outer_iterations), 0);
  for (const auto& r : results)
    for (std::size_t k = 0; k < r.cg_iterations.size(); ++k) report.cg_iterations[k] += r.cg_iterations[k];
  return report;
}

}  // namespace mfd
