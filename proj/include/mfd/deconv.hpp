#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <vector>

#include "mfd/errors.hpp"
#include "mfd/flow.hpp"
#include "mfd/image.hpp"

namespace mfd {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct CgResult {
  Vector<Scalar> x;
  int iterations = 0;
  bool converged = false;
  std::vector<double> residuals;  // ||b - A x_k||, k = 0..iterations
};

/// Conjugate gradients for a symmetric positive definite operator `op`
/// (any callable mapping Vector<Scalar> to Vector<Scalar>). Stops once
/// ||b - A x|| <= tol ||b|| or after max_iters iterations.
template <typename Scalar, typename Op>
CgResult<Scalar> cg_solve(const Op& op, const Vector<Scalar>& b, double tol, int max_iters,
                          const Vector<Scalar>* x0 = nullptr) {
  CgResult<Scalar> res;
  res.x = x0 ? *x0 : Vector<Scalar>::Zero(b.size());
  const double b_norm = b.norm();
  if (!std::isfinite(b_norm)) throw NumericalError("cg: right-hand side is not finite", 0);
  if (b_norm == 0.0) {
    res.x.setZero();
    res.residuals.push_back(0.0);
    res.converged = true;
    return res;
  }
  Vector<Scalar> r = b - op(res.x);
  Vector<Scalar> p = r;
  double rr = r.squaredNorm();
  res.residuals.push_back(std::sqrt(rr));
  if (std::sqrt(rr) <= tol * b_norm) {
    res.converged = true;
    return res;
  }
  for (int k = 1; k <= max_iters; ++k) {
    const Vector<Scalar> ap = op(p);
    const double curvature = p.dot(ap);
    if (!std::isfinite(curvature)) throw NumericalError("cg: non-finite operator output", k);
    if (curvature <= 0.0) throw NumericalError("cg: operator is not positive definite", k);
    const Scalar alpha = Scalar(rr / curvature);
    res.x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    if (!std::isfinite(rr_next)) throw NumericalError("cg: non-finite residual", k);
    res.iterations = k;
    res.residuals.push_back(std::sqrt(rr_next));
    if (std::sqrt(rr_next) <= tol * b_norm) {
      res.converged = true;
      break;
    }
    p = r + Scalar(rr_next / rr) * p;
    rr = rr_next;
  }
  return res;
}

enum class ChannelStrategy { per_channel, luminance };

struct DeconvConfig {
  double alpha = 2.0 / 3.0;  // hyper-Laplacian exponent in (0, 1]
  double lambda = 5e-4;      // prior weight
  double beta0 = 1.0;
  double beta_multiplier = 2.0 * std::sqrt(2.0);
  double beta_max = 256.0;
  double cg_tol = 1e-6;
  int cg_max_iters = 200;
  ChannelStrategy channels = ChannelStrategy::per_channel;

  void validate() const;
  bool operator==(const DeconvConfig&) const = default;
};

/// argmin_z |z|^alpha + beta (z - v)^2. Closed forms for alpha in
/// {1, 2/3, 1/2}; Newton iteration otherwise.
double shrink(double v, double alpha, double beta);
/// Newton-only solver for the same problem, used for arbitrary alpha.
double shrink_newton(double v, double alpha, double beta);

/// Forward differences with replicate boundary, stacked [Dx; Dy] (2N x N)
/// for an height x width plane in row-major order.
Eigen::SparseMatrix<double, Eigen::RowMajor> gradient_operator(int height, int width);

/// ||y - H x||^2 + lambda * sum |D x|^alpha for one channel.
double deconv_objective(const Eigen::SparseMatrix<double, Eigen::RowMajor>& h,
                        const Eigen::SparseMatrix<double, Eigen::RowMajor>& grad, const Vector<double>& y,
                        const Vector<double>& x, double lambda, double alpha);

struct DeblurReport {
  Image image;
  /// Objective per channel: entry 0 is the initializer (the blurred input),
  /// then one entry per outer iteration.
  std::vector<std::vector<double>> objective;
  std::vector<int> cg_iterations;  // per outer iteration, summed over channels
  int outer_iterations = 0;
};

/// Non-blind deconvolution by half-quadratic splitting on gradient
/// auxiliaries. Iterates that would raise the objective are pulled back
/// toward the previous iterate, so the recorded objective never increases.
DeblurReport deblur_detailed(const Image& y, const MotionFlow& flow, const DeconvConfig& cfg);

inline Image deblur(const Image& y, const MotionFlow& flow, const DeconvConfig& cfg) {
  return deblur_detailed(y, flow, cfg).image;
}

}  // namespace mfd
