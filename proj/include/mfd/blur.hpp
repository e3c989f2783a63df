#pragma once

#include <Eigen/SparseCore>

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <vector>

#include "mfd/flow.hpp"
#include "mfd/image.hpp"

namespace mfd {

/// One point-spread-function tap: Y(row, col) += w * X(row + dj, col + di).
struct KernelTap {
  int di = 0;  // column offset
  int dj = 0;  // row offset
  double w = 0.0;
  bool operator==(const KernelTap&) const = default;
};

/// Line point-spread function of a single motion vector. Taps are sorted by
/// (dj, di), strictly positive, and sum to one.
struct LinearKernel {
  std::vector<KernelTap> taps;

  int radius() const;
  double mass() const;
};

/// Rasterizes the uniform unit-mass line density on the segment from -m/2 to
/// +m/2. Each tap receives the exact length of the segment inside its unit
/// pixel cell, normalized by the total length; taps under 1e-8 are pruned
/// and the rest renormalized. m = (0,0) yields the identity impulse.
LinearKernel rasterize_kernel(double u, double v);
inline LinearKernel rasterize_kernel(Motion m) { return rasterize_kernel(m.u, m.v); }

/// Memoized kernels keyed by integer motion. Safe for concurrent use.
class KernelCache {
 public:
  std::shared_ptr<const LinearKernel> get(Motion m);
  std::size_t size() const;

  /// Process-wide cache used by the free blur functions.
  static KernelCache& shared();

 private:
  mutable std::shared_mutex mutex_;
  std::map<Motion, std::shared_ptr<const LinearKernel>> kernels_;
};

/// Heterogeneous blur H(K) for one flow map, with replicate-edge boundaries.
/// Pixel (row, col) maps to linear index row * width + col.
class BlurOperator {
 public:
  explicit BlurOperator(const MotionFlow& flow, KernelCache& cache = KernelCache::shared());

  int height() const { return height_; }
  int width() const { return width_; }

  /// Y = H X (gather).
  template <typename Scalar>
  Plane<Scalar> apply(const Plane<Scalar>& x) const;

  /// X = H^T Y (scatter through the same clamped indices).
  template <typename Scalar>
  Plane<Scalar> adjoint(const Plane<Scalar>& y) const;

  /// H as a row-major sparse matrix; duplicate clamped taps are summed.
  template <typename Scalar>
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> sparse() const;

 private:
  void check(const auto& p) const {
    if (p.rows() != height_ || p.cols() != width_) throw ShapeError("blur operator: plane size does not match flow");
  }
  int clamp_row(int r) const { return r < 0 ? 0 : (r >= height_ ? height_ - 1 : r); }
  int clamp_col(int c) const { return c < 0 ? 0 : (c >= width_ ? width_ - 1 : c); }

  int height_;
  int width_;
  std::vector<const LinearKernel*> per_pixel_;
  std::vector<std::shared_ptr<const LinearKernel>> owned_;
};

template <typename Scalar>
Plane<Scalar> BlurOperator::apply(const Plane<Scalar>& x) const {
  check(x);
  Plane<Scalar> y(height_, width_);
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) {
      Scalar acc(0);
      for (const auto& t : per_pixel_[static_cast<std::size_t>(r) * width_ + c]->taps)
        acc += Scalar(t.w) * x(clamp_row(r + t.dj), clamp_col(c + t.di));
      y(r, c) = acc;
    }
  return y;
}

template <typename Scalar>
Plane<Scalar> BlurOperator::adjoint(const Plane<Scalar>& y) const {
  check(y);
  Plane<Scalar> x = Plane<Scalar>::Zero(height_, width_);
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) {
      const Scalar val = y(r, c);
      for (const auto& t : per_pixel_[static_cast<std::size_t>(r) * width_ + c]->taps)
        x(clamp_row(r + t.dj), clamp_col(c + t.di)) += Scalar(t.w) * val;
    }
  return x;
}

template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor> BlurOperator::sparse() const {
  std::vector<Eigen::Triplet<Scalar>> triplets;
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) {
      const int row = r * width_ + c;
      for (const auto& t : per_pixel_[static_cast<std::size_t>(row)]->taps)
        triplets.emplace_back(row, clamp_row(r + t.dj) * width_ + clamp_col(c + t.di), Scalar(t.w));
    }
  const Eigen::Index n = static_cast<Eigen::Index>(height_) * width_;
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> h(n, n);
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

/// Per-channel heterogeneous blur Y = H(K) X.
Image apply_blur(const Image& x, const MotionFlow& flow);

/// Exact adjoint H(K)^T of apply_blur.
Image apply_adjoint(const Image& y, const MotionFlow& flow);

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Adds i.i.d. Gaussian noise from a generator seeded with spec.seed and
/// clamps to [0,1].
Image add_noise(const Image& y, const NoiseSpec& spec);

}  // namespace mfd
