#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mfd/errors.hpp"

namespace mfd {

/// One channel of a raster, rows = image height, cols = image width.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// H x W x C raster. Samples live in [0,1]; storage is planar (one Plane per
/// channel) and interleaved views are produced only at the I/O boundary.
///
/// Pixel addressing is (row, col). In the motion model the horizontal index
/// i is the column and the vertical index j is the row, growing downward.
template <typename Scalar>
class ImageT {
 public:
  using scalar_type = Scalar;

  ImageT() = default;

  ImageT(int height, int width, int channels, Scalar fill = Scalar(0)) {
    if (height < 1 || width < 1) throw ShapeError("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw ShapeError("image must have 1 or 3 channels");
    planes_.assign(static_cast<std::size_t>(channels), Plane<Scalar>::Constant(height, width, fill));
  }

  /// Builds an image from per-channel planes of equal size.
  static ImageT from_planes(std::vector<Plane<Scalar>> planes) {
    if (planes.size() != 1 && planes.size() != 3) throw ShapeError("image must have 1 or 3 channels");
    for (const auto& p : planes) {
      if (p.rows() < 1 || p.cols() < 1) throw ShapeError("image dimensions must be positive");
      if (p.rows() != planes.front().rows() || p.cols() != planes.front().cols())
        throw ShapeError("channel planes differ in size");
    }
    ImageT img;
    img.planes_ = std::move(planes);
    return img;
  }

  /// Builds an image from row-major, channel-interleaved samples.
  static ImageT from_interleaved(int height, int width, int channels, const std::vector<Scalar>& data) {
    ImageT img(height, width, channels);
    if (data.size() != static_cast<std::size_t>(height) * width * channels)
      throw ShapeError("interleaved buffer has wrong size");
    std::size_t k = 0;
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        for (int ch = 0; ch < channels; ++ch) img.planes_[ch](r, c) = data[k++];
    return img;
  }

  std::vector<Scalar> interleaved() const {
    std::vector<Scalar> out;
    out.reserve(static_cast<std::size_t>(height()) * width() * channels());
    for (int r = 0; r < height(); ++r)
      for (int c = 0; c < width(); ++c)
        for (int ch = 0; ch < channels(); ++ch) out.push_back(planes_[ch](r, c));
    return out;
  }

  int height() const { return planes_.empty() ? 0 : static_cast<int>(planes_.front().rows()); }
  int width() const { return planes_.empty() ? 0 : static_cast<int>(planes_.front().cols()); }
  int channels() const { return static_cast<int>(planes_.size()); }
  bool empty() const { return planes_.empty(); }

  Plane<Scalar>& plane(int ch) { return planes_.at(static_cast<std::size_t>(ch)); }
  const Plane<Scalar>& plane(int ch) const { return planes_.at(static_cast<std::size_t>(ch)); }
  std::vector<Plane<Scalar>>& planes() { return planes_; }
  const std::vector<Plane<Scalar>>& planes() const { return planes_; }

  Scalar& operator()(int row, int col, int ch = 0) { return planes_[ch](row, col); }
  Scalar operator()(int row, int col, int ch = 0) const { return planes_[ch](row, col); }

  bool same_shape(const ImageT& o) const {
    return height() == o.height() && width() == o.width() && channels() == o.channels();
  }

  /// True when every sample is finite and inside [0,1].
  bool is_valid() const {
    if (planes_.empty()) return false;
    for (const auto& p : planes_)
      if (!p.allFinite() || (p < Scalar(0)).any() || (p > Scalar(1)).any()) return false;
    return true;
  }

  ImageT clamped() const {
    ImageT out = *this;
    for (auto& p : out.planes_) p = p.max(Scalar(0)).min(Scalar(1));
    return out;
  }

  template <typename Other>
  ImageT<Other> cast() const {
    std::vector<Plane<Other>> ps;
    ps.reserve(planes_.size());
    for (const auto& p : planes_) ps.push_back(p.template cast<Other>());
    return ImageT<Other>::from_planes(std::move(ps));
  }

  /// Channel mean as a single-channel image.
  ImageT luminance() const {
    if (channels() == 1) return *this;
    Plane<Scalar> acc = planes_[0];
    for (std::size_t c = 1; c < planes_.size(); ++c) acc += planes_[c];
    acc /= Scalar(planes_.size());
    return from_planes({std::move(acc)});
  }

  /// Sub-rectangle copy.
  ImageT crop(int row0, int col0, int height, int width) const {
    if (row0 < 0 || col0 < 0 || height < 1 || width < 1 || row0 + height > this->height() ||
        col0 + width > this->width())
      throw ShapeError("crop rectangle outside image");
    std::vector<Plane<Scalar>> ps;
    for (const auto& p : planes_) ps.emplace_back(p.block(row0, col0, height, width));
    return from_planes(std::move(ps));
  }

 private:
  std::vector<Plane<Scalar>> planes_;
};

using Image = ImageT<double>;

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": image shapes differ (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                     std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                     std::to_string(b.channels()) + ")");
}

}  // namespace mfd
