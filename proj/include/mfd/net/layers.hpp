#pragma once

#include <Eigen/Core>

#include <vector>

namespace mfd::net {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Feature map: one row per channel, each row a row-major H x W plane.
template <typename T>
struct Feature {
  Mat<T> data;
  int height = 0;
  int width = 0;

  Feature() = default;
  Feature(int channels, int h, int w) : data(Mat<T>::Zero(channels, static_cast<Eigen::Index>(h) * w)), height(h), width(w) {}

  int channels() const { return static_cast<int>(data.rows()); }
  Eigen::Index pixels() const { return data.cols(); }
};

// Same-padded k x k convolution (k odd, stride 1).
// Weights are (Cout, Cin*k*k) with column index (ci*k + ky)*k + kx.

template <typename T>
Mat<T> im2col(const Feature<T>& x, int k);
template <typename T>
void col2im_add(const Mat<T>& cols, int k, Feature<T>& dx);

template <typename T>
Feature<T> conv_forward(const Feature<T>& x, const Mat<T>& w, const Vec<T>& b, int k, bool relu);
/// dy is dL/d(output); with relu, `y` must be the forward output and dy is
/// masked where y <= 0. dx may be null for the first layer.
template <typename T>
void conv_backward(const Feature<T>& x, const Feature<T>& y, const Mat<T>& w, int k, bool relu, Mat<T> dy,
                   Mat<T>& dw, Vec<T>& db, Feature<T>* dx);

/// 2x2 max pooling, stride 2. `argmax` receives, per output element, the
/// flat input index (within its channel) of the winner; ties keep the first.
template <typename T>
Feature<T> maxpool_forward(const Feature<T>& x, std::vector<int>& argmax);
template <typename T>
void maxpool_backward(const Feature<T>& dy, const std::vector<int>& argmax, Feature<T>& dx);

// Fractionally-strided convolution: factor f, kernel 2f, stride f, pad f/2,
// output (Hf, Wf). Weights are (Cin, Cout*k*k), index (co*k + ky)*k + kx.
template <typename T>
Feature<T> upconv_forward(const Feature<T>& x, const Mat<T>& w, int f);
template <typename T>
void upconv_backward(const Feature<T>& x, const Mat<T>& w, int f, const Feature<T>& dy, Mat<T>& dw, Feature<T>& dx);

/// Bilinear upsampling weight at kernel position a for factor f.
double bilinear_weight(int a, int f);

// out = x + w * src + b, with w (C, Csrc) a 1x1 projection.
template <typename T>
Feature<T> skip_forward(const Feature<T>& x, const Feature<T>& src, const Mat<T>& w, const Vec<T>& b);
template <typename T>
void skip_backward(const Feature<T>& src, const Mat<T>& w, const Mat<T>& dy, Mat<T>& dw, Vec<T>& db,
                   Mat<T>& dsrc);

/// Column-wise soft-max of rows [first, first+count) of logits.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits, int first, int count);

/// Cross-entropy of one soft-max head against per-pixel labels (already
/// offset into the head). Adds (P - onehot) * scale into grad rows
/// [first, first+count) and returns the summed loss.
template <typename T>
double softmax_ce(const Mat<T>& logits, int first, int count, const std::vector<int>& labels, double scale,
                  Mat<T>* grad);

}  // namespace mfd::net
