#include "mfd/net/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfd/errors.hpp"

namespace mfd::net {

template <typename T>
Mat<T> im2col(const Feature<T>& x, int k) {
  const int h = x.height;
  const int w = x.width;
  const int p = k / 2;
  Mat<T> cols = Mat<T>::Zero(static_cast<Eigen::Index>(x.channels()) * k * k, x.pixels());
  for (int c = 0; c < x.channels(); ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        const int dx = kx - p;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        if (x1 <= x0) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - p;
          if (sy < 0 || sy >= h) continue;
          cols.row(row).segment(static_cast<Eigen::Index>(y) * w + x0, x1 - x0) =
              x.data.row(c).segment(static_cast<Eigen::Index>(sy) * w + x0 + dx, x1 - x0);
        }
      }
  return cols;
}

template <typename T>
void col2im_add(const Mat<T>& cols, int k, Feature<T>& dx) {
  const int h = dx.height;
  const int w = dx.width;
  const int p = k / 2;
  for (int c = 0; c < dx.channels(); ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        const int ox = kx - p;
        const int x0 = std::max(0, -ox);
        const int x1 = std::min(w, w - ox);
        if (x1 <= x0) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - p;
          if (sy < 0 || sy >= h) continue;
          dx.data.row(c).segment(static_cast<Eigen::Index>(sy) * w + x0 + ox, x1 - x0) +=
              cols.row(row).segment(static_cast<Eigen::Index>(y) * w + x0, x1 - x0);
        }
      }
}

template <typename T>
Feature<T> conv_forward(const Feature<T>& x, const Mat<T>& w, const Vec<T>& b, int k, bool relu) {
  if (w.cols() != static_cast<Eigen::Index>(x.channels()) * k * k || b.size() != w.rows())
    throw ShapeError("conv: weight shape does not match input channels");
  Feature<T> y;
  y.height = x.height;
  y.width = x.width;
  if (k == 1)
    y.data.noalias() = w * x.data;
  else
    y.data.noalias() = w * im2col(x, k);
  y.data.colwise() += b;
  if (relu) y.data = y.data.cwiseMax(T(0));
  return y;
}

template <typename T>
void conv_backward(const Feature<T>& x, const Feature<T>& y, const Mat<T>& w, int k, bool relu, Mat<T> dy,
                   Mat<T>& dw, Vec<T>& db, Feature<T>* dx) {
  if (relu) dy = (y.data.array() > T(0)).select(dy, T(0));
  db = dy.rowwise().sum();
  if (k == 1) {
    dw.noalias() = dy * x.data.transpose();
    if (dx) {
      *dx = Feature<T>(x.channels(), x.height, x.width);
      dx->data.noalias() = w.transpose() * dy;
    }
    return;
  }
  const Mat<T> cols = im2col(x, k);
  dw.noalias() = dy * cols.transpose();
  if (dx) {
    const Mat<T> dcols = w.transpose() * dy;
    *dx = Feature<T>(x.channels(), x.height, x.width);
    col2im_add(dcols, k, *dx);
  }
}

template <typename T>
Feature<T> maxpool_forward(const Feature<T>& x, std::vector<int>& argmax) {
  if (x.height % 2 != 0 || x.width % 2 != 0) throw ShapeError("maxpool: input size must be even");
  const int oh = x.height / 2;
  const int ow = x.width / 2;
  Feature<T> y(x.channels(), oh, ow);
  argmax.assign(static_cast<std::size_t>(y.data.size()), 0);
  std::size_t n = 0;
  for (int c = 0; c < x.channels(); ++c) {
    const auto in = x.data.row(c);
    for (int r = 0; r < oh; ++r)
      for (int q = 0; q < ow; ++q, ++n) {
        int best = (2 * r) * x.width + 2 * q;
        for (const int idx : {best + 1, best + x.width, best + x.width + 1})
          if (in[idx] > in[best]) best = idx;
        y.data(c, static_cast<Eigen::Index>(r) * ow + q) = in[best];
        argmax[n] = best;
      }
  }
  return y;
}

template <typename T>
void maxpool_backward(const Feature<T>& dy, const std::vector<int>& argmax, Feature<T>& dx) {
  std::size_t n = 0;
  for (int c = 0; c < dy.channels(); ++c)
    for (Eigen::Index k = 0; k < dy.pixels(); ++k, ++n) dx.data(c, argmax[n]) += dy.data(c, k);
}

double bilinear_weight(int a, int f) {
  const double center = f - 0.5;
  return 1.0 - std::abs(a - center) / f;
}

template <typename T>
Feature<T> upconv_forward(const Feature<T>& x, const Mat<T>& w, int f) {
  const int k = 2 * f;
  const int pad = f / 2;
  if (w.rows() != x.channels() || w.cols() % (k * k) != 0) throw ShapeError("upconv: weight shape mismatch");
  const int cout = static_cast<int>(w.cols() / (k * k));
  const Mat<T> cols = w.transpose() * x.data;  // (Cout*k*k, H*W)
  Feature<T> y(cout, x.height * f, x.width * f);
  for (int co = 0; co < cout; ++co)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const auto src = cols.row((static_cast<Eigen::Index>(co) * k + ky) * k + kx);
        auto dst = y.data.row(co);
        for (int iy = 0; iy < x.height; ++iy) {
          const int oy = iy * f - pad + ky;
          if (oy < 0 || oy >= y.height) continue;
          for (int ix = 0; ix < x.width; ++ix) {
            const int ox = ix * f - pad + kx;
            if (ox < 0 || ox >= y.width) continue;
            dst[static_cast<Eigen::Index>(oy) * y.width + ox] += src[static_cast<Eigen::Index>(iy) * x.width + ix];
          }
        }
      }
  return y;
}

template <typename T>
void upconv_backward(const Feature<T>& x, const Mat<T>& w, int f, const Feature<T>& dy, Mat<T>& dw, Feature<T>& dx) {
  const int k = 2 * f;
  const int pad = f / 2;
  const int cout = dy.channels();
  Mat<T> dcols = Mat<T>::Zero(static_cast<Eigen::Index>(cout) * k * k, x.pixels());
  for (int co = 0; co < cout; ++co)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        auto dst = dcols.row((static_cast<Eigen::Index>(co) * k + ky) * k + kx);
        const auto src = dy.data.row(co);
        for (int iy = 0; iy < x.height; ++iy) {
          const int oy = iy * f - pad + ky;
          if (oy < 0 || oy >= dy.height) continue;
          for (int ix = 0; ix < x.width; ++ix) {
            const int ox = ix * f - pad + kx;
            if (ox < 0 || ox >= dy.width) continue;
            dst[static_cast<Eigen::Index>(iy) * x.width + ix] = src[static_cast<Eigen::Index>(oy) * dy.width + ox];
          }
        }
      }
  dw.noalias() = x.data * dcols.transpose();
  dx = Feature<T>(x.channels(), x.height, x.width);
  dx.data.noalias() = w * dcols;
}

template <typename T>
Feature<T> skip_forward(const Feature<T>& x, const Feature<T>& src, const Mat<T>& w, const Vec<T>& b) {
  if (src.height != x.height || src.width != x.width) throw ShapeError("skip: source resolution differs");
  if (w.rows() != x.channels() || w.cols() != src.channels()) throw ShapeError("skip: projection shape mismatch");
  Feature<T> y = x;
  y.data.noalias() += w * src.data;
  y.data.colwise() += b;
  return y;
}

template <typename T>
void skip_backward(const Feature<T>& src, const Mat<T>& w, const Mat<T>& dy, Mat<T>& dw, Vec<T>& db, Mat<T>& dsrc) {
  dw.noalias() = dy * src.data.transpose();
  db = dy.rowwise().sum();
  dsrc.noalias() = w.transpose() * dy;
}

template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits, int first, int count) {
  Mat<T> p = logits.middleRows(first, count);
  const auto mx = p.colwise().maxCoeff().eval();
  p.rowwise() -= mx;
  p = p.array().exp().matrix();
  const auto sum = p.colwise().sum().eval();
  p.array().rowwise() /= sum.array();
  return p;
}

template <typename T>
double softmax_ce(const Mat<T>& logits, int first, int count, const std::vector<int>& labels, double scale,
                  Mat<T>* grad) {
  if (labels.size() != static_cast<std::size_t>(logits.cols())) throw ShapeError("softmax_ce: label count mismatch");
  double loss = 0.0;
  const Mat<T> block = logits.middleRows(first, count);
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    const int lab = labels[static_cast<std::size_t>(j)];
    if (lab < 0 || lab >= count) throw DomainError("softmax_ce: label outside head");
    const double mx = static_cast<double>(block.col(j).maxCoeff());
    double s = 0.0;
    for (int r = 0; r < count; ++r) s += std::exp(static_cast<double>(block(r, j)) - mx);
    const double lse = mx + std::log(s);
    loss += lse - static_cast<double>(block(lab, j));
    if (grad) {
      for (int r = 0; r < count; ++r) {
        const double pr = std::exp(static_cast<double>(block(r, j)) - lse);
        (*grad)(first + r, j) += static_cast<T>(scale * (pr - (r == lab ? 1.0 : 0.0)));
      }
    }
  }
  return loss;
}

#define MFD_INSTANTIATE(T)                                                                                       \
  template Mat<T> im2col(const Feature<T>&, int);                                                               \
  template void col2im_add(const Mat<T>&, int, Feature<T>&);                                                    \
  template Feature<T> conv_forward(const Feature<T>&, const Mat<T>&, const Vec<T>&, int, bool);                 \
  template void conv_backward(const Feature<T>&, const Feature<T>&, const Mat<T>&, int, bool, Mat<T>, Mat<T>&,  \
                              Vec<T>&, Feature<T>*);                                                            \
  template Feature<T> maxpool_forward(const Feature<T>&, std::vector<int>&);                                    \
  template void maxpool_backward(const Feature<T>&, const std::vector<int>&, Feature<T>&);                      \
  template Feature<T> upconv_forward(const Feature<T>&, const Mat<T>&, int);                                    \
  template void upconv_backward(const Feature<T>&, const Mat<T>&, int, const Feature<T>&, Mat<T>&, Feature<T>&); \
  template Feature<T> skip_forward(const Feature<T>&, const Feature<T>&, const Mat<T>&, const Vec<T>&);         \
  template void skip_backward(const Feature<T>&, const Mat<T>&, const Mat<T>&, Mat<T>&, Vec<T>&, Mat<T>&);      \
  template Mat<T> softmax_rows(const Mat<T>&, int, int);                                                        \
  template double softmax_ce(const Mat<T>&, int, int, const std::vector<int>&, double, Mat<T>*);

MFD_INSTANTIATE(float)
MFD_INSTANTIATE(double)

#undef MFD_INSTANTIATE

}  // namespace mfd::net
