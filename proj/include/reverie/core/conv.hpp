// Strided 2-D convolution and transposed convolution via im2col gathers.
//
// Images are rows of a (batch, H*W*C) matrix in pixel-major HWC order.
// A ConvPlan precomputes the patch gather table for one geometry; the
// transposed op reuses the same table with gather and scatter swapped.
#pragma once

#include "reverie/core/ops.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace reverie {

struct ConvPlan {
  Index in_h = 0, in_w = 0, in_c = 0;
  Index out_h = 0, out_w = 0;
  Index kernel = 0, stride = 0, pad = 0;
  // For each output pixel, the flat input index of every (ky,kx,c) tap,
  // or -1 where the tap falls into padding. Shape: (out_h*out_w) x (k*k*c).
  std::vector<int32_t> taps;

  Index patch_size() const { return kernel * kernel * in_c; }
  Index out_pixels() const { return out_h * out_w; }

  static ConvPlan make(Index h, Index w, Index c, Index kernel, Index stride, Index pad) {
    ConvPlan p;
    p.in_h = h;
    p.in_w = w;
    p.in_c = c;
    p.kernel = kernel;
    p.stride = stride;
    p.pad = pad;
    p.out_h = (h + 2 * pad - kernel) / stride + 1;
    p.out_w = (w + 2 * pad - kernel) / stride + 1;
    require_config((h + 2 * pad - kernel) % stride == 0 && p.out_h > 0 && p.out_w > 0,
                   "conv: spatial size not divisible by stride");
    p.taps.resize(static_cast<size_t>(p.out_pixels() * p.patch_size()));
    size_t t = 0;
    for (Index oy = 0; oy < p.out_h; ++oy)
      for (Index ox = 0; ox < p.out_w; ++ox)
        for (Index ky = 0; ky < kernel; ++ky)
          for (Index kx = 0; kx < kernel; ++kx) {
            const Index iy = oy * stride - pad + ky;
            const Index ix = ox * stride - pad + kx;
            const bool ok = iy >= 0 && iy < h && ix >= 0 && ix < w;
            for (Index ch = 0; ch < c; ++ch)
              p.taps[t++] = ok ? static_cast<int32_t>((iy * w + ix) * c + ch) : -1;
          }
    return p;
  }

  // One sample's image row -> row-major (out_pixels, patch_size) patch block.
  template <class T>
  void gather(const T* img, T* cols) const {
    const size_t n = taps.size();
    for (size_t j = 0; j < n; ++j) cols[j] = taps[j] >= 0 ? img[taps[j]] : T(0);
  }

  // Adjoint of gather: accumulate a patch block back into an image row.
  template <class T>
  void scatter_add(const T* cols, T* img) const {
    const size_t n = taps.size();
    for (size_t j = 0; j < n; ++j)
      if (taps[j] >= 0) img[taps[j]] += cols[j];
  }
};

// x: (batch, in_h*in_w*in_c), w: (k*k*in_c, out_c), b: (1, out_c).
// Returns (batch, out_h*out_w*out_c).
template <class T>
Var<T> conv2d(Graph<T>& g, Var<T> x, Var<T> w, Var<T> b, const ConvPlan& plan) {
  const Index batch = x->value.rows();
  const Index out_c = w->value.cols();
  require(x->value.cols() == plan.in_h * plan.in_w * plan.in_c, "conv2d: input size");
  require(w->value.rows() == plan.patch_size(), "conv2d: weight size");
  const Index pix = plan.out_pixels();

  Mat<T> cols(batch * pix, plan.patch_size());
  for (Index s = 0; s < batch; ++s)
    plan.gather(x->value.data() + s * x->value.cols(),
                cols.data() + s * pix * plan.patch_size());
  Mat<T> yflat = cols * w->value;  // (batch*pix, out_c)
  yflat.rowwise() += b->value.row(0);
  Mat<T> y = Eigen::Map<const Mat<T>>(yflat.data(), batch, pix * out_c);

  const ConvPlan* pl = &plan;
  return g.make(std::move(y), x->needs_grad || w->needs_grad || b->needs_grad,
                [x, w, b, pl, batch, pix, out_c](Graph<T>&, Node<T>& n) {
                  Eigen::Map<const Mat<T>> gy(n.grad.data(), batch * pix, out_c);
                  if (b->needs_grad) b->accumulate_expr(gy.colwise().sum());
                  if (w->needs_grad) {
                    Mat<T> block(pix, pl->patch_size());
                    Mat<T> gw = Mat<T>::Zero(pl->patch_size(), out_c);
                    for (Index s = 0; s < batch; ++s) {
                      pl->gather(x->value.data() + s * x->value.cols(), block.data());
                      gw.noalias() += block.transpose() * gy.middleRows(s * pix, pix);
                    }
                    w->accumulate(gw);
                  }
                  if (x->needs_grad) {
                    Mat<T>& gx = x->ensure_grad();
                    Mat<T> gcols(pix, pl->patch_size());
                    for (Index s = 0; s < batch; ++s) {
                      gcols.noalias() = gy.middleRows(s * pix, pix) * w->value.transpose();
                      pl->scatter_add(gcols.data(), gx.data() + s * gx.cols());
                    }
                  }
                });
}

// Transposed convolution. `plan` describes the convolution running in the
// opposite direction, i.e. from this op's output geometry down to its input
// geometry. x: (batch, plan.out_h*plan.out_w*deconv_in_c) with
// w: (k*k*out_c, in_c) mapping patches of the *output* image.
template <class T>
Var<T> conv_transpose2d(Graph<T>& g, Var<T> x, Var<T> w, Var<T> b, const ConvPlan& plan) {
  const Index batch = x->value.rows();
  const Index in_c = w->value.cols();  // channels of x
  const Index out_c = plan.in_c;       // channels of the produced image
  require(x->value.cols() == plan.out_pixels() * in_c, "conv_transpose2d: input size");
  require(w->value.rows() == plan.patch_size(), "conv_transpose2d: weight size");
  require(b->value.cols() == out_c, "conv_transpose2d: bias size");
  const Index pix = plan.out_pixels();
  const Index out_size = plan.in_h * plan.in_w * out_c;

  Mat<T> y = Mat<T>::Zero(batch, out_size);
  {
    Mat<T> cols(pix, plan.patch_size());
    for (Index s = 0; s < batch; ++s) {
      Eigen::Map<const Mat<T>> xs(x->value.data() + s * x->value.cols(), pix, in_c);
      cols.noalias() = xs * w->value.transpose();
      plan.scatter_add(cols.data(), y.data() + s * out_size);
    }
    Eigen::Map<Mat<T>> ypix(y.data(), batch * plan.in_h * plan.in_w, out_c);
    ypix.rowwise() += b->value.row(0);
  }

  const ConvPlan* pl = &plan;
  return g.make(std::move(y), x->needs_grad || w->needs_grad || b->needs_grad,
                [x, w, b, pl, batch, pix, in_c, out_c, out_size](Graph<T>&, Node<T>& n) {
                  if (b->needs_grad) {
                    Eigen::Map<const Mat<T>> gpix(n.grad.data(),
                                                  batch * pl->in_h * pl->in_w, out_c);
                    b->accumulate_expr(gpix.colwise().sum());
                  }
                  Mat<T> gcols(pix, pl->patch_size());
                  for (Index s = 0; s < batch; ++s) {
                    if (!x->needs_grad && !w->needs_grad) break;
                    pl->gather(n.grad.data() + s * out_size, gcols.data());
                    if (x->needs_grad) {
                      Mat<T>& gx = x->ensure_grad();
                      Eigen::Map<Mat<T>> gxs(gx.data() + s * gx.cols(), pix, in_c);
                      gxs.noalias() += gcols * w->value;
                    }
                    if (w->needs_grad) {
                      Eigen::Map<const Mat<T>> xs(x->value.data() + s * x->value.cols(),
                                                  pix, in_c);
                      w->ensure_grad().noalias() += gcols.transpose() * xs;
                    }
                  }
                });
}

}  // namespace reverie
