// Differentiable primitive operations on Graph nodes.
//
// Conventions: token batches are (rows = batch * tokens, cols = width),
// feature batches are (rows = batch, cols = width). Every op propagates
// needs_grad from its inputs and registers a backward closure that
// accumulates into parent gradients.
#pragma once

#include "reverie/core/graph.hpp"

#include <cmath>
#include <initializer_list>
#include <memory>
#include <vector>

namespace reverie {

template <class T>
Var<T> add(Graph<T>& g, Var<T> a, Var<T> b) {
  require(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(),
          "add: shape mismatch");
  return g.make(a->value + b->value, a->needs_grad || b->needs_grad,
                [a, b](Graph<T>&, Node<T>& n) {
                  if (a->needs_grad) a->accumulate(n.grad);
                  if (b->needs_grad) b->accumulate(n.grad);
                });
}

template <class T>
Var<T> sub(Graph<T>& g, Var<T> a, Var<T> b) {
  require(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(),
          "sub: shape mismatch");
  return g.make(a->value - b->value, a->needs_grad || b->needs_grad,
                [a, b](Graph<T>&, Node<T>& n) {
                  if (a->needs_grad) a->accumulate(n.grad);
                  if (b->needs_grad) b->accumulate_expr(-n.grad);
                });
}

// Hadamard product.
template <class T>
Var<T> mul(Graph<T>& g, Var<T> a, Var<T> b) {
  require(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(),
          "mul: shape mismatch");
  return g.make((a->value.array() * b->value.array()).matrix(),
                a->needs_grad || b->needs_grad, [a, b](Graph<T>&, Node<T>& n) {
                  if (a->needs_grad)
                    a->accumulate_expr((n.grad.array() * b->value.array()).matrix());
                  if (b->needs_grad)
                    b->accumulate_expr((n.grad.array() * a->value.array()).matrix());
                });
}

template <class T>
Var<T> scale(Graph<T>& g, Var<T> a, T c) {
  return g.make(a->value * c, a->needs_grad, [a, c](Graph<T>&, Node<T>& n) {
    if (a->needs_grad) a->accumulate_expr(n.grad * c);
  });
}

template <class T>
Var<T> add_scalar(Graph<T>& g, Var<T> a, T c) {
  return g.make((a->value.array() + c).matrix(), a->needs_grad,
                [a](Graph<T>&, Node<T>& n) {
                  if (a->needs_grad) a->accumulate(n.grad);
                });
}

template <class T>
Var<T> neg(Graph<T>& g, Var<T> a) {
  return scale(g, a, T(-1));
}

template <class T>
Var<T> matmul(Graph<T>& g, Var<T> a, Var<T> b) {
  require(a->value.cols() == b->value.rows(), "matmul: inner dim mismatch");
  return g.make(a->value * b->value, a->needs_grad || b->needs_grad,
                [a, b](Graph<T>&, Node<T>& n) {
                  if (a->needs_grad) a->accumulate_expr(n.grad * b->value.transpose());
                  if (b->needs_grad) b->accumulate_expr(a->value.transpose() * n.grad);
                });
}

// x @ W + broadcast row bias.
template <class T>
Var<T> linear(Graph<T>& g, Var<T> x, Var<T> w, Var<T> b) {
  require(x->value.cols() == w->value.rows(), "linear: inner dim mismatch");
  require(b->value.rows() == 1 && b->value.cols() == w->value.cols(),
          "linear: bias must be 1 x out");
  Mat<T> y = x->value * w->value;
  y.rowwise() += b->value.row(0);
  return g.make(std::move(y), x->needs_grad || w->needs_grad || b->needs_grad,
                [x, w, b](Graph<T>&, Node<T>& n) {
                  if (x->needs_grad) x->accumulate_expr(n.grad * w->value.transpose());
                  if (w->needs_grad) w->accumulate_expr(x->value.transpose() * n.grad);
                  if (b->needs_grad) b->accumulate_expr(n.grad.colwise().sum());
                });
}

template <class T>
Var<T> add_rowvec(Graph<T>& g, Var<T> x, Var<T> v) {
  require(v->value.rows() == 1 && v->value.cols() == x->value.cols(),
          "add_rowvec: shape mismatch");
  Mat<T> y = x->value;
  y.rowwise() += v->value.row(0);
  return g.make(std::move(y), x->needs_grad || v->needs_grad,
                [x, v](Graph<T>&, Node<T>& n) {
                  if (x->needs_grad) x->accumulate(n.grad);
                  if (v->needs_grad) v->accumulate_expr(n.grad.colwise().sum());
                });
}

// Broadcast multiply of each row by a per-row scalar (n x 1).
template <class T>
Var<T> mul_colvec(Graph<T>& g, Var<T> x, Var<T> c) {
  require(c->value.cols() == 1 && c->value.rows() == x->value.rows(),
          "mul_colvec: shape mismatch");
  return g.make((x->value.array().colwise() * c->value.col(0).array()).matrix(),
                x->needs_grad || c->needs_grad, [x, c](Graph<T>&, Node<T>& n) {
                  if (x->needs_grad)
                    x->accumulate_expr(
                        (n.grad.array().colwise() * c->value.col(0).array()).matrix());
                  if (c->needs_grad)
                    c->accumulate_expr(
                        (n.grad.array() * x->value.array()).rowwise().sum().matrix());
                });
}

template <class T>
Var<T> square(Graph<T>& g, Var<T> a) {
  return g.make((a->value.array().square()).matrix(), a->needs_grad,
                [a](Graph<T>&, Node<T>& n) {
                  if (a->needs_grad)
                    a->accumulate_expr((n.grad.array() * T(2) * a->value.array()).matrix());
                });
}

template <class T>
Var<T> exp_(Graph<T>& g, Var<T> a) {
  Mat<T> y = a->value.array().exp().matrix();
  return g.make(y, a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (a->needs_grad) a->accumulate_expr((n.grad.array() * n.value.array()).matrix());
  });
}

template <class T>
Var<T> log_(Graph<T>& g, Var<T> a) {
  return g.make(a->value.array().log().matrix(), a->needs_grad,
                [a](Graph<T>&, Node<T>& n) {
                  if (a->needs_grad)
                    a->accumulate_expr((n.grad.array() / a->value.array()).matrix());
                });
}

template <class T>
Var<T> tanh_(Graph<T>& g, Var<T> a) {
  Mat<T> y = a->value.array().tanh().matrix();
  return g.make(y, a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (a->needs_grad)
      a->accumulate_expr((n.grad.array() * (T(1) - n.value.array().square())).matrix());
  });
}

template <class T>
Var<T> sigmoid(Graph<T>& g, Var<T> a) {
  Mat<T> y = (T(1) / (T(1) + (-a->value.array()).exp())).matrix();
  return g.make(y, a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (a->needs_grad)
      a->accumulate_expr(
          (n.grad.array() * n.value.array() * (T(1) - n.value.array())).matrix());
  });
}

// log(1 + e^x), computed stably as max(x,0) + log1p(e^-|x|).
template <class T>
Var<T> softplus(Graph<T>& g, Var<T> a) {
  Mat<T> y = (a->value.array().max(T(0)) +
              ((-a->value.array().abs()).exp() + T(1)).log())
                 .matrix();
  return g.make(std::move(y), a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (a->needs_grad)
      a->accumulate_expr(
          (n.grad.array() / (T(1) + (-a->value.array()).exp())).matrix());
  });
}

// x * sigmoid(1.702 x): the sigmoid approximation of GELU, cheap on CPU.
template <class T>
Var<T> gelu(Graph<T>& g, Var<T> a) {
  Mat<T> s = (T(1) / (T(1) + (T(-1.702) * a->value.array()).exp())).matrix();
  Mat<T> y = (a->value.array() * s.array()).matrix();
  auto saved = std::make_shared<Mat<T>>(std::move(s));
  return g.make(std::move(y), a->needs_grad, [a, saved](Graph<T>&, Node<T>& n) {
    if (!a->needs_grad) return;
    const auto& s = saved->array();
    a->accumulate_expr(
        (n.grad.array() *
         (s + a->value.array() * T(1.702) * s * (T(1) - s)))
            .matrix());
  });
}

template <class T>
Var<T> elu(Graph<T>& g, Var<T> a) {
  Mat<T> y = a->value.array()
                 .unaryExpr([](T v) { return v > T(0) ? v : std::expm1(v); })
                 .matrix();
  return g.make(y, a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (a->needs_grad)
      a->accumulate_expr(
          (n.grad.array() *
           a->value.array().unaryExpr([](T v) { return v > T(0) ? T(1) : std::exp(v); }))
              .matrix());
  });
}

// Elementwise max(x, c); gradient is zero where the floor binds.
template <class T>
Var<T> max_scalar(Graph<T>& g, Var<T> a, T c) {
  return g.make(a->value.array().max(c).matrix(), a->needs_grad,
                [a, c](Graph<T>&, Node<T>& n) {
                  if (a->needs_grad)
                    a->accumulate_expr(
                        (n.grad.array() * (a->value.array() > c).template cast<T>())
                            .matrix());
                });
}

template <class T>
Var<T> stopgrad(Graph<T>& g, Var<T> a) {
  return g.constant(a->value);
}

template <class T>
Var<T> sum(Graph<T>& g, Var<T> a) {
  Mat<T> y(1, 1);
  y(0, 0) = a->value.sum();
  return g.make(std::move(y), a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (a->needs_grad)
      a->accumulate_expr(Mat<T>::Constant(a->value.rows(), a->value.cols(), n.grad(0, 0)));
  });
}

template <class T>
Var<T> mean(Graph<T>& g, Var<T> a) {
  const T inv = T(1) / static_cast<T>(a->value.size());
  Mat<T> y(1, 1);
  y(0, 0) = a->value.sum() * inv;
  return g.make(std::move(y), a->needs_grad, [a, inv](Graph<T>&, Node<T>& n) {
    if (a->needs_grad)
      a->accumulate_expr(
          Mat<T>::Constant(a->value.rows(), a->value.cols(), n.grad(0, 0) * inv));
  });
}

template <class T>
Var<T> rowsum(Graph<T>& g, Var<T> a) {
  return g.make(a->value.rowwise().sum(), a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (a->needs_grad)
      a->accumulate_expr(n.grad.col(0).replicate(1, a->value.cols()));
  });
}

template <class T>
Var<T> colsum(Graph<T>& g, Var<T> a) {
  return g.make(a->value.colwise().sum(), a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (a->needs_grad)
      a->accumulate_expr(n.grad.row(0).replicate(a->value.rows(), 1));
  });
}

// Row-major reshape (free relabeling of the same element order).
template <class T>
Var<T> reshape(Graph<T>& g, Var<T> a, Index rows, Index cols) {
  require(rows * cols == a->value.size(), "reshape: size mismatch");
  Mat<T> y = Eigen::Map<const Mat<T>>(a->value.data(), rows, cols);
  return g.make(std::move(y), a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (a->needs_grad)
      a->accumulate_expr(
          Eigen::Map<const Mat<T>>(n.grad.data(), a->value.rows(), a->value.cols()));
  });
}

template <class T>
Var<T> concat_rows(Graph<T>& g, const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_rows: empty");
  Index rows = 0;
  const Index cols = parts[0]->value.cols();
  bool needs = false;
  for (auto p : parts) {
    require(p->value.cols() == cols, "concat_rows: col mismatch");
    rows += p->value.rows();
    needs = needs || p->needs_grad;
  }
  Mat<T> y(rows, cols);
  Index r = 0;
  for (auto p : parts) {
    y.middleRows(r, p->value.rows()) = p->value;
    r += p->value.rows();
  }
  auto saved = std::make_shared<std::vector<Var<T>>>(parts);
  return g.make(std::move(y), needs, [saved](Graph<T>&, Node<T>& n) {
    Index r = 0;
    for (auto p : *saved) {
      if (p->needs_grad) p->accumulate_expr(n.grad.middleRows(r, p->value.rows()));
      r += p->value.rows();
    }
  });
}

template <class T>
Var<T> slice_rows(Graph<T>& g, Var<T> a, Index r0, Index nrows) {
  require(r0 >= 0 && r0 + nrows <= a->value.rows(), "slice_rows: out of range");
  return g.make(a->value.middleRows(r0, nrows), a->needs_grad,
                [a, r0, nrows](Graph<T>&, Node<T>& n) {
                  if (!a->needs_grad) return;
                  a->ensure_grad().middleRows(r0, nrows) += n.grad;
                });
}

template <class T>
Var<T> concat_cols(Graph<T>& g, Var<T> a, Var<T> b) {
  require(a->value.rows() == b->value.rows(), "concat_cols: row mismatch");
  Mat<T> y(a->value.rows(), a->value.cols() + b->value.cols());
  y.leftCols(a->value.cols()) = a->value;
  y.rightCols(b->value.cols()) = b->value;
  return g.make(std::move(y), a->needs_grad || b->needs_grad,
                [a, b](Graph<T>&, Node<T>& n) {
                  if (a->needs_grad) a->accumulate_expr(n.grad.leftCols(a->value.cols()));
                  if (b->needs_grad) b->accumulate_expr(n.grad.rightCols(b->value.cols()));
                });
}

template <class T>
Var<T> slice_cols(Graph<T>& g, Var<T> a, Index c0, Index ncols) {
  require(c0 >= 0 && c0 + ncols <= a->value.cols(), "slice_cols: out of range");
  return g.make(a->value.middleCols(c0, ncols), a->needs_grad,
                [a, c0, ncols](Graph<T>&, Node<T>& n) {
                  if (!a->needs_grad) return;
                  a->ensure_grad().middleCols(c0, ncols) += n.grad;
                });
}

template <class T>
Var<T> gather_rows(Graph<T>& g, Var<T> a, std::vector<Index> idx) {
  Mat<T> y(static_cast<Index>(idx.size()), a->value.cols());
  for (Index i = 0; i < y.rows(); ++i) y.row(i) = a->value.row(idx[i]);
  auto saved = std::make_shared<std::vector<Index>>(std::move(idx));
  return g.make(std::move(y), a->needs_grad, [a, saved](Graph<T>&, Node<T>& n) {
    if (!a->needs_grad) return;
    Mat<T>& ga = a->ensure_grad();
    for (Index i = 0; i < n.grad.rows(); ++i) ga.row((*saved)[i]) += n.grad.row(i);
  });
}

// Rows of `a` placed at `idx` within an nrows-tall zero matrix.
template <class T>
Var<T> scatter_rows(Graph<T>& g, Var<T> a, std::vector<Index> idx, Index nrows) {
  require(static_cast<Index>(idx.size()) == a->value.rows(), "scatter_rows: idx size");
  Mat<T> y = Mat<T>::Zero(nrows, a->value.cols());
  for (Index i = 0; i < a->value.rows(); ++i) y.row(idx[i]) = a->value.row(i);
  auto saved = std::make_shared<std::vector<Index>>(std::move(idx));
  return g.make(std::move(y), a->needs_grad, [a, saved](Graph<T>&, Node<T>& n) {
    if (!a->needs_grad) return;
    Mat<T>& ga = a->ensure_grad();
    for (Index i = 0; i < ga.rows(); ++i) ga.row(i) += n.grad.row((*saved)[i]);
  });
}

// Tile a single row n times.
template <class T>
Var<T> repeat_row(Graph<T>& g, Var<T> a, Index n) {
  require(a->value.rows() == 1, "repeat_row: input must be a single row");
  return g.make(a->value.replicate(n, 1), a->needs_grad, [a](Graph<T>&, Node<T>& nd) {
    if (a->needs_grad) a->accumulate_expr(nd.grad.colwise().sum());
  });
}

// Repeat each row k times (row i maps to output rows i*k .. i*k+k-1).
template <class T>
Var<T> repeat_each_row(Graph<T>& g, Var<T> a, Index k) {
  Mat<T> y(a->value.rows() * k, a->value.cols());
  for (Index i = 0; i < a->value.rows(); ++i)
    y.middleRows(i * k, k) = a->value.row(i).replicate(k, 1);
  return g.make(std::move(y), a->needs_grad, [a, k](Graph<T>&, Node<T>& n) {
    if (!a->needs_grad) return;
    Mat<T> ga(a->value.rows(), a->value.cols());
    for (Index i = 0; i < ga.rows(); ++i)
      ga.row(i) = n.grad.middleRows(i * k, k).colwise().sum();
    a->accumulate(ga);
  });
}

// Mean over each group of k consecutive rows: (n*k, c) -> (n, c).
template <class T>
Var<T> group_mean_rows(Graph<T>& g, Var<T> a, Index k) {
  require(a->value.rows() % k == 0, "group_mean_rows: rows not divisible");
  const Index n = a->value.rows() / k;
  Mat<T> y(n, a->value.cols());
  for (Index i = 0; i < n; ++i) y.row(i) = a->value.middleRows(i * k, k).colwise().mean();
  return g.make(std::move(y), a->needs_grad, [a, k, n](Graph<T>&, Node<T>& nd) {
    if (!a->needs_grad) return;
    Mat<T>& ga = a->ensure_grad();
    const T inv = T(1) / static_cast<T>(k);
    for (Index i = 0; i < n; ++i)
      ga.middleRows(i * k, k).rowwise() += (nd.grad.row(i) * inv).eval().row(0);
  });
}

namespace detail {
// In-place row-wise softmax of an (n, c) matrix.
template <class T>
void softmax_inplace(Mat<T>& s) {
  Eigen::Array<T, Eigen::Dynamic, 1> mx = s.rowwise().maxCoeff();
  s = ((s.array().colwise() - mx).exp()).matrix();
  Eigen::Array<T, Eigen::Dynamic, 1> sums = s.rowwise().sum();
  s.array().colwise() /= sums;
}
// dX for y = softmax(x) given dY, written into gx.
template <class T>
void softmax_backward(const Mat<T>& y, const Mat<T>& gy, Mat<T>& gx) {
  Eigen::Array<T, Eigen::Dynamic, 1> dots = (gy.array() * y.array()).rowwise().sum();
  gx = ((gy.array().colwise() - dots) * y.array()).matrix();
}
}  // namespace detail

template <class T>
Var<T> softmax_rows(Graph<T>& g, Var<T> a) {
  Mat<T> y = a->value;
  detail::softmax_inplace(y);
  return g.make(std::move(y), a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (!a->needs_grad) return;
    Mat<T> gx;
    detail::softmax_backward(n.value, n.grad, gx);
    a->accumulate(gx);
  });
}

template <class T>
Var<T> log_softmax_rows(Graph<T>& g, Var<T> a) {
  Mat<T> y = a->value;
  Eigen::Array<T, Eigen::Dynamic, 1> mx = y.rowwise().maxCoeff();
  y.array().colwise() -= mx;
  Eigen::Array<T, Eigen::Dynamic, 1> lse = y.array().exp().rowwise().sum().log();
  y.array().colwise() -= lse;
  return g.make(std::move(y), a->needs_grad, [a](Graph<T>&, Node<T>& n) {
    if (!a->needs_grad) return;
    Eigen::Array<T, Eigen::Dynamic, 1> gsum = n.grad.rowwise().sum();
    a->accumulate_expr(
        (n.grad.array() - n.value.array().exp().colwise() * gsum).matrix());
  });
}

// Row-wise layer normalization with learned gain/bias.
template <class T>
Var<T> layer_norm(Graph<T>& g, Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
  const Index c = x->value.cols();
  require(gamma->value.cols() == c && beta->value.cols() == c, "layer_norm: size");
  using Col = Eigen::Array<T, Eigen::Dynamic, 1>;
  Col mu = x->value.rowwise().mean();
  Mat<T> xhat = (x->value.array().colwise() - mu).matrix();
  Col inv_std = (xhat.array().square().rowwise().mean() + eps).rsqrt();
  xhat.array().colwise() *= inv_std;
  Mat<T> y = (xhat.array().rowwise() * gamma->value.row(0).array()).matrix();
  y.rowwise() += beta->value.row(0);
  auto sx = std::make_shared<Mat<T>>(std::move(xhat));
  auto ss = std::make_shared<Col>(std::move(inv_std));
  return g.make(std::move(y), x->needs_grad || gamma->needs_grad || beta->needs_grad,
                [x, gamma, beta, sx, ss](Graph<T>&, Node<T>& n) {
                  if (beta->needs_grad) beta->accumulate_expr(n.grad.colwise().sum());
                  if (gamma->needs_grad)
                    gamma->accumulate_expr(
                        (n.grad.array() * sx->array()).colwise().sum().matrix());
                  if (!x->needs_grad) return;
                  Mat<T> gy =
                      (n.grad.array().rowwise() * gamma->value.row(0).array()).matrix();
                  Col m1 = gy.rowwise().mean();
                  Col m2 = (gy.array() * sx->array()).rowwise().mean();
                  gy.array().colwise() -= m1;
                  gy.array() -= sx->array().colwise() * m2;
                  gy.array().colwise() *= *ss;
                  x->accumulate(gy);
                });
}

// Scaled dot-product attention over a batch of fixed-length sequences.
// q,k,v: (batch*tokens, width) with `heads` splitting the width evenly.
template <class T>
Var<T> attention(Graph<T>& g, Var<T> q, Var<T> k, Var<T> v, Index batch, Index tokens,
                 Index heads) {
  const Index width = q->value.cols();
  require(width % heads == 0, "attention: width not divisible by heads");
  require(q->value.rows() == batch * tokens, "attention: bad row count");
  const Index dh = width / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));

  Mat<T> out(batch * tokens, width);
  auto weights = std::make_shared<std::vector<Mat<T>>>();
  weights->reserve(static_cast<size_t>(batch * heads));
  for (Index b = 0; b < batch; ++b) {
    const Index r0 = b * tokens;
    for (Index h = 0; h < heads; ++h) {
      const Index c0 = h * dh;
      auto qb = q->value.block(r0, c0, tokens, dh);
      auto kb = k->value.block(r0, c0, tokens, dh);
      auto vb = v->value.block(r0, c0, tokens, dh);
      Mat<T> s = (qb * kb.transpose()) * inv_sqrt;
      detail::softmax_inplace(s);
      out.block(r0, c0, tokens, dh) = s * vb;
      weights->push_back(std::move(s));
    }
  }
  return g.make(std::move(out), q->needs_grad || k->needs_grad || v->needs_grad,
                [q, k, v, batch, tokens, heads, dh, inv_sqrt, weights](Graph<T>&, Node<T>& n) {
                  Mat<T>* gq = q->needs_grad ? &q->ensure_grad() : nullptr;
                  Mat<T>* gk = k->needs_grad ? &k->ensure_grad() : nullptr;
                  Mat<T>* gv = v->needs_grad ? &v->ensure_grad() : nullptr;
                  for (Index b = 0; b < batch; ++b) {
                    const Index r0 = b * tokens;
                    for (Index h = 0; h < heads; ++h) {
                      const Index c0 = h * dh;
                      const Mat<T>& a = (*weights)[b * heads + h];
                      auto go = n.grad.block(r0, c0, tokens, dh);
                      auto vb = v->value.block(r0, c0, tokens, dh);
                      if (gv) gv->block(r0, c0, tokens, dh) += a.transpose() * go;
                      if (!gq && !gk) continue;
                      Mat<T> gs = go * vb.transpose();
                      Mat<T> ga;
                      detail::softmax_backward(a, gs, ga);
                      ga *= inv_sqrt;
                      auto qb = q->value.block(r0, c0, tokens, dh);
                      auto kb = k->value.block(r0, c0, tokens, dh);
                      if (gq) gq->block(r0, c0, tokens, dh) += ga * kb;
                      if (gk) gk->block(r0, c0, tokens, dh) += ga.transpose() * qb;
                    }
                  }
                });
}

// Straight-through categorical sample. `probs` holds row-wise distributions;
// `uniforms` one draw per row. Forward emits a one-hot row (or the probs
// themselves in expected mode); backward passes gradients to probs unchanged,
// i.e. sample = one_hot + probs - stopgrad(probs).
template <class T>
Var<T> st_sample(Graph<T>& g, Var<T> probs, const Mat<T>& uniforms, bool expected_mode) {
  if (expected_mode) {
    return g.make(probs->value, probs->needs_grad, [probs](Graph<T>&, Node<T>& n) {
      if (probs->needs_grad) probs->accumulate(n.grad);
    });
  }
  require(uniforms.rows() == probs->value.rows() && uniforms.cols() == 1,
          "st_sample: need one uniform per row");
  Mat<T> y = Mat<T>::Zero(probs->value.rows(), probs->value.cols());
  for (Index i = 0; i < y.rows(); ++i) {
    T acc = T(0);
    Index pick = probs->value.cols() - 1;
    for (Index j = 0; j < probs->value.cols(); ++j) {
      acc += probs->value(i, j);
      if (uniforms(i, 0) < acc) {
        pick = j;
        break;
      }
    }
    y(i, pick) = T(1);
  }
  return g.make(std::move(y), probs->needs_grad, [probs](Graph<T>&, Node<T>& n) {
    if (probs->needs_grad) probs->accumulate(n.grad);
  });
}

// Sum of squared differences (no normalization): sum((a - b)^2).
template <class T>
Var<T> sum_sq_diff(Graph<T>& g, Var<T> a, Var<T> b) {
  return sum(g, square(g, sub(g, a, b)));
}

// Mean of squared differences over all elements.
template <class T>
Var<T> mean_sq_diff(Graph<T>& g, Var<T> a, Var<T> b) {
  return mean(g, square(g, sub(g, a, b)));
}

// Elementwise binary cross-entropy between logits and {0,1} targets:
// softplus(x) - x*t, which equals -[t log s(x) + (1-t) log(1-s(x))].
template <class T>
Var<T> bce_with_logits(Graph<T>& g, Var<T> logits, Var<T> targets) {
  return sub(g, softplus(g, logits), mul(g, logits, targets));
}

}  // namespace reverie
