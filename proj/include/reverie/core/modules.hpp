// Parameterized building blocks: linear layers, layer norm, pre-norm
// transformer blocks, a GRU cell and small MLPs.
#pragma once

#include "reverie/core/conv.hpp"
#include "reverie/core/ops.hpp"
#include "reverie/core/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace reverie {

enum class Act { kNone, kGelu, kElu, kTanh };

template <class T>
Var<T> activate(Graph<T>& g, Var<T> x, Act act) {
  switch (act) {
    case Act::kGelu: return gelu(g, x);
    case Act::kElu: return elu(g, x);
    case Act::kTanh: return tanh_(g, x);
    case Act::kNone: return x;
  }
  return x;
}

template <class T>
void xavier_init(Param<T>& p, Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  rng.fill_uniform(p.value, -limit, limit);
}

template <class T>
struct Dense {
  Param<T> w, b;

  Dense() = default;
  Dense(Index in, Index out, Rng& rng) {
    w.value.resize(in, out);
    xavier_init(w, in, out, rng);
    b.value = Mat<T>::Zero(1, out);
  }
  Var<T> forward(Graph<T>& g, Var<T> x) {
    return linear(g, x, g.lease(w), g.lease(b));
  }
  void collect(ParamMap<T>& m, const std::string& p) {
    m.add(p + ".w", w);
    m.add(p + ".b", b);
  }
  Index out_dim() const { return w.value.cols(); }
};

template <class T>
struct LayerNorm {
  Param<T> gamma, beta;

  LayerNorm() = default;
  explicit LayerNorm(Index dim) {
    gamma.value = Mat<T>::Ones(1, dim);
    beta.value = Mat<T>::Zero(1, dim);
  }
  Var<T> forward(Graph<T>& g, Var<T> x) {
    return layer_norm(g, x, g.lease(gamma), g.lease(beta));
  }
  void collect(ParamMap<T>& m, const std::string& p) {
    m.add(p + ".gamma", gamma);
    m.add(p + ".beta", beta);
  }
};

// Pre-norm transformer block: x + attn(ln(x)), then x + mlp(ln(x)).
template <class T>
struct TransformerBlock {
  Index heads = 4;
  LayerNorm<T> ln1, ln2;
  Dense<T> qkv, proj, fc1, fc2;

  TransformerBlock() = default;
  TransformerBlock(Index dim, Index n_heads, Index mlp_ratio, Rng& rng)
      : heads(n_heads),
        ln1(dim),
        ln2(dim),
        qkv(dim, 3 * dim, rng),
        proj(dim, dim, rng),
        fc1(dim, mlp_ratio * dim, rng),
        fc2(mlp_ratio * dim, dim, rng) {}

  Var<T> forward(Graph<T>& g, Var<T> x, Index batch, Index tokens) {
    const Index dim = x->value.cols();
    Var<T> h = ln1.forward(g, x);
    Var<T> qkv_out = qkv.forward(g, h);
    Var<T> q = slice_cols(g, qkv_out, 0, dim);
    Var<T> k = slice_cols(g, qkv_out, dim, dim);
    Var<T> v = slice_cols(g, qkv_out, 2 * dim, dim);
    Var<T> att = attention(g, q, k, v, batch, tokens, heads);
    x = add(g, x, proj.forward(g, att));
    Var<T> m = fc2.forward(g, gelu(g, fc1.forward(g, ln2.forward(g, x))));
    return add(g, x, m);
  }
  void collect(ParamMap<T>& m, const std::string& p) {
    ln1.collect(m, p + ".ln1");
    ln2.collect(m, p + ".ln2");
    qkv.collect(m, p + ".qkv");
    proj.collect(m, p + ".proj");
    fc1.collect(m, p + ".fc1");
    fc2.collect(m, p + ".fc2");
  }
};

// Standard GRU cell over (batch, dim) states.
template <class T>
struct GruCell {
  Dense<T> gates;      // [x,h] -> 2*dim (update z, reset r)
  Dense<T> candidate;  // [x, r*h] -> dim

  GruCell() = default;
  GruCell(Index in, Index dim, Rng& rng)
      : gates(in + dim, 2 * dim, rng), candidate(in + dim, dim, rng) {}

  Var<T> forward(Graph<T>& g, Var<T> x, Var<T> h) {
    const Index dim = h->value.cols();
    Var<T> xh = concat_cols(g, x, h);
    Var<T> zr = sigmoid(g, gates.forward(g, xh));
    Var<T> z = slice_cols(g, zr, 0, dim);
    Var<T> r = slice_cols(g, zr, dim, dim);
    Var<T> cand = tanh_(g, candidate.forward(g, concat_cols(g, x, mul(g, r, h))));
    // h' = (1-z)*h + z*cand
    Var<T> one_minus_z = add_scalar(g, neg(g, z), T(1));
    return add(g, mul(g, one_minus_z, h), mul(g, z, cand));
  }
  void collect(ParamMap<T>& m, const std::string& p) {
    gates.collect(m, p + ".gates");
    candidate.collect(m, p + ".cand");
  }
};

// Fully connected stack with a common hidden width and a linear output.
template <class T>
struct Mlp {
  std::vector<Dense<T>> layers;
  Act act = Act::kElu;

  Mlp() = default;
  Mlp(Index in, Index hidden, Index depth, Index out, Rng& rng, Act activation = Act::kElu)
      : act(activation) {
    Index d = in;
    for (Index i = 0; i < depth; ++i) {
      layers.emplace_back(d, hidden, rng);
      d = hidden;
    }
    layers.emplace_back(d, out, rng);
  }
  Var<T> forward(Graph<T>& g, Var<T> x) {
    for (size_t i = 0; i + 1 < layers.size(); ++i)
      x = activate(g, layers[i].forward(g, x), act);
    return layers.back().forward(g, x);
  }
  void collect(ParamMap<T>& m, const std::string& p) {
    for (size_t i = 0; i < layers.size(); ++i)
      layers[i].collect(m, p + ".fc" + std::to_string(i));
  }
};

// Fixed 2-D sine/cosine positional table over a g x g grid (dim % 4 == 0).
template <class T>
Mat<T> sinusoidal_grid(Index grid, Index dim) {
  Mat<T> table(grid * grid, dim);
  const Index quarter = dim / 4;
  for (Index y = 0; y < grid; ++y) {
    for (Index x = 0; x < grid; ++x) {
      const Index r = y * grid + x;
      for (Index i = 0; i < quarter; ++i) {
        const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / (dim / 2.0));
        table(r, 2 * i) = static_cast<T>(std::sin(x * freq));
        table(r, 2 * i + 1) = static_cast<T>(std::cos(x * freq));
        table(r, 2 * quarter + 2 * i) = static_cast<T>(std::sin(y * freq));
        table(r, 2 * quarter + 2 * i + 1) = static_cast<T>(std::cos(y * freq));
      }
    }
  }
  return table;
}

// Fixed 1-D sine/cosine positional table over n slots.
template <class T>
Mat<T> sinusoidal_slots(Index n, Index dim) {
  Mat<T> table(n, dim);
  const Index half = dim / 2;
  for (Index p = 0; p < n; ++p) {
    for (Index i = 0; i < half; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
      table(p, 2 * i) = static_cast<T>(std::sin(p * freq));
      table(p, 2 * i + 1) = static_cast<T>(std::cos(p * freq));
    }
  }
  return table;
}

}  // namespace reverie
