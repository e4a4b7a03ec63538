// Micro-benchmarks for preset calibration: raw GEMM throughput and the
// forward+backward cost of a transformer block at desk-scale shapes.
#include "reverie/core/modules.hpp"
#include "reverie/core/optim.hpp"

#include <malloc.h>

#include <chrono>
#include <cstdio>

using namespace reverie;

static double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

int main() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  using F = float;
  Rng rng(0);

  {
    const Index n = 512;
    Mat<F> a(n, n), b(n, n);
    rng.fill_normal(a);
    rng.fill_normal(b);
    Mat<F> c(n, n);
    c.noalias() = a * b;  // warm
    const int iters = 30;
    double t0 = now_s();
    for (int i = 0; i < iters; ++i) c.noalias() = a * b;
    double dt = now_s() - t0;
    double gflops = 2.0 * n * n * n * iters / dt / 1e9;
    std::printf("gemm %ldx%ld            : %7.2f GF/s\n", (long)n, (long)n, gflops);
  }
  {
    const Index n = 128;
    Mat<F> a(n, n), b(n, n), c(n, n);
    rng.fill_normal(a);
    rng.fill_normal(b);
    c.noalias() = a * b;
    const int iters = 2000;
    double t0 = now_s();
    for (int i = 0; i < iters; ++i) c.noalias() = a * b;
    double dt = now_s() - t0;
    std::printf("gemm %ldx%ld            : %7.2f GF/s\n", (long)n, (long)n,
                2.0 * n * n * n * iters / dt / 1e9);
  }

  // Transformer block at dyn-module desk shapes: 256 sequences of 65 tokens.
  {
    const Index batch = 256, tokens = 65, dim = 64;
    TransformerBlock<F> block(dim, 4, 2, rng);
    Param<F> x;
    x.value.resize(batch * tokens, dim);
    rng.fill_normal(x.value);
    ParamMap<F> pm;
    pm.add("x", x);
    block.collect(pm, "block");

    auto run = [&](bool bwd) {
      Graph<F> g;
      Var<F> y = block.forward(g, g.lease(x), batch, tokens);
      Var<F> loss = mean(g, square(g, y));
      if (bwd) g.backward(loss);
      return loss->value(0, 0);
    };
    run(true);
    const int iters = 10;
    double t0 = now_s();
    for (int i = 0; i < iters; ++i) {
      for (auto& [_, p] : pm.items) p->zero_grad();
      run(true);
    }
    double dt = (now_s() - t0) / iters;
    std::printf("block fwd+bwd 256x65x64 : %7.1f ms\n", dt * 1e3);

    t0 = now_s();
    for (int i = 0; i < iters; ++i) run(false);
    double dtf = (now_s() - t0) / iters;
    std::printf("block fwd     256x65x64 : %7.1f ms\n", dtf * 1e3);
  }

  // Conv stem desk shape: batch 256 of 64x64x3.
  {
    const Index batch = 256;
    auto p1 = ConvPlan::make(64, 64, 3, 4, 2, 1);
    auto p2 = ConvPlan::make(32, 32, 8, 4, 2, 1);
    auto p3 = ConvPlan::make(16, 16, 16, 4, 2, 1);
    auto p4 = ConvPlan::make(8, 8, 32, 1, 1, 0);
    Param<F> w1, w2, w3, w4, b1, b2, b3, b4, x;
    auto init = [&](Param<F>& w, Param<F>& b, const ConvPlan& p, Index out) {
      w.value.resize(p.patch_size(), out);
      rng.fill_normal(w.value, 0.05);
      b.value = Mat<F>::Zero(1, out);
    };
    init(w1, b1, p1, 8);
    init(w2, b2, p2, 16);
    init(w3, b3, p3, 32);
    init(w4, b4, p4, 64);
    x.value.resize(batch, 64 * 64 * 3);
    rng.fill_normal(x.value);
    x.trainable = false;
    ParamMap<F> pm;
    pm.add("w1", w1);
    pm.add("w2", w2);
    pm.add("w3", w3);
    pm.add("w4", w4);
    auto run = [&]() {
      Graph<F> g;
      Var<F> h = gelu(g, conv2d(g, g.lease(x), g.lease(w1), g.lease(b1), p1));
      h = gelu(g, conv2d(g, h, g.lease(w2), g.lease(b2), p2));
      h = gelu(g, conv2d(g, h, g.lease(w3), g.lease(b3), p3));
      h = conv2d(g, h, g.lease(w4), g.lease(b4), p4);
      Var<F> loss = mean(g, square(g, h));
      g.backward(loss);
    };
    run();
    const int iters = 10;
    double t0 = now_s();
    for (int i = 0; i < iters; ++i) {
      for (auto& [_, p] : pm.items) p->zero_grad();
      run();
    }
    std::printf("conv stem fwd+bwd b256  : %7.1f ms\n", (now_s() - t0) / iters * 1e3);
  }
  return 0;
}
