#include "reverie/core/conv.hpp"
#include "reverie/core/modules.hpp"
#include "reverie/core/ops.hpp"
#include "reverie/core/optim.hpp"
#include "reverie/core/rng.hpp"

#include "support/gradcheck.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace reverie;
using D = double;

namespace {

Param<D> rand_param(Index r, Index c, Rng& rng, double scale = 0.5) {
  Param<D> p;
  p.value.resize(r, c);
  rng.fill_normal(p.value, scale);
  return p;
}

}  // namespace

TEST_CASE("rng streams are deterministic and serializable") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  auto st = a.state();
  double x1 = a.uniform();
  Rng c;
  c.set_state(st);
  REQUIRE(c.uniform() == x1);
  Rng f1 = a.fork(1), f2 = a.fork(2);
  REQUIRE(f1.next_u64() != f2.next_u64());
}

TEST_CASE("rng uniform_int is unbiased over small ranges") {
  Rng rng(7);
  std::vector<int> counts(8, 0);
  const int n = 80000;
  for (int i = 0; i < n; ++i) counts[rng.uniform_int(8)]++;
  for (int c : counts) REQUIRE(std::abs(c - n / 8) < 500);
}

TEST_CASE("elementwise and reduction op gradients match finite differences") {
  Rng rng(1);
  Param<D> a = rand_param(3, 4, rng);
  Param<D> b = rand_param(3, 4, rng);
  ParamMap<D> pm;
  pm.add("a", a);
  pm.add("b", b);

  auto eval = [&](bool grads) {
    Graph<D> g;
    g.recording = grads;
    Var<D> va = g.lease(a), vb = g.lease(b);
    Var<D> x = mul(g, add(g, va, vb), sub(g, va, scale(g, vb, 0.3)));
    x = add(g, tanh_(g, x), sigmoid(g, x));
    x = add(g, softplus(g, x), gelu(g, x));
    x = add(g, elu(g, x), square(g, x));
    x = add(g, exp_(g, scale(g, x, 0.1)), max_scalar(g, x, 0.2));
    Var<D> loss = add(g, mean(g, x), sum(g, square(g, rowsum(g, x))));
    loss = add(g, loss, mean(g, square(g, colsum(g, x))));
    if (grads) g.backward(loss);
    return loss->value(0, 0);
  };
  auto rep = testing::grad_check(pm, eval);
  INFO(rep.worst_name << " rel=" << rep.worst_rel);
  REQUIRE(rep.pass_fraction() == 1.0);
}

TEST_CASE("matmul, linear, layout and broadcast op gradients") {
  Rng rng(2);
  Param<D> x = rand_param(5, 3, rng);
  Param<D> w = rand_param(3, 4, rng);
  Param<D> bias = rand_param(1, 4, rng);
  Param<D> c = rand_param(5, 1, rng);
  ParamMap<D> pm;
  pm.add("x", x);
  pm.add("w", w);
  pm.add("b", bias);
  pm.add("c", c);

  auto eval = [&](bool grads) {
    Graph<D> g;
    g.recording = grads;
    Var<D> vx = g.lease(x);
    Var<D> y = linear(g, vx, g.lease(w), g.lease(bias));
    y = mul_colvec(g, y, g.lease(c));
    y = add_rowvec(g, y, g.lease(bias));
    Var<D> z = matmul(g, y, g.make(w.value.transpose(), false));
    z = concat_cols(g, z, slice_cols(g, z, 0, 2));
    z = concat_rows<D>(g, {slice_rows(g, z, 0, 2), slice_rows(g, z, 2, 3)});
    z = reshape(g, z, 5, 5);
    Var<D> gathered = gather_rows(g, z, {4, 0, 2});
    Var<D> scattered = scatter_rows(g, gathered, {1, 3, 0}, 6);
    Var<D> rep1 = repeat_row(g, slice_rows(g, scattered, 0, 1), 3);
    Var<D> rep2 = repeat_each_row(g, gathered, 2);
    Var<D> gm = group_mean_rows(g, rep2, 2);
    Var<D> loss = add(g, mean(g, square(g, scattered)), mean(g, square(g, rep1)));
    loss = add(g, loss, mean(g, square(g, gm)));
    if (grads) g.backward(loss);
    return loss->value(0, 0);
  };
  auto rep = testing::grad_check(pm, eval);
  INFO(rep.worst_name << " rel=" << rep.worst_rel);
  REQUIRE(rep.pass_fraction() == 1.0);
}

TEST_CASE("softmax, log-softmax and layer norm gradients") {
  Rng rng(3);
  Param<D> x = rand_param(6, 5, rng, 1.5);
  Param<D> gamma = rand_param(1, 5, rng);
  Param<D> beta = rand_param(1, 5, rng);
  ParamMap<D> pm;
  pm.add("x", x);
  pm.add("gamma", gamma);
  pm.add("beta", beta);

  auto eval = [&](bool grads) {
    Graph<D> g;
    g.recording = grads;
    Var<D> vx = g.lease(x);
    Var<D> sm = softmax_rows(g, vx);
    Var<D> lsm = log_softmax_rows(g, scale(g, vx, 0.7));
    Var<D> ln = layer_norm(g, vx, g.lease(gamma), g.lease(beta));
    Var<D> loss = add(g, mean(g, mul(g, sm, lsm)), mean(g, square(g, ln)));
    if (grads) g.backward(loss);
    return loss->value(0, 0);
  };
  auto rep = testing::grad_check(pm, eval);
  INFO(rep.worst_name << " rel=" << rep.worst_rel);
  REQUIRE(rep.pass_fraction() == 1.0);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(4);
  Graph<D> g;
  Mat<D> logits(10, 7);
  rng.fill_normal(logits, 3.0);
  Var<D> sm = softmax_rows(g, g.constant(logits));
  for (Index i = 0; i < 10; ++i) REQUIRE(sm->value.row(i).sum() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("attention gradient matches finite differences") {
  Rng rng(5);
  const Index batch = 2, tokens = 4, dim = 8, heads = 2;
  Param<D> q = rand_param(batch * tokens, dim, rng);
  Param<D> k = rand_param(batch * tokens, dim, rng);
  Param<D> v = rand_param(batch * tokens, dim, rng);
  ParamMap<D> pm;
  pm.add("q", q);
  pm.add("k", k);
  pm.add("v", v);

  auto eval = [&](bool grads) {
    Graph<D> g;
    g.recording = grads;
    Var<D> out = attention(g, g.lease(q), g.lease(k), g.lease(v), batch, tokens, heads);
    Var<D> loss = mean(g, square(g, out));
    if (grads) g.backward(loss);
    return loss->value(0, 0);
  };
  auto rep = testing::grad_check(pm, eval);
  INFO(rep.worst_name << " rel=" << rep.worst_rel);
  REQUIRE(rep.pass_fraction() == 1.0);
}

TEST_CASE("conv2d and conv_transpose2d gradients match finite differences") {
  Rng rng(6);
  const Index h = 6, w = 6, cin = 2, cout = 3;
  auto plan = ConvPlan::make(h, w, cin, 4, 2, 1);
  REQUIRE(plan.out_h == 3);
  Param<D> x = rand_param(2, h * w * cin, rng);
  Param<D> wt = rand_param(plan.patch_size(), cout, rng);
  Param<D> b = rand_param(1, cout, rng);
  // transposed direction: from (3,3,cout) back up to (6,6,cin)
  Param<D> wd = rand_param(plan.patch_size(), cout, rng);
  Param<D> bd = rand_param(1, cin, rng);
  ParamMap<D> pm;
  pm.add("x", x);
  pm.add("w", wt);
  pm.add("b", b);
  pm.add("wd", wd);
  pm.add("bd", bd);

  auto eval = [&](bool grads) {
    Graph<D> g;
    g.recording = grads;
    Var<D> y = conv2d(g, g.lease(x), g.lease(wt), g.lease(b), plan);
    REQUIRE(y->value.cols() == plan.out_pixels() * cout);
    Var<D> up = conv_transpose2d(g, gelu(g, y), g.lease(wd), g.lease(bd), plan);
    REQUIRE(up->value.cols() == h * w * cin);
    Var<D> loss = mean(g, square(g, up));
    if (grads) g.backward(loss);
    return loss->value(0, 0);
  };
  auto rep = testing::grad_check(pm, eval);
  INFO(rep.worst_name << " rel=" << rep.worst_rel);
  REQUIRE(rep.pass_fraction() == 1.0);
}

TEST_CASE("transformer block and gru cell gradients") {
  Rng rng(7);
  const Index batch = 2, tokens = 3, dim = 8;
  TransformerBlock<D> block(dim, 2, 2, rng);
  GruCell<D> gru(dim, dim, rng);
  Param<D> x = rand_param(batch * tokens, dim, rng);
  Param<D> h0 = rand_param(batch, dim, rng);
  ParamMap<D> pm;
  pm.add("x", x);
  pm.add("h0", h0);
  block.collect(pm, "block");
  gru.collect(pm, "gru");

  auto eval = [&](bool grads) {
    Graph<D> g;
    g.recording = grads;
    Var<D> y = block.forward(g, g.lease(x), batch, tokens);
    Var<D> pooled = group_mean_rows(g, y, tokens);
    Var<D> h = gru.forward(g, pooled, g.lease(h0));
    h = gru.forward(g, pooled, h);
    Var<D> loss = mean(g, square(g, h));
    if (grads) g.backward(loss);
    return loss->value(0, 0);
  };
  auto rep = testing::grad_check(pm, eval);
  INFO(rep.worst_name << " rel=" << rep.worst_rel);
  REQUIRE(rep.pass_fraction() == 1.0);
}

TEST_CASE("straight-through sample passes gradients to probabilities") {
  Rng rng(8);
  Param<D> logits = rand_param(6, 4, rng);
  Mat<D> uniforms(6, 1);
  rng.fill_uniform(uniforms, 0.0, 1.0);

  // Expected mode: FD-checkable because the forward value is the probs.
  ParamMap<D> pm;
  pm.add("logits", logits);
  auto eval = [&](bool grads) {
    Graph<D> g;
    g.recording = grads;
    Var<D> probs = softmax_rows(g, g.lease(logits));
    Var<D> s = st_sample(g, probs, uniforms, /*expected_mode=*/true);
    Var<D> loss = mean(g, square(g, s));
    if (grads) g.backward(loss);
    return loss->value(0, 0);
  };
  auto rep = testing::grad_check(pm, eval);
  REQUIRE(rep.pass_fraction() == 1.0);

  // Sampled mode: one-hot forward, identical backward as the probs path.
  Graph<D> g1, g2;
  Var<D> l1 = g1.lease(logits);
  Var<D> p1 = softmax_rows(g1, l1);
  Var<D> s1 = st_sample(g1, p1, uniforms, false);
  for (Index i = 0; i < s1->value.rows(); ++i) {
    REQUIRE(s1->value.row(i).sum() == Catch::Approx(1.0));
    REQUIRE(s1->value.row(i).maxCoeff() == Catch::Approx(1.0));
  }
  Mat<D> up(6, 4);
  Rng rng2(9);
  rng2.fill_normal(up);
  logits.zero_grad();
  Var<D> loss1 = sum(g1, mul(g1, s1, g1.constant(up)));
  g1.backward(loss1);
  Mat<D> grad_sampled = logits.grad;

  logits.zero_grad();
  Var<D> l2 = g2.lease(logits);
  Var<D> p2 = softmax_rows(g2, l2);
  Var<D> loss2 = sum(g2, mul(g2, p2, g2.constant(up)));
  g2.backward(loss2);
  REQUIRE((grad_sampled - logits.grad).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adam minimizes a quadratic") {
  Rng rng(10);
  Param<D> x = rand_param(4, 4, rng, 2.0);
  ParamMap<D> pm;
  pm.add("x", x);
  Adam<D> opt(pm, 0.05);
  double first = 0, last = 0;
  for (int i = 0; i < 400; ++i) {
    opt.zero_grad();
    Graph<D> g;
    Var<D> loss = mean(g, square(g, add_scalar(g, g.lease(x), -3.0)));
    g.backward(loss);
    opt.step();
    if (i == 0) first = loss->value(0, 0);
    last = loss->value(0, 0);
  }
  REQUIRE(last < 1e-4 * first);
  REQUIRE(std::abs(x.value(0, 0) - 3.0) < 0.05);
}

TEST_CASE("gradient norm clipping caps the update") {
  Param<D> x;
  x.value = Mat<D>::Zero(1, 1);
  ParamMap<D> pm;
  pm.add("x", x);
  Adam<D> opt(pm, 1.0, /*clip_norm=*/1.0);
  opt.zero_grad();
  x.grad(0, 0) = 1e6;
  double norm = opt.step();
  REQUIRE(norm == Catch::Approx(1e6));
  // post-clip effective gradient is 1, so the Adam step is bounded by lr
  REQUIRE(std::abs(x.value(0, 0)) <= 1.0 + 1e-9);
}

TEST_CASE("warmup schedule ramps linearly") {
  REQUIRE(warmup_scale(0, 2500) == 0.0);
  REQUIRE(warmup_scale(1250, 2500) == Catch::Approx(0.5));
  REQUIRE(warmup_scale(2500, 2500) == 1.0);
  REQUIRE(warmup_scale(99999, 2500) == 1.0);
}

TEST_CASE("frozen params enter the graph as constants") {
  Rng rng(11);
  Param<D> x = rand_param(2, 2, rng);
  x.trainable = false;
  Graph<D> g;
  Var<D> v = g.lease(x);
  REQUIRE_FALSE(v->needs_grad);
  x.trainable = true;
  Var<D> v2 = g.lease(x);
  REQUIRE(v2->needs_grad);
}
