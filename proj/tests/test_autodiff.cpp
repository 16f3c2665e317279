//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/autodiff.hpp"

#include <cmath>

#include <doctest.h>

#include "aromma/errors.hpp"
#include "support.hpp"

using namespace aromma;
using testsupport::fd_gradient;
using testsupport::max_rel_err;
using testsupport::randn;

TEST_CASE("matmul matches hand arithmetic") {
  Tape t;
  const Value a = t.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  const Value b = t.constant(Tensor::matrix({{1}, {1}}));
  const Tensor& out = t.val(t.matmul(a, b));
  CHECK(out(0, 0) == 3.0);
  CHECK(out(1, 0) == 7.0);

  const Value eye = t.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  const Value x = t.constant(Tensor::matrix({{3, 1, 4}, {1, 5, 9}}));
  CHECK(max_abs_diff(t.val(t.matmul(eye, x)), t.val(x)) == 0.0);

  CHECK_THROWS_AS((void)t.matmul(b, b), ShapeError);
}

TEST_CASE("matmul gradient matches central differences") {
  Rng rng(11);
  Tensor a = randn(rng, {5, 4});
  Tensor b = randn(rng, {4, 3});
  const Tensor c = randn(rng, {5, 3});
  auto eval = [&]() {
    Tape t;
    const Value loss =
        t.sum_all(t.mul(t.matmul(t.leaf(a, "a"), t.leaf(b, "b")), t.constant(c)));
    return t.val(loss)[0];
  };
  Tape t;
  const Value av = t.leaf(a, "a");
  const Value bv = t.leaf(b, "b");
  t.backward(t.sum_all(t.mul(t.matmul(av, bv), t.constant(c))));
  CHECK(max_rel_err(t.grad(av), fd_gradient(eval, a)) < 1e-6);
  CHECK(max_rel_err(t.grad(bv), fd_gradient(eval, b)) < 1e-6);
}

TEST_CASE("softmax_rows handles symmetry, masking, and huge logits") {
  Tape t;
  const Value sym = t.softmax_rows(t.constant(Tensor::row({0, 0})));
  CHECK(t.val(sym)(0, 0) == 0.5);
  CHECK(t.val(sym)(0, 1) == 0.5);

  const Value masked = t.softmax_rows(t.constant(Tensor::row({0.3, 9.9})), {1, 0});
  CHECK(t.val(masked)(0, 0) == 1.0);
  CHECK(t.val(masked)(0, 1) == 0.0);  // exactly zero

  const Value huge = t.softmax_rows(t.constant(Tensor::row({1000, 1000, 1000})));
  for (int j = 0; j < 3; ++j) CHECK(t.val(huge)(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  CHECK_THROWS_AS((void)t.softmax_rows(t.constant(Tensor::row({1, 2})), {0, 0}), NumericError);
}

TEST_CASE("softmax rows sum to one and masked entries stay zero") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t;
    const Tensor x = randn(rng, {4, 6}, 3.0);
    std::vector<std::uint8_t> mask(24);
    for (std::size_t r = 0; r < 4; ++r) {
      bool any = false;
      for (std::size_t c = 0; c < 6; ++c) {
        mask[r * 6 + c] = rng.uniform() < 0.6 ? 1 : 0;
        any = any || mask[r * 6 + c];
      }
      if (!any) mask[r * 6 + rng.below(6)] = 1;
    }
    const Tensor& out = t.val(t.softmax_rows(t.constant(x), mask));
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 6; ++c) {
        if (!mask[r * 6 + c]) CHECK(out(r, c) == 0.0);
        sum += out(r, c);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("layer_norm closed forms") {
  Tape t;
  const Value gain = t.constant(Tensor::row({1, 1, 1, 1}));
  const Value bias = t.constant(Tensor::row({0, 0, 0, 0}));
  const Value constant_row = t.layer_norm(t.constant(Tensor::row({3, 3, 3, 3})), gain, bias, 1e-5);
  for (int j = 0; j < 4; ++j) CHECK(t.val(constant_row)(0, j) == 0.0);

  const Value g2 = t.constant(Tensor::row({1, 1}));
  const Value b2 = t.constant(Tensor::row({0, 0}));
  const Value pm = t.layer_norm(t.constant(Tensor::row({1, -1})), g2, b2, 1e-12);
  CHECK(t.val(pm)(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(t.val(pm)(0, 1) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("layer_norm gradient matches central differences") {
  Rng rng(21);
  Tensor x = randn(rng, {3, 6});
  Tensor gain = randn(rng, {1, 6});
  Tensor bias = randn(rng, {1, 6});
  const Tensor c = randn(rng, {3, 6});
  auto eval = [&]() {
    Tape t;
    const Value out =
        t.layer_norm(t.leaf(x, "x"), t.leaf(gain, "gain"), t.leaf(bias, "bias"), 1e-5);
    return t.val(t.sum_all(t.mul(out, t.constant(c))))[0];
  };
  Tape t;
  const Value xv = t.leaf(x, "x");
  const Value gv = t.leaf(gain, "gain");
  const Value bv = t.leaf(bias, "bias");
  t.backward(t.sum_all(t.mul(t.layer_norm(xv, gv, bv, 1e-5), t.constant(c))));
  CHECK(max_rel_err(t.grad(xv), fd_gradient(eval, x)) < 1e-4);
  CHECK(max_rel_err(t.grad(gv), fd_gradient(eval, gain)) < 1e-4);
  CHECK(max_rel_err(t.grad(bv), fd_gradient(eval, bias)) < 1e-4);
}

TEST_CASE("single-key attention reduces to the projected value row") {
  Rng rng(31);
  Tape t;
  const Value q = t.constant(randn(rng, {1, 8}));
  const Value k = t.constant(randn(rng, {1, 8}));
  const Tensor vrow = randn(rng, {1, 8});
  const Value v = t.constant(vrow);
  const Tensor wv = randn(rng, {8, 8});
  const Tensor wo = randn(rng, {8, 8});
  AttentionWeights w{t.constant(randn(rng, {8, 8})), t.constant(randn(rng, {8, 8})),
                     t.constant(wv), t.constant(wo)};
  const Value out = multi_head_attention(t, q, k, v, 2, {1}, w);
  const Tensor expected = matmul(matmul(vrow, wv), wo);
  CHECK(max_abs_diff(t.val(out), expected) < 1e-12);
}

TEST_CASE("single-query attention is permutation invariant over keys") {
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor q = randn(rng, {1, 8});
    const Tensor k = randn(rng, {4, 8});
    const Tensor v = randn(rng, {4, 8});
    const Tensor wq = randn(rng, {8, 8}), wk = randn(rng, {8, 8}), wv = randn(rng, {8, 8}),
                 wo = randn(rng, {8, 8});
    const std::vector<std::uint8_t> mask{1, 1, 0, 1};
    auto run = [&](const std::vector<std::size_t>& perm) {
      Tensor kp({4, 8}), vp({4, 8});
      std::vector<std::uint8_t> mp(4);
      for (std::size_t i = 0; i < 4; ++i) {
        mp[i] = mask[perm[i]];
        for (std::size_t j = 0; j < 8; ++j) {
          kp(i, j) = k(perm[i], j);
          vp(i, j) = v(perm[i], j);
        }
      }
      Tape t;
      AttentionWeights w{t.constant(wq), t.constant(wk), t.constant(wv), t.constant(wo)};
      return t.val(
          multi_head_attention(t, t.constant(q), t.constant(kp), t.constant(vp), 2, mp, w));
    };
    const Tensor base = run({0, 1, 2, 3});
    CHECK(max_abs_diff(base, run({3, 1, 0, 2})) < 1e-12);
    CHECK(max_abs_diff(base, run({1, 0, 3, 2})) < 1e-12);
  }
}

TEST_CASE("attention gradient matches central differences") {
  Rng rng(33);
  Tensor q = randn(rng, {2, 8}), k = randn(rng, {3, 8}), v = randn(rng, {3, 8});
  Tensor wq = randn(rng, {8, 8}), wk = randn(rng, {8, 8}), wv = randn(rng, {8, 8}),
         wo = randn(rng, {8, 8});
  const Tensor c = randn(rng, {2, 8});
  const std::vector<std::uint8_t> mask{1, 0, 1};
  auto build = [&](Tape& t, std::vector<Value>& leaves) {
    leaves = {t.leaf(q, "q"),   t.leaf(k, "k"),   t.leaf(v, "v"),
              t.leaf(wq, "wq"), t.leaf(wk, "wk"), t.leaf(wv, "wv"),
              t.leaf(wo, "wo")};
    AttentionWeights w{leaves[3], leaves[4], leaves[5], leaves[6]};
    return t.sum_all(
        t.mul(multi_head_attention(t, leaves[0], leaves[1], leaves[2], 2, mask, w), t.constant(c)));
  };
  auto eval = [&]() {
    Tape t;
    std::vector<Value> leaves;
    return t.val(build(t, leaves))[0];
  };
  Tape t;
  std::vector<Value> leaves;
  t.backward(build(t, leaves));
  Tensor* tensors[] = {&q, &k, &v, &wq, &wk, &wv, &wo};
  for (std::size_t i = 0; i < leaves.size(); ++i)
    CHECK(max_rel_err(t.grad(leaves[i]), fd_gradient(eval, *tensors[i])) < 1e-4);

  CHECK_THROWS_AS(
      (void)multi_head_attention(t, leaves[0], leaves[1], leaves[2], 2, {0, 0, 0},
                                 {leaves[3], leaves[4], leaves[5], leaves[6]}),
      NumericError);
  CHECK_THROWS_AS(
      (void)multi_head_attention(t, leaves[0], leaves[1], leaves[2], 3, mask,
                                 {leaves[3], leaves[4], leaves[5], leaves[6]}),
      ShapeError);
}

TEST_CASE("backward propagates linear and zero losses correctly") {
  // loss = sum(W x) with x a fixed vector: dloss/dW_ab = x_b for every row a.
  Tape t;
  Rng rng(41);
  const Tensor x = randn(rng, {4, 1});
  const Value w = t.leaf(randn(rng, {3, 4}), "w");
  t.backward(t.sum_all(t.matmul(w, t.constant(x))));
  const Tensor g = t.grad(w);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(g(i, j) == x(j, 0));

  Tape t2;
  const Value w2 = t2.leaf(randn(rng, {3, 3}), "w");
  t2.backward(t2.scale(t2.sum_all(t2.sigmoid(w2)), 0.0));
  const Tensor g2 = t2.grad(w2);
  for (std::size_t i = 0; i < g2.numel(); ++i) CHECK(g2[i] == 0.0);

  CHECK_THROWS_AS(t2.backward(w2), NumericError);  // non-scalar loss
}

TEST_CASE("every differentiable op passes a 100-trial gradient sweep") {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor a = randn(rng, {3, 5});
    Tensor b = randn(rng, {3, 5});
    Tensor bias = randn(rng, {1, 5});
    const Tensor c = randn(rng, {3, 5});
    const Tensor c2 = randn(rng, {3, 2});
    auto build = [&](Tape& t, Value av, Value bv, Value biasv) {
      const Value sum = t.add_row(t.add(av, bv), biasv);
      const Value mixed = t.add(t.relu(sum), t.sigmoid(t.mul(av, bv)));
      const Value squashed = t.clamp(t.sigmoid(mixed), 1e-7, 1.0 - 1e-7);
      const Value logged = t.log(squashed);
      const Value soft = t.softmax_rows(t.affine(logged, 1.7, 0.2));
      const Value gathered = t.gather_cols(soft, {4, 1});
      const Value cat = t.concat_cols({gathered, t.slice_cols(soft, 0, 2)});
      // statistics pooling on well-separated raw inputs; softmax rows are too
      // close to each other for finite differences at the min/max kinks
      const Value stats = t.masked_row_stats(t.sub(av, bv), {1, 1, 0});
      return t.add(t.mean_all(t.mul(soft, t.constant(c))),
                   t.add(t.add(t.mean_all(stats), t.mean_all(cat)),
                         t.mean_all(t.mul(gathered, t.constant(c2)))));
    };
    auto eval = [&]() {
      Tape t;
      return t.val(build(t, t.leaf(a, "a"), t.leaf(b, "b"), t.leaf(bias, "bias")))[0];
    };
    Tape t;
    const Value av = t.leaf(a, "a");
    const Value bv = t.leaf(b, "b");
    const Value biasv = t.leaf(bias, "bias");
    t.backward(build(t, av, bv, biasv));
    worst = std::max(worst, max_rel_err(t.grad(av), fd_gradient(eval, a)));
    worst = std::max(worst, max_rel_err(t.grad(bv), fd_gradient(eval, b)));
    worst = std::max(worst, max_rel_err(t.grad(biasv), fd_gradient(eval, bias)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("grad_check reports per-leaf errors and catches corrupted rules") {
  Rng rng(55);
  Tape t;
  const Value w = t.leaf(randn(rng, {4, 3}), "w");
  const Value x = t.constant(randn(rng, {3, 2}));
  const Value loss = t.sum_all(t.matmul(w, x));
  auto report = grad_check(t, loss, 1e-5, 1e-9);
  REQUIRE(report.size() == 1);
  CHECK(report[0].max_rel_err < 1e-9);  // linear model: exact up to fd noise
  CHECK(report[0].passed);

  set_gradient_fault_for_testing(true);
  Tape t2;
  const Value w2 = t2.leaf(randn(rng, {4, 3}), "w");
  const Value loss2 = t2.sum_all(t2.matmul(w2, t2.constant(randn(rng, {3, 2}))));
  auto corrupted = grad_check(t2, loss2, 1e-5, 1e-9);
  set_gradient_fault_for_testing(false);
  CHECK_FALSE(corrupted[0].passed);
}

TEST_CASE("grad_check covers a layer_norm chain at 1e-4") {
  Rng rng(56);
  Tape t;
  const Value x = t.leaf(randn(rng, {3, 6}), "x");
  const Value gain = t.leaf(randn(rng, {1, 6}), "gain");
  const Value bias = t.leaf(randn(rng, {1, 6}), "bias");
  const Value out = t.layer_norm(t.relu(x), gain, bias, 1e-5);
  const Value loss = t.mean_all(t.mul(out, t.constant(randn(rng, {3, 6}))));
  for (const auto& entry : grad_check(t, loss, 1e-5, 1e-4)) CHECK(entry.passed);
}

TEST_CASE("identical seeds give bit-identical op outputs") {
  auto run = [] {
    Rng rng(123);
    Tape t;
    const Value a = t.leaf(randn(rng, {4, 4}), "a");
    const Value out = t.softmax_rows(t.sigmoid(t.matmul(a, a)));
    return t.val(out);
  };
  const Tensor first = run();
  const Tensor second = run();
  CHECK(max_abs_diff(first, second) == 0.0);
}

TEST_CASE("masked_row_stats computes mean, biased variance, min, max") {
  Tape t;
  const Value x = t.constant(Tensor::matrix({{1, 5}, {3, 1}, {100, 100}}));
  const Tensor& s = t.val(t.masked_row_stats(x, {1, 1, 0}));
  CHECK(s(0, 0) == 2.0);   // mean col 0
  CHECK(s(0, 1) == 3.0);   // mean col 1
  CHECK(s(0, 2) == 1.0);   // biased var col 0
  CHECK(s(0, 3) == 4.0);   // biased var col 1
  CHECK(s(0, 4) == 1.0);   // min col 0
  CHECK(s(0, 5) == 1.0);   // min col 1
  CHECK(s(0, 6) == 3.0);   // max col 0
  CHECK(s(0, 7) == 5.0);   // max col 1
}
