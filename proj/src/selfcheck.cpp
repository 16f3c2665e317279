//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aromma/aggregator.hpp"
#include "aromma/autodiff.hpp"
#include "aromma/losses.hpp"
#include "aromma/metrics.hpp"
#include "aromma/pseudo.hpp"
#include "aromma/rng.hpp"

namespace aromma {

namespace {

Tensor randn(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

double worst_grad_err(Tape& tape, Value loss, double h) {
  double worst = 0.0;
  for (const GradCheckEntry& e : grad_check(tape, loss, h, 1e-4))
    worst = std::max(worst, e.max_rel_err);
  return worst;
}

CheckResult check_matmul_grad(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    const Value a = t.leaf(randn(rng, {5, 4}), "a");
    const Value b = t.leaf(randn(rng, {4, 3}), "b");
    const Value loss = t.sum_all(t.mul(t.matmul(a, b), t.constant(randn(rng, {5, 3}))));
    worst = std::max(worst, worst_grad_err(t, loss, 1e-5));
  }
  return {"gradient/matmul", worst < 1e-4, "max rel err " + std::to_string(worst)};
}

CheckResult check_layer_norm_grad(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    const Value x = t.leaf(randn(rng, {3, 6}), "x");
    const Value gain = t.leaf(randn(rng, {1, 6}), "gain");
    const Value bias = t.leaf(randn(rng, {1, 6}), "bias");
    const Value loss =
        t.sum_all(t.mul(t.layer_norm(x, gain, bias, 1e-5), t.constant(randn(rng, {3, 6}))));
    worst = std::max(worst, worst_grad_err(t, loss, 1e-5));
  }
  return {"gradient/layer_norm", worst < 1e-4, "max rel err " + std::to_string(worst)};
}

CheckResult check_attention_grad(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Tape t;
    const Value q = t.leaf(randn(rng, {2, 8}), "q");
    const Value k = t.leaf(randn(rng, {3, 8}), "k");
    const Value v = t.leaf(randn(rng, {3, 8}), "v");
    AttentionWeights w{t.leaf(randn(rng, {8, 8}), "wq"), t.leaf(randn(rng, {8, 8}), "wk"),
                       t.leaf(randn(rng, {8, 8}), "wv"), t.leaf(randn(rng, {8, 8}), "wo")};
    const Value out = multi_head_attention(t, q, k, v, 2, {1, 1, 1}, w);
    const Value loss = t.sum_all(t.mul(out, t.constant(randn(rng, {2, 8}))));
    worst = std::max(worst, worst_grad_err(t, loss, 1e-5));
  }
  return {"gradient/attention", worst < 1e-4, "max rel err " + std::to_string(worst)};
}

CheckResult check_model_grad(Rng& rng) {
  AggregatorConfig cfg;
  cfg.d_e = 10;
  cfg.d_p = 8;
  cfg.d_h = 8;
  cfg.heads = 2;
  cfg.labels = 5;
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    AggregatorParams params = AggregatorParams::init(cfg, rng);
    Tape t;
    const BoundAggregator b = bind_aggregator(t, params, /*trainable=*/true);
    const Value e = t.constant(randn(rng, {2, 10}));
    const AggregatorOut out = aggregator_forward(t, b, cfg, e, {1, 1});
    std::vector<std::uint8_t> y(5);
    for (auto& bit : y) bit = rng.uniform() < 0.4 ? 1 : 0;
    const Value loss = bce_node(t, y, out.probs);
    worst = std::max(worst, worst_grad_err(t, loss, 1e-5));
  }
  return {"gradient/full_model_loss", worst < 1e-4, "max rel err " + std::to_string(worst)};
}

CheckResult check_permutation_invariance(Rng& rng) {
  AggregatorConfig cfg;
  cfg.d_e = 12;
  cfg.d_p = 8;
  cfg.d_h = 8;
  cfg.heads = 2;
  cfg.labels = 4;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    AggregatorParams params = AggregatorParams::init(cfg, rng);
    const Tensor e1 = randn(rng, {1, 12});
    const Tensor e2 = randn(rng, {1, 12});
    const ForwardResult ab = forward(params, MixtureInput::pair(e1, e2));
    const ForwardResult ba = forward(params, MixtureInput::pair(e2, e1));
    worst = std::max(worst, max_abs_diff(ab.z, ba.z));
    worst = std::max(worst, max_abs_diff(ab.probs, ba.probs));
  }
  return {"aggregator/permutation_invariance", worst < 1e-12,
          "max swap difference " + std::to_string(worst)};
}

CheckResult check_pad_independence(Rng& rng) {
  AggregatorConfig cfg;
  cfg.d_e = 12;
  cfg.d_p = 8;
  cfg.d_h = 8;
  cfg.heads = 2;
  cfg.labels = 4;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    AggregatorParams params = AggregatorParams::init(cfg, rng);
    MixtureInput x = MixtureInput::single(randn(rng, {1, 12}));
    const ForwardResult clean = forward(params, x);
    for (std::size_t j = 0; j < 12; ++j) x.e(1, j) = rng.normal();
    const ForwardResult noisy = forward(params, x);
    worst = std::max(worst, max_abs_diff(clean.z, noisy.z));
  }
  return {"aggregator/pad_independence", worst == 0.0,
          "max pad-row effect " + std::to_string(worst)};
}

CheckResult check_auroc_oracle(Rng& rng) {
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(120);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    bool tie_heavy = trial % 3 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = tie_heavy ? static_cast<double>(rng.below(4)) : rng.uniform();
      labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    const auto fast = auroc_binary(scores, labels);
    std::size_t np = 0;
    for (auto y : labels) np += y;
    if (np == 0 || np == n) {
      if (fast) return {"metrics/auroc_oracle", false, "degenerate class not skipped"};
      continue;
    }
    double wins = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (!labels[i] || labels[j]) continue;
        if (scores[i] > scores[j])
          wins += 1.0;
        else if (scores[i] == scores[j])
          wins += 0.5;
      }
    const double oracle = wins / (static_cast<double>(np) * static_cast<double>(n - np));
    if (!fast || *fast != oracle)
      return {"metrics/auroc_oracle", false, "rank formula deviates from pair counting"};
  }
  return {"metrics/auroc_oracle", true, "exact match over 200 trials"};
}

CheckResult check_threshold_calibration(Rng& rng) {
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 10 + rng.below(200);
    const std::size_t L = 4;
    Tensor preds({m, L});
    for (double& v : preds.data()) v = rng.uniform();
    ClassRates rates;
    rates.n = m;
    for (std::size_t c = 0; c < L; ++c) rates.gamma.push_back(rng.uniform());
    const Thresholds tau = fit_thresholds(preds, rates);
    for (std::size_t c = 0; c < L; ++c) {
      std::size_t selected = 0;
      for (std::size_t i = 0; i < m; ++i) selected += preds(i, c) >= tau.tau[c] ? 1 : 0;
      const double frac = static_cast<double>(selected) / static_cast<double>(m);
      if (std::fabs(frac - rates.gamma[c]) > 1.0 / static_cast<double>(m) + 1e-12)
        return {"pseudo/threshold_calibration", false, "selected fraction off target"};
    }
  }
  return {"pseudo/threshold_calibration", true, "within 1/m over 50 random fits"};
}

}  // namespace

std::vector<CheckResult> run_selfcheck(std::uint64_t seed, bool inject_fault) {
  Rng rng(seed);
  set_gradient_fault_for_testing(inject_fault);
  std::vector<CheckResult> results;
  results.push_back(check_matmul_grad(rng));
  results.push_back(check_layer_norm_grad(rng));
  results.push_back(check_attention_grad(rng));
  results.push_back(check_model_grad(rng));
  set_gradient_fault_for_testing(false);
  results.push_back(check_permutation_invariance(rng));
  results.push_back(check_pad_independence(rng));
  results.push_back(check_auroc_oracle(rng));
  results.push_back(check_threshold_calibration(rng));
  return results;
}

}  // namespace aromma
