//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/aggregator.hpp"

#include <cmath>

#include "aromma/errors.hpp"

namespace aromma {

namespace {

constexpr double kLayerNormEps = 1e-5;

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& v : t.data()) v = rng.uniform(-a, a);
  return t;
}

}  // namespace

AggregatorParams AggregatorParams::init(const AggregatorConfig& cfg, Rng& rng) {
  if (cfg.d_p % cfg.heads != 0 || cfg.d_h % cfg.heads != 0)
    throw ShapeError("aggregator: d_p and d_h must be divisible by the head count");
  if (cfg.labels <= 0) throw ShapeError("aggregator: label count must be positive");
  const auto d_e = static_cast<std::size_t>(cfg.d_e);
  const auto d_p = static_cast<std::size_t>(cfg.d_p);
  const auto d_h = static_cast<std::size_t>(cfg.d_h);
  const auto labels = static_cast<std::size_t>(cfg.labels);

  AggregatorParams p;
  p.cfg = cfg;
  p.w1 = xavier_uniform(d_e, d_p, rng);
  p.b1 = Tensor({1, d_p});
  p.self_wq = xavier_uniform(d_p, d_p, rng);
  p.self_wk = xavier_uniform(d_p, d_p, rng);
  p.self_wv = xavier_uniform(d_p, d_p, rng);
  p.self_wo = xavier_uniform(d_p, d_p, rng);
  p.w2 = xavier_uniform(d_p, d_h, rng);
  p.b2 = Tensor({1, d_h});
  if (cfg.variant == AggregatorVariant::CrossAttention) {
    p.cross_wq = xavier_uniform(d_h, d_h, rng);
    p.cross_wk = xavier_uniform(d_h, d_h, rng);
    p.cross_wv = xavier_uniform(d_h, d_h, rng);
    p.cross_wo = xavier_uniform(d_h, d_h, rng);
    p.query = Tensor({1, d_h});
    for (double& v : p.query.data()) v = rng.normal(0.0, 0.02);
  } else {
    p.pna_w = xavier_uniform(4 * d_h, d_h, rng);
    p.pna_b = Tensor({1, d_h});
  }
  p.ln_gain = Tensor::full({1, d_h}, 1.0);
  p.ln_bias = Tensor({1, d_h});
  p.head_w = xavier_uniform(d_h, labels, rng);
  p.head_b = Tensor({1, labels});
  return p;
}

template <class P, class T>
static std::vector<std::pair<std::string, T*>> named_tensors_impl(P& p) {
  std::vector<std::pair<std::string, T*>> out = {
      {"w1", &p.w1},           {"b1", &p.b1},
      {"self_wq", &p.self_wq}, {"self_wk", &p.self_wk},
      {"self_wv", &p.self_wv}, {"self_wo", &p.self_wo},
      {"w2", &p.w2},           {"b2", &p.b2},
  };
  if (p.cfg.variant == AggregatorVariant::CrossAttention) {
    out.emplace_back("cross_wq", &p.cross_wq);
    out.emplace_back("cross_wk", &p.cross_wk);
    out.emplace_back("cross_wv", &p.cross_wv);
    out.emplace_back("cross_wo", &p.cross_wo);
    out.emplace_back("query", &p.query);
  } else {
    out.emplace_back("pna_w", &p.pna_w);
    out.emplace_back("pna_b", &p.pna_b);
  }
  out.emplace_back("ln_gain", &p.ln_gain);
  out.emplace_back("ln_bias", &p.ln_bias);
  out.emplace_back("head_w", &p.head_w);
  out.emplace_back("head_b", &p.head_b);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> named_tensors(AggregatorParams& p) {
  return named_tensors_impl<AggregatorParams, Tensor>(p);
}

std::vector<std::pair<std::string, const Tensor*>> named_tensors(const AggregatorParams& p) {
  return named_tensors_impl<const AggregatorParams, const Tensor>(p);
}

MixtureInput MixtureInput::single(const Tensor& e1) {
  const std::size_t d = e1.numel();
  MixtureInput x;
  x.e = Tensor({2, d});
  for (std::size_t j = 0; j < d; ++j) x.e(0, j) = e1[j];
  x.valid = {1, 0};
  return x;
}

MixtureInput MixtureInput::pair(const Tensor& e1, const Tensor& e2) {
  const std::size_t d = e1.numel();
  if (e2.numel() != d) throw ShapeError("mixture input: embedding widths differ");
  MixtureInput x;
  x.e = Tensor({2, d});
  for (std::size_t j = 0; j < d; ++j) {
    x.e(0, j) = e1[j];
    x.e(1, j) = e2[j];
  }
  x.valid = {1, 1};
  return x;
}

BoundAggregator bind_aggregator(Tape& tape, const AggregatorParams& p, bool trainable) {
  BoundAggregator b;
  auto place = [&](const std::string& name, const Tensor& t) {
    const Value v = trainable ? tape.leaf(t, name) : tape.constant(t);
    b.all.emplace_back(name, v);
    return v;
  };
  for (const auto& [name, tensor] : named_tensors(p)) {
    const Value v = place(name, *tensor);
    if (name == "w1") b.w1 = v;
    else if (name == "b1") b.b1 = v;
    else if (name == "self_wq") b.self_wq = v;
    else if (name == "self_wk") b.self_wk = v;
    else if (name == "self_wv") b.self_wv = v;
    else if (name == "self_wo") b.self_wo = v;
    else if (name == "w2") b.w2 = v;
    else if (name == "b2") b.b2 = v;
    else if (name == "cross_wq") b.cross_wq = v;
    else if (name == "cross_wk") b.cross_wk = v;
    else if (name == "cross_wv") b.cross_wv = v;
    else if (name == "cross_wo") b.cross_wo = v;
    else if (name == "query") b.query = v;
    else if (name == "pna_w") b.pna_w = v;
    else if (name == "pna_b") b.pna_b = v;
    else if (name == "ln_gain") b.ln_gain = v;
    else if (name == "ln_bias") b.ln_bias = v;
    else if (name == "head_w") b.head_w = v;
    else if (name == "head_b") b.head_b = v;
  }
  return b;
}

AggregatorOut aggregator_forward(Tape& t, const BoundAggregator& b, const AggregatorConfig& cfg,
                                 Value e_stack, const std::array<std::uint8_t, 2>& valid) {
  if (!valid[0] && !valid[1]) throw NumericError("mixture input: no valid rows");
  const std::vector<std::uint8_t> key_mask{valid[0], valid[1]};

  const Value e_proj = t.relu(t.add_row(t.matmul(e_stack, b.w1), b.b1));
  const Value h = multi_head_attention(t, e_proj, e_proj, e_proj, cfg.heads, key_mask,
                                       {b.self_wq, b.self_wk, b.self_wv, b.self_wo});
  const Value h_proj = t.add_row(t.matmul(h, b.w2), b.b2);

  Value pooled;
  if (cfg.variant == AggregatorVariant::CrossAttention) {
    pooled = multi_head_attention(t, b.query, h_proj, h_proj, cfg.heads, key_mask,
                                  {b.cross_wq, b.cross_wk, b.cross_wv, b.cross_wo});
  } else {
    pooled = t.add_row(t.matmul(t.masked_row_stats(h_proj, key_mask), b.pna_w), b.pna_b);
  }
  const Value z = t.layer_norm(pooled, b.ln_gain, b.ln_bias, kLayerNormEps);
  const Value probs = t.sigmoid(t.add_row(t.matmul(z, b.head_w), b.head_b));
  return {z, probs};
}

namespace {

ForwardResult forward_with_variant(const AggregatorParams& p, const MixtureInput& x,
                                   AggregatorVariant variant) {
  if (p.cfg.variant != variant)
    throw ShapeError("aggregator: parameters do not carry this variant's tensors");
  if (x.e.rows() != 2 || x.e.cols() != static_cast<std::size_t>(p.cfg.d_e))
    throw ShapeError("aggregator: mixture input must be 2 x d_e");
  Tape tape;
  const BoundAggregator b = bind_aggregator(tape, p, /*trainable=*/false);
  const Value e = tape.constant(x.e);
  const AggregatorOut out = aggregator_forward(tape, b, p.cfg, e, x.valid);
  return {tape.val(out.z), tape.val(out.probs)};
}

}  // namespace

ForwardResult forward(const AggregatorParams& p, const MixtureInput& x) {
  return forward_with_variant(p, x, AggregatorVariant::CrossAttention);
}

ForwardResult forward_pna_baseline(const AggregatorParams& p, const MixtureInput& x) {
  return forward_with_variant(p, x, AggregatorVariant::PnaBaseline);
}

}  // namespace aromma
