//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aromma/autodiff.hpp"
#include "aromma/rng.hpp"
#include "aromma/tensor.hpp"

namespace aromma {

enum class AggregatorVariant { CrossAttention, PnaBaseline };

struct AggregatorConfig {
  int d_e = 768;
  int d_p = 196;
  int d_h = 384;
  int heads = 4;
  int labels = 0;
  AggregatorVariant variant = AggregatorVariant::CrossAttention;
};

// All learnable tensors of the aggregation module and prediction head.
// Projection matrices are Xavier-uniform, biases zero, the global query
// N(0, 0.02^2) to break symmetry, layer norm at identity.
struct AggregatorParams {
  AggregatorConfig cfg;

  Tensor w1, b1;  // d_e -> d_p input projection
  Tensor self_wq, self_wk, self_wv, self_wo;  // fused d_p x d_p
  Tensor w2, b2;  // d_p -> d_h
  // Cross-attention pooling (CrossAttention variant)
  Tensor cross_wq, cross_wk, cross_wv, cross_wo;  // fused d_h x d_h
  Tensor query;                                   // 1 x d_h, shared across samples
  // Statistics pooling (PnaBaseline variant): [mean|var|min|max] -> d_h
  Tensor pna_w, pna_b;

  Tensor ln_gain, ln_bias;  // d_h
  Tensor head_w, head_b;    // d_h -> labels

  static AggregatorParams init(const AggregatorConfig& cfg, Rng& rng);
};

// Stable iteration order over the allocated tensors, shared by the optimizer,
// the tape binding, and the checkpoint format.
std::vector<std::pair<std::string, Tensor*>> named_tensors(AggregatorParams& p);
std::vector<std::pair<std::string, const Tensor*>> named_tensors(const AggregatorParams& p);

// Two stacked molecule embeddings plus the validity mask; singles carry a
// zero row in position 1.
struct MixtureInput {
  Tensor e;  // 2 x d_e
  std::array<std::uint8_t, 2> valid{1, 0};

  static MixtureInput single(const Tensor& e1);
  static MixtureInput pair(const Tensor& e1, const Tensor& e2);
};

struct BoundAggregator {
  Value w1, b1, self_wq, self_wk, self_wv, self_wo, w2, b2;
  Value cross_wq, cross_wk, cross_wv, cross_wo, query;
  Value pna_w, pna_b;
  Value ln_gain, ln_bias, head_w, head_b;
  std::vector<std::pair<std::string, Value>> all;
};

// Places every parameter on the tape, as leaves (trainable) or constants.
BoundAggregator bind_aggregator(Tape& tape, const AggregatorParams& p, bool trainable);

struct AggregatorOut {
  Value z;      // 1 x d_h global embedding
  Value probs;  // 1 x labels
};

// E' = ReLU(E W1 + b1); H = masked self-attention over valid rows;
// H' = H W2 + b2; z = LayerNorm(pooling(H')); probs = sigmoid(z Wout + bout).
// Pooling is single-query cross-attention or, for the baseline variant,
// [mean|var|min|max] statistics over valid rows projected back to d_h.
AggregatorOut aggregator_forward(Tape& tape, const BoundAggregator& b,
                                 const AggregatorConfig& cfg, Value e_stack,
                                 const std::array<std::uint8_t, 2>& valid);

// Eager wrappers used by evaluation and tests.
struct ForwardResult {
  Tensor z;
  Tensor probs;
};

ForwardResult forward(const AggregatorParams& p, const MixtureInput& x);
ForwardResult forward_pna_baseline(const AggregatorParams& p, const MixtureInput& x);

}  // namespace aromma
