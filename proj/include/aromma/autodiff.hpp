//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aromma/tensor.hpp"

namespace aromma {

// Handle into a Tape. Only valid for the tape that produced it.
struct Value {
  std::uint32_t id = 0;
};

// Reverse-mode autodiff over a flat op tape. Forward values are computed
// eagerly as ops are recorded; backward() runs the reverse sweep. Leaves can
// be re-assigned and the whole tape re-executed (recompute_forward), which is
// what grad_check uses for central differences.
//
// Tapes are single-threaded; distinct tapes may live on distinct threads.
class Tape {
public:
  Value constant(Tensor t);
  Value leaf(Tensor t, std::string name = "");

  Value matmul(Value a, Value b);     // a[m,k] * b[k,n]
  Value matmul_nt(Value a, Value b);  // a[m,k] * b[n,k]^T
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);               // elementwise
  Value add_row(Value x, Value bias);        // x[m,n] + bias[n], broadcast over rows
  Value affine(Value x, double s, double b);  // s*x + b elementwise
  Value scale(Value x, double s) { return affine(x, s, 0.0); }
  Value relu(Value x);
  Value sigmoid(Value x);
  Value log(Value x);
  Value clamp(Value x, double lo, double hi);
  Value mul_const(Value x, Tensor c);  // elementwise by a constant tensor

  // Row softmax with optional boolean mask (1 = keep). Masked entries get an
  // additive -1e30 logit before the stabilized softmax, which underflows to
  // weight exactly 0. Throws NumericError if a row is fully masked.
  Value softmax_rows(Value x, const std::vector<std::uint8_t>& mask = {});

  // Per-row normalization with the biased (divide-by-n) variance.
  Value layer_norm(Value x, Value gain, Value bias, double eps);

  Value slice_cols(Value x, std::size_t start, std::size_t len);
  Value concat_cols(const std::vector<Value>& xs);
  Value concat_rows(const std::vector<Value>& xs);
  Value gather_cols(Value x, std::vector<std::size_t> idx);

  Value sum_all(Value x);   // 1x1
  Value mean_all(Value x);  // 1x1

  // [mean | var | min | max] over the valid rows, each block of width n,
  // giving a 1 x 4n output. Variance is biased; min/max route gradient to the
  // first extremal valid row.
  Value masked_row_stats(Value x, const std::vector<std::uint8_t>& valid);

  const Tensor& val(Value v) const;
  void set_leaf(Value v, Tensor t);
  void recompute_forward();
  bool is_leaf(Value v) const;
  const std::string& leaf_name(Value v) const;
  std::vector<Value> leaves() const;

  // Reverse accumulation from a scalar loss. Gradients of unreached values
  // are zero. Throws NumericError for non-scalar losses.
  void backward(Value loss);
  Tensor grad(Value v) const;

  std::size_t size() const { return nodes_.size(); }

private:
  enum class Op : std::uint8_t {
    kConstant, kLeaf, kMatMul, kMatMulNT, kAdd, kSub, kMul, kAddRow, kAffine,
    kRelu, kSigmoid, kLog, kClamp, kMulConst, kSoftmaxRows, kLayerNorm,
    kSliceCols, kConcatCols, kConcatRows, kGatherCols, kSumAll, kMeanAll,
    kMaskedRowStats,
  };

  struct Node {
    Op op;
    std::vector<std::uint32_t> in;
    Tensor out;
    Tensor grad;
    bool needs_grad = false;
    double s0 = 0.0, s1 = 0.0;
    std::vector<std::uint8_t> mask;
    std::vector<std::size_t> idx;
    std::vector<double> fbuf;
    Tensor cbuf;
    std::string name;
  };

  Value push(Node n);
  void compute(Node& n);
  void backprop(Node& n);
  Node& at(Value v) { return nodes_[v.id]; }
  const Node& at(Value v) const { return nodes_[v.id]; }

  std::vector<Node> nodes_;
};

// Fused multi-head scaled dot-product attention built from tape primitives.
// Per-head projections are column slices of the fused wq/wk/wv matrices; the
// concatenated heads go through wo. key_mask removes key rows (1 = keep).
struct AttentionWeights {
  Value wq, wk, wv, wo;
};

Value multi_head_attention(Tape& t, Value q, Value k, Value v, int heads,
                           const std::vector<std::uint8_t>& key_mask,
                           const AttentionWeights& w);

// Central-difference check of every leaf against the reverse-mode gradients
// of `loss`, re-executing the tape at theta +/- h. Relative error uses the
// max(|analytic|, |numeric|, 1e-8) denominator. Entries whose absolute
// difference sits below `fd_atol` are scored 0: at h=1e-5 the cancellation in
// (f+ - f-) bounds the achievable accuracy near 1e-10, so differences under
// the floor carry no information about the analytic rule. A genuinely broken
// rule moves gradients orders of magnitude above it.
struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool passed = true;
};

std::vector<GradCheckEntry> grad_check(Tape& tape, Value loss, double h, double tol,
                                       double fd_atol = 5e-9);

// Test hook: perturbs one backward rule so negative-control checks can verify
// that gradient checking actually fails on a corrupted rule.
void set_gradient_fault_for_testing(bool enabled);

}  // namespace aromma
