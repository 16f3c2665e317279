//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <vector>

#include "aromma/autodiff.hpp"
#include "aromma/dataset.hpp"

namespace aromma {

struct LossConfig {
  double alpha = 0.5;  // balance between the singles and pairs terms
  bool kd_enabled = true;
  std::vector<std::size_t> kd_label_subset;  // unified-axis indices covered by the teacher
  double temperature = 1.0;                  // logit sharpening for both sides of the KD pair
  bool mld_softmax_variant = false;  // normalize probabilities over labels instead of per-label
  bool mask_unknown = false;         // restrict BCE to annotated labels (default: hard negatives)
};

// Mean binary cross-entropy over labels; probabilities are clamped to
// [1e-7, 1-1e-7] before the logs. `known` (optional) restricts the mean to
// annotated labels.
Value bce_node(Tape& t, const std::vector<std::uint8_t>& y, Value probs,
               const std::vector<std::uint8_t>* known = nullptr);

// Two-sided distillation divergence between teacher and student probability
// vectors: per-label Bernoulli KL (mean over labels), which realizes both the
// direct and the complement KL terms. The softmax variant instead normalizes
// each side over the label axis and sums the two proper KLs.
Value mld_node(Tape& t, const std::vector<double>& teacher, Value student,
               double temperature = 1.0, bool softmax_variant = false);

// Eager convenience wrappers.
double bce(const std::vector<std::uint8_t>& y, const std::vector<double>& p);
double mld(const std::vector<double>& p_teacher, const std::vector<double>& p_student,
           double temperature = 1.0, bool softmax_variant = false);

struct SampleLossInput {
  Value probs;  // 1 x L on the tape
  const Sample* sample = nullptr;
  const std::vector<double>* teacher = nullptr;  // over cfg.kd_label_subset order; singles only
};

struct TotalLoss {
  Value total;
  double single_bce = 0.0;  // per-term per-sample means, for logging
  double single_mld = 0.0;
  double pair_bce = 0.0;
  std::size_t n_singles = 0;
  std::size_t n_pairs = 0;
};

// total = alpha * mean_singles(mld + bce) + (1-alpha) * mean_pairs(bce).
// An empty side contributes zero while the alpha weighting still applies.
// Throws DataError on an empty batch or a missing teacher row when KD is on.
TotalLoss total_loss(Tape& t, const std::vector<SampleLossInput>& batch, const LossConfig& cfg);

}  // namespace aromma
