//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <map>
#include <string>
#include <vector>

#include "aromma/dataset.hpp"
#include "aromma/tensor.hpp"

namespace aromma {

// Per-class positive fractions fitted on fully labeled data.
struct ClassRates {
  std::vector<double> gamma;
  std::size_t n = 0;
};

ClassRates class_rates(const Dataset& ds, const std::vector<std::size_t>& indices);
ClassRates class_rates(const std::vector<std::vector<std::uint8_t>>& labels);

// Per-class cutoffs; p >= tau[c] marks a pseudo-positive. +infinity means the
// class produces none.
struct Thresholds {
  std::vector<double> tau;
};

// tau[c] = k-th largest prediction in column c with k = round_half_up(gamma*m),
// so the selected fraction matches gamma up to 1/m (ties at the cutoff admit
// every tied entry).
Thresholds fit_thresholds(const Tensor& preds, const ClassRates& rates);

enum class AugmentMode { P78, P152 };

// P78: only labels the pairs source never annotates are overwritten with
// thresholded pseudo-labels; original annotations stay untouched. P152:
// pseudo-labels for every class are OR-merged with the originals, so an
// original positive never flips negative. preds row i scores
// ds.samples[sample_indices[i]].
Dataset augment(const Dataset& ds, const std::vector<std::size_t>& sample_indices,
                const Tensor& preds, const Thresholds& tau, AugmentMode mode);

struct DensityReport {
  std::map<std::string, double> mean_positives;  // keyed by source name; absent if empty

  std::string to_json() const;
};

DensityReport density_report(const Dataset& ds);
DensityReport density_report(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace aromma
