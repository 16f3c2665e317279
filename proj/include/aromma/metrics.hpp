//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aromma/dataset.hpp"
#include "aromma/tensor.hpp"

namespace aromma {

// Rank-based (Mann-Whitney) AUROC with average ranks for ties. Returns
// nullopt when the class is degenerate (no positives or no negatives).
std::optional<double> auroc_binary(const std::vector<double>& scores,
                                   const std::vector<std::uint8_t>& labels);

struct PerClassAuroc {
  std::size_t class_index = 0;
  std::optional<double> auroc;  // nullopt = skipped (degenerate in this slice)
};

struct MacroAuroc {
  double macro = 0.0;  // unweighted mean over scored classes
  int scored = 0;
  int skipped = 0;
  std::vector<PerClassAuroc> per_class;
};

// preds[i] scores row i of `labels` (flattened n x L, row-major) for every
// class in `class_filter`. Throws DataError when every class is skipped.
MacroAuroc auroc_macro(const Tensor& preds, const std::vector<std::uint8_t>& labels,
                       std::size_t n_labels, const std::vector<std::size_t>& class_filter);

struct SliceReport {
  std::optional<double> macro;  // absent when the slice has no samples
  int scored = 0;
  int skipped = 0;
};

struct EvalReport {
  SliceReport combined;  // all samples, all labels (padded count as negatives)
  SliceReport singles;   // singles samples, singles-annotated labels
  SliceReport pairs;     // pairs samples, pairs-annotated labels
  std::vector<PerClassAuroc> per_class_combined;
  std::vector<std::string> label_names;

  std::string to_json() const;
  std::string render_table(const std::string& row_name) const;
};

// preds row i corresponds to ds.samples[indices[i]].
EvalReport evaluate_predictions(const Tensor& preds, const Dataset& ds,
                                const std::vector<std::size_t>& indices);

}  // namespace aromma
