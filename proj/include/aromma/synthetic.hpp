//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aromma/trainer.hpp"

namespace aromma {

// Planted-rule synthetic corpus: random grammar-valid molecules, labels
// driven by linear rules on toy features, pair labels composed as the OR of
// the components except for interaction labels. Interaction labels carry
// set-level semantics: an agonism label appears only when both of its trigger
// properties co-occur in a sample's molecule set (for pairs the triggers may
// come from different components); an antagonism label vanishes whenever
// either component carries its suppressor property. A subset of labels is
// left unannotated by the pairs source, and non-truth pair rows can be
// sparsified by dropping positives, mimicking an incomplete pair corpus.
struct SyntheticConfig {
  int n_molecules = 2000;
  int n_pairs = 8000;
  int n_additive = 16;  // OR-composed labels
  int n_agonism = 2;
  int n_antagonism = 2;
  int n_pair_missing = 6;   // additive labels the pairs source does not annotate
  double drop_prob = 0.0;   // per-positive dropout on non-truth pair rows
  int truth_fold = 0;       // pair rows in this fold keep exact labels
  int k_folds = 5;
  std::uint64_t seed = 7;
  double additive_rate_lo = 0.18, additive_rate_hi = 0.32;
  double antagonism_single_rate = 0.30;  // base-property rate
  double trigger_rate = 0.35;
  double suppressor_rate = 0.50;

  int n_labels() const { return n_additive + n_agonism + n_antagonism; }
};

struct SyntheticData {
  std::vector<std::string> molecules;  // normalized smiles
  std::vector<std::string> label_names;
  std::vector<std::vector<std::uint8_t>> single_labels;
  std::vector<std::pair<int, int>> pair_members;
  std::vector<std::vector<std::uint8_t>> pair_truth;     // full label axis
  std::vector<std::vector<std::uint8_t>> pair_observed;  // sparsified, full axis
  std::vector<int> pair_fold;
  std::vector<std::string> pair_annotated_names;  // the columns pairs.csv carries
  std::vector<std::string> interaction_names;
  TeacherTable teacher;
};

SyntheticData generate_synthetic(const SyntheticConfig& cfg);

struct SyntheticPaths {
  std::string singles_csv, pairs_csv, teacher_tsv, meta_json;
};

// singles.csv, pairs.csv (with fold column), teacher.tsv, meta.json
SyntheticPaths write_synthetic(const SyntheticData& data, const std::string& dir);

}  // namespace aromma
