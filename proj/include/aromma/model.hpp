//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <string>
#include <vector>

#include "aromma/aggregator.hpp"
#include "aromma/dataset.hpp"
#include "aromma/embedder.hpp"

namespace aromma {

// The end-to-end predictor: embedder + aggregation module + unified label
// axis. Checkpoints are versioned JSON with every tensor spelled out in
// decimal; loading re-validates all shapes.
struct Model {
  Embedder embedder;
  AggregatorParams agg;
  LabelSpace space;

  Model(Embedder e, AggregatorParams a, LabelSpace s)
      : embedder(std::move(e)), agg(std::move(a)), space(std::move(s)) {}

  Model clone() const { return Model(embedder.clone(), agg, space); }

  std::size_t label_count() const { return space.size(); }

  // probs over the unified axis; 1 or 2 molecules, zero pad for singles.
  Tensor predict_one(const std::vector<Smiles>& molecules) const;
  Tensor predict_sample(const Sample& s) const { return predict_one(s.molecules); }

  // n x L matrix, row i for ds.samples[indices[i]].
  Tensor predict_matrix(const Dataset& ds, const std::vector<std::size_t>& indices) const;

  // The pooled global embedding z (1 x d_h).
  Tensor global_embedding(const std::vector<Smiles>& molecules) const;

  void save_checkpoint(const std::string& path) const;
  static Model load_checkpoint(const std::string& path, const EmbeddingTable* table = nullptr);
};

}  // namespace aromma
