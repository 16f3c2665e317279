//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "aromma/errors.hpp"

namespace aromma {

ClassRates class_rates(const std::vector<std::vector<std::uint8_t>>& labels) {
  if (labels.empty()) throw DataError("class_rates: empty dataset");
  const std::size_t L = labels[0].size();
  ClassRates out;
  out.n = labels.size();
  out.gamma.assign(L, 0.0);
  for (const auto& row : labels) {
    if (row.size() != L) throw ShapeError("class_rates: ragged label matrix");
    for (std::size_t c = 0; c < L; ++c) out.gamma[c] += row[c];
  }
  for (double& g : out.gamma) g /= static_cast<double>(out.n);
  return out;
}

ClassRates class_rates(const Dataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<std::vector<std::uint8_t>> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) labels.push_back(ds.samples[i].labels);
  return class_rates(labels);
}

Thresholds fit_thresholds(const Tensor& preds, const ClassRates& rates) {
  const std::size_t m = preds.rows(), L = preds.cols();
  if (m == 0) throw DataError("fit_thresholds: empty prediction set");
  if (rates.gamma.size() != L) throw ShapeError("fit_thresholds: class count mismatch");

  Thresholds out;
  out.tau.assign(L, std::numeric_limits<double>::infinity());
  std::vector<double> column(m);
  for (std::size_t c = 0; c < L; ++c) {
    // round-half-up discretization of the target count
    const std::size_t k = static_cast<std::size_t>(
        std::floor(rates.gamma[c] * static_cast<double>(m) + 0.5));
    if (k == 0) continue;  // +inf sentinel: no pseudo-positives
    for (std::size_t i = 0; i < m; ++i) column[i] = preds(i, c);
    std::sort(column.begin(), column.end(), std::greater<double>());
    out.tau[c] = column[std::min(k, m) - 1];
  }
  return out;
}

Dataset augment(const Dataset& ds, const std::vector<std::size_t>& sample_indices,
                const Tensor& preds, const Thresholds& tau, AugmentMode mode) {
  const std::size_t L = ds.space.size();
  if (preds.rows() != sample_indices.size() || preds.cols() != L)
    throw DataError("augment: prediction matrix is not aligned with the sample index set");
  if (tau.tau.size() != L) throw DataError("augment: threshold count mismatch");

  Dataset out = ds;
  for (std::size_t r = 0; r < sample_indices.size(); ++r) {
    Sample& s = out.samples[sample_indices[r]];
    for (std::size_t c = 0; c < L; ++c) {
      const bool hit = preds(r, c) >= tau.tau[c];
      if (mode == AugmentMode::P78) {
        if (s.known[c]) continue;  // original annotations stay untouched
        s.labels[c] = hit ? 1 : 0;
        s.prov[c] = hit ? Provenance::Pseudo : Provenance::Padded;
      } else {
        if (hit && !s.labels[c]) {
          s.labels[c] = 1;  // OR-merge: originals never flip negative
          s.prov[c] = Provenance::Pseudo;
        }
      }
    }
  }
  return out;
}

DensityReport density_report(const Dataset& ds) {
  std::vector<std::size_t> all(ds.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return density_report(ds, all);
}

DensityReport density_report(const Dataset& ds, const std::vector<std::size_t>& indices) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i : indices) {
    const Sample& s = ds.samples[i];
    auto& [sum, count] = acc[source_name(s.source)];
    sum += static_cast<double>(s.positive_count());
    ++count;
  }
  DensityReport out;
  for (const auto& [name, sc] : acc)
    out.mean_positives[name] = sc.first / static_cast<double>(sc.second);
  return out;
}

std::string DensityReport::to_json() const {
  nlohmann::json j;
  for (const auto& [name, v] : mean_positives) j[name] = v;
  return j.dump(2);
}

}  // namespace aromma
