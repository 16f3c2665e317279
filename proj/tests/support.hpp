//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Test-side oracles, kept independent of the library's own gradient and
// metric paths: central differences re-run a closure from scratch, AUROC is
// counted over all positive/negative pairs, and thresholds are brute-forced
// over every candidate cutoff.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "aromma/rng.hpp"
#include "aromma/tensor.hpp"

namespace testsupport {

inline aromma::Tensor randn(aromma::Rng& rng, std::vector<std::size_t> shape, double scale = 1.0) {
  aromma::Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

// Central-difference gradient of `eval` with respect to `param`, where eval
// recomputes the full forward pass from the (mutated) parameter tensors.
inline aromma::Tensor fd_gradient(const std::function<double()>& eval, aromma::Tensor& param,
                                  double h = 1e-5) {
  aromma::Tensor grad(param.shape());
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double saved = param[i];
    param[i] = saved + h;
    const double fp = eval();
    param[i] = saved - h;
    const double fm = eval();
    param[i] = saved;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

// fd_atol absorbs central-difference cancellation noise (~1e-10 at h=1e-5 for
// losses of order one); differences below it say nothing about the gradient.
inline double max_rel_err(const aromma::Tensor& a, const aromma::Tensor& b,
                          double fd_atol = 5e-9) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (std::fabs(a[i] - b[i]) <= fd_atol) continue;
    worst = std::max(worst, rel_err(a[i], b[i]));
  }
  return worst;
}

// O(n^2) pair-counting AUROC: wins + half ties over all positive/negative
// pairs. Returns -1 for degenerate label sets.
inline double auroc_pair_oracle(const std::vector<double>& scores,
                                const std::vector<std::uint8_t>& labels) {
  std::size_t np = 0;
  for (auto y : labels) np += y;
  const std::size_t nn = labels.size() - np;
  if (np == 0 || nn == 0) return -1.0;
  double wins = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / (static_cast<double>(np) * static_cast<double>(nn));
}

// Scans every achievable cutoff (each distinct value plus +infinity) and
// returns the smallest distance between an achievable selected fraction and
// the target rate.
inline double best_achievable_fraction_gap(std::vector<double> column, double gamma) {
  std::sort(column.begin(), column.end());
  const double m = static_cast<double>(column.size());
  double best = std::fabs(0.0 - gamma);  // tau = +infinity selects nothing
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (i > 0 && column[i] == column[i - 1]) continue;
    // tau = column[i] selects everything >= it
    std::size_t selected = 0;
    for (double v : column) selected += v >= column[i] ? 1 : 0;
    best = std::min(best, std::fabs(static_cast<double>(selected) / m - gamma));
  }
  return best;
}

}  // namespace testsupport
