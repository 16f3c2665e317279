//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aromma {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Built-in oracle battery: gradient checks against central differences for
// every differentiable op and the full model loss, permutation invariance,
// pad independence, rank-AUROC vs the quadratic pair-counting oracle, and
// threshold calibration. `inject_fault` corrupts one backward rule so the
// battery can prove it catches broken gradients.
std::vector<CheckResult> run_selfcheck(std::uint64_t seed = 1234, bool inject_fault = false);

}  // namespace aromma
