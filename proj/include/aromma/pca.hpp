//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <vector>

#include "aromma/tensor.hpp"

namespace aromma {

struct Projection2D {
  std::vector<std::array<double, 2>> coords;  // per input row
  std::array<double, 2> variance{0.0, 0.0};   // variance[0] >= variance[1]
};

// Centers the rows of x and projects onto the top-2 principal components,
// found by power iteration on the covariance (with deflation for the second
// component). Throws DataError for fewer than 3 rows.
Projection2D project_2d(const Tensor& x, int max_iters = 200, double tol = 1e-9);

}  // namespace aromma
