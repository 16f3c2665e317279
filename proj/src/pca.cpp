//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/pca.hpp"

#include <cmath>

#include "aromma/errors.hpp"
#include "aromma/rng.hpp"

namespace aromma {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

Projection2D project_2d(const Tensor& x, int max_iters, double tol) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 3) throw DataError("project_2d: need at least 3 samples for a covariance");

  // Center columns.
  Tensor c = x;
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += x(i, j);
    mu /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) c(i, j) -= mu;
  }

  // y = Cov v = X^T (X v) / n, without materializing the covariance.
  auto cov_apply = [&](const std::vector<double>& v) {
    std::vector<double> xv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += c(i, j) * v[j];
      xv[i] = s;
    }
    std::vector<double> y(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) y[j] += c(i, j) * xv[i];
    for (double& e : y) e /= static_cast<double>(n);
    return y;
  };

  Rng rng(0x726f6a6563740ULL);
  std::vector<std::vector<double>> components;
  std::array<double, 2> eigenvalues{0.0, 0.0};
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<double> v(d);
    for (double& e : v) e = rng.normal();
    // Deflate previously found directions, re-orthogonalizing every step to
    // keep drift out of the second component.
    auto orthogonalize = [&](std::vector<double>& u) {
      for (const auto& prev : components) {
        const double p = dot(u, prev);
        for (std::size_t j = 0; j < d; ++j) u[j] -= p * prev[j];
      }
    };
    orthogonalize(v);
    double nv = norm(v);
    if (nv == 0.0) {
      components.push_back(std::vector<double>(d, 0.0));
      continue;
    }
    for (double& e : v) e /= nv;
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      std::vector<double> y = cov_apply(v);
      orthogonalize(y);
      const double ny = norm(y);
      if (ny < 1e-300) {
        // zero covariance in this subspace (e.g. identical inputs)
        for (double& e : y) e = 0.0;
        v = y;
        lambda = 0.0;
        break;
      }
      std::vector<double> next(d);
      for (std::size_t j = 0; j < d; ++j) next[j] = y[j] / ny;
      double delta = 0.0;
      for (std::size_t j = 0; j < d; ++j) delta = std::max(delta, std::fabs(next[j] - v[j]));
      v = std::move(next);
      lambda = ny;
      if (delta < tol) break;
    }
    eigenvalues[static_cast<std::size_t>(comp)] = lambda;
    components.push_back(v);
  }

  // Eigenvalue order can flip on near-degenerate spectra; keep x >= y.
  if (eigenvalues[1] > eigenvalues[0]) {
    std::swap(eigenvalues[0], eigenvalues[1]);
    std::swap(components[0], components[1]);
  }

  Projection2D out;
  out.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double px = 0.0, py = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      px += c(i, j) * components[0][j];
      py += c(i, j) * components[1][j];
    }
    out.coords[i] = {px, py};
  }
  for (int comp = 0; comp < 2; ++comp) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += out.coords[i][static_cast<std::size_t>(comp)];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dd = out.coords[i][static_cast<std::size_t>(comp)] - mu;
      var += dd * dd;
    }
    out.variance[static_cast<std::size_t>(comp)] = var / static_cast<double>(n);
  }
  return out;
}

}  // namespace aromma
