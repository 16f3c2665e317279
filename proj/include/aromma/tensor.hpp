//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace aromma {

// Dense row-major tensor of 64-bit floats. Rank is 1 or 2 in practice; the
// kernels below treat rank-1 tensors as single rows.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor row(std::vector<double> v);
  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // 2-D views; rank-1 tensors read as a single row.
  std::size_t rows() const { return ndim() <= 1 ? 1 : shape_[0]; }
  std::size_t cols() const { return ndim() == 0 ? 0 : (ndim() == 1 ? shape_[0] : shape_[1]); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Dense kernels. All throw ShapeError on extent mismatches.
Tensor matmul(const Tensor& a, const Tensor& b);     // a[m,k] * b[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a[m,k] * b[n,k]^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a[k,m]^T * b[k,n]
Tensor transpose(const Tensor& a);

void add_inplace(Tensor& a, const Tensor& b);
void axpy_inplace(Tensor& a, double s, const Tensor& b);  // a += s*b

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace aromma
