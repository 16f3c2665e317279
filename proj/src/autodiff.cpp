//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aromma/errors.hpp"

namespace aromma {

namespace {

bool g_gradient_fault = false;

constexpr double kMaskLogit = -1e30;

void check_finite(const Tensor& t, const char* where) {
#ifndef NDEBUG
  if (!t.all_finite()) throw NumericError(std::string("non-finite value in ") + where);
#else
  (void)t;
  (void)where;
#endif
}

}  // namespace

void set_gradient_fault_for_testing(bool enabled) { g_gradient_fault = enabled; }

Value Tape::push(Node n) {
  for (std::uint32_t i : n.in) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  compute(n);
  check_finite(n.out, "tape op");
  nodes_.push_back(std::move(n));
  return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Value Tape::constant(Tensor t) {
  Node n;
  n.op = Op::kConstant;
  n.out = std::move(t);
  nodes_.push_back(std::move(n));
  return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Value Tape::leaf(Tensor t, std::string name) {
  Node n;
  n.op = Op::kLeaf;
  n.out = std::move(t);
  n.needs_grad = true;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Value Tape::matmul(Value a, Value b) {
  Node n;
  n.op = Op::kMatMul;
  n.in = {a.id, b.id};
  return push(std::move(n));
}

Value Tape::matmul_nt(Value a, Value b) {
  Node n;
  n.op = Op::kMatMulNT;
  n.in = {a.id, b.id};
  return push(std::move(n));
}

Value Tape::add(Value a, Value b) {
  Node n;
  n.op = Op::kAdd;
  n.in = {a.id, b.id};
  return push(std::move(n));
}

Value Tape::sub(Value a, Value b) {
  Node n;
  n.op = Op::kSub;
  n.in = {a.id, b.id};
  return push(std::move(n));
}

Value Tape::mul(Value a, Value b) {
  Node n;
  n.op = Op::kMul;
  n.in = {a.id, b.id};
  return push(std::move(n));
}

Value Tape::add_row(Value x, Value bias) {
  Node n;
  n.op = Op::kAddRow;
  n.in = {x.id, bias.id};
  return push(std::move(n));
}

Value Tape::affine(Value x, double s, double b) {
  Node n;
  n.op = Op::kAffine;
  n.in = {x.id};
  n.s0 = s;
  n.s1 = b;
  return push(std::move(n));
}

Value Tape::relu(Value x) {
  Node n;
  n.op = Op::kRelu;
  n.in = {x.id};
  return push(std::move(n));
}

Value Tape::sigmoid(Value x) {
  Node n;
  n.op = Op::kSigmoid;
  n.in = {x.id};
  return push(std::move(n));
}

Value Tape::log(Value x) {
  Node n;
  n.op = Op::kLog;
  n.in = {x.id};
  return push(std::move(n));
}

Value Tape::clamp(Value x, double lo, double hi) {
  Node n;
  n.op = Op::kClamp;
  n.in = {x.id};
  n.s0 = lo;
  n.s1 = hi;
  return push(std::move(n));
}

Value Tape::mul_const(Value x, Tensor c) {
  Node n;
  n.op = Op::kMulConst;
  n.in = {x.id};
  n.cbuf = std::move(c);
  return push(std::move(n));
}

Value Tape::softmax_rows(Value x, const std::vector<std::uint8_t>& mask) {
  const Tensor& xv = at(x).out;
  if (!mask.empty() && mask.size() != xv.numel())
    throw ShapeError("softmax_rows: mask size does not match input");
  Node n;
  n.op = Op::kSoftmaxRows;
  n.in = {x.id};
  n.mask = mask;
  return push(std::move(n));
}

Value Tape::layer_norm(Value x, Value gain, Value bias, double eps) {
  Node n;
  n.op = Op::kLayerNorm;
  n.in = {x.id, gain.id, bias.id};
  n.s0 = eps;
  return push(std::move(n));
}

Value Tape::slice_cols(Value x, std::size_t start, std::size_t len) {
  Node n;
  n.op = Op::kSliceCols;
  n.in = {x.id};
  n.idx = {start, len};
  return push(std::move(n));
}

Value Tape::concat_cols(const std::vector<Value>& xs) {
  Node n;
  n.op = Op::kConcatCols;
  for (Value v : xs) n.in.push_back(v.id);
  return push(std::move(n));
}

Value Tape::concat_rows(const std::vector<Value>& xs) {
  Node n;
  n.op = Op::kConcatRows;
  for (Value v : xs) n.in.push_back(v.id);
  return push(std::move(n));
}

Value Tape::gather_cols(Value x, std::vector<std::size_t> idx) {
  Node n;
  n.op = Op::kGatherCols;
  n.in = {x.id};
  n.idx = std::move(idx);
  return push(std::move(n));
}

Value Tape::sum_all(Value x) {
  Node n;
  n.op = Op::kSumAll;
  n.in = {x.id};
  return push(std::move(n));
}

Value Tape::mean_all(Value x) {
  Node n;
  n.op = Op::kMeanAll;
  n.in = {x.id};
  return push(std::move(n));
}

Value Tape::masked_row_stats(Value x, const std::vector<std::uint8_t>& valid) {
  const Tensor& xv = at(x).out;
  if (valid.size() != xv.rows()) throw ShapeError("masked_row_stats: valid mask length != rows");
  Node n;
  n.op = Op::kMaskedRowStats;
  n.in = {x.id};
  n.mask = valid;
  return push(std::move(n));
}

const Tensor& Tape::val(Value v) const { return at(v).out; }

void Tape::set_leaf(Value v, Tensor t) {
  Node& n = at(v);
  if (n.op != Op::kLeaf && n.op != Op::kConstant)
    throw Error("set_leaf: value is not a leaf");
  if (!n.out.same_shape(t)) throw ShapeError("set_leaf: shape mismatch");
  n.out = std::move(t);
}

bool Tape::is_leaf(Value v) const { return at(v).op == Op::kLeaf; }

const std::string& Tape::leaf_name(Value v) const { return at(v).name; }

std::vector<Value> Tape::leaves() const {
  std::vector<Value> out;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].op == Op::kLeaf) out.push_back(Value{i});
  return out;
}

void Tape::recompute_forward() {
  for (Node& n : nodes_)
    if (n.op != Op::kLeaf && n.op != Op::kConstant) compute(n);
}

void Tape::compute(Node& n) {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.in[i]].out; };
  switch (n.op) {
    case Op::kConstant:
    case Op::kLeaf:
      break;
    case Op::kMatMul:
      n.out = aromma::matmul(in(0), in(1));
      break;
    case Op::kMatMulNT:
      n.out = aromma::matmul_nt(in(0), in(1));
      break;
    case Op::kAdd: {
      if (!in(0).same_shape(in(1))) throw ShapeError("add: shape mismatch");
      n.out = in(0);
      add_inplace(n.out, in(1));
      break;
    }
    case Op::kSub: {
      if (!in(0).same_shape(in(1))) throw ShapeError("sub: shape mismatch");
      n.out = in(0);
      axpy_inplace(n.out, -1.0, in(1));
      break;
    }
    case Op::kMul: {
      if (!in(0).same_shape(in(1))) throw ShapeError("mul: shape mismatch");
      n.out = in(0);
      for (std::size_t i = 0; i < n.out.numel(); ++i) n.out[i] *= in(1)[i];
      break;
    }
    case Op::kAddRow: {
      const Tensor& x = in(0);
      const Tensor& b = in(1);
      if (b.cols() != x.cols() || b.rows() != 1) throw ShapeError("add_row: bias width mismatch");
      n.out = x;
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) n.out(i, j) += b[j];
      break;
    }
    case Op::kAffine: {
      n.out = in(0);
      for (double& v : n.out.data()) v = n.s0 * v + n.s1;
      break;
    }
    case Op::kRelu: {
      n.out = in(0);
      for (double& v : n.out.data()) v = v > 0.0 ? v : 0.0;
      break;
    }
    case Op::kSigmoid: {
      n.out = in(0);
      for (double& v : n.out.data()) v = 1.0 / (1.0 + std::exp(-v));
      break;
    }
    case Op::kLog: {
      n.out = in(0);
      for (double& v : n.out.data()) v = std::log(v);
      break;
    }
    case Op::kClamp: {
      n.out = in(0);
      for (double& v : n.out.data()) v = std::min(std::max(v, n.s0), n.s1);
      break;
    }
    case Op::kMulConst: {
      if (!in(0).same_shape(n.cbuf)) throw ShapeError("mul_const: shape mismatch");
      n.out = in(0);
      for (std::size_t i = 0; i < n.out.numel(); ++i) n.out[i] *= n.cbuf[i];
      break;
    }
    case Op::kSoftmaxRows: {
      const Tensor& x = in(0);
      const std::size_t m = x.rows(), c = x.cols();
      n.out = Tensor({m, c});
      for (std::size_t i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t j = 0; j < c; ++j) {
          const bool keep = n.mask.empty() || n.mask[i * c + j];
          any = any || keep;
          const double adj = x(i, j) + (keep ? 0.0 : kMaskLogit);
          mx = std::max(mx, adj);
        }
        if (!any) throw NumericError("softmax_rows: all entries masked in a row");
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const bool keep = n.mask.empty() || n.mask[i * c + j];
          const double e = std::exp(x(i, j) + (keep ? 0.0 : kMaskLogit) - mx);
          n.out(i, j) = e;
          z += e;
        }
        for (std::size_t j = 0; j < c; ++j) n.out(i, j) /= z;
      }
      break;
    }
    case Op::kLayerNorm: {
      const Tensor& x = in(0);
      const Tensor& gain = in(1);
      const Tensor& bias = in(2);
      const std::size_t m = x.rows(), c = x.cols();
      if (gain.numel() != c || bias.numel() != c) throw ShapeError("layer_norm: gain/bias width");
      if (c < 2) throw ShapeError("layer_norm: needs at least 2 columns");
      n.out = Tensor({m, c});
      n.cbuf = Tensor({m, c});  // xhat
      n.fbuf.assign(m, 0.0);    // 1/sqrt(var+eps)
      for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += x(i, j);
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double d = x(i, j) - mu;
          var += d * d;
        }
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + n.s0);
        n.fbuf[i] = inv;
        for (std::size_t j = 0; j < c; ++j) {
          const double xh = (x(i, j) - mu) * inv;
          n.cbuf(i, j) = xh;
          n.out(i, j) = xh * gain[j] + bias[j];
        }
      }
      break;
    }
    case Op::kSliceCols: {
      const Tensor& x = in(0);
      const std::size_t start = n.idx[0], len = n.idx[1];
      if (start + len > x.cols()) throw ShapeError("slice_cols: out of range");
      n.out = Tensor({x.rows(), len});
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < len; ++j) n.out(i, j) = x(i, start + j);
      break;
    }
    case Op::kConcatCols: {
      const std::size_t m = in(0).rows();
      std::size_t total = 0;
      for (std::size_t t = 0; t < n.in.size(); ++t) {
        if (in(t).rows() != m) throw ShapeError("concat_cols: row mismatch");
        total += in(t).cols();
      }
      n.out = Tensor({m, total});
      std::size_t off = 0;
      for (std::size_t t = 0; t < n.in.size(); ++t) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < in(t).cols(); ++j) n.out(i, off + j) = in(t)(i, j);
        off += in(t).cols();
      }
      break;
    }
    case Op::kConcatRows: {
      const std::size_t c = in(0).cols();
      std::size_t total = 0;
      for (std::size_t t = 0; t < n.in.size(); ++t) {
        if (in(t).cols() != c) throw ShapeError("concat_rows: column mismatch");
        total += in(t).rows();
      }
      n.out = Tensor({total, c});
      std::size_t off = 0;
      for (std::size_t t = 0; t < n.in.size(); ++t) {
        for (std::size_t i = 0; i < in(t).rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) n.out(off + i, j) = in(t)(i, j);
        off += in(t).rows();
      }
      break;
    }
    case Op::kGatherCols: {
      const Tensor& x = in(0);
      n.out = Tensor({x.rows(), n.idx.size()});
      for (std::size_t j = 0; j < n.idx.size(); ++j) {
        if (n.idx[j] >= x.cols()) throw ShapeError("gather_cols: index out of range");
        for (std::size_t i = 0; i < x.rows(); ++i) n.out(i, j) = x(i, n.idx[j]);
      }
      break;
    }
    case Op::kSumAll: {
      double s = 0.0;
      for (double v : in(0).data()) s += v;
      n.out = Tensor::scalar(s);
      break;
    }
    case Op::kMeanAll: {
      double s = 0.0;
      for (double v : in(0).data()) s += v;
      n.out = Tensor::scalar(s / static_cast<double>(in(0).numel()));
      break;
    }
    case Op::kMaskedRowStats: {
      const Tensor& x = in(0);
      const std::size_t m = x.rows(), c = x.cols();
      std::size_t k = 0;
      for (std::uint8_t b : n.mask) k += b ? 1 : 0;
      if (k == 0) throw NumericError("masked_row_stats: no valid rows");
      n.out = Tensor({1, 4 * c});
      n.idx.assign(2 * c, 0);  // argmin | argmax row per column
      for (std::size_t j = 0; j < c; ++j) {
        double sum = 0.0, mn = 0.0, mx = 0.0;
        std::size_t amin = 0, amax = 0;
        bool first = true;
        for (std::size_t i = 0; i < m; ++i) {
          if (!n.mask[i]) continue;
          const double v = x(i, j);
          sum += v;
          if (first || v < mn) {
            mn = v;
            amin = i;
          }
          if (first || v > mx) {
            mx = v;
            amax = i;
          }
          first = false;
        }
        const double mu = sum / static_cast<double>(k);
        double var = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          if (!n.mask[i]) continue;
          const double d = x(i, j) - mu;
          var += d * d;
        }
        var /= static_cast<double>(k);
        n.out(0, j) = mu;
        n.out(0, c + j) = var;
        n.out(0, 2 * c + j) = mn;
        n.out(0, 3 * c + j) = mx;
        n.idx[j] = amin;
        n.idx[c + j] = amax;
      }
      break;
    }
  }
}

void Tape::backward(Value loss) {
  Node& ln = at(loss);
  if (ln.out.numel() != 1) throw NumericError("backward: loss must be scalar");
  for (Node& n : nodes_) {
    if (n.needs_grad)
      n.grad = Tensor::zeros(n.out.shape());
    else
      n.grad = Tensor();
  }
  if (!ln.needs_grad) return;  // loss does not depend on any leaf
  ln.grad[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.grad.numel() > 0) backprop(n);
  }
}

void Tape::backprop(Node& n) {
  auto in = [&](std::size_t i) -> Node& { return nodes_[n.in[i]]; };
  auto acc = [&](std::size_t i, const Tensor& g) {
    Node& dst = in(i);
    if (dst.needs_grad) add_inplace(dst.grad, g);
  };
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::kConstant:
    case Op::kLeaf:
      break;
    case Op::kMatMul: {
      // d/da = g * b^T, d/db = a^T * g
      if (in(0).needs_grad) {
        Tensor ga = aromma::matmul_nt(g, in(1).out);
        if (g_gradient_fault && ga.numel() > 0) ga[0] += 1e-2;
        add_inplace(in(0).grad, ga);
      }
      if (in(1).needs_grad) add_inplace(in(1).grad, aromma::matmul_tn(in(0).out, g));
      break;
    }
    case Op::kMatMulNT: {
      // out = a * b^T: d/da = g * b, d/db = g^T * a
      if (in(0).needs_grad) add_inplace(in(0).grad, aromma::matmul(g, in(1).out));
      if (in(1).needs_grad) add_inplace(in(1).grad, aromma::matmul_tn(g, in(0).out));
      break;
    }
    case Op::kAdd:
      acc(0, g);
      acc(1, g);
      break;
    case Op::kSub: {
      acc(0, g);
      if (in(1).needs_grad) axpy_inplace(in(1).grad, -1.0, g);
      break;
    }
    case Op::kMul: {
      if (in(0).needs_grad) {
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] *= in(1).out[i];
        add_inplace(in(0).grad, ga);
      }
      if (in(1).needs_grad) {
        Tensor gb = g;
        for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] *= in(0).out[i];
        add_inplace(in(1).grad, gb);
      }
      break;
    }
    case Op::kAddRow: {
      acc(0, g);
      if (in(1).needs_grad) {
        Tensor& gb = in(1).grad;
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
      }
      break;
    }
    case Op::kAffine: {
      if (in(0).needs_grad) axpy_inplace(in(0).grad, n.s0, g);
      break;
    }
    case Op::kRelu: {
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        const Tensor& x = in(0).out;
        for (std::size_t i = 0; i < g.numel(); ++i)
          if (x[i] > 0.0) gx[i] += g[i];
      }
      break;
    }
    case Op::kSigmoid: {
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * n.out[i] * (1.0 - n.out[i]);
      }
      break;
    }
    case Op::kLog: {
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        const Tensor& x = in(0).out;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] / x[i];
      }
      break;
    }
    case Op::kClamp: {
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        const Tensor& x = in(0).out;
        for (std::size_t i = 0; i < g.numel(); ++i)
          if (x[i] >= n.s0 && x[i] <= n.s1) gx[i] += g[i];
      }
      break;
    }
    case Op::kMulConst: {
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * n.cbuf[i];
      }
      break;
    }
    case Op::kSoftmaxRows: {
      if (!in(0).needs_grad) break;
      Tensor& gx = in(0).grad;
      const std::size_t m = n.out.rows(), c = n.out.cols();
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * n.out(i, j);
        for (std::size_t j = 0; j < c; ++j) gx(i, j) += n.out(i, j) * (g(i, j) - dot);
      }
      break;
    }
    case Op::kLayerNorm: {
      const Tensor& gain = in(1).out;
      const Tensor& xhat = n.cbuf;
      const std::size_t m = n.out.rows(), c = n.out.cols();
      if (in(1).needs_grad) {
        Tensor& gg = in(1).grad;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < c; ++j) gg[j] += g(i, j) * xhat(i, j);
      }
      if (in(2).needs_grad) {
        Tensor& gb = in(2).grad;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < c; ++j) gb[j] += g(i, j);
      }
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        for (std::size_t i = 0; i < m; ++i) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double gy = g(i, j) * gain[j];
            m1 += gy;
            m2 += gy * xhat(i, j);
          }
          m1 /= static_cast<double>(c);
          m2 /= static_cast<double>(c);
          for (std::size_t j = 0; j < c; ++j) {
            const double gy = g(i, j) * gain[j];
            gx(i, j) += n.fbuf[i] * (gy - m1 - xhat(i, j) * m2);
          }
        }
      }
      break;
    }
    case Op::kSliceCols: {
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        const std::size_t start = n.idx[0], len = n.idx[1];
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < len; ++j) gx(i, start + j) += g(i, j);
      }
      break;
    }
    case Op::kConcatCols: {
      std::size_t off = 0;
      for (std::size_t t = 0; t < n.in.size(); ++t) {
        Node& src = in(t);
        if (src.needs_grad)
          for (std::size_t i = 0; i < src.out.rows(); ++i)
            for (std::size_t j = 0; j < src.out.cols(); ++j) src.grad(i, j) += g(i, off + j);
        off += src.out.cols();
      }
      break;
    }
    case Op::kConcatRows: {
      std::size_t off = 0;
      for (std::size_t t = 0; t < n.in.size(); ++t) {
        Node& src = in(t);
        if (src.needs_grad)
          for (std::size_t i = 0; i < src.out.rows(); ++i)
            for (std::size_t j = 0; j < src.out.cols(); ++j) src.grad(i, j) += g(off + i, j);
        off += src.out.rows();
      }
      break;
    }
    case Op::kGatherCols: {
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        for (std::size_t j = 0; j < n.idx.size(); ++j)
          for (std::size_t i = 0; i < g.rows(); ++i) gx(i, n.idx[j]) += g(i, j);
      }
      break;
    }
    case Op::kSumAll: {
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[0];
      }
      break;
    }
    case Op::kMeanAll: {
      if (in(0).needs_grad) {
        Tensor& gx = in(0).grad;
        const double s = g[0] / static_cast<double>(gx.numel());
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += s;
      }
      break;
    }
    case Op::kMaskedRowStats: {
      if (!in(0).needs_grad) break;
      Tensor& gx = in(0).grad;
      const Tensor& x = in(0).out;
      const std::size_t m = x.rows(), c = x.cols();
      std::size_t k = 0;
      for (std::uint8_t b : n.mask) k += b ? 1 : 0;
      const double kd = static_cast<double>(k);
      for (std::size_t j = 0; j < c; ++j) {
        const double mu = n.out(0, j);
        for (std::size_t i = 0; i < m; ++i) {
          if (!n.mask[i]) continue;
          gx(i, j) += g(0, j) / kd;                                  // mean
          gx(i, j) += g(0, c + j) * 2.0 * (x(i, j) - mu) / kd;       // biased variance
        }
        gx(n.idx[j], j) += g(0, 2 * c + j);      // min
        gx(n.idx[c + j], j) += g(0, 3 * c + j);  // max
      }
      break;
    }
  }
}

Tensor Tape::grad(Value v) const {
  const Node& n = at(v);
  if (n.grad.numel() == n.out.numel() && !n.grad.empty()) return n.grad;
  return Tensor::zeros(n.out.shape());
}

Value multi_head_attention(Tape& t, Value q, Value k, Value v, int heads,
                           const std::vector<std::uint8_t>& key_mask,
                           const AttentionWeights& w) {
  const std::size_t d = t.val(q).cols();
  const std::size_t tk = t.val(k).rows();
  if (t.val(k).cols() != d || t.val(v).cols() != d)
    throw ShapeError("attention: q/k/v widths differ");
  if (t.val(v).rows() != tk) throw ShapeError("attention: k/v row counts differ");
  if (heads <= 0 || d % static_cast<std::size_t>(heads) != 0)
    throw ShapeError("attention: width not divisible by head count");
  if (key_mask.size() != tk) throw ShapeError("attention: key mask length != key rows");
  bool any = false;
  for (std::uint8_t b : key_mask) any = any || b;
  if (!any) throw NumericError("attention: all keys masked");

  const std::size_t dh = d / static_cast<std::size_t>(heads);
  const std::size_t s = t.val(q).rows();
  const Value qp = t.matmul(q, w.wq);
  const Value kp = t.matmul(k, w.wk);
  const Value vp = t.matmul(v, w.wv);

  // Key mask broadcast over query rows.
  std::vector<std::uint8_t> mask(s * tk);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < tk; ++j) mask[i * tk + j] = key_mask[j];

  std::vector<Value> head_out;
  head_out.reserve(static_cast<std::size_t>(heads));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * dh;
    const Value qh = t.slice_cols(qp, off, dh);
    const Value kh = t.slice_cols(kp, off, dh);
    const Value vh = t.slice_cols(vp, off, dh);
    const Value logits = t.scale(t.matmul_nt(qh, kh), scale);
    const Value attn = t.softmax_rows(logits, mask);
    head_out.push_back(t.matmul(attn, vh));
  }
  const Value cat = heads == 1 ? head_out[0] : t.concat_cols(head_out);
  return t.matmul(cat, w.wo);
}

std::vector<GradCheckEntry> grad_check(Tape& tape, Value loss, double h, double tol,
                                       double fd_atol) {
  if (h <= 0.0) throw Error("grad_check: h must be positive");
  tape.backward(loss);

  // Snapshot analytic gradients first; the forward re-executions below
  // perturb values in place but leave gradients alone.
  struct LeafRef {
    Value v;
    std::string name;
    Tensor analytic;
  };
  std::vector<LeafRef> leaves;
  for (Value v : tape.leaves()) {
    std::string name = tape.leaf_name(v);
    if (name.empty()) name = "leaf" + std::to_string(v.id);
    leaves.push_back({v, std::move(name), tape.grad(v)});
  }

  std::vector<GradCheckEntry> report;
  for (LeafRef& leaf : leaves) {
    Tensor base = tape.val(leaf.v);
    GradCheckEntry e;
    e.name = leaf.name;
    for (std::size_t i = 0; i < base.numel(); ++i) {
      Tensor plus = base, minus = base;
      plus[i] += h;
      minus[i] -= h;
      tape.set_leaf(leaf.v, plus);
      tape.recompute_forward();
      const double fp = tape.val(loss)[0];
      tape.set_leaf(leaf.v, minus);
      tape.recompute_forward();
      const double fm = tape.val(loss)[0];
      tape.set_leaf(leaf.v, base);
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = leaf.analytic[i];
      if (std::fabs(numeric - analytic) <= fd_atol) continue;
      const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
      e.max_rel_err = std::max(e.max_rel_err, std::fabs(numeric - analytic) / denom);
    }
    e.passed = e.max_rel_err < tol;
    report.push_back(std::move(e));
  }
  tape.recompute_forward();
  return report;
}

}  // namespace aromma
