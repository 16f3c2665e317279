//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/losses.hpp"

#include <cmath>

#include "aromma/errors.hpp"

namespace aromma {

namespace {

constexpr double kClampEps = 1e-7;

double clamp01(double p) { return std::min(std::max(p, kClampEps), 1.0 - kClampEps); }

// logit-scale sharpening; identity at T=1
double sharpen(double p, double temperature) {
  if (temperature == 1.0) return p;
  const double c = clamp01(p);
  const double logit = std::log(c) - std::log(1.0 - c);
  return 1.0 / (1.0 + std::exp(-logit / temperature));
}

Value sharpen_node(Tape& t, Value p, double temperature) {
  if (temperature == 1.0) return p;
  const Value pc = t.clamp(p, kClampEps, 1.0 - kClampEps);
  const Value logit = t.sub(t.log(pc), t.log(t.affine(pc, -1.0, 1.0)));
  return t.sigmoid(t.scale(logit, 1.0 / temperature));
}

}  // namespace

Value bce_node(Tape& t, const std::vector<std::uint8_t>& y, Value probs,
               const std::vector<std::uint8_t>* known) {
  const std::size_t L = t.val(probs).numel();
  if (y.size() != L) throw ShapeError("bce: label vector width mismatch");
  if (known && known->size() != L) throw ShapeError("bce: known mask width mismatch");

  std::vector<double> w_pos(L, 0.0), w_neg(L, 0.0);
  std::size_t counted = 0;
  for (std::size_t i = 0; i < L; ++i) {
    if (known && !(*known)[i]) continue;
    ++counted;
    (y[i] ? w_pos[i] : w_neg[i]) = 1.0;
  }
  if (counted == 0) throw DataError("bce: no labels to score");

  const std::size_t c = t.val(probs).cols();
  const Value pc = t.clamp(probs, kClampEps, 1.0 - kClampEps);
  const Value log_p = t.log(pc);
  const Value log_q = t.log(t.affine(pc, -1.0, 1.0));
  const Value acc = t.add(t.mul_const(log_p, Tensor({1, c}, w_pos)),
                          t.mul_const(log_q, Tensor({1, c}, w_neg)));
  return t.scale(t.sum_all(acc), -1.0 / static_cast<double>(counted));
}

Value mld_node(Tape& t, const std::vector<double>& teacher, Value student, double temperature,
               bool softmax_variant) {
  const std::size_t K = t.val(student).numel();
  if (teacher.size() != K) throw ShapeError("mld: teacher width mismatch");
  if (K == 0) throw ShapeError("mld: empty probability vectors");

  std::vector<double> pt(K);
  for (std::size_t i = 0; i < K; ++i) pt[i] = sharpen(teacher[i], temperature);
  const Value ps = sharpen_node(t, student, temperature);
  const Value psc = t.clamp(ps, kClampEps, 1.0 - kClampEps);
  const Value log_ps = t.log(psc);
  const Value log_qs = t.log(t.affine(psc, -1.0, 1.0));

  if (!softmax_variant) {
    // mean_i [ pt log(ptc/psc) + (1-pt) log((1-ptc)/(1-psc)) ]. The teacher
    // multipliers stay unclamped so mld(p, p) is exactly zero.
    double const_term = 0.0;
    std::vector<double> mp(K), mq(K);
    for (std::size_t i = 0; i < K; ++i) {
      const double c = clamp01(pt[i]);
      const_term += pt[i] * std::log(c) + (1.0 - pt[i]) * std::log(1.0 - c);
      mp[i] = -pt[i];
      mq[i] = -(1.0 - pt[i]);
    }
    const Value cross = t.add(t.mul_const(log_ps, Tensor({1, K}, mp)),
                              t.mul_const(log_qs, Tensor({1, K}, mq)));
    // Both the cross term and the constant use the same reciprocal product so
    // mld(p, p) cancels to exactly zero.
    const double r = 1.0 / static_cast<double>(K);
    return t.affine(t.scale(t.sum_all(cross), r), 1.0, const_term * r);
  }

  // Softmax-over-labels reading: both sides renormalized over the label axis,
  // then KL(T||S) summed for the direct and complement distributions.
  double sum_p = 0.0, sum_q = 0.0;
  for (double v : pt) {
    sum_p += clamp01(v);
    sum_q += 1.0 - clamp01(v);
  }
  double const_term = 0.0;
  std::vector<double> mp(K), mq(K);
  for (std::size_t i = 0; i < K; ++i) {
    const double tp = clamp01(pt[i]) / sum_p;
    const double tq = (1.0 - clamp01(pt[i])) / sum_q;
    const_term += tp * std::log(tp) + tq * std::log(tq);
    mp[i] = -tp;
    mq[i] = -tq;
  }
  const Value cross = t.add(t.mul_const(log_ps, Tensor({1, K}, mp)),
                            t.mul_const(log_qs, Tensor({1, K}, mq)));
  // + log sum(ps) and + log sum(1-ps) restore the student normalizers.
  const Value norm = t.add(t.log(t.sum_all(psc)), t.log(t.sum_all(t.affine(psc, -1.0, 1.0))));
  return t.affine(t.add(t.sum_all(cross), norm), 1.0, const_term);
}

double bce(const std::vector<std::uint8_t>& y, const std::vector<double>& p) {
  Tape t;
  const Value pv = t.leaf(Tensor::row(p), "p");
  return t.val(bce_node(t, y, pv)).data()[0];
}

double mld(const std::vector<double>& p_teacher, const std::vector<double>& p_student,
           double temperature, bool softmax_variant) {
  Tape t;
  const Value s = t.leaf(Tensor::row(p_student), "p_student");
  return t.val(mld_node(t, p_teacher, s, temperature, softmax_variant)).data()[0];
}

TotalLoss total_loss(Tape& t, const std::vector<SampleLossInput>& batch, const LossConfig& cfg) {
  if (batch.empty()) throw DataError("total_loss: empty batch");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ConfigError("total_loss: alpha outside [0,1]");

  std::vector<Value> single_terms, pair_terms;
  double single_bce_sum = 0.0, single_mld_sum = 0.0, pair_bce_sum = 0.0;
  for (const SampleLossInput& item : batch) {
    const Sample& s = *item.sample;
    const std::vector<std::uint8_t>* known = cfg.mask_unknown ? &s.known : nullptr;
    const Value b = bce_node(t, s.labels, item.probs, known);
    if (s.source == Source::Singles) {
      Value term = b;
      single_bce_sum += t.val(b)[0];
      if (cfg.kd_enabled) {
        if (!item.teacher)
          throw DataError("total_loss: missing teacher probabilities for '" + s.id + "'");
        const Value sub = t.gather_cols(item.probs, cfg.kd_label_subset);
        const Value m = mld_node(t, *item.teacher, sub, cfg.temperature, cfg.mld_softmax_variant);
        single_mld_sum += t.val(m)[0];
        term = t.add(b, m);
      }
      single_terms.push_back(term);
    } else {
      pair_terms.push_back(b);
      pair_bce_sum += t.val(b)[0];
    }
  }

  auto mean_of = [&](const std::vector<Value>& terms) -> Value {
    Value acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = t.add(acc, terms[i]);
    return t.scale(acc, 1.0 / static_cast<double>(terms.size()));
  };

  TotalLoss out;
  out.n_singles = single_terms.size();
  out.n_pairs = pair_terms.size();
  Value total = t.constant(Tensor::scalar(0.0));
  if (!single_terms.empty()) total = t.add(total, t.scale(mean_of(single_terms), cfg.alpha));
  if (!pair_terms.empty()) total = t.add(total, t.scale(mean_of(pair_terms), 1.0 - cfg.alpha));
  out.total = total;
  out.single_bce = single_terms.empty() ? 0.0 : single_bce_sum / static_cast<double>(out.n_singles);
  out.single_mld = single_terms.empty() ? 0.0 : single_mld_sum / static_cast<double>(out.n_singles);
  out.pair_bce = pair_terms.empty() ? 0.0 : pair_bce_sum / static_cast<double>(out.n_pairs);
  return out;
}

}  // namespace aromma
