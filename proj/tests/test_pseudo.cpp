//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/pseudo.hpp"

#include <cmath>
#include <limits>

#include <doctest.h>

#include "aromma/errors.hpp"
#include "support.hpp"

using namespace aromma;

namespace {

Dataset two_source_dataset() {
  Dataset ds;
  ds.space.names = {"l0", "l1", "l2", "l3"};
  ds.space.singles_mask = {1, 1, 1, 1};
  ds.space.pairs_mask = {1, 1, 0, 0};  // l2, l3 missing from the pairs source
  auto add = [&](Source src, std::vector<std::uint8_t> labels) {
    Sample s;
    s.source = src;
    s.labels = std::move(labels);
    s.known = src == Source::Singles ? std::vector<std::uint8_t>{1, 1, 1, 1}
                                     : std::vector<std::uint8_t>{1, 1, 0, 0};
    s.prov.assign(4, Provenance::Orig);
    if (src == Source::Pairs) {
      s.prov[2] = Provenance::Padded;
      s.prov[3] = Provenance::Padded;
    }
    s.molecules.resize(src == Source::Singles ? 1 : 2);
    s.id = (src == Source::Singles ? "s" : "p") + std::to_string(ds.samples.size());
    ds.samples.push_back(std::move(s));
  };
  add(Source::Singles, {1, 0, 1, 0});
  add(Source::Singles, {0, 1, 1, 0});
  add(Source::Pairs, {1, 0, 0, 0});
  add(Source::Pairs, {0, 1, 0, 0});
  add(Source::Pairs, {0, 0, 0, 0});
  ds.n_singles = 2;
  return ds;
}

}  // namespace

TEST_CASE("class_rates counts positive fractions exactly") {
  std::vector<std::vector<std::uint8_t>> labels = {
      {1, 0, 1}, {0, 0, 1}, {0, 0, 1}, {0, 0, 1}};
  const ClassRates r = class_rates(labels);
  CHECK(r.n == 4);
  CHECK(r.gamma[0] == 0.25);
  CHECK(r.gamma[1] == 0.0);
  CHECK(r.gamma[2] == 1.0);
  CHECK_THROWS_AS((void)class_rates(std::vector<std::vector<std::uint8_t>>{}), DataError);
}

TEST_CASE("fit_thresholds picks the k-th largest prediction") {
  Tensor preds({4, 3});
  const double col0[] = {0.9, 0.8, 0.2, 0.1};
  for (std::size_t i = 0; i < 4; ++i) {
    preds(i, 0) = col0[i];
    preds(i, 1) = 0.5;
    preds(i, 2) = 0.1 * static_cast<double>(i + 1);
  }
  ClassRates rates;
  rates.n = 4;
  rates.gamma = {0.25, 0.0, 1.0};
  const Thresholds tau = fit_thresholds(preds, rates);

  CHECK(tau.tau[0] == 0.9);  // k=1 -> the largest value, exactly {0.9} selected
  std::size_t selected = 0;
  for (std::size_t i = 0; i < 4; ++i) selected += preds(i, 0) >= tau.tau[0] ? 1 : 0;
  CHECK(selected == 1);

  CHECK(std::isinf(tau.tau[1]));       // gamma=0: nothing selected
  CHECK(tau.tau[2] == 0.1);            // gamma=1: the column minimum, all selected

  CHECK_THROWS_AS((void)fit_thresholds(Tensor({1, 3}), ClassRates{{0.1}, 1}), ShapeError);
}

TEST_CASE("chosen cutoff achieves the closest achievable fraction") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 5 + rng.below(120);
    Tensor preds({m, 1});
    std::vector<double> column(m);
    for (std::size_t i = 0; i < m; ++i) {
      preds(i, 0) = rng.uniform();  // continuous: ties have probability zero
      column[i] = preds(i, 0);
    }
    ClassRates rates;
    rates.n = m;
    rates.gamma = {rng.uniform()};
    const Thresholds tau = fit_thresholds(preds, rates);
    std::size_t selected = 0;
    for (double v : column) selected += v >= tau.tau[0] ? 1 : 0;
    const double frac = static_cast<double>(selected) / static_cast<double>(m);
    const double best = testsupport::best_achievable_fraction_gap(column, rates.gamma[0]);
    CHECK(std::fabs(frac - rates.gamma[0]) <= best + 0.5 / static_cast<double>(m) + 1e-12);
    CHECK(std::fabs(frac - rates.gamma[0]) <= 1.0 / static_cast<double>(m) + 1e-12);
  }
}

TEST_CASE("calibration bound holds under heavy ties") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 10 + rng.below(80);
    Tensor preds({m, 1});
    for (std::size_t i = 0; i < m; ++i)
      preds(i, 0) = static_cast<double>(rng.below(4)) * 0.25;  // many exact ties
    ClassRates rates;
    rates.n = m;
    rates.gamma = {rng.uniform()};
    const Thresholds tau = fit_thresholds(preds, rates);
    std::size_t selected = 0, tied = 0;
    for (std::size_t i = 0; i < m; ++i) {
      selected += preds(i, 0) >= tau.tau[0] ? 1 : 0;
      tied += preds(i, 0) == tau.tau[0] ? 1 : 0;
    }
    const double md = static_cast<double>(m);
    const double frac = static_cast<double>(selected) / md;
    const double tie_mass = static_cast<double>(tied > 0 ? tied - 1 : 0) / md;
    CHECK(frac >= rates.gamma[0] - 1.0 / md - 1e-12);
    CHECK(frac <= rates.gamma[0] + 1.0 / md + tie_mass + 1e-12);
  }
}

TEST_CASE("raising a prediction never loses its pseudo-label") {
  Rng rng(43);
  Tensor preds({20, 1});
  for (std::size_t i = 0; i < 20; ++i) preds(i, 0) = rng.uniform();
  ClassRates rates;
  rates.n = 20;
  rates.gamma = {0.3};
  const Thresholds tau = fit_thresholds(preds, rates);
  for (std::size_t i = 0; i < 20; ++i) {
    const bool before = preds(i, 0) >= tau.tau[0];
    const double raised = std::min(1.0, preds(i, 0) + 0.2);
    const bool after = raised >= tau.tau[0];
    if (before) CHECK(after);
  }
}

TEST_CASE("fill-missing augmentation touches only unannotated labels") {
  const Dataset ds = two_source_dataset();
  const std::vector<std::size_t> pairs = {2, 3, 4};
  Tensor preds({3, 4});
  // high scores on the missing labels for the first pair only
  preds(0, 2) = 0.95;
  preds(0, 3) = 0.9;
  preds(1, 2) = 0.1;
  preds(1, 3) = 0.2;
  preds(2, 2) = 0.15;
  preds(2, 3) = 0.1;
  for (std::size_t i = 0; i < 3; ++i) {
    preds(i, 0) = 0.99;  // annotated labels must not move even with huge scores
    preds(i, 1) = 0.99;
  }
  Thresholds tau;
  tau.tau = {0.5, 0.5, 0.9, 0.9};
  const Dataset aug = augment(ds, pairs, preds, tau, AugmentMode::P78);

  CHECK(aug.samples[2].labels[2] == 1);
  CHECK(aug.samples[2].labels[3] == 1);
  CHECK(aug.samples[2].prov[2] == Provenance::Pseudo);
  CHECK(aug.samples[3].labels[2] == 0);
  // annotated labels untouched
  CHECK(aug.samples[3].labels[0] == ds.samples[3].labels[0]);
  CHECK(aug.samples[4].labels[1] == ds.samples[4].labels[1]);
  // singles untouched entirely
  CHECK(aug.samples[0].labels == ds.samples[0].labels);

  // idempotent under fixed tau and predictions
  const Dataset again = augment(aug, pairs, preds, tau, AugmentMode::P78);
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    CHECK(again.samples[i].labels == aug.samples[i].labels);
}

TEST_CASE("degenerate rates leave the dataset unchanged in fill-missing mode") {
  const Dataset ds = two_source_dataset();
  const std::vector<std::size_t> pairs = {2, 3, 4};
  Tensor preds({3, 4});
  Rng rng(44);
  for (double& v : preds.data()) v = rng.uniform();
  ClassRates zero;
  zero.n = 3;
  zero.gamma = {0.0, 0.0, 0.0, 0.0};
  const Dataset aug = augment(ds, pairs, preds, fit_thresholds(preds, zero), AugmentMode::P78);
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    CHECK(aug.samples[i].labels == ds.samples[i].labels);
}

TEST_CASE("or-merge keeps original positives and only adds") {
  const Dataset ds = two_source_dataset();
  const std::vector<std::size_t> pairs = {2, 3, 4};
  Rng rng(45);
  Tensor preds({3, 4});
  for (double& v : preds.data()) v = rng.uniform();
  ClassRates rates;
  rates.n = 3;
  rates.gamma = {0.6, 0.6, 0.6, 0.6};
  const Dataset aug =
      augment(ds, pairs, preds, fit_thresholds(preds, rates), AugmentMode::P152);
  for (std::size_t i : pairs)
    for (std::size_t c = 0; c < 4; ++c)
      if (ds.samples[i].labels[c]) CHECK(aug.samples[i].labels[c] == 1);

  CHECK_THROWS_AS((void)augment(ds, pairs, Tensor({2, 4}), Thresholds{{1, 1, 1, 1}},
                                AugmentMode::P152),
                  DataError);
}

TEST_CASE("density report averages per source and omits empty ones") {
  Dataset ds = two_source_dataset();
  const DensityReport r = density_report(ds);
  CHECK(r.mean_positives.at("singles") == doctest::Approx(2.0));
  CHECK(r.mean_positives.at("pairs") == doctest::Approx(2.0 / 3.0));

  Dataset singles_only = ds;
  singles_only.samples.resize(2);
  const DensityReport r2 = density_report(singles_only);
  CHECK(r2.mean_positives.count("pairs") == 0);

  // two samples with 1 and 3 positives average to 2
  Dataset tiny;
  tiny.space = ds.space;
  Sample a = ds.samples[0];
  a.labels = {1, 0, 0, 0};
  Sample b = ds.samples[1];
  b.labels = {1, 1, 1, 0};
  tiny.samples = {a, b};
  tiny.n_singles = 2;
  CHECK(density_report(tiny).mean_positives.at("singles") == 2.0);
}

TEST_CASE("augmented density approaches the fitted rate mass") {
  // Simulate predictions that rank true positives first, fit rates on a dense
  // labeled source, and check the sparse source's density lands near the rate
  // sum (the discretization allows 10%).
  Rng rng(46);
  const std::size_t m = 400, L = 8;
  std::vector<std::vector<std::uint8_t>> dense(m, std::vector<std::uint8_t>(L, 0));
  Tensor preds({m, L});
  for (std::size_t c = 0; c < L; ++c) {
    const double rate = 0.1 + 0.05 * static_cast<double>(c);
    for (std::size_t i = 0; i < m; ++i) {
      const bool pos = rng.uniform() < rate;
      dense[i][c] = pos ? 1 : 0;
      preds(i, c) = pos ? 0.6 + 0.4 * rng.uniform() : 0.4 * rng.uniform();
    }
  }
  const ClassRates rates = class_rates(dense);
  double gamma_sum = 0.0;
  for (double g : rates.gamma) gamma_sum += g;

  Dataset ds;
  ds.space.names.resize(L);
  ds.space.singles_mask.assign(L, 1);
  ds.space.pairs_mask.assign(L, 0);
  for (std::size_t i = 0; i < L; ++i) ds.space.names[i] = "l" + std::to_string(i);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m; ++i) {
    Sample s;
    s.source = Source::Pairs;
    s.labels.assign(L, 0);  // fully sparse
    s.known.assign(L, 0);
    s.prov.assign(L, Provenance::Padded);
    s.molecules.resize(2);
    s.id = "p" + std::to_string(i);
    ds.samples.push_back(std::move(s));
    idx.push_back(i);
  }
  const Dataset aug = augment(ds, idx, preds, fit_thresholds(preds, rates), AugmentMode::P152);
  const double density = density_report(aug).mean_positives.at("pairs");
  CHECK(std::fabs(density - gamma_sum) <= 0.10 * gamma_sum);
}
