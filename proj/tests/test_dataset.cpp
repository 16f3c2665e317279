//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include <doctest.h>

#include "aromma/errors.hpp"
#include "aromma/rng.hpp"

using namespace aromma;

namespace {

std::string write_temp(const char* name, const std::string& content) {
  const std::string path = std::string("dataset_test_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

std::vector<Sample> synthetic_samples(std::size_t n, std::size_t L, Rng& rng, double rate) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = "s" + std::to_string(i);
    s.source = Source::Singles;
    s.labels.assign(L, 0);
    for (std::size_t c = 0; c < L; ++c) s.labels[c] = rng.uniform() < rate ? 1 : 0;
    s.known.assign(L, 1);
    s.prov.assign(L, Provenance::Orig);
    s.molecules.resize(1);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("load_csv parses singles and pairs schemas") {
  const std::string singles =
      write_temp("singles.csv", "smiles,Floral,fruity,Rose\nCCO,1,0,1\nOCC,0,1,0\n");
  const RawTable st = load_csv(singles, Source::Singles);
  CHECK(st.label_names == std::vector<std::string>{"floral", "fruity", "rose"});
  REQUIRE(st.records.size() == 2);
  CHECK(st.records[0].labels == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(st.records[0].molecules[0].text() == "CCO");
  CHECK(st.rejects.empty());
  std::remove(singles.c_str());

  const std::string pairs =
      write_temp("pairs.csv", "smiles_a,smiles_b,woody,citrus\nCCO,OCc1ccccc1,0,1\n");
  const RawTable pt = load_csv(pairs, Source::Pairs);
  REQUIRE(pt.records.size() == 1);
  CHECK(pt.records[0].molecules.size() == 2);
  CHECK(pt.records[0].labels == std::vector<std::uint8_t>{0, 1});
  CHECK_FALSE(pt.has_fold);
  std::remove(pairs.c_str());
}

TEST_CASE("malformed rows go to the rejects report with row numbers") {
  const std::string path = write_temp(
      "rejects.csv",
      "smiles,floral\nCCO,1\nC1CC,0\nCCO,2\nCCN,1,1\nC(,1\n");
  const RawTable t = load_csv(path, Source::Singles);
  CHECK(t.records.size() == 1);
  REQUIRE(t.rejects.size() == 4);
  CHECK(t.rejects[0].row == 3);  // invalid smiles (unpaired ring)
  CHECK(t.rejects[1].row == 4);  // label not 0/1
  CHECK(t.rejects[2].row == 5);  // column count
  CHECK(t.rejects[3].row == 6);  // invalid smiles (unbalanced paren)
  std::remove(path.c_str());

  CHECK_THROWS_AS((void)load_csv("does_not_exist.csv", Source::Singles), FormatError);
  const std::string dup = write_temp("dup.csv", "smiles,floral,FLORAL\n");
  CHECK_THROWS_AS((void)load_csv(dup, Source::Singles), FormatError);
  std::remove(dup.c_str());
  const std::string bad_header = write_temp("hdr.csv", "mol,floral\nCCO,1\n");
  CHECK_THROWS_AS((void)load_csv(bad_header, Source::Singles), FormatError);
  std::remove(bad_header.c_str());
}

TEST_CASE("pairs csv can carry a fold column") {
  const std::string path = write_temp(
      "folds.csv", "smiles_a,smiles_b,fold,woody\nCCO,CCN,3,1\nCCO,CCC,0,0\n");
  const RawTable t = load_csv(path, Source::Pairs);
  CHECK(t.has_fold);
  REQUIRE(t.records.size() == 2);
  CHECK(*t.records[0].fold == 3);
  CHECK(*t.records[1].fold == 0);
  std::remove(path.c_str());
}

TEST_CASE("unify builds the sorted union with per-source masks") {
  // planted-overlap arithmetic: 138 + 74 with 60 shared = 152
  std::vector<std::string> singles_names, pairs_names;
  for (int i = 0; i < 138; ++i) singles_names.push_back("d" + std::to_string(1000 + i));
  for (int i = 0; i < 60; ++i) pairs_names.push_back("d" + std::to_string(1000 + i));
  for (int i = 0; i < 14; ++i) pairs_names.push_back("d" + std::to_string(2000 + i));
  const LabelSpace space = unify(singles_names, pairs_names);
  CHECK(space.size() == 152);
  std::size_t overlap = 0, singles_only = 0, pairs_only = 0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (space.singles_mask[i] && space.pairs_mask[i]) ++overlap;
    if (space.singles_mask[i] && !space.pairs_mask[i]) ++singles_only;
    if (!space.singles_mask[i] && space.pairs_mask[i]) ++pairs_only;
  }
  CHECK(overlap == 60);
  CHECK(singles_only == 78);
  CHECK(pairs_only == 14);

  const LabelSpace disjoint = unify({"a", "b"}, {"c"});
  CHECK(disjoint.names == std::vector<std::string>{"a", "b", "c"});
  CHECK(disjoint.singles_mask == std::vector<std::uint8_t>{1, 1, 0});
  CHECK(disjoint.pairs_mask == std::vector<std::uint8_t>{0, 0, 1});

  const LabelSpace same = unify({"x", "y"}, {"Y", " x "});
  CHECK(same.names == std::vector<std::string>{"x", "y"});
  CHECK(same.singles_mask == std::vector<std::uint8_t>{1, 1});
  CHECK(same.pairs_mask == std::vector<std::uint8_t>{1, 1});
}

TEST_CASE("label names are case-folded and whitespace-collapsed") {
  CHECK(normalize_label("  Fresh   Cut GRASS ") == "fresh cut grass");
  CHECK(normalize_label("rose") == "rose");
}

TEST_CASE("pad_to scatters into the unified axis with provenance") {
  // pairs annotate 74 of 152: the remaining 78 must come out padded
  std::vector<std::string> singles_names, pairs_names;
  for (int i = 0; i < 138; ++i) singles_names.push_back("d" + std::to_string(1000 + i));
  for (int i = 0; i < 60; ++i) pairs_names.push_back("d" + std::to_string(1000 + i));
  for (int i = 0; i < 14; ++i) pairs_names.push_back("d" + std::to_string(2000 + i));
  const LabelSpace space = unify(singles_names, pairs_names);

  RawRecord rec;
  rec.row = 2;
  rec.molecules = {strip_stereo("CCO"), strip_stereo("CCN")};
  rec.labels.assign(74, 0);
  rec.labels[0] = 1;
  const Sample s = pad_to(space, rec, Source::Pairs, pairs_names);
  std::size_t padded = 0, known = 0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    padded += s.prov[i] == Provenance::Padded ? 1 : 0;
    known += s.known[i];
  }
  CHECK(padded == 78);
  CHECK(known == 74);
  const auto idx = space.index_of("d1000");
  REQUIRE(idx.has_value());
  CHECK(s.labels[*idx] == 1);

  // all-zero rows are fine; singles in a singles-only space know everything
  const LabelSpace own = unify(singles_names, {});
  RawRecord zero;
  zero.molecules = {strip_stereo("CCO")};
  zero.labels.assign(138, 0);
  const Sample z = pad_to(own, zero, Source::Singles, singles_names);
  CHECK(z.positive_count() == 0);
  for (std::size_t i = 0; i < own.size(); ++i) CHECK(z.known[i] == 1);
}

TEST_CASE("stratified folds balance exactly divisible classes") {
  Rng rng(5);
  std::vector<Sample> samples = synthetic_samples(10, 1, rng, 0.0);
  for (int i = 0; i < 5; ++i) samples[static_cast<std::size_t>(i)].labels[0] = 1;
  const FoldPlan plan = stratified_kfold(samples, 5, 99);
  std::vector<int> pos(5, 0), count(5, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ++count[static_cast<std::size_t>(plan.fold_of[i])];
    pos[static_cast<std::size_t>(plan.fold_of[i])] += samples[i].labels[0];
  }
  for (int f = 0; f < 5; ++f) {
    CHECK(count[static_cast<std::size_t>(f)] == 2);
    CHECK(pos[static_cast<std::size_t>(f)] == 1);
  }
}

TEST_CASE("three positives over five folds spread at most one apart") {
  Rng rng(6);
  std::vector<Sample> samples = synthetic_samples(20, 1, rng, 0.0);
  samples[3].labels[0] = samples[7].labels[0] = samples[15].labels[0] = 1;
  const FoldPlan a = stratified_kfold(samples, 5, 123);
  const FoldPlan b = stratified_kfold(samples, 5, 123);
  CHECK(a.fold_of == b.fold_of);  // deterministic under a fixed seed
  std::vector<int> pos(5, 0);
  for (std::size_t i = 0; i < samples.size(); ++i)
    pos[static_cast<std::size_t>(a.fold_of[i])] += samples[i].labels[0];
  int mn = 99, mx = 0;
  for (int f = 0; f < 5; ++f) {
    mn = std::min(mn, pos[static_cast<std::size_t>(f)]);
    mx = std::max(mx, pos[static_cast<std::size_t>(f)]);
  }
  CHECK(mx - mn <= 1);
  CHECK(mx == 1);
}

TEST_CASE("multilabel stratification keeps per-label spread at most one") {
  Rng rng(7);
  std::vector<Sample> samples = synthetic_samples(300, 12, rng, 0.15);
  const FoldPlan plan = stratified_kfold(samples, 5, 2024);
  for (std::size_t c = 0; c < 12; ++c) {
    std::vector<int> pos(5, 0);
    for (std::size_t i = 0; i < samples.size(); ++i)
      pos[static_cast<std::size_t>(plan.fold_of[i])] += samples[i].labels[c];
    int mn = 1 << 20, mx = 0;
    for (int f = 0; f < 5; ++f) {
      mn = std::min(mn, pos[static_cast<std::size_t>(f)]);
      mx = std::max(mx, pos[static_cast<std::size_t>(f)]);
    }
    INFO("label ", c);
    CHECK(mx - mn <= 1);
  }
}

TEST_CASE("predefined fold columns are honored verbatim") {
  Rng rng(8);
  std::vector<Sample> samples = synthetic_samples(10, 2, rng, 0.3);
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i].fold = static_cast<int>(i % 5);
  const FoldPlan plan = stratified_kfold(samples, 5, 1);
  for (std::size_t i = 0; i < samples.size(); ++i)
    CHECK(plan.fold_of[i] == static_cast<int>(i % 5));

  samples[0].fold = 7;
  CHECK_THROWS_AS((void)stratified_kfold(samples, 5, 1), DataError);
  CHECK_THROWS_AS((void)stratified_kfold(samples, 1, 1), DataError);
  std::vector<Sample> tiny = synthetic_samples(3, 1, rng, 0.5);
  CHECK_THROWS_AS((void)stratified_kfold(tiny, 5, 1), DataError);
}

TEST_CASE("synchronize unions per-source rotations into a partition") {
  const std::string singles = write_temp(
      "sync_singles.csv",
      "smiles,a,b\nCCO,1,0\nCCN,0,1\nCCC,1,1\nCC(C)C,0,0\nOCC,1,0\nNCC,0,1\nSCC,1,0\nCCS,0,0\n"
      "CCCl,1,0\nCCBr,0,1\n");
  const std::string pairs = write_temp(
      "sync_pairs.csv",
      "smiles_a,smiles_b,fold,c\nCCO,CCN,0,1\nCCO,CCC,1,0\nCCN,CCC,2,1\nOCC,CCN,3,0\n"
      "SCC,CCO,4,1\nCCS,CCN,0,0\n");
  const RawTable st = load_csv(singles, Source::Singles);
  const RawTable pt = load_csv(pairs, Source::Pairs);
  const Dataset ds = build_dataset(st, pt);
  CHECK(ds.n_singles == 10);
  CHECK(ds.samples.size() == 16);

  std::vector<Sample> singles_samples(ds.samples.begin(), ds.samples.begin() + 10);
  std::vector<Sample> pairs_samples(ds.samples.begin() + 10, ds.samples.end());
  const FoldPlan sp = stratified_kfold(singles_samples, 5, 3);
  const FoldPlan pp = stratified_kfold(pairs_samples, 5, 3);
  const JointFolds jf = synchronize(ds, sp, pp);
  REQUIRE(jf.k == 5);
  for (const SplitIdx& rot : jf.rotations) {
    std::set<std::size_t> seen;
    for (std::size_t i : rot.train) seen.insert(i);
    for (std::size_t i : rot.val) CHECK(seen.insert(i).second);
    for (std::size_t i : rot.test) CHECK(seen.insert(i).second);
    CHECK(seen.size() == ds.samples.size());
  }

  FoldPlan mismatched = pp;
  mismatched.k = 4;
  CHECK_THROWS_AS((void)synchronize(ds, sp, mismatched), DataError);
  std::remove(singles.c_str());
  std::remove(pairs.c_str());
}

TEST_CASE("duplicate molecule rows are dropped with a count") {
  const std::string singles =
      write_temp("dup_singles.csv", "smiles,a\nCCO,1\nCCO,0\nCCN,1\n");
  const RawTable st = load_csv(singles, Source::Singles);
  RawTable pt;
  pt.schema = Source::Pairs;
  const Dataset ds = build_dataset(st, pt);
  CHECK(ds.samples.size() == 2);
  CHECK(ds.duplicate_count == 1);
  CHECK(ds.samples[0].labels[0] == 1);  // first row wins
  std::remove(singles.c_str());
}

TEST_CASE("dataset csv round-trips labels and provenance") {
  const std::string singles = write_temp("rt_singles.csv", "smiles,a,b\nCCO,1,0\nCCN,0,1\n");
  const RawTable st = load_csv(singles, Source::Singles);
  RawTable pt;
  pt.schema = Source::Pairs;
  Dataset ds = build_dataset(st, pt);
  ds.samples[0].prov[1] = Provenance::Pseudo;
  const std::string out = "dataset_test_roundtrip.csv";
  write_dataset_csv(out, ds, {0, 1});
  const RawTable back = load_csv(out, Source::Singles);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].labels == std::vector<std::uint8_t>{1, 0});
  REQUIRE(back.records[0].prov.size() == 2);
  CHECK(back.records[0].prov[1] == Provenance::Pseudo);
  std::remove(singles.c_str());
  std::remove(out.c_str());
}
