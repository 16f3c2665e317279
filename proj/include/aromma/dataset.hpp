//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "aromma/smiles.hpp"

namespace aromma {

enum class Source : std::uint8_t { Singles, Pairs };
enum class Provenance : std::uint8_t { Orig, Pseudo, Padded };

const char* source_name(Source s);

// Unified label axis: case-folded, whitespace-normalized union of the two
// sources' descriptor vocabularies, sorted lexicographically.
struct LabelSpace {
  std::vector<std::string> names;
  std::vector<std::uint8_t> singles_mask;  // 1 where the singles source annotates
  std::vector<std::uint8_t> pairs_mask;

  std::size_t size() const { return names.size(); }
  std::optional<std::size_t> index_of(const std::string& normalized_name) const;
  std::vector<std::size_t> indices_where(const std::vector<std::uint8_t>& mask, bool value) const;
};

struct Sample {
  std::string id;
  std::vector<Smiles> molecules;  // 1 (singles) or 2 (pairs)
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> known;  // source annotates this label
  std::vector<Provenance> prov;
  Source source = Source::Singles;
  std::optional<int> fold;  // predefined fold, pairs schema option

  std::size_t positive_count() const;
};

struct Reject {
  long row = 0;
  std::string message;
};

struct RawRecord {
  long row = 0;
  std::vector<Smiles> molecules;
  std::vector<std::uint8_t> labels;  // over the file's own label axis
  std::vector<Provenance> prov;      // parsed back from a provenance column, if any
  std::optional<int> fold;
};

struct RawTable {
  Source schema = Source::Singles;
  std::vector<std::string> label_names;  // normalized
  std::vector<RawRecord> records;
  std::vector<Reject> rejects;
  bool has_fold = false;
};

// lowercase + trim + collapse inner whitespace
std::string normalize_label(std::string_view name);

// Schemas: singles "smiles,<label...>"; pairs "smiles_a,smiles_b[,fold],<label...>".
// Values are 0/1; quoting per RFC-4180 is accepted. An optional trailing
// "provenance" column (one char per label: o/p/z) is parsed back. Malformed
// rows land in the rejects list; header problems throw FormatError.
RawTable load_csv(const std::string& path, Source schema);

LabelSpace unify(const std::vector<std::string>& singles_labels,
                 const std::vector<std::string>& pairs_labels);

// Scatters a record's labels into the unified axis; positions the source does
// not annotate become zero/padded with known=false.
Sample pad_to(const LabelSpace& space, const RawRecord& record, Source source,
              const std::vector<std::string>& source_names);

struct Dataset {
  LabelSpace space;
  std::vector<Sample> samples;  // singles first, then pairs
  std::size_t n_singles = 0;
  int duplicate_count = 0;

  std::size_t n_pairs() const { return samples.size() - n_singles; }
  std::vector<std::size_t> indices_of(Source s) const;
};

// Unifies, pads, and dedupes (by molecule key, first row wins).
Dataset build_dataset(const RawTable& singles, const RawTable& pairs);

// Writes one source back out in its CSV schema over the unified label axis,
// with the provenance column appended.
void write_dataset_csv(const std::string& path, const Dataset& ds,
                       const std::vector<std::size_t>& indices);
void write_rejects_csv(const std::string& path, const std::vector<Reject>& rejects);

struct FoldPlan {
  int k = 0;
  std::vector<int> fold_of;  // per sample of one source
};

// Iterative multi-label stratification: labels rarest-first, each sample to
// the fold with the greatest remaining demand for that label, ties by fold
// size then seeded draw; a bounded swap repair pass afterwards drives every
// label's per-fold positive spread to <= 1 where possible. Samples that all
// carry a predefined fold keep it verbatim.
FoldPlan stratified_kfold(const std::vector<Sample>& samples, int k, std::uint64_t seed);

struct SplitIdx {
  std::vector<std::size_t> train, val, test;  // joint dataset indices
};

struct JointFolds {
  int k = 0;
  std::vector<SplitIdx> rotations;
};

// Rotation r: test = fold r, val = fold (r+1) mod k, train = the rest, taken
// per source and unioned over the joint index space.
JointFolds synchronize(const Dataset& ds, const FoldPlan& singles_plan,
                       const FoldPlan& pairs_plan);

void write_folds_csv(const std::string& path, const Dataset& ds, const FoldPlan& singles_plan,
                     const FoldPlan& pairs_plan);

}  // namespace aromma
