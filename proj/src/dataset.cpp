//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "aromma/errors.hpp"
#include "aromma/rng.hpp"

namespace aromma {

namespace {

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c == '\r' && i + 1 == line.size()) {
      // tolerate CRLF
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::optional<std::uint8_t> parse_binary(const std::string& cell) {
  const std::string t = trim(cell);
  if (t == "0") return 0;
  if (t == "1") return 1;
  return std::nullopt;
}

char prov_char(Provenance p) {
  switch (p) {
    case Provenance::Orig: return 'o';
    case Provenance::Pseudo: return 'p';
    case Provenance::Padded: return 'z';
  }
  return '?';
}

std::optional<Provenance> prov_from_char(char c) {
  switch (c) {
    case 'o': return Provenance::Orig;
    case 'p': return Provenance::Pseudo;
    case 'z': return Provenance::Padded;
    default: return std::nullopt;
  }
}

}  // namespace

const char* source_name(Source s) { return s == Source::Singles ? "singles" : "pairs"; }

std::optional<std::size_t> LabelSpace::index_of(const std::string& normalized_name) const {
  const auto it = std::lower_bound(names.begin(), names.end(), normalized_name);
  if (it == names.end() || *it != normalized_name) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<std::size_t> LabelSpace::indices_where(const std::vector<std::uint8_t>& mask,
                                                   bool value) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (static_cast<bool>(mask[i]) == value) out.push_back(i);
  return out;
}

std::size_t Sample::positive_count() const {
  std::size_t n = 0;
  for (std::uint8_t v : labels) n += v;
  return n;
}

std::string normalize_label(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool in_space = false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = !out.empty();
      continue;
    }
    if (in_space) {
      out += ' ';
      in_space = false;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

RawTable load_csv(const std::string& path, Source schema) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open csv file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty csv file: " + path);

  std::vector<std::string> header = parse_csv_line(line);
  const std::size_t molecule_cols = schema == Source::Singles ? 1 : 2;
  if (schema == Source::Singles) {
    if (header.empty() || trim(header[0]) != "smiles")
      throw FormatError("singles csv must start with a 'smiles' column", 1);
  } else {
    if (header.size() < 2 || trim(header[0]) != "smiles_a" || trim(header[1]) != "smiles_b")
      throw FormatError("pairs csv must start with 'smiles_a,smiles_b'", 1);
  }

  RawTable table;
  table.schema = schema;
  std::size_t label_start = molecule_cols;
  if (schema == Source::Pairs && header.size() > 2 && trim(header[2]) == "fold") {
    table.has_fold = true;
    label_start = 3;
  }
  bool has_prov = false;
  std::size_t label_end = header.size();
  if (label_end > label_start && trim(header[label_end - 1]) == "provenance") {
    has_prov = true;
    --label_end;
  }
  if (label_end <= label_start) throw FormatError("csv declares no label columns", 1);

  std::set<std::string> seen;
  for (std::size_t i = label_start; i < label_end; ++i) {
    std::string name = normalize_label(header[i]);
    if (name.empty()) throw FormatError("empty label name in header", 1);
    if (!seen.insert(name).second)
      throw FormatError("duplicate label name '" + name + "' after normalization", 1);
    table.label_names.push_back(std::move(name));
  }

  const std::size_t expected = label_end + (has_prov ? 1 : 0);
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = parse_csv_line(line);
    if (cells.size() != expected) {
      table.rejects.push_back({row, "expected " + std::to_string(expected) + " columns, got " +
                                        std::to_string(cells.size())});
      continue;
    }
    RawRecord rec;
    rec.row = row;
    bool ok = true;
    for (std::size_t i = 0; i < molecule_cols; ++i) {
      try {
        rec.molecules.push_back(strip_stereo(cells[i]));
      } catch (const ParseError& e) {
        table.rejects.push_back({row, std::string("invalid smiles: ") + e.what()});
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (table.has_fold) {
      try {
        rec.fold = std::stoi(trim(cells[2]));
      } catch (const std::exception&) {
        table.rejects.push_back({row, "non-integer fold value '" + cells[2] + "'"});
        continue;
      }
    }
    for (std::size_t i = label_start; i < label_end && ok; ++i) {
      const auto v = parse_binary(cells[i]);
      if (!v) {
        table.rejects.push_back({row, "label value must be 0 or 1, got '" + cells[i] + "'"});
        ok = false;
        break;
      }
      rec.labels.push_back(*v);
    }
    if (!ok) continue;
    if (has_prov) {
      const std::string& pv = cells[expected - 1];
      if (pv.size() != table.label_names.size()) {
        table.rejects.push_back({row, "provenance string length != label count"});
        continue;
      }
      for (char c : pv) {
        const auto p = prov_from_char(c);
        if (!p) {
          ok = false;
          break;
        }
        rec.prov.push_back(*p);
      }
      if (!ok) {
        table.rejects.push_back({row, "invalid provenance character"});
        continue;
      }
    }
    table.records.push_back(std::move(rec));
  }
  return table;
}

LabelSpace unify(const std::vector<std::string>& singles_labels,
                 const std::vector<std::string>& pairs_labels) {
  std::set<std::string> all;
  std::set<std::string> s_set, p_set;
  for (const std::string& n : singles_labels) {
    const std::string norm = normalize_label(n);
    all.insert(norm);
    s_set.insert(norm);
  }
  for (const std::string& n : pairs_labels) {
    const std::string norm = normalize_label(n);
    all.insert(norm);
    p_set.insert(norm);
  }
  LabelSpace space;
  space.names.assign(all.begin(), all.end());  // std::set iterates sorted
  space.singles_mask.resize(space.names.size());
  space.pairs_mask.resize(space.names.size());
  for (std::size_t i = 0; i < space.names.size(); ++i) {
    space.singles_mask[i] = s_set.count(space.names[i]) ? 1 : 0;
    space.pairs_mask[i] = p_set.count(space.names[i]) ? 1 : 0;
  }
  return space;
}

Sample pad_to(const LabelSpace& space, const RawRecord& record, Source source,
              const std::vector<std::string>& source_names) {
  if (record.labels.size() != source_names.size())
    throw DataError("record label count does not match its source's label names");
  Sample s;
  s.molecules = record.molecules;
  s.source = source;
  s.fold = record.fold;
  const std::size_t L = space.size();
  s.labels.assign(L, 0);
  s.known.assign(L, 0);
  s.prov.assign(L, Provenance::Padded);
  const std::vector<std::uint8_t>& mask =
      source == Source::Singles ? space.singles_mask : space.pairs_mask;
  for (std::size_t i = 0; i < L; ++i) s.known[i] = mask[i];
  for (std::size_t j = 0; j < source_names.size(); ++j) {
    const auto idx = space.index_of(normalize_label(source_names[j]));
    if (!idx) throw DataError("unknown label name '" + source_names[j] + "'");
    s.labels[*idx] = record.labels[j];
    s.prov[*idx] = record.prov.empty() ? Provenance::Orig : record.prov[j];
  }
  return s;
}

std::vector<std::size_t> Dataset::indices_of(Source s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].source == s) out.push_back(i);
  return out;
}

Dataset build_dataset(const RawTable& singles, const RawTable& pairs) {
  Dataset ds;
  ds.space = unify(singles.label_names, pairs.label_names);
  std::set<std::string> seen_keys;
  for (const RawRecord& rec : singles.records) {
    if (!seen_keys.insert(rec.molecules[0].text()).second) {
      ++ds.duplicate_count;
      continue;
    }
    Sample s = pad_to(ds.space, rec, Source::Singles, singles.label_names);
    s.id = "s" + std::to_string(rec.row);
    ds.samples.push_back(std::move(s));
  }
  ds.n_singles = ds.samples.size();
  for (const RawRecord& rec : pairs.records) {
    const std::string a = rec.molecules[0].text(), b = rec.molecules[1].text();
    const std::string key = a < b ? a + "\x1f" + b : b + "\x1f" + a;
    if (!seen_keys.insert("pair:" + key).second) {
      ++ds.duplicate_count;
      continue;
    }
    Sample s = pad_to(ds.space, rec, Source::Pairs, pairs.label_names);
    s.id = "p" + std::to_string(rec.row);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void write_dataset_csv(const std::string& path, const Dataset& ds,
                       const std::vector<std::size_t>& indices) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write csv file: " + path);
  if (indices.empty()) throw DataError("write_dataset_csv: nothing to write");
  const Source source = ds.samples[indices[0]].source;
  const bool has_fold = ds.samples[indices[0]].fold.has_value();
  if (source == Source::Singles)
    out << "smiles";
  else
    out << "smiles_a,smiles_b" << (has_fold ? ",fold" : "");
  for (const std::string& n : ds.space.names) out << ',' << csv_quote(n);
  out << ",provenance\n";
  for (std::size_t idx : indices) {
    const Sample& s = ds.samples[idx];
    if (s.source != source) throw DataError("write_dataset_csv: mixed sources");
    out << csv_quote(s.molecules[0].text());
    if (source == Source::Pairs) {
      out << ',' << csv_quote(s.molecules[1].text());
      if (has_fold) out << ',' << s.fold.value_or(-1);
    }
    for (std::uint8_t v : s.labels) out << ',' << static_cast<int>(v);
    out << ',';
    for (Provenance p : s.prov) out << prov_char(p);
    out << '\n';
  }
}

void write_rejects_csv(const std::string& path, const std::vector<Reject>& rejects) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write rejects file: " + path);
  out << "row,error\n";
  for (const Reject& r : rejects) out << r.row << ',' << csv_quote(r.message) << '\n';
}

namespace {

int label_spread(const std::vector<std::vector<int>>& fold_pos, std::size_t label, int k) {
  int mn = std::numeric_limits<int>::max(), mx = 0;
  for (int f = 0; f < k; ++f) {
    mn = std::min(mn, fold_pos[f][label]);
    mx = std::max(mx, fold_pos[f][label]);
  }
  return mx - mn;
}

int total_violation(const std::vector<std::vector<int>>& fold_pos, std::size_t n_labels, int k) {
  int v = 0;
  for (std::size_t l = 0; l < n_labels; ++l) v += std::max(0, label_spread(fold_pos, l, k) - 1);
  return v;
}

}  // namespace

FoldPlan stratified_kfold(const std::vector<Sample>& samples, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("stratified_kfold: k must be at least 2");
  const std::size_t n = samples.size();
  if (n < static_cast<std::size_t>(k)) throw DataError("stratified_kfold: fewer samples than folds");

  FoldPlan plan;
  plan.k = k;
  plan.fold_of.assign(n, -1);

  // Predefined folds are honored verbatim when every sample carries one.
  bool all_predefined = true;
  for (const Sample& s : samples) all_predefined = all_predefined && s.fold.has_value();
  if (all_predefined && n > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      const int f = *samples[i].fold;
      if (f < 0 || f >= k) throw DataError("predefined fold index out of range");
      plan.fold_of[i] = f;
    }
    return plan;
  }

  const std::size_t n_labels = samples.empty() ? 0 : samples[0].labels.size();
  Rng rng(seed);

  // Remaining per-fold demand per label, initialized to an equal share.
  std::vector<std::vector<double>> demand(k, std::vector<double>(n_labels, 0.0));
  std::vector<std::size_t> remaining(n_labels, 0);
  for (const Sample& s : samples)
    for (std::size_t l = 0; l < n_labels; ++l)
      if (s.labels[l]) ++remaining[l];
  for (int f = 0; f < k; ++f)
    for (std::size_t l = 0; l < n_labels; ++l)
      demand[f][l] = static_cast<double>(remaining[l]) / static_cast<double>(k);

  std::vector<int> fold_count(k, 0);
  std::size_t assigned = 0;

  auto assign = [&](std::size_t i, int f) {
    plan.fold_of[i] = f;
    ++fold_count[f];
    ++assigned;
    for (std::size_t l = 0; l < n_labels; ++l)
      if (samples[i].labels[l]) {
        demand[f][l] -= 1.0;
        --remaining[l];
      }
  };

  while (true) {
    // Rarest label still having unassigned positives.
    std::size_t best_label = n_labels;
    for (std::size_t l = 0; l < n_labels; ++l)
      if (remaining[l] > 0 && (best_label == n_labels || remaining[l] < remaining[best_label]))
        best_label = l;
    if (best_label == n_labels) break;
    for (std::size_t i = 0; i < n; ++i) {
      if (plan.fold_of[i] >= 0 || !samples[i].labels[best_label]) continue;
      int best_f = 0;
      std::vector<int> ties;
      for (int f = 0; f < k; ++f) {
        if (demand[f][best_label] > demand[best_f][best_label] + 1e-12) best_f = f;
      }
      for (int f = 0; f < k; ++f)
        if (demand[f][best_label] > demand[best_f][best_label] - 1e-12) ties.push_back(f);
      if (ties.size() > 1) {
        int min_count = fold_count[ties[0]];
        for (int f : ties) min_count = std::min(min_count, fold_count[f]);
        std::vector<int> size_ties;
        for (int f : ties)
          if (fold_count[f] == min_count) size_ties.push_back(f);
        best_f = size_ties[rng.below(size_ties.size())];
      }
      assign(i, best_f);
    }
  }

  // Label-free leftovers go to the emptiest fold.
  for (std::size_t i = 0; i < n; ++i) {
    if (plan.fold_of[i] >= 0) continue;
    int min_count = *std::min_element(fold_count.begin(), fold_count.end());
    std::vector<int> ties;
    for (int f = 0; f < k; ++f)
      if (fold_count[f] == min_count) ties.push_back(f);
    assign(i, ties[rng.below(ties.size())]);
  }

  // Swap repair: drive per-label positive spread to <= 1 without touching
  // fold sizes. Bounded; gives up when no swap improves the total violation.
  if (n_labels > 0) {
    std::vector<std::vector<int>> fold_pos(k, std::vector<int>(n_labels, 0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n_labels; ++l)
        if (samples[i].labels[l]) ++fold_pos[plan.fold_of[i]][l];

    for (int pass = 0; pass < 200; ++pass) {
      const int before = total_violation(fold_pos, n_labels, k);
      if (before == 0) break;
      std::size_t worst = 0;
      int worst_spread = 0;
      for (std::size_t l = 0; l < n_labels; ++l) {
        const int sp = label_spread(fold_pos, l, k);
        if (sp > worst_spread) {
          worst_spread = sp;
          worst = l;
        }
      }
      if (worst_spread <= 1) break;
      int f_max = 0, f_min = 0;
      for (int f = 0; f < k; ++f) {
        if (fold_pos[f][worst] > fold_pos[f_max][worst]) f_max = f;
        if (fold_pos[f][worst] < fold_pos[f_min][worst]) f_min = f;
      }
      int best_gain = 0;
      std::size_t best_a = n, best_b = n;
      auto apply = [&](std::size_t i, int from, int to, int sign) {
        for (std::size_t l = 0; l < n_labels; ++l)
          if (samples[i].labels[l]) {
            fold_pos[from][l] -= sign;
            fold_pos[to][l] += sign;
          }
      };
      for (std::size_t a = 0; a < n && best_gain <= 0; ++a) {
        if (plan.fold_of[a] != f_max || !samples[a].labels[worst]) continue;
        for (std::size_t b = 0; b < n; ++b) {
          if (plan.fold_of[b] != f_min || samples[b].labels[worst]) continue;
          apply(a, f_max, f_min, 1);
          apply(b, f_min, f_max, 1);
          const int after = total_violation(fold_pos, n_labels, k);
          if (before - after > best_gain) {
            best_gain = before - after;
            best_a = a;
            best_b = b;
          }
          apply(a, f_min, f_max, 1);
          apply(b, f_max, f_min, 1);
          if (best_gain > 0) break;
        }
      }
      if (best_gain <= 0) break;
      apply(best_a, f_max, f_min, 1);
      apply(best_b, f_min, f_max, 1);
      std::swap(plan.fold_of[best_a], plan.fold_of[best_b]);
    }
  }
  return plan;
}

JointFolds synchronize(const Dataset& ds, const FoldPlan& singles_plan,
                       const FoldPlan& pairs_plan) {
  if (singles_plan.k != pairs_plan.k && singles_plan.k > 0 && pairs_plan.k > 0)
    throw DataError("fold count mismatch between sources");
  const int k = std::max(singles_plan.k, pairs_plan.k);
  if (k < 2) throw DataError("synchronize: need at least 2 folds");

  const std::vector<std::size_t> singles_idx = ds.indices_of(Source::Singles);
  const std::vector<std::size_t> pairs_idx = ds.indices_of(Source::Pairs);
  if (!singles_plan.fold_of.empty() && singles_plan.fold_of.size() != singles_idx.size())
    throw DataError("singles fold plan does not cover the singles samples");
  if (!pairs_plan.fold_of.empty() && pairs_plan.fold_of.size() != pairs_idx.size())
    throw DataError("pairs fold plan does not cover the pairs samples");

  JointFolds jf;
  jf.k = k;
  jf.rotations.resize(k);
  auto place = [&](const std::vector<std::size_t>& idx, const FoldPlan& plan) {
    for (std::size_t i = 0; i < plan.fold_of.size(); ++i) {
      const int f = plan.fold_of[i];
      for (int r = 0; r < k; ++r) {
        SplitIdx& split = jf.rotations[r];
        if (f == r)
          split.test.push_back(idx[i]);
        else if (f == (r + 1) % k)
          split.val.push_back(idx[i]);
        else
          split.train.push_back(idx[i]);
      }
    }
  };
  place(singles_idx, singles_plan);
  place(pairs_idx, pairs_plan);
  return jf;
}

void write_folds_csv(const std::string& path, const Dataset& ds, const FoldPlan& singles_plan,
                     const FoldPlan& pairs_plan) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write folds file: " + path);
  out << "id,fold\n";
  const std::vector<std::size_t> singles_idx = ds.indices_of(Source::Singles);
  const std::vector<std::size_t> pairs_idx = ds.indices_of(Source::Pairs);
  for (std::size_t i = 0; i < singles_plan.fold_of.size(); ++i)
    out << ds.samples[singles_idx[i]].id << ',' << singles_plan.fold_of[i] << '\n';
  for (std::size_t i = 0; i < pairs_plan.fold_of.size(); ++i)
    out << ds.samples[pairs_idx[i]].id << ',' << pairs_plan.fold_of[i] << '\n';
}

}  // namespace aromma
