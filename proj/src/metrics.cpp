//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "aromma/errors.hpp"

namespace aromma {

std::optional<double> auroc_binary(const std::vector<double>& scores,
                                   const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auroc: score/label length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups; ranks are 1-based.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) rank_sum_pos += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

MacroAuroc auroc_macro(const Tensor& preds, const std::vector<std::uint8_t>& labels,
                       std::size_t n_labels, const std::vector<std::size_t>& class_filter) {
  const std::size_t n = preds.rows();
  if (preds.cols() != n_labels || labels.size() != n * n_labels)
    throw ShapeError("auroc_macro: prediction/label shape mismatch");
  MacroAuroc out;
  double sum = 0.0;
  for (std::size_t c : class_filter) {
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = preds(i, c);
      y[i] = labels[i * n_labels + c];
    }
    PerClassAuroc pc;
    pc.class_index = c;
    pc.auroc = auroc_binary(s, y);
    if (pc.auroc) {
      sum += *pc.auroc;
      ++out.scored;
    } else {
      ++out.skipped;
    }
    out.per_class.push_back(pc);
  }
  if (out.scored == 0) throw DataError("auroc_macro: no scorable class in this slice");
  out.macro = sum / static_cast<double>(out.scored);
  return out;
}

EvalReport evaluate_predictions(const Tensor& preds, const Dataset& ds,
                                const std::vector<std::size_t>& indices) {
  const std::size_t L = ds.space.size();
  if (preds.rows() != indices.size() || preds.cols() != L)
    throw ShapeError("evaluate: prediction matrix shape mismatch");

  EvalReport report;
  report.label_names = ds.space.names;

  auto slice = [&](const std::vector<std::size_t>& rows, const std::vector<std::size_t>& classes,
                   std::vector<PerClassAuroc>* keep_detail) -> SliceReport {
    SliceReport sr;
    if (rows.empty() || classes.empty()) return sr;
    Tensor p({rows.size(), L});
    std::vector<std::uint8_t> y(rows.size() * L, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < L; ++c) {
        p(i, c) = preds(rows[i], c);
        y[i * L + c] = ds.samples[indices[rows[i]]].labels[c];
      }
    }
    MacroAuroc m = auroc_macro(p, y, L, classes);
    sr.macro = m.macro;
    sr.scored = m.scored;
    sr.skipped = m.skipped;
    if (keep_detail) *keep_detail = std::move(m.per_class);
    return sr;
  };

  std::vector<std::size_t> all_rows(indices.size());
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<std::size_t> single_rows, pair_rows;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (ds.samples[indices[i]].source == Source::Singles)
      single_rows.push_back(i);
    else
      pair_rows.push_back(i);
  }
  std::vector<std::size_t> all_classes(L);
  std::iota(all_classes.begin(), all_classes.end(), 0);

  report.combined = slice(all_rows, all_classes, &report.per_class_combined);
  report.singles = slice(single_rows, ds.space.indices_where(ds.space.singles_mask, true), nullptr);
  report.pairs = slice(pair_rows, ds.space.indices_where(ds.space.pairs_mask, true), nullptr);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  auto put = [&](const char* key, const SliceReport& s) {
    if (s.macro)
      j[key] = {{"auroc", *s.macro}, {"scored", s.scored}, {"skipped", s.skipped}};
    else
      j[key] = {{"auroc", nullptr}, {"scored", s.scored}, {"skipped", s.skipped}};
  };
  put("combined", combined);
  put("singles", singles);
  put("pairs", pairs);
  nlohmann::json pc = nlohmann::json::array();
  for (const PerClassAuroc& c : per_class_combined) {
    nlohmann::json e;
    e["label"] = label_names[c.class_index];
    if (c.auroc)
      e["auroc"] = *c.auroc;
    else
      e["auroc"] = nullptr;
    pc.push_back(e);
  }
  j["per_class_combined"] = pc;
  return j.dump(2);
}

std::string EvalReport::render_table(const std::string& row_name) const {
  std::ostringstream os;
  auto cell = [](const SliceReport& s) {
    if (!s.macro) return std::string("   n/a");
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%6.4f", *s.macro);
    return std::string(buf);
  };
  os << "model                combined    singles      pairs\n";
  os << row_name;
  for (std::size_t i = row_name.size(); i < 21; ++i) os << ' ';
  os << cell(combined) << "     " << cell(singles) << "     " << cell(pairs) << "\n";
  return os.str();
}

}  // namespace aromma
