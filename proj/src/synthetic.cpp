//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "aromma/embedder.hpp"
#include "aromma/errors.hpp"
#include "aromma/rng.hpp"

namespace aromma {

namespace {

std::string random_molecule(Rng& rng) {
  static const std::vector<std::string> kAtoms = {"C", "C", "C", "C", "N", "O", "O",
                                                  "S", "F", "Cl", "Br", "P", "N", "C"};
  const double shape = rng.uniform();
  std::string prefix;
  const int n = 3 + static_cast<int>(rng.below(9));
  std::vector<std::string> chain;
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      const double b = rng.uniform();
      if (b < 0.10)
        chain.push_back("=");
      else if (b < 0.13)
        chain.push_back("#");
    }
    chain.push_back(kAtoms[rng.below(kAtoms.size())]);
  }
  if (rng.uniform() < 0.5 && n >= 3) {
    // branch after a random interior atom
    std::size_t pos = 1 + rng.below(chain.size() - 1);
    while (pos < chain.size() && (chain[pos] == "=" || chain[pos] == "#")) ++pos;
    std::string branch = "(";
    const int bn = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < bn; ++i) branch += kAtoms[rng.below(kAtoms.size())];
    branch += ")";
    chain.insert(chain.begin() + static_cast<long>(std::min(pos, chain.size())), branch);
  }
  std::string body;
  for (const std::string& t : chain) body += t;

  if (shape < 0.30) return body;  // open chain
  if (shape < 0.60) {
    // simple ring over the whole chain
    std::string out;
    bool placed = false;
    for (const std::string& t : chain) {
      out += t;
      if (!placed && t != "=" && t != "#" && t[0] != '(') {
        out += "1";
        placed = true;
      }
    }
    return placed ? out + "1" : out;
  }
  // aromatic core with an aliphatic substituent
  std::string sub;
  const int sn = static_cast<int>(rng.below(4));
  for (int i = 0; i < sn; ++i) sub += kAtoms[rng.below(kAtoms.size())];
  const double core = rng.uniform();
  if (core < 0.5) return sub + "c1ccccc1";
  if (core < 0.75) return sub + "c1ccncc1";
  return sub + "c1ccco1" + (rng.uniform() < 0.5 ? "" : "C");
}

struct PlantedRule {
  std::vector<std::pair<std::size_t, double>> weights;  // vocab coordinates only
  double theta = 0.0;
};

double rule_score(const PlantedRule& r, const std::vector<double>& feature_row) {
  double s = 0.0;
  for (const auto& [i, w] : r.weights) s += w * feature_row[i];
  return s;
}

PlantedRule make_rule(Rng& rng, std::size_t vocab_size,
                      const std::vector<std::vector<double>>& features, double target_rate) {
  PlantedRule rule;
  const int n_coords = 3 + static_cast<int>(rng.below(4));
  std::set<std::size_t> used;
  for (int i = 0; i < n_coords; ++i) {
    std::size_t c = rng.below(vocab_size);
    while (used.count(c)) c = rng.below(vocab_size);
    used.insert(c);
    rule.weights.emplace_back(c, rng.normal());
  }
  std::vector<double> scores(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) scores[i] = rule_score(rule, features[i]);
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t cut = static_cast<std::size_t>(
      std::round((1.0 - target_rate) * static_cast<double>(sorted.size())));
  rule.theta = sorted[std::min(cut, sorted.size() - 1)];
  return rule;
}

double rule_std(const PlantedRule& r, const std::vector<std::vector<double>>& features) {
  double mu = 0.0;
  for (const auto& f : features) mu += rule_score(r, f);
  mu /= static_cast<double>(features.size());
  double var = 0.0;
  for (const auto& f : features) {
    const double d = rule_score(r, f) - mu;
    var += d * d;
  }
  return std::sqrt(var / static_cast<double>(features.size())) + 1e-9;
}

std::string label_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "note%02d", i);
  return buf;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_pair_missing > cfg.n_additive)
    throw ConfigError("synthetic: cannot hide more labels than the additive set");
  Rng rng(cfg.seed);
  SyntheticData data;

  // Unique grammar-valid molecules.
  std::set<std::string> seen;
  while (static_cast<int>(data.molecules.size()) < cfg.n_molecules) {
    const std::string m = strip_stereo(random_molecule(rng)).text();
    if (m.size() >= 2 && seen.insert(m).second) data.molecules.push_back(m);
  }

  std::vector<Smiles> parsed;
  parsed.reserve(data.molecules.size());
  for (const std::string& m : data.molecules) parsed.push_back(strip_stereo(m));
  const ToyFeaturizer featurizer = ToyFeaturizer::build(parsed, 64);
  const std::size_t vocab = featurizer.vocab().size();
  std::vector<std::vector<double>> features(parsed.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    features[i].assign(featurizer.dim(), 0.0);
    for (const auto& [c, v] : featurizer.features(parsed[i]).entries) features[i][c] = v;
  }

  const int L = cfg.n_labels();
  for (int l = 0; l < L; ++l) data.label_names.push_back(label_name(l));

  // Label layout: [0, n_additive) additive, then agonism, then antagonism.
  // Additive labels are molecule-level rules, OR-composed on pairs. The
  // interaction labels use set-level semantics so single-molecule supervision
  // and pair behavior agree: an agonism label is present when the sample's
  // molecule set exhibits both trigger properties (for a pair the triggers
  // may come from different components, which is where the interaction
  // lives); an antagonism label needs its base property present and no
  // suppressor anywhere in the set.
  std::vector<PlantedRule> rules(cfg.n_additive);
  std::vector<double> sharp(cfg.n_additive);
  for (int l = 0; l < cfg.n_additive; ++l) {
    rules[l] = make_rule(rng, vocab, features,
                         rng.uniform(cfg.additive_rate_lo, cfg.additive_rate_hi));
    sharp[l] = rule_std(rules[l], features);
  }
  std::vector<PlantedRule> trigger_a(cfg.n_agonism), trigger_b(cfg.n_agonism);
  for (int i = 0; i < cfg.n_agonism; ++i) {
    trigger_a[i] = make_rule(rng, vocab, features, cfg.trigger_rate);
    trigger_b[i] = make_rule(rng, vocab, features, cfg.trigger_rate);
  }
  std::vector<PlantedRule> ant_base(cfg.n_antagonism), suppressor(cfg.n_antagonism);
  for (int i = 0; i < cfg.n_antagonism; ++i) {
    ant_base[i] = make_rule(rng, vocab, features, cfg.antagonism_single_rate);
    suppressor[i] = make_rule(rng, vocab, features, cfg.suppressor_rate);
  }

  auto holds = [&](const PlantedRule& r, std::size_t mol) {
    return rule_score(r, features[mol]) > r.theta;
  };
  auto smooth = [&](const PlantedRule& r, double sigma, std::size_t mol) {
    const double margin = rule_score(r, features[mol]) - r.theta;
    return 1.0 / (1.0 + std::exp(-4.0 * margin / sigma));
  };

  data.single_labels.assign(parsed.size(), std::vector<std::uint8_t>(L, 0));
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    for (int l = 0; l < cfg.n_additive; ++l)
      data.single_labels[i][static_cast<std::size_t>(l)] = holds(rules[l], i) ? 1 : 0;
    for (int a = 0; a < cfg.n_agonism; ++a)
      data.single_labels[i][static_cast<std::size_t>(cfg.n_additive + a)] =
          (holds(trigger_a[a], i) && holds(trigger_b[a], i)) ? 1 : 0;
    for (int a = 0; a < cfg.n_antagonism; ++a)
      data.single_labels[i][static_cast<std::size_t>(cfg.n_additive + cfg.n_agonism + a)] =
          (holds(ant_base[a], i) && !holds(suppressor[a], i)) ? 1 : 0;
  }

  // Oracle teacher: smooth sigmoids of the rule margins, combined the same
  // way the hard labels are.
  data.teacher.label_names = data.label_names;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    std::vector<double> p(L);
    for (int l = 0; l < cfg.n_additive; ++l)
      p[static_cast<std::size_t>(l)] = smooth(rules[l], sharp[l], i);
    for (int a = 0; a < cfg.n_agonism; ++a)
      p[static_cast<std::size_t>(cfg.n_additive + a)] =
          smooth(trigger_a[a], rule_std(trigger_a[a], features), i) *
          smooth(trigger_b[a], rule_std(trigger_b[a], features), i);
    for (int a = 0; a < cfg.n_antagonism; ++a)
      p[static_cast<std::size_t>(cfg.n_additive + cfg.n_agonism + a)] =
          smooth(ant_base[a], rule_std(ant_base[a], features), i) *
          (1.0 - smooth(suppressor[a], rule_std(suppressor[a], features), i));
    data.teacher.probs[data.molecules[i]] = std::move(p);
  }

  // Random unique pairs.
  std::set<std::pair<int, int>> pair_seen;
  while (static_cast<int>(data.pair_members.size()) < cfg.n_pairs) {
    int a = static_cast<int>(rng.below(parsed.size()));
    int b = static_cast<int>(rng.below(parsed.size()));
    if (a == b) continue;
    const auto key = std::minmax(a, b);
    if (!pair_seen.insert(key).second) continue;
    data.pair_members.emplace_back(a, b);
  }

  data.pair_truth.assign(data.pair_members.size(), std::vector<std::uint8_t>(L, 0));
  for (std::size_t p = 0; p < data.pair_members.size(); ++p) {
    const auto [a, b] = data.pair_members[p];
    const auto sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
    for (int l = 0; l < cfg.n_additive; ++l)
      data.pair_truth[p][static_cast<std::size_t>(l)] =
          (data.single_labels[sa][static_cast<std::size_t>(l)] ||
           data.single_labels[sb][static_cast<std::size_t>(l)])
              ? 1
              : 0;
    for (int i = 0; i < cfg.n_agonism; ++i) {
      const std::size_t l = static_cast<std::size_t>(cfg.n_additive + i);
      const bool t1 = holds(trigger_a[i], sa) || holds(trigger_a[i], sb);
      const bool t2 = holds(trigger_b[i], sa) || holds(trigger_b[i], sb);
      data.pair_truth[p][l] = (t1 && t2) ? 1 : 0;
    }
    for (int i = 0; i < cfg.n_antagonism; ++i) {
      const std::size_t l = static_cast<std::size_t>(cfg.n_additive + cfg.n_agonism + i);
      const bool base = holds(ant_base[i], sa) || holds(ant_base[i], sb);
      const bool blocked = holds(suppressor[i], sa) || holds(suppressor[i], sb);
      data.pair_truth[p][l] = (base && !blocked) ? 1 : 0;
    }
  }

  // Pairs annotate everything except the last n_pair_missing additive labels.
  for (int l = 0; l < L; ++l) {
    const bool missing = l >= cfg.n_additive - cfg.n_pair_missing && l < cfg.n_additive;
    if (!missing) data.pair_annotated_names.push_back(data.label_names[l]);
  }
  for (int l = cfg.n_additive; l < L; ++l) data.interaction_names.push_back(data.label_names[l]);

  // Balanced predefined folds, then positive dropout outside the truth fold.
  std::vector<std::size_t> order(data.pair_members.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  data.pair_fold.assign(data.pair_members.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i)
    data.pair_fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(cfg.k_folds));

  data.pair_observed = data.pair_truth;
  if (cfg.drop_prob > 0.0) {
    for (std::size_t p = 0; p < data.pair_observed.size(); ++p) {
      if (data.pair_fold[p] == cfg.truth_fold) continue;
      for (int l = 0; l < L; ++l)
        if (data.pair_observed[p][l] && rng.uniform() < cfg.drop_prob)
          data.pair_observed[p][l] = 0;
    }
  }
  return data;
}

SyntheticPaths write_synthetic(const SyntheticData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  SyntheticPaths paths;
  paths.singles_csv = (fs::path(dir) / "singles.csv").string();
  paths.pairs_csv = (fs::path(dir) / "pairs.csv").string();
  paths.teacher_tsv = (fs::path(dir) / "teacher.tsv").string();
  paths.meta_json = (fs::path(dir) / "meta.json").string();

  {
    std::ofstream out(paths.singles_csv);
    out << "smiles";
    for (const std::string& n : data.label_names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < data.molecules.size(); ++i) {
      out << data.molecules[i];
      for (std::uint8_t v : data.single_labels[i]) out << ',' << static_cast<int>(v);
      out << '\n';
    }
  }
  {
    // Column index per annotated name in the full axis.
    std::vector<std::size_t> cols;
    for (const std::string& n : data.pair_annotated_names) {
      const auto it = std::find(data.label_names.begin(), data.label_names.end(), n);
      cols.push_back(static_cast<std::size_t>(it - data.label_names.begin()));
    }
    std::ofstream out(paths.pairs_csv);
    out << "smiles_a,smiles_b,fold";
    for (const std::string& n : data.pair_annotated_names) out << ',' << n;
    out << '\n';
    for (std::size_t p = 0; p < data.pair_members.size(); ++p) {
      out << data.molecules[static_cast<std::size_t>(data.pair_members[p].first)] << ','
          << data.molecules[static_cast<std::size_t>(data.pair_members[p].second)] << ','
          << data.pair_fold[p];
      for (std::size_t c : cols) out << ',' << static_cast<int>(data.pair_observed[p][c]);
      out << '\n';
    }
  }
  write_teacher_file(paths.teacher_tsv, data.teacher);
  {
    nlohmann::json j;
    j["n_molecules"] = data.molecules.size();
    j["n_pairs"] = data.pair_members.size();
    j["labels"] = data.label_names;
    j["pair_annotated"] = data.pair_annotated_names;
    j["interaction_labels"] = data.interaction_names;
    std::ofstream out(paths.meta_json);
    out << j.dump(2);
  }
  return paths;
}

}  // namespace aromma
