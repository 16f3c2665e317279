//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aromma/errors.hpp"
#include "aromma/rng.hpp"

namespace aromma {

void adam_step(Tensor& theta, const Tensor& grad, AdamState& state, int t, double lr,
               double beta1, double beta2, double epsilon) {
  if (t < 1) throw Error("adam_step: step index starts at 1");
  if (!theta.same_shape(grad)) throw ShapeError("adam_step: gradient shape mismatch");
  if (state.m.numel() == 0) {
    state.m = Tensor::zeros(theta.shape());
    state.v = Tensor::zeros(theta.shape());
  }
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < theta.numel(); ++i) {
    const double g = grad[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    theta[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

EarlyStopper::EarlyStopper(int patience)
    : patience_(patience), best_(-std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw ConfigError("early stopping patience must be >= 1");
}

bool EarlyStopper::observe(double metric) {
  ++epoch_;
  if (metric > best_) {
    best_ = metric;
    best_epoch_ = epoch_;
    epochs_since_best_ = 0;
    return true;
  }
  ++epochs_since_best_;
  return false;
}

const std::vector<double>* TeacherTable::find(const Smiles& m) const {
  auto it = probs.find(m.text());
  return it == probs.end() ? nullptr : &it->second;
}

TeacherTable load_teacher_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open teacher file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty teacher file: " + path);
  const std::size_t tab = line.find('\t');
  if (tab == std::string::npos || line.substr(0, tab) != "labels")
    throw FormatError("teacher file header must be 'labels<TAB><comma-separated names>'", 1);
  TeacherTable table;
  std::istringstream names(line.substr(tab + 1));
  std::string name;
  while (std::getline(names, name, ','))
    table.label_names.push_back(normalize_label(name));
  if (table.label_names.empty()) throw FormatError("teacher file declares no labels", 1);

  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key, cell;
    if (!std::getline(ss, key, '\t')) throw FormatError("missing molecule column", row);
    std::vector<double> values;
    while (std::getline(ss, cell, '\t')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("non-numeric teacher probability '" + cell + "'", row);
      }
    }
    if (values.size() != table.label_names.size())
      throw FormatError("teacher row width does not match the declared label set", row);
    for (double v : values)
      if (v < 0.0 || v > 1.0) throw FormatError("teacher probability outside [0,1]", row);
    table.probs[key] = std::move(values);
  }
  return table;
}

void write_teacher_file(const std::string& path, const TeacherTable& table) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write teacher file: " + path);
  out << "labels\t";
  for (std::size_t i = 0; i < table.label_names.size(); ++i)
    out << (i ? "," : "") << table.label_names[i];
  out << '\n';
  out.precision(17);
  for (const auto& [key, values] : table.probs) {
    out << key;
    for (double v : values) out << '\t' << v;
    out << '\n';
  }
}

namespace {

// Maps the teacher's label set onto the unified axis; returns kd subset
// indices (ascending) and, per teacher row, the reordering that aligns the
// teacher vector with that subset order.
struct TeacherBinding {
  std::vector<std::size_t> subset;         // unified indices, ascending
  std::vector<std::size_t> teacher_order;  // teacher column for each subset slot
};

TeacherBinding bind_teacher(const TeacherTable& teacher, const LabelSpace& space) {
  TeacherBinding b;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (unified idx, teacher col)
  for (std::size_t c = 0; c < teacher.label_names.size(); ++c) {
    const auto idx = space.index_of(teacher.label_names[c]);
    if (!idx)
      throw DataError("teacher label '" + teacher.label_names[c] +
                      "' is not part of the unified label space");
    pairs.emplace_back(*idx, c);
  }
  std::sort(pairs.begin(), pairs.end());
  for (const auto& [u, c] : pairs) {
    b.subset.push_back(u);
    b.teacher_order.push_back(c);
  }
  return b;
}

}  // namespace

TrainResult train(const Dataset& ds, const SplitIdx& split, const TrainConfig& cfg,
                  Embedder embedder, const TeacherTable* teacher) {
  if (cfg.kd && !teacher) throw DataError("train: knowledge distillation needs a teacher table");
  if (split.train.empty()) throw DataError("train: empty training split");
  if (split.val.empty()) throw DataError("train: empty validation split");

  AggregatorConfig acfg;
  acfg.d_e = embedder.d_e();
  acfg.d_p = cfg.d_p;
  acfg.d_h = cfg.d_h;
  acfg.heads = cfg.heads;
  acfg.labels = static_cast<int>(ds.space.size());
  acfg.variant = cfg.aggregator;

  Rng init_rng(cfg.seed);
  AggregatorParams agg = AggregatorParams::init(acfg, init_rng);

  LossConfig loss_cfg;
  loss_cfg.alpha = cfg.alpha;
  loss_cfg.kd_enabled = cfg.kd;
  loss_cfg.temperature = cfg.temperature;
  loss_cfg.mld_softmax_variant = cfg.mld_softmax;
  loss_cfg.mask_unknown = cfg.mask_unknown;

  TeacherBinding tb;
  if (cfg.kd) {
    tb = bind_teacher(*teacher, ds.space);
    loss_cfg.kd_label_subset = tb.subset;
  }

  // Teacher vectors in subset order, fetched once per distinct molecule.
  std::map<std::string, std::vector<double>> teacher_cache;
  auto teacher_for = [&](const Sample& s) -> const std::vector<double>* {
    if (!cfg.kd) return nullptr;
    const std::string& key = s.molecules[0].text();
    auto it = teacher_cache.find(key);
    if (it != teacher_cache.end()) return &it->second;
    const std::vector<double>* raw = teacher->find(s.molecules[0]);
    if (!raw) return nullptr;
    std::vector<double> ordered(tb.subset.size());
    for (std::size_t i = 0; i < tb.subset.size(); ++i) ordered[i] = (*raw)[tb.teacher_order[i]];
    return &teacher_cache.emplace(key, std::move(ordered)).first->second;
  };

  std::map<std::string, AdamState> adam;
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  EarlyStopper stopper(cfg.patience);

  TrainResult result{Model(embedder.clone(), agg, ds.space), {}, 0, 0.0, 0};
  std::vector<std::size_t> order = split.train;
  int step = 0;

  const Tensor zero_row({1, static_cast<std::size_t>(acfg.d_e)});
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double ep_total = 0.0, ep_sbce = 0.0, ep_smld = 0.0, ep_pbce = 0.0;
    std::size_t n_batches = 0, n_sbatches = 0, n_pbatches = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      const BoundAggregator bound = bind_aggregator(tape, agg, /*trainable=*/true);
      Value lora_a{}, lora_b{};
      if (embedder.adapted()) {
        lora_a = tape.leaf(embedder.lora_a(), "lora_a");
        lora_b = tape.leaf(embedder.lora_b(), "lora_b");
      }
      std::map<std::string, Value> embed_cache;
      auto embed_value = [&](const Smiles& m) -> Value {
        auto it = embed_cache.find(m.text());
        if (it != embed_cache.end()) return it->second;
        const Value v = embedder.adapted() ? embedder.embed_on(tape, m, lora_a, lora_b)
                                           : tape.constant(embedder.embed(m));
        return embed_cache.emplace(m.text(), v).first->second;
      };

      std::vector<SampleLossInput> batch;
      batch.reserve(end - start);
      for (std::size_t bi = start; bi < end; ++bi) {
        const Sample& s = ds.samples[order[bi]];
        Value e_stack;
        std::array<std::uint8_t, 2> valid{1, 1};
        if (s.molecules.size() == 1) {
          e_stack = tape.concat_rows({embed_value(s.molecules[0]), tape.constant(zero_row)});
          valid = {1, 0};
        } else {
          e_stack =
              tape.concat_rows({embed_value(s.molecules[0]), embed_value(s.molecules[1])});
        }
        const AggregatorOut out = aggregator_forward(tape, bound, acfg, e_stack, valid);
        SampleLossInput item;
        item.probs = out.probs;
        item.sample = &s;
        if (cfg.kd && s.source == Source::Singles) {
          item.teacher = teacher_for(s);
          if (!item.teacher)
            throw DataError("train: no teacher probabilities for molecule '" +
                            s.molecules[0].text() + "'");
        }
        batch.push_back(item);
      }

      const TotalLoss tl = total_loss(tape, batch, loss_cfg);
      tape.backward(tl.total);
      ++step;
      {
        auto refs = named_tensors(agg);
        for (std::size_t pi = 0; pi < bound.all.size(); ++pi) {
          const auto& [name, value] = bound.all[pi];
          adam_step(*refs[pi].second, tape.grad(value), adam[name], step, cfg.lr, cfg.beta1,
                    cfg.beta2, cfg.epsilon);
        }
      }
      if (embedder.adapted()) {
        adam_step(embedder.lora_a(), tape.grad(lora_a), adam["lora_a"], step, cfg.lr, cfg.beta1,
                  cfg.beta2, cfg.epsilon);
        adam_step(embedder.lora_b(), tape.grad(lora_b), adam["lora_b"], step, cfg.lr, cfg.beta1,
                  cfg.beta2, cfg.epsilon);
      }

      ep_total += tape.val(tl.total)[0];
      ++n_batches;
      if (tl.n_singles > 0) {
        ep_sbce += tl.single_bce;
        ep_smld += tl.single_mld;
        ++n_sbatches;
      }
      if (tl.n_pairs > 0) {
        ep_pbce += tl.pair_bce;
        ++n_pbatches;
      }
    }

    // Validation metric: combined macro-AUROC.
    Model current(embedder.clone(), agg, ds.space);
    const Tensor val_preds = current.predict_matrix(ds, split.val);
    const EvalReport val_report = evaluate_predictions(val_preds, ds, split.val);
    const double val_metric = val_report.combined.macro.value_or(0.0);

    EpochLog el;
    el.epoch = epoch;
    el.loss_total = n_batches ? ep_total / static_cast<double>(n_batches) : 0.0;
    el.loss_single_bce = n_sbatches ? ep_sbce / static_cast<double>(n_sbatches) : 0.0;
    el.loss_single_mld = n_sbatches ? ep_smld / static_cast<double>(n_sbatches) : 0.0;
    el.loss_pair_bce = n_pbatches ? ep_pbce / static_cast<double>(n_pbatches) : 0.0;
    el.val_auroc_combined = val_metric;
    result.log.push_back(el);
    if (cfg.verbose)
      std::cerr << "epoch " << epoch << " loss " << el.loss_total << " val " << val_metric
                << "\n";

    if (stopper.observe(val_metric)) result.model = std::move(current);
    result.epochs_run = epoch;
    if (stopper.should_stop()) break;
  }
  result.best_epoch = stopper.best_epoch();
  result.best_val = stopper.best();
  return result;
}

void write_train_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write training log: " + path);
  for (const EpochLog& e : log) {
    nlohmann::json j;
    j["epoch"] = e.epoch;
    j["loss_total"] = e.loss_total;
    j["loss_single_bce"] = e.loss_single_bce;
    j["loss_single_mld"] = e.loss_single_mld;
    j["loss_pair_bce"] = e.loss_pair_bce;
    j["val_auroc_combined"] = e.val_auroc_combined;
    out << j.dump() << '\n';
  }
}

TrainConfig make_train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.lr = cfg.lr;
  tc.batch_size = cfg.batch_size;
  tc.patience = cfg.patience;
  tc.max_epochs = cfg.max_epochs;
  tc.seed = cfg.seed;
  tc.alpha = cfg.alpha;
  tc.kd = cfg.kd;
  tc.temperature = cfg.temperature;
  tc.mld_softmax = cfg.mld_softmax;
  tc.mask_unknown = cfg.mask_unknown;
  tc.d_p = cfg.d_p;
  tc.d_h = cfg.d_h;
  tc.heads = cfg.heads;
  tc.aggregator = cfg.aggregator == "pna" ? AggregatorVariant::PnaBaseline
                                          : AggregatorVariant::CrossAttention;
  tc.verbose = !cfg.quiet;
  return tc;
}

EmbedderConfig make_embedder_config(const RunConfig& cfg) {
  EmbedderConfig ec;
  ec.variant = cfg.embedder == "file" ? EmbedderVariant::FileBacked : EmbedderVariant::Toy;
  ec.mode = cfg.embedder_mode == "adapted" ? EmbedderMode::Adapted : EmbedderMode::Frozen;
  ec.d_e = cfg.d_e;
  ec.strict = cfg.strict_embeddings;
  ec.lora.rank = cfg.lora_rank;
  ec.lora.alpha = cfg.lora_alpha;
  ec.trigram_buckets = cfg.trigram_buckets;
  ec.seed = cfg.seed;
  return ec;
}

Embedder make_embedder(const RunConfig& cfg, const Dataset& ds,
                       const std::vector<std::size_t>& train_idx) {
  const EmbedderConfig ec = make_embedder_config(cfg);
  if (ec.variant == EmbedderVariant::FileBacked) {
    if (cfg.embeddings_tsv.empty())
      throw ConfigError("file-backed embedder needs an embeddings file path");
    return Embedder::file_backed(ec, load_embedding_file(cfg.embeddings_tsv));
  }
  std::vector<Smiles> corpus;
  std::set<std::string> seen;
  for (std::size_t i : train_idx)
    for (const Smiles& m : ds.samples[i].molecules)
      if (seen.insert(m.text()).second) corpus.push_back(m);
  return Embedder::toy(ec, corpus);
}

LoadedData load_run_data(const RunConfig& cfg) {
  if (cfg.singles_csv.empty() && cfg.pairs_csv.empty())
    throw ConfigError("no input data: set singles and/or pairs csv paths");
  RawTable singles, pairs;
  singles.schema = Source::Singles;
  pairs.schema = Source::Pairs;
  if (!cfg.singles_csv.empty()) singles = load_csv(cfg.singles_csv, Source::Singles);
  if (!cfg.pairs_csv.empty()) pairs = load_csv(cfg.pairs_csv, Source::Pairs);

  LoadedData data;
  data.dataset = build_dataset(singles, pairs);
  data.rejects = singles.rejects;
  data.rejects.insert(data.rejects.end(), pairs.rejects.begin(), pairs.rejects.end());

  std::vector<Sample> singles_samples, pairs_samples;
  for (const Sample& s : data.dataset.samples)
    (s.source == Source::Singles ? singles_samples : pairs_samples).push_back(s);
  if (!singles_samples.empty())
    data.singles_plan = stratified_kfold(singles_samples, cfg.k_folds, cfg.seed);
  if (!pairs_samples.empty())
    data.pairs_plan = stratified_kfold(pairs_samples, cfg.k_folds, cfg.seed + 1);
  data.folds = synchronize(data.dataset, data.singles_plan, data.pairs_plan);
  if (cfg.fold < 0 || cfg.fold >= data.folds.k)
    throw ConfigError("fold rotation index out of range");
  return data;
}

namespace {

std::vector<std::size_t> filter_source(const Dataset& ds, const std::vector<std::size_t>& idx,
                                       Source source) {
  std::vector<std::size_t> out;
  for (std::size_t i : idx)
    if (ds.samples[i].source == source) out.push_back(i);
  return out;
}

double pair_density(const Dataset& ds, const std::vector<std::size_t>& pair_idx) {
  if (pair_idx.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i : pair_idx) sum += static_cast<double>(ds.samples[i].positive_count());
  return sum / static_cast<double>(pair_idx.size());
}

}  // namespace

PipelineArtifacts run_pipeline(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const auto out_path = [&](const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
  };

  LoadedData data = load_run_data(cfg);
  const Dataset& ds = data.dataset;
  const SplitIdx& split = data.folds.rotations[static_cast<std::size_t>(cfg.fold)];
  if (!data.rejects.empty()) write_rejects_csv(out_path("rejects.csv"), data.rejects);

  TeacherTable teacher;
  if (cfg.kd) {
    if (cfg.teacher_tsv.empty())
      throw ConfigError("knowledge distillation needs a teacher file (or disable kd)");
    teacher = load_teacher_file(cfg.teacher_tsv);
  }
  const TeacherTable* teacher_ptr = cfg.kd ? &teacher : nullptr;
  const TrainConfig tc = make_train_config(cfg);

  PipelineArtifacts art;

  // Phase 1: initial training on the unified dataset.
  TrainResult initial = train(ds, split, tc, make_embedder(cfg, ds, split.train), teacher_ptr);
  art.checkpoint_initial = out_path("checkpoint_initial.json");
  initial.model.save_checkpoint(art.checkpoint_initial);
  write_train_log(out_path("train_log_initial.jsonl"), initial.log);

  // Pseudo-labeling over the train-split pairs; rates come from the labeled
  // singles, cutoffs from predictions over the set being pseudo-labeled (or
  // over the singles when configured).
  const std::vector<std::size_t> train_singles = filter_source(ds, split.train, Source::Singles);
  const std::vector<std::size_t> train_pairs = filter_source(ds, split.train, Source::Pairs);
  if (train_singles.empty() || train_pairs.empty())
    throw DataError("pipeline: pseudo-labeling needs both singles and pairs in the train split");

  const ClassRates rates = class_rates(ds, train_singles);
  for (double g : rates.gamma) art.gamma_sum += g;
  const Tensor pair_preds = initial.model.predict_matrix(ds, train_pairs);
  Thresholds tau;
  if (cfg.tau_source == "singles") {
    const Tensor single_preds = initial.model.predict_matrix(ds, train_singles);
    tau = fit_thresholds(single_preds, rates);
  } else {
    tau = fit_thresholds(pair_preds, rates);
  }

  const Dataset ds_p78 = augment(ds, train_pairs, pair_preds, tau, AugmentMode::P78);
  const Dataset ds_p152 = augment(ds, train_pairs, pair_preds, tau, AugmentMode::P152);
  art.pseudo78_csv = out_path("pseudo78.csv");
  art.pseudo152_csv = out_path("pseudo152.csv");
  write_dataset_csv(art.pseudo78_csv, ds_p78, train_pairs);
  write_dataset_csv(art.pseudo152_csv, ds_p152, train_pairs);
  art.density_pairs_before = pair_density(ds, train_pairs);
  art.density_pairs_p78 = pair_density(ds_p78, train_pairs);
  art.density_pairs_p152 = pair_density(ds_p152, train_pairs);

  // Re-train from fresh initialization on each augmented dataset.
  TrainResult p78 = train(ds_p78, split, tc, make_embedder(cfg, ds_p78, split.train), teacher_ptr);
  art.checkpoint_p78 = out_path("checkpoint_p78.json");
  p78.model.save_checkpoint(art.checkpoint_p78);
  write_train_log(out_path("train_log_p78.jsonl"), p78.log);

  TrainResult p152 =
      train(ds_p152, split, tc, make_embedder(cfg, ds_p152, split.train), teacher_ptr);
  art.checkpoint_p152 = out_path("checkpoint_p152.json");
  p152.model.save_checkpoint(art.checkpoint_p152);
  write_train_log(out_path("train_log_p152.jsonl"), p152.log);

  // Evaluation always happens on the untouched test split of the original
  // dataset; augmented labels never reach it.
  auto eval_and_write = [&](Model& model, const std::string& name) {
    const Tensor preds = model.predict_matrix(ds, split.test);
    EvalReport report = evaluate_predictions(preds, ds, split.test);
    std::ofstream out(out_path("eval_" + name + ".json"));
    out << report.to_json();
    return report;
  };
  art.eval_initial = eval_and_write(initial.model, "initial");
  art.eval_p78 = eval_and_write(p78.model, "p78");
  art.eval_p152 = eval_and_write(p152.model, "p152");

  nlohmann::json summary;
  summary["gamma_sum"] = art.gamma_sum;
  summary["pair_density_before"] = art.density_pairs_before;
  summary["pair_density_p78"] = art.density_pairs_p78;
  summary["pair_density_p152"] = art.density_pairs_p152;
  auto slice_json = [](const EvalReport& r) {
    nlohmann::json j;
    j["combined"] = r.combined.macro ? nlohmann::json(*r.combined.macro) : nlohmann::json();
    j["singles"] = r.singles.macro ? nlohmann::json(*r.singles.macro) : nlohmann::json();
    j["pairs"] = r.pairs.macro ? nlohmann::json(*r.pairs.macro) : nlohmann::json();
    return j;
  };
  summary["eval_initial"] = slice_json(art.eval_initial);
  summary["eval_p78"] = slice_json(art.eval_p78);
  summary["eval_p152"] = slice_json(art.eval_p152);
  std::ofstream summary_out(out_path("pipeline_summary.json"));
  summary_out << summary.dump(2);

  return art;
}

}  // namespace aromma
