//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aromma/dataset.hpp"
#include "aromma/losses.hpp"
#include "aromma/metrics.hpp"
#include "aromma/model.hpp"
#include "aromma/pseudo.hpp"

namespace aromma {

struct AdamState {
  Tensor m, v;
};

// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), bias-corrected.
void adam_step(Tensor& theta, const Tensor& grad, AdamState& state, int t, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

// Tracks the best validation metric; stop once `patience` epochs pass with no
// strict improvement.
class EarlyStopper {
public:
  explicit EarlyStopper(int patience);

  bool observe(double metric);  // true if this epoch improved on the best
  bool should_stop() const { return epochs_since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int epochs_since_best_ = 0;
  double best_;
};

// Teacher probabilities for single molecules over a declared label subset.
struct TeacherTable {
  std::vector<std::string> label_names;  // normalized
  std::map<std::string, std::vector<double>> probs;

  const std::vector<double>* find(const Smiles& m) const;
};

// TSV: header "labels<TAB><comma-separated names>", then
// "<smiles><TAB><p1>...<TAB><pK>" with probabilities in [0,1].
TeacherTable load_teacher_file(const std::string& path);
void write_teacher_file(const std::string& path, const TeacherTable& table);

struct TrainConfig {
  double lr = 4e-5;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  int batch_size = 64;
  int patience = 20;
  int max_epochs = 300;
  std::uint64_t seed = 1;
  double alpha = 0.5;
  bool kd = true;
  double temperature = 1.0;
  bool mld_softmax = false;
  bool mask_unknown = false;
  int d_p = 196;
  int d_h = 384;
  int heads = 4;
  AggregatorVariant aggregator = AggregatorVariant::CrossAttention;
  bool verbose = false;
};

struct EpochLog {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_single_bce = 0.0;
  double loss_single_mld = 0.0;
  double loss_pair_bce = 0.0;
  double val_auroc_combined = 0.0;
};

struct TrainResult {
  Model model;  // the checkpoint with the best validation metric
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val = 0.0;
  int epochs_run = 0;
};

// Seeded-shuffled mixed batches over the train split, Adam updates, per-epoch
// combined macro-AUROC on the validation split, early stopping on that
// metric. The embedder is moved in; its adapter trains jointly when adapted.
// Teacher must be present iff cfg.kd.
TrainResult train(const Dataset& ds, const SplitIdx& split, const TrainConfig& cfg,
                  Embedder embedder, const TeacherTable* teacher);

void write_train_log(const std::string& path, const std::vector<EpochLog>& log);

// One-file run configuration shared by the CLI and the pipeline.
struct RunConfig {
  std::string singles_csv, pairs_csv, teacher_tsv, embeddings_tsv;
  std::string out_dir = "out";
  std::string embedder = "toy";           // toy | file
  std::string embedder_mode = "adapted";  // frozen | adapted
  std::string aggregator = "ca";          // ca | pna
  std::string tau_source = "pairs";       // fit cutoffs on: pairs | singles predictions
  int d_e = 768, d_p = 196, d_h = 384, heads = 4;
  int trigram_buckets = 512;
  int lora_rank = 4;
  double lora_alpha = 8.0;
  bool strict_embeddings = true;
  double lr = 4e-5;
  int batch_size = 64;
  int patience = 20;
  int max_epochs = 300;
  std::uint64_t seed = 1;
  double alpha = 0.5;
  bool kd = true;
  double temperature = 1.0;
  bool mld_softmax = false;
  bool mask_unknown = false;
  int k_folds = 5;
  int fold = 0;
  bool quiet = false;
};

TrainConfig make_train_config(const RunConfig& cfg);
EmbedderConfig make_embedder_config(const RunConfig& cfg);
Embedder make_embedder(const RunConfig& cfg, const Dataset& ds,
                       const std::vector<std::size_t>& train_idx);

struct LoadedData {
  Dataset dataset;
  FoldPlan singles_plan, pairs_plan;
  JointFolds folds;
  std::vector<Reject> rejects;
};

LoadedData load_run_data(const RunConfig& cfg);

struct PipelineArtifacts {
  std::string checkpoint_initial, checkpoint_p78, checkpoint_p152;
  std::string pseudo78_csv, pseudo152_csv;
  EvalReport eval_initial, eval_p78, eval_p152;
  double density_pairs_before = 0.0;
  double density_pairs_p78 = 0.0;
  double density_pairs_p152 = 0.0;
  double gamma_sum = 0.0;
};

// Initial training -> pseudo-labeling of the train-split pairs -> fresh
// re-training on each augmented dataset -> evaluation of all three
// checkpoints on the untouched test split.
PipelineArtifacts run_pipeline(const RunConfig& cfg);

}  // namespace aromma
