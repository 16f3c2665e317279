//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: data preparation, training, the full two-phase
// pipeline, pseudo-labeling, evaluation, embedding export, 2-D projection of
// the global embeddings, the built-in selfcheck battery, and the synthetic
// fixture generator.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aromma/errors.hpp"
#include "aromma/model.hpp"
#include "aromma/pca.hpp"
#include "aromma/pseudo.hpp"
#include "aromma/selfcheck.hpp"
#include "aromma/synthetic.hpp"
#include "aromma/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace aromma;

void add_run_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->set_config("--config", "", "key=value config file; flags override it");
  cmd->add_option("--singles", cfg.singles_csv, "singles csv path");
  cmd->add_option("--pairs", cfg.pairs_csv, "pairs csv path");
  cmd->add_option("--teacher", cfg.teacher_tsv, "teacher probability tsv");
  cmd->add_option("--embeddings", cfg.embeddings_tsv, "precomputed embedding tsv");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--embedder", cfg.embedder, "toy | file")
      ->check(CLI::IsMember({"toy", "file"}));
  cmd->add_option("--embedder-mode", cfg.embedder_mode, "frozen | adapted")
      ->check(CLI::IsMember({"frozen", "adapted"}));
  cmd->add_option("--aggregator", cfg.aggregator, "ca | pna")
      ->check(CLI::IsMember({"ca", "pna"}));
  cmd->add_option("--tau-source", cfg.tau_source, "fit cutoffs on: pairs | singles")
      ->check(CLI::IsMember({"pairs", "singles"}));
  cmd->add_option("--d-e", cfg.d_e, "embedding width");
  cmd->add_option("--d-p", cfg.d_p, "self-attention width");
  cmd->add_option("--d-h", cfg.d_h, "pooled embedding width");
  cmd->add_option("--heads", cfg.heads, "attention heads");
  cmd->add_option("--trigram-buckets", cfg.trigram_buckets, "hashed trigram buckets");
  cmd->add_option("--lora-rank", cfg.lora_rank, "adapter rank");
  cmd->add_option("--lora-alpha", cfg.lora_alpha, "adapter scale");
  cmd->add_flag("--lenient-embeddings{false}", cfg.strict_embeddings,
                "zero vector instead of an error for unknown molecules");
  cmd->add_option("--lr", cfg.lr, "adam learning rate");
  cmd->add_option("--batch-size", cfg.batch_size, "batch size");
  cmd->add_option("--patience", cfg.patience, "early stopping patience");
  cmd->add_option("--max-epochs", cfg.max_epochs, "epoch cap");
  cmd->add_option("--seed", cfg.seed, "rng seed");
  cmd->add_option("--alpha", cfg.alpha, "singles/pairs loss balance");
  cmd->add_flag("--no-kd{false}", cfg.kd, "disable knowledge distillation");
  cmd->add_option("--temperature", cfg.temperature, "distillation temperature");
  cmd->add_flag("--mld-softmax", cfg.mld_softmax, "label-normalized distillation variant");
  cmd->add_flag("--mask-unknown", cfg.mask_unknown, "mask loss to annotated labels");
  cmd->add_option("--k-folds", cfg.k_folds, "fold count");
  cmd->add_option("--fold", cfg.fold, "fold rotation to train/evaluate");
  cmd->add_flag("--quiet", cfg.quiet, "suppress progress output");
}

void echo_config(const CLI::App* cmd, const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const std::string cfg_path = cmd->get_config_ptr() ? cmd->get_config_ptr()->as<std::string>()
                                                     : std::string();
  if (!cfg_path.empty() && fs::exists(cfg_path))
    fs::copy_file(cfg_path, fs::path(cfg.out_dir) / "config.txt",
                  fs::copy_options::overwrite_existing);
  nlohmann::json j;
  j["singles"] = cfg.singles_csv;
  j["pairs"] = cfg.pairs_csv;
  j["teacher"] = cfg.teacher_tsv;
  j["embeddings"] = cfg.embeddings_tsv;
  j["out"] = cfg.out_dir;
  j["embedder"] = cfg.embedder;
  j["embedder_mode"] = cfg.embedder_mode;
  j["aggregator"] = cfg.aggregator;
  j["tau_source"] = cfg.tau_source;
  j["d_e"] = cfg.d_e;
  j["d_p"] = cfg.d_p;
  j["d_h"] = cfg.d_h;
  j["heads"] = cfg.heads;
  j["trigram_buckets"] = cfg.trigram_buckets;
  j["lora_rank"] = cfg.lora_rank;
  j["lora_alpha"] = cfg.lora_alpha;
  j["strict_embeddings"] = cfg.strict_embeddings;
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["patience"] = cfg.patience;
  j["max_epochs"] = cfg.max_epochs;
  j["seed"] = cfg.seed;
  j["alpha"] = cfg.alpha;
  j["kd"] = cfg.kd;
  j["temperature"] = cfg.temperature;
  j["mld_softmax"] = cfg.mld_softmax;
  j["mask_unknown"] = cfg.mask_unknown;
  j["k_folds"] = cfg.k_folds;
  j["fold"] = cfg.fold;
  std::ofstream out(fs::path(cfg.out_dir) / "effective_config.json");
  out << j.dump(2);
}

int cmd_prepare(const RunConfig& cfg) {
  LoadedData data = load_run_data(cfg);
  fs::create_directories(cfg.out_dir);
  const Dataset& ds = data.dataset;

  nlohmann::json space;
  space["names"] = ds.space.names;
  space["singles_mask"] = ds.space.singles_mask;
  space["pairs_mask"] = ds.space.pairs_mask;
  std::ofstream(fs::path(cfg.out_dir) / "label_space.json") << space.dump(2);

  const auto singles_idx = ds.indices_of(Source::Singles);
  const auto pairs_idx = ds.indices_of(Source::Pairs);
  if (!singles_idx.empty())
    write_dataset_csv((fs::path(cfg.out_dir) / "dataset_singles.csv").string(), ds, singles_idx);
  if (!pairs_idx.empty())
    write_dataset_csv((fs::path(cfg.out_dir) / "dataset_pairs.csv").string(), ds, pairs_idx);
  write_folds_csv((fs::path(cfg.out_dir) / "folds.csv").string(), ds, data.singles_plan,
                  data.pairs_plan);
  write_rejects_csv((fs::path(cfg.out_dir) / "rejects.csv").string(), data.rejects);

  std::size_t overlap = 0;
  for (std::size_t i = 0; i < ds.space.size(); ++i)
    overlap += (ds.space.singles_mask[i] && ds.space.pairs_mask[i]) ? 1 : 0;
  const DensityReport density = density_report(ds);
  std::cout << "labels: union " << ds.space.size() << ", overlap " << overlap << "\n";
  std::cout << "samples: " << singles_idx.size() << " singles, " << pairs_idx.size()
            << " pairs, " << ds.duplicate_count << " duplicate rows dropped, "
            << data.rejects.size() << " rejected rows\n";
  for (const auto& [name, d] : density.mean_positives)
    std::cout << "density " << name << ": " << d << " positives/sample\n";
  for (int r = 0; r < data.folds.k; ++r) {
    const SplitIdx& rot = data.folds.rotations[static_cast<std::size_t>(r)];
    std::cout << "rotation " << r << ": " << rot.train.size() << " train, " << rot.val.size()
              << " val, " << rot.test.size() << " test\n";
  }
  if (pairs_idx.empty()) std::cout << "warning: pairs source is empty\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  LoadedData data = load_run_data(cfg);
  const SplitIdx& split = data.folds.rotations[static_cast<std::size_t>(cfg.fold)];
  TeacherTable teacher;
  const TeacherTable* teacher_ptr = nullptr;
  if (cfg.kd) {
    if (cfg.teacher_tsv.empty())
      throw ConfigError("knowledge distillation needs --teacher (or pass --no-kd)");
    teacher = load_teacher_file(cfg.teacher_tsv);
    teacher_ptr = &teacher;
  }
  TrainResult result = train(data.dataset, split, make_train_config(cfg),
                             make_embedder(cfg, data.dataset, split.train), teacher_ptr);
  fs::create_directories(cfg.out_dir);
  result.model.save_checkpoint((fs::path(cfg.out_dir) / "checkpoint.json").string());
  write_train_log((fs::path(cfg.out_dir) / "train_log.jsonl").string(), result.log);
  const Tensor preds = result.model.predict_matrix(data.dataset, split.test);
  const EvalReport report = evaluate_predictions(preds, data.dataset, split.test);
  std::ofstream(fs::path(cfg.out_dir) / "eval_test.json") << report.to_json();
  std::cout << report.render_table("trained") << "best epoch " << result.best_epoch << ", val "
            << result.best_val << "\n";
  return 0;
}

int cmd_pipeline(const RunConfig& cfg) {
  const PipelineArtifacts art = run_pipeline(cfg);
  std::cout << art.eval_initial.render_table("initial");
  std::cout << art.eval_p78.render_table("retrain-p78");
  std::cout << art.eval_p152.render_table("retrain-p152");
  std::cout << "pair density: " << art.density_pairs_before << " -> p78 "
            << art.density_pairs_p78 << ", p152 " << art.density_pairs_p152
            << " (labeled-source rate sum " << art.gamma_sum << ")\n";
  return 0;
}

int cmd_pseudo_label(const RunConfig& cfg, const std::string& checkpoint) {
  LoadedData data = load_run_data(cfg);
  const SplitIdx& split = data.folds.rotations[static_cast<std::size_t>(cfg.fold)];
  EmbeddingTable table;
  const EmbeddingTable* table_ptr = nullptr;
  if (!cfg.embeddings_tsv.empty()) {
    table = load_embedding_file(cfg.embeddings_tsv);
    table_ptr = &table;
  }
  Model model = Model::load_checkpoint(checkpoint, table_ptr);
  if (model.space.names != data.dataset.space.names)
    throw ShapeError("checkpoint label space does not match the provided data");

  std::vector<std::size_t> train_singles, train_pairs;
  for (std::size_t i : split.train)
    (data.dataset.samples[i].source == Source::Singles ? train_singles : train_pairs)
        .push_back(i);
  if (train_singles.empty() || train_pairs.empty())
    throw DataError("pseudo-labeling needs both sources in the train split");

  const ClassRates rates = class_rates(data.dataset, train_singles);
  const Tensor preds = model.predict_matrix(data.dataset, train_pairs);
  Thresholds tau;
  if (cfg.tau_source == "singles")
    tau = fit_thresholds(model.predict_matrix(data.dataset, train_singles), rates);
  else
    tau = fit_thresholds(preds, rates);

  const Dataset p78 = augment(data.dataset, train_pairs, preds, tau, AugmentMode::P78);
  const Dataset p152 = augment(data.dataset, train_pairs, preds, tau, AugmentMode::P152);
  fs::create_directories(cfg.out_dir);
  write_dataset_csv((fs::path(cfg.out_dir) / "pseudo78.csv").string(), p78, train_pairs);
  write_dataset_csv((fs::path(cfg.out_dir) / "pseudo152.csv").string(), p152, train_pairs);

  nlohmann::json j;
  j["density_before"] = density_report(data.dataset, train_pairs).mean_positives;
  j["density_p78"] = density_report(p78, train_pairs).mean_positives;
  j["density_p152"] = density_report(p152, train_pairs).mean_positives;
  std::ofstream(fs::path(cfg.out_dir) / "density_report.json") << j.dump(2);
  std::cout << "pseudo-labeled " << train_pairs.size() << " pair samples\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint, bool all_samples) {
  LoadedData data = load_run_data(cfg);
  EmbeddingTable table;
  const EmbeddingTable* table_ptr = nullptr;
  if (!cfg.embeddings_tsv.empty()) {
    table = load_embedding_file(cfg.embeddings_tsv);
    table_ptr = &table;
  }
  Model model = Model::load_checkpoint(checkpoint, table_ptr);
  if (model.space.names != data.dataset.space.names)
    throw ShapeError("checkpoint label space does not match the provided data");

  std::vector<std::size_t> idx;
  if (all_samples) {
    idx.resize(data.dataset.samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  } else {
    idx = data.folds.rotations[static_cast<std::size_t>(cfg.fold)].test;
  }
  const Tensor preds = model.predict_matrix(data.dataset, idx);
  const EvalReport report = evaluate_predictions(preds, data.dataset, idx);
  fs::create_directories(cfg.out_dir);
  std::ofstream(fs::path(cfg.out_dir) / "eval.json") << report.to_json();
  std::cout << report.render_table(fs::path(checkpoint).stem().string());
  return 0;
}

int cmd_embed(const RunConfig& cfg, const std::string& checkpoint,
              const std::string& molecules_path, const std::string& out_path) {
  EmbeddingTable table;
  const EmbeddingTable* table_ptr = nullptr;
  if (!cfg.embeddings_tsv.empty()) {
    table = load_embedding_file(cfg.embeddings_tsv);
    table_ptr = &table;
  }
  const Model model = Model::load_checkpoint(checkpoint, table_ptr);
  std::ifstream in(molecules_path);
  if (!in) throw FormatError("cannot open molecule list: " + molecules_path);
  EmbeddingTable out_table;
  out_table.d_e = model.embedder.d_e();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Smiles m = strip_stereo(line);
    out_table.rows[m.text()] = model.embedder.embed(m).data();
  }
  write_embedding_file(out_path, out_table);
  std::cout << "wrote " << out_table.rows.size() << " embeddings\n";
  return 0;
}

int cmd_project(const RunConfig& cfg, const std::string& checkpoint,
                const std::string& out_path) {
  LoadedData data = load_run_data(cfg);
  EmbeddingTable table;
  const EmbeddingTable* table_ptr = nullptr;
  if (!cfg.embeddings_tsv.empty()) {
    table = load_embedding_file(cfg.embeddings_tsv);
    table_ptr = &table;
  }
  const Model model = Model::load_checkpoint(checkpoint, table_ptr);
  const std::size_t n = data.dataset.samples.size();
  Tensor zs({n, static_cast<std::size_t>(model.agg.cfg.d_h)});
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor z = model.global_embedding(data.dataset.samples[i].molecules);
    for (std::size_t j = 0; j < z.numel(); ++j) zs(i, j) = z[j];
  }
  const Projection2D proj = project_2d(zs);
  std::ofstream out(out_path);
  if (!out) throw FormatError("cannot write projection: " + out_path);
  out << "id,source,x,y\n";
  out.precision(17);
  for (std::size_t i = 0; i < n; ++i)
    out << data.dataset.samples[i].id << ',' << source_name(data.dataset.samples[i].source)
        << ',' << proj.coords[i][0] << ',' << proj.coords[i][1] << '\n';
  std::cout << "projected " << n << " samples (variance " << proj.variance[0] << ", "
            << proj.variance[1] << ")\n";
  return 0;
}

int cmd_selfcheck(std::uint64_t seed, bool inject_fault) {
  const std::vector<CheckResult> results = run_selfcheck(seed, inject_fault);
  bool all_ok = true;
  for (const CheckResult& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " - " << r.detail << "\n";
    all_ok = all_ok && r.passed;
  }
  return all_ok ? 0 : 1;
}

int cmd_synth(const SyntheticConfig& scfg, const std::string& out_dir) {
  const SyntheticData data = generate_synthetic(scfg);
  const SyntheticPaths paths = write_synthetic(data, out_dir);
  std::cout << "wrote " << paths.singles_csv << ", " << paths.pairs_csv << ", "
            << paths.teacher_tsv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unified odor prediction for molecules and two-molecule mixtures"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string checkpoint, molecules_path, out_path;
  bool all_samples = false;
  std::uint64_t selfcheck_seed = 1234;
  bool inject_fault = false;
  SyntheticConfig scfg;
  std::string synth_out = "synthetic";

  CLI::App* prepare = app.add_subcommand("prepare", "unify sources and build folds");
  add_run_options(prepare, cfg);
  CLI::App* train_cmd = app.add_subcommand("train", "single-phase training");
  add_run_options(train_cmd, cfg);
  CLI::App* pipeline = app.add_subcommand("pipeline", "two-phase training with pseudo-labeling");
  add_run_options(pipeline, cfg);
  CLI::App* pseudo = app.add_subcommand("pseudo-label", "augment pair labels with a checkpoint");
  add_run_options(pseudo, cfg);
  pseudo->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint");
  add_run_options(evaluate, cfg);
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  evaluate->add_flag("--all", all_samples, "score all samples instead of the test split");
  CLI::App* embed = app.add_subcommand("embed", "export per-molecule embeddings");
  add_run_options(embed, cfg);
  embed->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  embed->add_option("--molecules", molecules_path, "text file, one smiles per line")->required();
  embed->add_option("--out-file", out_path, "output tsv")->required();
  CLI::App* project = app.add_subcommand("project", "2-d projection of global embeddings");
  add_run_options(project, cfg);
  project->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  project->add_option("--out-file", out_path, "output csv")->required();
  CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the built-in oracle battery");
  selfcheck->add_option("--seed", selfcheck_seed, "rng seed");
  selfcheck->add_flag("--inject-fault", inject_fault,
                      "corrupt one gradient rule (negative control)");
  CLI::App* synth = app.add_subcommand("synth", "generate the planted-rule synthetic corpus");
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--molecules", scfg.n_molecules, "molecule count");
  synth->add_option("--pairs", scfg.n_pairs, "pair count");
  synth->add_option("--drop-prob", scfg.drop_prob, "positive dropout on non-truth pair rows");
  synth->add_option("--k-folds", scfg.k_folds, "fold count");
  synth->add_option("--truth-fold", scfg.truth_fold, "pair fold kept exact");
  synth->add_option("--seed", scfg.seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      echo_config(prepare, cfg);
      return cmd_prepare(cfg);
    }
    if (train_cmd->parsed()) {
      echo_config(train_cmd, cfg);
      return cmd_train(cfg);
    }
    if (pipeline->parsed()) {
      echo_config(pipeline, cfg);
      return cmd_pipeline(cfg);
    }
    if (pseudo->parsed()) {
      echo_config(pseudo, cfg);
      return cmd_pseudo_label(cfg, checkpoint);
    }
    if (evaluate->parsed()) {
      echo_config(evaluate, cfg);
      return cmd_evaluate(cfg, checkpoint, all_samples);
    }
    if (embed->parsed()) return cmd_embed(cfg, checkpoint, molecules_path, out_path);
    if (project->parsed()) return cmd_project(cfg, checkpoint, out_path);
    if (selfcheck->parsed()) return cmd_selfcheck(selfcheck_seed, inject_fault);
    if (synth->parsed()) return cmd_synth(scfg, synth_out);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
