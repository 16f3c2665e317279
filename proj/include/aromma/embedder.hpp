//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "aromma/autodiff.hpp"
#include "aromma/rng.hpp"
#include "aromma/smiles.hpp"
#include "aromma/tensor.hpp"

namespace aromma {

struct LoraConfig {
  int rank = 4;
  double alpha = 8.0;
};

enum class EmbedderVariant { Toy, FileBacked };
enum class EmbedderMode { Frozen, Adapted };

struct EmbedderConfig {
  EmbedderVariant variant = EmbedderVariant::Toy;
  EmbedderMode mode = EmbedderMode::Frozen;  // Adapted = LoRA on the input projection
  int d_e = 768;
  bool strict = true;  // file-backed: error on unknown molecules (false: zero vector)
  LoraConfig lora;
  int trigram_buckets = 512;
  std::uint64_t seed = 1;
};

struct SparseVec {
  std::vector<std::pair<std::size_t, double>> entries;  // sorted by index
  std::size_t dim = 0;
};

// Token-count + hashed character-trigram features. The vocabulary is built
// from a training corpus and immutable afterwards; out-of-vocabulary tokens
// are dropped and counted.
class ToyFeaturizer {
public:
  ToyFeaturizer() = default;
  ToyFeaturizer(std::vector<std::string> vocab, int n_gram_buckets);

  static ToyFeaturizer build(const std::vector<Smiles>& corpus, int n_gram_buckets);

  // L2-normalized concatenation [token counts | trigram counts]; the zero
  // vector stays zero.
  SparseVec features(const Smiles& m) const;

  std::size_t dim() const { return vocab_.size() + static_cast<std::size_t>(buckets_); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  int buckets() const { return buckets_; }
  std::uint64_t oov_count() const { return oov_count_; }

private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  int buckets_ = 0;
  mutable std::uint64_t oov_count_ = 0;
};

struct EmbeddingTable {
  int d_e = 0;
  std::map<std::string, std::vector<double>> rows;  // normalized SMILES -> vector
  int duplicate_count = 0;
};

// TSV transport: first line "d_e<TAB><int>", then one molecule per line.
EmbeddingTable load_embedding_file(const std::string& path);
void write_embedding_file(const std::string& path, const EmbeddingTable& table);

// Per-molecule embedding producer: either a table of precomputed vectors or
// the toy featurizer behind a learnable projection, optionally modulated by a
// low-rank adapter (delta = (alpha/r) * B * A, B zero-initialized so a fresh
// adapter is exactly neutral).
class Embedder {
public:
  static Embedder toy(const EmbedderConfig& cfg, const std::vector<Smiles>& corpus);
  static Embedder toy_with_featurizer(const EmbedderConfig& cfg, ToyFeaturizer featurizer,
                                      Tensor w_feat, Tensor lora_a, Tensor lora_b);
  static Embedder file_backed(const EmbedderConfig& cfg, EmbeddingTable table);

  Embedder(Embedder&&) = default;
  Embedder& operator=(Embedder&&) = default;
  Embedder clone() const;  // deep copy with a fresh cache lock

  const EmbedderConfig& config() const { return cfg_; }
  bool adapted() const {
    return cfg_.variant == EmbedderVariant::Toy && cfg_.mode == EmbedderMode::Adapted;
  }
  int d_e() const { return cfg_.d_e; }

  // Eager path, using the current adapter state.
  Tensor embed(const Smiles& m) const;

  // Training path: base projection enters as a constant, the adapter factors
  // as differentiable inputs. Only valid for adapted toy embedders.
  Value embed_on(Tape& tape, const Smiles& m, Value lora_a, Value lora_b) const;

  const ToyFeaturizer& featurizer() const { return featurizer_; }
  Tensor& w_feat() { return w_feat_; }
  const Tensor& w_feat() const { return w_feat_; }
  Tensor& lora_a() { return lora_a_; }
  const Tensor& lora_a() const { return lora_a_; }
  Tensor& lora_b() { return lora_b_; }
  const Tensor& lora_b() const { return lora_b_; }
  double lora_scale() const { return cfg_.lora.alpha / static_cast<double>(cfg_.lora.rank); }

  std::uint64_t missing_count() const { return missing_count_; }

private:
  explicit Embedder(EmbedderConfig cfg) : cfg_(std::move(cfg)) {}

  const std::vector<double>& feature_row(const Smiles& m) const;  // dense, cached
  const std::vector<double>& base_row(const Smiles& m) const;     // w_feat * f, cached

  EmbedderConfig cfg_;
  ToyFeaturizer featurizer_;
  Tensor w_feat_;  // d_e x F, frozen; adaptation goes through the adapter
  Tensor lora_a_;  // r x F
  Tensor lora_b_;  // d_e x r
  EmbeddingTable table_;
  mutable std::uint64_t missing_count_ = 0;

  mutable std::unique_ptr<std::mutex> cache_mutex_ = std::make_unique<std::mutex>();
  mutable std::unordered_map<std::string, std::vector<double>> feature_cache_;
  mutable std::unordered_map<std::string, std::vector<double>> base_cache_;
};

}  // namespace aromma
