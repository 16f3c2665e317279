//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aromma/errors.hpp"

namespace aromma {

namespace {

std::uint64_t fnv1a_trigram(const char* p) {
  std::uint64_t h = 14695981039346656037ULL;
  for (int i = 0; i < 3; ++i) {
    h ^= static_cast<std::uint8_t>(p[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ToyFeaturizer::ToyFeaturizer(std::vector<std::string> vocab, int n_gram_buckets)
    : vocab_(std::move(vocab)), buckets_(n_gram_buckets) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], i);
}

ToyFeaturizer ToyFeaturizer::build(const std::vector<Smiles>& corpus, int n_gram_buckets) {
  std::vector<std::string> vocab;
  std::unordered_map<std::string, std::size_t> seen;
  for (const Smiles& m : corpus)
    for (const Token& t : tokenize(m).tokens)
      if (seen.emplace(t.text, vocab.size()).second) vocab.push_back(t.text);
  std::sort(vocab.begin(), vocab.end());
  return ToyFeaturizer(std::move(vocab), n_gram_buckets);
}

SparseVec ToyFeaturizer::features(const Smiles& m) const {
  std::map<std::size_t, double> counts;
  for (const Token& t : tokenize(m).tokens) {
    auto it = index_.find(t.text);
    if (it == index_.end()) {
      ++oov_count_;
      continue;
    }
    counts[it->second] += 1.0;
  }
  const std::string& s = m.text();
  if (buckets_ > 0 && s.size() >= 3) {
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) {
      const std::size_t b = fnv1a_trigram(s.data() + i) % static_cast<std::uint64_t>(buckets_);
      counts[vocab_.size() + b] += 1.0;
    }
  }
  double norm2 = 0.0;
  for (const auto& [_, v] : counts) norm2 += v * v;
  const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
  SparseVec out;
  out.dim = dim();
  out.entries.reserve(counts.size());
  for (const auto& [i, v] : counts) out.entries.emplace_back(i, v * inv);
  return out;
}

EmbeddingTable load_embedding_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty embedding file: " + path);
  std::istringstream header(line);
  std::string tag;
  int d_e = 0;
  if (!std::getline(header, tag, '\t') || tag != "d_e" || !(header >> d_e) || d_e <= 0)
    throw FormatError("embedding file header must be 'd_e<TAB><int>'", 1);
  EmbeddingTable table;
  table.d_e = d_e;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    if (!std::getline(ss, key, '\t')) throw FormatError("missing molecule column", row);
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(d_e));
    std::string cell;
    while (std::getline(ss, cell, '\t')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError("non-numeric embedding value '" + cell + "'", row);
      }
    }
    if (static_cast<int>(values.size()) != d_e)
      throw FormatError("expected " + std::to_string(d_e) + " values, got " +
                            std::to_string(values.size()),
                        row);
    if (!table.rows.emplace(key, values).second) {
      table.rows[key] = values;  // last wins
      ++table.duplicate_count;
    }
  }
  return table;
}

void write_embedding_file(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write embedding file: " + path);
  out << "d_e\t" << table.d_e << "\n";
  out.precision(17);
  for (const auto& [key, values] : table.rows) {
    out << key;
    for (double v : values) out << '\t' << v;
    out << '\n';
  }
}

Embedder Embedder::toy(const EmbedderConfig& cfg, const std::vector<Smiles>& corpus) {
  Embedder e(cfg);
  e.featurizer_ = ToyFeaturizer::build(corpus, cfg.trigram_buckets);
  const std::size_t f = e.featurizer_.dim();
  const std::size_t d = static_cast<std::size_t>(cfg.d_e);
  Rng rng(cfg.seed);
  e.w_feat_ = Tensor({d, f});
  const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(f, 1)));
  for (double& v : e.w_feat_.data()) v = rng.normal(0.0, scale);
  const std::size_t r = static_cast<std::size_t>(cfg.lora.rank);
  e.lora_a_ = Tensor({r, f});
  for (double& v : e.lora_a_.data()) v = rng.normal(0.0, 0.02);
  e.lora_b_ = Tensor({d, r});  // zeros: fresh adapter is a no-op
  return e;
}

Embedder Embedder::toy_with_featurizer(const EmbedderConfig& cfg, ToyFeaturizer featurizer,
                                       Tensor w_feat, Tensor lora_a, Tensor lora_b) {
  Embedder e(cfg);
  e.featurizer_ = std::move(featurizer);
  e.w_feat_ = std::move(w_feat);
  e.lora_a_ = std::move(lora_a);
  e.lora_b_ = std::move(lora_b);
  const std::size_t f = e.featurizer_.dim();
  const std::size_t d = static_cast<std::size_t>(cfg.d_e);
  if (e.w_feat_.rows() != d || e.w_feat_.cols() != f)
    throw ShapeError("toy embedder: w_feat shape does not match featurizer/d_e");
  return e;
}

Embedder Embedder::file_backed(const EmbedderConfig& cfg, EmbeddingTable table) {
  if (cfg.mode == EmbedderMode::Adapted)
    throw ConfigError("file-backed embedder cannot be adapted (no trainable projection)");
  if (table.d_e != cfg.d_e)
    throw ConfigError("embedding file dimension " + std::to_string(table.d_e) +
                      " does not match configured d_e " + std::to_string(cfg.d_e));
  Embedder e(cfg);
  e.table_ = std::move(table);
  return e;
}

Embedder Embedder::clone() const {
  Embedder e(cfg_);
  e.featurizer_ = featurizer_;
  e.w_feat_ = w_feat_;
  e.lora_a_ = lora_a_;
  e.lora_b_ = lora_b_;
  e.table_ = table_;
  return e;
}

const std::vector<double>& Embedder::feature_row(const Smiles& m) const {
  std::lock_guard<std::mutex> lock(*cache_mutex_);
  auto it = feature_cache_.find(m.text());
  if (it != feature_cache_.end()) return it->second;
  const SparseVec f = featurizer_.features(m);
  std::vector<double> dense(f.dim, 0.0);
  for (const auto& [i, v] : f.entries) dense[i] = v;
  return feature_cache_.emplace(m.text(), std::move(dense)).first->second;
}

const std::vector<double>& Embedder::base_row(const Smiles& m) const {
  {
    std::lock_guard<std::mutex> lock(*cache_mutex_);
    auto it = base_cache_.find(m.text());
    if (it != base_cache_.end()) return it->second;
  }
  const SparseVec f = featurizer_.features(m);
  const std::size_t d = static_cast<std::size_t>(cfg_.d_e);
  std::vector<double> base(d, 0.0);
  for (std::size_t row = 0; row < d; ++row) {
    double acc = 0.0;
    for (const auto& [i, v] : f.entries) acc += w_feat_(row, i) * v;
    base[row] = acc;
  }
  std::lock_guard<std::mutex> lock(*cache_mutex_);
  return base_cache_.emplace(m.text(), std::move(base)).first->second;
}

Tensor Embedder::embed(const Smiles& m) const {
  const std::size_t d = static_cast<std::size_t>(cfg_.d_e);
  if (cfg_.variant == EmbedderVariant::FileBacked) {
    auto it = table_.rows.find(m.text());
    if (it == table_.rows.end()) {
      if (cfg_.strict)
        throw DataError("missing embedding for molecule '" + m.text() + "'");
      ++missing_count_;
      return Tensor({1, d});
    }
    return Tensor({1, d}, it->second);
  }
  Tensor out({1, d}, base_row(m));
  if (adapted()) {
    // delta = (alpha/r) * B * (A f)
    const std::vector<double>& f = feature_row(m);
    const std::size_t r = lora_a_.rows();
    std::vector<double> af(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) acc += lora_a_(i, j) * f[j];
      af[i] = acc;
    }
    const double s = lora_scale();
    for (std::size_t row = 0; row < d; ++row) {
      double acc = 0.0;
      for (std::size_t i = 0; i < r; ++i) acc += lora_b_(row, i) * af[i];
      out[row] += s * acc;
    }
  }
  return out;
}

Value Embedder::embed_on(Tape& tape, const Smiles& m, Value lora_a, Value lora_b) const {
  if (!adapted()) throw ConfigError("embed_on requires an adapted toy embedder");
  const Value base = tape.constant(Tensor({1, static_cast<std::size_t>(cfg_.d_e)}, base_row(m)));
  const std::vector<double>& f = feature_row(m);
  const Value frow = tape.constant(Tensor({1, f.size()}, f));
  // (f A^T) B^T = (B (A f))^T as a row vector.
  const Value af = tape.matmul_nt(frow, lora_a);
  const Value delta = tape.matmul_nt(af, lora_b);
  return tape.add(base, tape.scale(delta, lora_scale()));
}

}  // namespace aromma
