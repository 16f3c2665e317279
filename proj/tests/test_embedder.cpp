//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <doctest.h>

#include "aromma/errors.hpp"
#include "support.hpp"

using namespace aromma;

namespace {

std::vector<Smiles> corpus() {
  std::vector<Smiles> out;
  for (const char* s : {"CCO", "OCC", "c1ccccc1", "CC(N)C", "OC1COC(Cc2ccccc2)OC1", "CCl"})
    out.push_back(strip_stereo(s));
  return out;
}

EmbedderConfig toy_config(EmbedderMode mode = EmbedderMode::Frozen) {
  EmbedderConfig cfg;
  cfg.variant = EmbedderVariant::Toy;
  cfg.mode = mode;
  cfg.d_e = 16;
  cfg.trigram_buckets = 32;
  cfg.seed = 42;
  return cfg;
}

std::string temp_path(const char* name) {
  return std::string("embedder_test_") + name;
}

// Singular values via one-sided Jacobi (rotating the rows of m until mutually
// orthogonal); keeps full relative accuracy for the tiny trailing values, so
// the rank bound has a trustworthy independent oracle.
std::vector<double> singular_values(const Tensor& m) {
  const std::size_t n = m.rows(), width = m.cols();
  std::vector<std::vector<double>> rows(n, std::vector<double>(width));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) rows[i][j] = m(i, j);
  auto dot = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) s += rows[a][j] * rows[b][j];
    return s;
  };
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double app = dot(p, p), aqq = dot(q, q), apq = dot(p, q);
        if (std::fabs(apq) <= 1e-30 * std::sqrt(app * aqq)) continue;
        const double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t j = 0; j < width; ++j) {
          const double vp = rows[p][j], vq = rows[q][j];
          rows[p][j] = c * vp - s * vq;
          rows[q][j] = s * vp + c * vq;
        }
        rotated = true;
      }
    }
    if (!rotated) break;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(dot(i, i));
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

}  // namespace

TEST_CASE("toy features count tokens and normalize") {
  const ToyFeaturizer f = ToyFeaturizer::build(corpus(), 32);
  const SparseVec v = f.features(strip_stereo("CCO"));
  // tokens C (x2) and O (x1), plus one trigram "CCO"
  double c_count = 0, o_count = 0;
  double norm2 = 0;
  for (const auto& [idx, val] : v.entries) {
    norm2 += val * val;
    if (idx < f.vocab().size()) {
      if (f.vocab()[idx] == "C") c_count = val;
      if (f.vocab()[idx] == "O") o_count = val;
    }
  }
  CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c_count == doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-12));
  CHECK(o_count == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-12));
}

TEST_CASE("empty molecule gives the zero vector") {
  const ToyFeaturizer f = ToyFeaturizer::build(corpus(), 32);
  CHECK(f.features(strip_stereo("")).entries.empty());
}

TEST_CASE("same token multiset, different trigrams, different vectors") {
  const ToyFeaturizer f = ToyFeaturizer::build(corpus(), 32);
  const SparseVec a = f.features(strip_stereo("OCC"));
  const SparseVec b = f.features(strip_stereo("CCO"));
  CHECK(a.entries != b.entries);
}

TEST_CASE("out-of-vocabulary tokens are dropped and counted") {
  ToyFeaturizer f({"C", "O"}, 0);
  const std::uint64_t before = f.oov_count();
  const SparseVec v = f.features(strip_stereo("CCNO"));
  CHECK(f.oov_count() == before + 1);  // N is unknown
  CHECK(v.entries.size() == 2);
}

TEST_CASE("toy embedding is deterministic and adapter-neutral at init") {
  const auto mols = corpus();
  const Embedder frozen = Embedder::toy(toy_config(), mols);
  const Embedder adapted = Embedder::toy(toy_config(EmbedderMode::Adapted), mols);
  const Tensor a = frozen.embed(mols[0]);
  const Tensor b = frozen.embed(mols[0]);
  CHECK(max_abs_diff(a, b) == 0.0);
  // B starts at zero, so a fresh adapter changes nothing, exactly.
  CHECK(max_abs_diff(a, adapted.embed(mols[0])) == 0.0);
}

TEST_CASE("trained adapter update stays within its rank bound") {
  const auto mols = corpus();
  Embedder e = Embedder::toy(toy_config(EmbedderMode::Adapted), mols);
  Rng rng(99);
  for (double& v : e.lora_a().data()) v = rng.normal();
  for (double& v : e.lora_b().data()) v = rng.normal();
  // the adapter update (alpha/r) B A has rank <= r by construction
  Tensor delta = matmul(e.lora_b(), e.lora_a());
  for (double& v : delta.data()) v *= e.lora_scale();
  const int r = e.config().lora.rank;
  const auto sv = singular_values(delta);
  REQUIRE(sv.size() > static_cast<std::size_t>(r));
  CHECK(sv[static_cast<std::size_t>(r)] < 1e-10 * sv[0]);
}

TEST_CASE("adapter tape path agrees with the eager path") {
  const auto mols = corpus();
  Embedder e = Embedder::toy(toy_config(EmbedderMode::Adapted), mols);
  Rng rng(17);
  for (double& v : e.lora_a().data()) v = rng.normal();
  for (double& v : e.lora_b().data()) v = 0.1 * rng.normal();
  Tape t;
  const Value a = t.leaf(e.lora_a(), "lora_a");
  const Value b = t.leaf(e.lora_b(), "lora_b");
  const Value on_tape = e.embed_on(t, mols[2], a, b);
  CHECK(max_abs_diff(t.val(on_tape), e.embed(mols[2])) < 1e-12);
}

TEST_CASE("embedding file round trip, lookup, and failure modes") {
  const std::string path = temp_path("table.tsv");
  {
    std::ofstream out(path);
    out << "d_e\t4\n";
    out << "CCO\t0.1\t0.2\t0.3\t0.4\n";
    out << "OCC\t1\t2\t3\t4\n";
  }
  const EmbeddingTable table = load_embedding_file(path);
  CHECK(table.d_e == 4);
  CHECK(table.rows.size() == 2);
  CHECK(table.rows.at("CCO")[2] == 0.3);

  EmbedderConfig cfg;
  cfg.variant = EmbedderVariant::FileBacked;
  cfg.d_e = 4;
  const Embedder e = Embedder::file_backed(cfg, table);
  const Tensor v = e.embed(strip_stereo("CCO"));
  CHECK(v[0] == 0.1);
  CHECK(v[3] == 0.4);
  CHECK_THROWS_AS((void)e.embed(strip_stereo("CCC")), DataError);

  EmbedderConfig lenient = cfg;
  lenient.strict = false;
  const Embedder e2 = Embedder::file_backed(lenient, table);
  const Tensor zero = e2.embed(strip_stereo("CCC"));
  for (std::size_t i = 0; i < zero.numel(); ++i) CHECK(zero[i] == 0.0);
  CHECK(e2.missing_count() == 1);

  std::remove(path.c_str());
}

TEST_CASE("malformed embedding files are rejected with row context") {
  const std::string path = temp_path("bad.tsv");
  {
    std::ofstream out(path);
    out << "d_e\t4\n";
    out << "CCO\t0.1\t0.2\t0.3\n";  // 3 values under d_e=4
  }
  CHECK_THROWS_AS((void)load_embedding_file(path), FormatError);
  {
    std::ofstream out(path);
    out << "d_e\t2\n";
    out << "CCO\t0.1\tnope\n";
  }
  CHECK_THROWS_AS((void)load_embedding_file(path), FormatError);
  {
    std::ofstream out(path);
    out << "dim\t2\n";
  }
  CHECK_THROWS_AS((void)load_embedding_file(path), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("empty table in strict mode errors on any lookup") {
  const std::string path = temp_path("empty.tsv");
  {
    std::ofstream out(path);
    out << "d_e\t4\n";
  }
  const EmbeddingTable table = load_embedding_file(path);
  CHECK(table.rows.empty());
  EmbedderConfig cfg;
  cfg.variant = EmbedderVariant::FileBacked;
  cfg.d_e = 4;
  const Embedder e = Embedder::file_backed(cfg, table);
  CHECK_THROWS_AS((void)e.embed(strip_stereo("CCO")), DataError);
  std::remove(path.c_str());
}

TEST_CASE("duplicate molecules: last row wins") {
  const std::string path = temp_path("dup.tsv");
  {
    std::ofstream out(path);
    out << "d_e\t2\n";
    out << "CCO\t1\t1\n";
    out << "CCO\t2\t2\n";
  }
  const EmbeddingTable table = load_embedding_file(path);
  CHECK(table.duplicate_count == 1);
  CHECK(table.rows.at("CCO")[0] == 2.0);
  std::remove(path.c_str());
}

TEST_CASE("file-backed embedders reject adaptation and dimension mismatches") {
  EmbeddingTable table;
  table.d_e = 4;
  EmbedderConfig cfg;
  cfg.variant = EmbedderVariant::FileBacked;
  cfg.d_e = 4;
  cfg.mode = EmbedderMode::Adapted;
  CHECK_THROWS_AS((void)Embedder::file_backed(cfg, table), ConfigError);
  cfg.mode = EmbedderMode::Frozen;
  cfg.d_e = 8;
  CHECK_THROWS_AS((void)Embedder::file_backed(cfg, table), ConfigError);
}
