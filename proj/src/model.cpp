//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/model.hpp"

#include <fstream>

#include <json.hpp>

#include "aromma/errors.hpp"

namespace aromma {

namespace {

using nlohmann::json;

constexpr std::size_t kPredictChunk = 256;

MixtureInput make_input(const Embedder& embedder, const std::vector<Smiles>& molecules) {
  if (molecules.empty() || molecules.size() > 2)
    throw DataError("predict: a sample carries 1 or 2 molecules");
  if (molecules.size() == 1) return MixtureInput::single(embedder.embed(molecules[0]));
  return MixtureInput::pair(embedder.embed(molecules[0]), embedder.embed(molecules[1]));
}

json tensor_to_json(const Tensor& t) {
  json j;
  j["shape"] = t.shape();
  j["data"] = t.data();
  return j;
}

Tensor tensor_from_json(const json& j) {
  std::vector<std::size_t> shape = j.at("shape").get<std::vector<std::size_t>>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  return Tensor(std::move(shape), std::move(data));
}

ForwardResult run_forward(const AggregatorParams& agg, const MixtureInput& x) {
  return agg.cfg.variant == AggregatorVariant::CrossAttention ? forward(agg, x)
                                                              : forward_pna_baseline(agg, x);
}

}  // namespace

Tensor Model::predict_one(const std::vector<Smiles>& molecules) const {
  return run_forward(agg, make_input(embedder, molecules)).probs;
}

Tensor Model::global_embedding(const std::vector<Smiles>& molecules) const {
  return run_forward(agg, make_input(embedder, molecules)).z;
}

Tensor Model::predict_matrix(const Dataset& ds, const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw DataError("predict_matrix: no samples to predict");
  const std::size_t L = space.size();
  Tensor out({indices.size(), L});

  for (std::size_t start = 0; start < indices.size(); start += kPredictChunk) {
    const std::size_t end = std::min(indices.size(), start + kPredictChunk);
    Tape tape;
    const BoundAggregator b = bind_aggregator(tape, agg, /*trainable=*/false);
    for (std::size_t i = start; i < end; ++i) {
      const Sample& s = ds.samples[indices[i]];
      const MixtureInput x = make_input(embedder, s.molecules);
      const Value e = tape.constant(x.e);
      const AggregatorOut o = aggregator_forward(tape, b, agg.cfg, e, x.valid);
      const Tensor& probs = tape.val(o.probs);
      for (std::size_t c = 0; c < L; ++c) out(i, c) = probs[c];
    }
  }
  return out;
}

void Model::save_checkpoint(const std::string& path) const {
  json j;
  j["format_version"] = 1;
  j["d_e"] = agg.cfg.d_e;
  j["d_p"] = agg.cfg.d_p;
  j["d_h"] = agg.cfg.d_h;
  j["heads"] = agg.cfg.heads;
  j["aggregator_variant"] =
      agg.cfg.variant == AggregatorVariant::CrossAttention ? "cross_attention" : "pna";
  j["labels"] = space.names;
  j["singles_mask"] = space.singles_mask;
  j["pairs_mask"] = space.pairs_mask;

  const EmbedderConfig& ec = embedder.config();
  json je;
  je["variant"] = ec.variant == EmbedderVariant::Toy ? "toy" : "file";
  je["mode"] = ec.mode == EmbedderMode::Frozen ? "frozen" : "adapted";
  je["d_e"] = ec.d_e;
  je["strict"] = ec.strict;
  je["lora_rank"] = ec.lora.rank;
  je["lora_alpha"] = ec.lora.alpha;
  je["trigram_buckets"] = ec.trigram_buckets;
  je["seed"] = ec.seed;
  if (ec.variant == EmbedderVariant::Toy) je["vocab"] = embedder.featurizer().vocab();
  j["embedder"] = je;

  json tensors;
  for (const auto& [name, t] : named_tensors(agg)) tensors[name] = tensor_to_json(*t);
  if (ec.variant == EmbedderVariant::Toy) {
    tensors["w_feat"] = tensor_to_json(embedder.w_feat());
    tensors["lora_a"] = tensor_to_json(embedder.lora_a());
    tensors["lora_b"] = tensor_to_json(embedder.lora_b());
  }
  j["tensors"] = tensors;

  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint: " + path);
  out << j.dump();
}

Model Model::load_checkpoint(const std::string& path, const EmbeddingTable* table) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint is not valid json: ") + e.what());
  }
  if (j.value("format_version", 0) != 1) throw FormatError("unsupported checkpoint version");

  AggregatorConfig cfg;
  cfg.d_e = j.at("d_e").get<int>();
  cfg.d_p = j.at("d_p").get<int>();
  cfg.d_h = j.at("d_h").get<int>();
  cfg.heads = j.at("heads").get<int>();
  const std::string variant = j.at("aggregator_variant").get<std::string>();
  cfg.variant =
      variant == "pna" ? AggregatorVariant::PnaBaseline : AggregatorVariant::CrossAttention;

  LabelSpace space;
  space.names = j.at("labels").get<std::vector<std::string>>();
  space.singles_mask = j.at("singles_mask").get<std::vector<std::uint8_t>>();
  space.pairs_mask = j.at("pairs_mask").get<std::vector<std::uint8_t>>();
  cfg.labels = static_cast<int>(space.names.size());

  // Skeleton params establish expected shapes; every stored tensor must match.
  Rng rng(0);
  AggregatorParams agg = AggregatorParams::init(cfg, rng);
  const json& tensors = j.at("tensors");
  for (auto& [name, t] : named_tensors(agg)) {
    if (!tensors.contains(name)) throw FormatError("checkpoint is missing tensor '" + name + "'");
    Tensor loaded = tensor_from_json(tensors.at(name));
    if (!loaded.same_shape(*t))
      throw ShapeError("checkpoint tensor '" + name + "' has an unexpected shape");
    *t = std::move(loaded);
  }

  const json& je = j.at("embedder");
  EmbedderConfig ec;
  ec.variant = je.at("variant").get<std::string>() == "toy" ? EmbedderVariant::Toy
                                                            : EmbedderVariant::FileBacked;
  ec.mode = je.at("mode").get<std::string>() == "adapted" ? EmbedderMode::Adapted
                                                          : EmbedderMode::Frozen;
  ec.d_e = je.at("d_e").get<int>();
  ec.strict = je.at("strict").get<bool>();
  ec.lora.rank = je.at("lora_rank").get<int>();
  ec.lora.alpha = je.at("lora_alpha").get<double>();
  ec.trigram_buckets = je.at("trigram_buckets").get<int>();
  ec.seed = je.at("seed").get<std::uint64_t>();
  if (ec.d_e != cfg.d_e) throw ShapeError("checkpoint embedder d_e disagrees with aggregator d_e");

  if (ec.variant == EmbedderVariant::Toy) {
    ToyFeaturizer feat(je.at("vocab").get<std::vector<std::string>>(), ec.trigram_buckets);
    Tensor w_feat = tensor_from_json(tensors.at("w_feat"));
    Tensor lora_a = tensor_from_json(tensors.at("lora_a"));
    Tensor lora_b = tensor_from_json(tensors.at("lora_b"));
    Embedder embedder = Embedder::toy_with_featurizer(ec, std::move(feat), std::move(w_feat),
                                                      std::move(lora_a), std::move(lora_b));
    return Model(std::move(embedder), std::move(agg), std::move(space));
  }
  if (!table)
    throw ConfigError("checkpoint uses a file-backed embedder; supply the embedding file");
  return Model(Embedder::file_backed(ec, *table), std::move(agg), std::move(space));
}

}  // namespace aromma
