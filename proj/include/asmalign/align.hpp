#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "asmalign/corpus.hpp"
#include "asmalign/encoder.hpp"
#include "asmalign/text_encoder.hpp"

namespace asmalign {

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error("DimensionMismatch: " + msg) {}
};

struct NonPositiveTemperature : Error {
  NonPositiveTemperature() : Error("NonPositiveTemperature: temperature must be > 0") {}
};

struct DuplicateGroupInBatch : Error {
  explicit DuplicateGroupInBatch(const std::string& msg)
      : Error("DuplicateGroupInBatch: " + msg) {}
};

// (assembly, explanation) positive pair with class labels and the source
// group shared by perturbed variants of one function.
struct PairedExample {
  std::string id;
  AssemblyFunction function;
  std::string explanation;
  std::vector<std::string> labels;
  std::string group;
};

inline PairedExample paired_example_from_record(const CorpusRecord& r) {
  PairedExample ex;
  ex.id = r.id;
  ex.function = parse_disassembly(r.asm_text);
  if (!r.name.empty()) ex.function.name = r.name;
  ex.explanation = r.explanation;
  ex.labels = r.labels;
  ex.group = r.group;
  return ex;
}

// One-directional InfoNCE over dot-product logits: mean over rows of the
// cross entropy with the diagonal as target. Temperature divides the logits;
// 1.0 reproduces the raw-dot-product formulation.
template <typename T>
T infonce_loss(const Tensor<T>& ea, const Tensor<T>& et, T temperature) {
  if (temperature <= T(0)) throw NonPositiveTemperature();
  if (ea.rows() == 0 || ea.rows() != et.rows() || ea.cols() != et.cols())
    throw DimensionMismatch("infonce_loss " + ea.shape_str() + " vs " + et.shape_str());
  std::size_t n = ea.rows(), d = ea.cols();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<T> logits(n);
    for (std::size_t j = 0; j < n; ++j) {
      T dot = 0;
      for (std::size_t c = 0; c < d; ++c) dot += ea.at(i, c) * et.at(j, c);
      logits[j] = dot / temperature;
    }
    T mx = *std::max_element(logits.begin(), logits.end());
    T z = 0;
    for (T l : logits) z += std::exp(l - mx);
    total += std::log(z) + mx - logits[i];
  }
  return total / static_cast<T>(n);
}

// Bridges text dimensionality into the assembly space. An empty projection is
// treated as the identity (dimensions must already agree).
template <typename T>
Tensor<T> project_and_normalize(const Tensor<T>& emb, const Tensor<T>& projection,
                                bool normalize_flag) {
  Tensor<T> out;
  if (projection.numel() == 0) {
    out = emb;
  } else {
    if (emb.cols() != projection.rows())
      throw DimensionMismatch("project " + emb.shape_str() + " by " + projection.shape_str());
    out = Tensor<T>(emb.rows(), projection.cols());
    for (std::size_t i = 0; i < emb.rows(); ++i)
      for (std::size_t k = 0; k < projection.rows(); ++k) {
        T v = emb.at(i, k);
        for (std::size_t j = 0; j < projection.cols(); ++j)
          out.at(i, j) += v * projection.at(k, j);
      }
  }
  if (normalize_flag) {
    for (std::size_t i = 0; i < out.rows(); ++i) {
      T sq = 0;
      for (std::size_t j = 0; j < out.cols(); ++j) sq += out.at(i, j) * out.at(i, j);
      if (sq <= T(0)) throw ZeroNorm();
      T inv = T(1) / std::sqrt(sq);
      for (std::size_t j = 0; j < out.cols(); ++j) out.at(i, j) *= inv;
    }
  }
  return out;
}

struct AlignConfig {
  std::size_t text_dim = 64;
  std::size_t text_buckets = 2048;
  double temperature = 1.0;
  bool learnable_temperature = false;
  bool normalize = true;
  bool symmetric = false;
  std::string text_encoder_kind = "bag";  // "bag" or "precomputed"

  bool operator==(const AlignConfig&) const = default;

  nlohmann::json to_json() const {
    return {{"text_dim", text_dim},
            {"text_buckets", text_buckets},
            {"temperature", temperature},
            {"learnable_temperature", learnable_temperature},
            {"normalize", normalize},
            {"symmetric", symmetric},
            {"text_encoder_kind", text_encoder_kind}};
  }

  static AlignConfig from_json(const nlohmann::json& j) {
    AlignConfig c;
    c.text_dim = j.at("text_dim").get<std::size_t>();
    c.text_buckets = j.at("text_buckets").get<std::size_t>();
    c.temperature = j.at("temperature").get<double>();
    c.learnable_temperature = j.at("learnable_temperature").get<bool>();
    c.normalize = j.at("normalize").get<bool>();
    c.symmetric = j.at("symmetric").get<bool>();
    c.text_encoder_kind = j.at("text_encoder_kind").get<std::string>();
    return c;
  }
};

// Stage-2 model: the assembly encoder plus the text projection, optional
// trainable text table, and optional learnable logit scale, all in one store.
template <typename T>
struct AlignModel {
  EncoderConfig encoder_config;
  AlignConfig align_config;
  ParamStore<T> params;

  static AlignModel init(const EncoderModel<T>& encoder, const AlignConfig& acfg,
                         std::uint64_t seed) {
    if (acfg.temperature <= 0) throw NonPositiveTemperature();
    AlignModel m;
    m.encoder_config = encoder.config;
    m.align_config = acfg;
    for (std::size_t i = 0; i < encoder.params.size(); ++i)
      m.params.add(encoder.params.name(static_cast<int>(i)),
                   encoder.params.value(static_cast<int>(i)));
    Rng rng(mix_seed(seed, 0x414c4eULL));
    T sd = static_cast<T>(encoder.config.init_stddev);
    if (acfg.text_encoder_kind == "bag")
      m.params.add("text_emb", random_normal<T>(acfg.text_buckets, acfg.text_dim, sd, rng));
    m.params.add("proj_w",
                 random_normal<T>(acfg.text_dim, encoder.config.hidden_dim, sd, rng));
    if (acfg.learnable_temperature)
      m.params.add("logit_scale",
                   Tensor<T>::scalar(static_cast<T>(std::log(1.0 / acfg.temperature))));
    return m;
  }

  // Assembly-side embedding in the alignment space.
  Tensor<T> embed_assembly(const TokenSequence& seq) const {
    Graph<T> g;
    auto b = bind_params(g, params);
    auto node = encode_function_node(g, encoder_config, b, seq);
    if (align_config.normalize) node = g.l2_normalize_rows(node);
    return g.value(node);
  }

  // Text-side embedding in the alignment space. `key` is the explanation text
  // for trainable encoders, the example id for the precomputed loader.
  Tensor<T> embed_text(const TextEncoder<T>& enc, const std::string& key) const {
    Tensor<T> raw = enc.embed(key);
    return project_and_normalize(raw, params.value("proj_w"), align_config.normalize);
  }
};

template <typename T>
void save_align(const std::string& path, const AlignModel<T>& m,
                bool with_optimizer_state = true) {
  nlohmann::json j;
  j["kind"] = "asmalign-align";
  j["encoder"] = m.encoder_config.to_json();
  j["align"] = m.align_config.to_json();
  save_checkpoint(path, m.params, j.dump(), with_optimizer_state);
}

template <typename T>
AlignModel<T> load_align(const std::string& path) {
  AlignModel<T> m;
  std::string cfg_json = load_checkpoint(path, m.params);
  nlohmann::json j = nlohmann::json::parse(cfg_json, nullptr, false);
  if (j.is_discarded() || j.value("kind", "") != "asmalign-align")
    throw IncompatibleCheckpoint(path + " is not an alignment checkpoint");
  m.encoder_config = EncoderConfig::from_json(j.at("encoder"));
  m.align_config = AlignConfig::from_json(j.at("align"));
  m.encoder_config.validate();
  if (!m.params.has("proj_w"))
    throw IncompatibleCheckpoint(path + " missing proj_w");
  return m;
}

struct AlignTrainConfig {
  std::size_t steps = 600;
  std::size_t batch_size = 32;
  AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 0;
  bool allow_group_repeats = false;
  std::string checkpoint_path;  // empty: no checkpoint written
};

struct AlignStepRecord {
  std::size_t step;
  double loss;
  double in_batch_recall1;
};

inline void write_align_curve(const std::string& path, const std::vector<AlignStepRecord>& curve) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write curve: " + path);
  os << "step,infonce,in_batch_recall1\n";
  for (const auto& r : curve)
    os << r.step << "," << r.loss << "," << r.in_batch_recall1 << "\n";
}

namespace detail {

// Batch with pairwise-distinct groups where the corpus allows it; with
// allow_repeats, distinct examples are sampled instead. Either way, duplicate
// explanation texts are repaired by resampling, then rejected.
inline std::vector<std::size_t> sample_alignment_batch(const std::vector<PairedExample>& pairs,
                                                       std::size_t batch_size, Rng& rng,
                                                       bool allow_repeats) {
  std::map<std::string, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < pairs.size(); ++i) by_group[pairs[i].group].push_back(i);
  std::vector<std::size_t> batch;
  if (by_group.size() >= batch_size) {
    std::vector<const std::vector<std::size_t>*> groups;
    groups.reserve(by_group.size());
    for (auto& [name, members] : by_group) groups.push_back(&members);
    for (std::size_t gi : rng.sample_without_replacement(groups.size(), batch_size)) {
      const auto& members = *groups[gi];
      batch.push_back(members[rng.uniform_index(members.size())]);
    }
  } else {
    if (!allow_repeats)
      throw DuplicateGroupInBatch("batch size " + std::to_string(batch_size) +
                                  " exceeds the " + std::to_string(by_group.size()) +
                                  " distinct groups; pass allow_group_repeats to permit this");
    if (batch_size > pairs.size())
      throw Error("batch size exceeds corpus size");
    batch = rng.sample_without_replacement(pairs.size(), batch_size);
  }
  // repair duplicate explanation texts (false negatives otherwise)
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::set<std::string> seen;
    int dup_slot = -1;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      if (!seen.insert(pairs[batch[s]].explanation).second) {
        dup_slot = static_cast<int>(s);
        break;
      }
    }
    if (dup_slot < 0) return batch;
    std::set<std::size_t> used(batch.begin(), batch.end());
    std::map<std::string, int> group_uses;
    for (std::size_t s : batch) ++group_uses[pairs[s].group];
    const std::string& slot_group = pairs[batch[dup_slot]].group;
    bool distinct_groups = by_group.size() >= batch_size;
    bool replaced = false;
    for (std::size_t tries = 0; tries < 4 * pairs.size(); ++tries) {
      std::size_t cand = rng.uniform_index(pairs.size());
      if (used.count(cand)) continue;
      if (seen.count(pairs[cand].explanation)) continue;
      const std::string& cg = pairs[cand].group;
      if (distinct_groups && cg != slot_group && group_uses.count(cg)) continue;
      batch[dup_slot] = cand;
      replaced = true;
      break;
    }
    if (!replaced) break;
  }
  throw DuplicateGroupInBatch("cannot assemble a batch with distinct explanations");
}

}  // namespace detail

// Stage-2 contrastive training. Deterministic per seed; emits the InfoNCE
// loss and the in-batch Recall@1 per step.
template <typename T>
std::vector<AlignStepRecord> run_alignment(const std::vector<PairedExample>& pairs,
                                           AlignModel<T>& model,
                                           const TextEncoder<T>& text_encoder,
                                           const Vocab& vocab, const AlignTrainConfig& cfg) {
  if (pairs.empty()) throw Error("run_alignment: no pairs");
  for (const auto& p : pairs) {
    if (p.explanation.empty() && text_encoder.trainable())
      throw Error("run_alignment: example " + p.id + " has no explanation");
    if (p.group.empty()) throw Error("run_alignment: example " + p.id + " has no group");
  }
  if (text_encoder.dim() != model.align_config.text_dim)
    throw DimensionMismatch("text encoder dim " + std::to_string(text_encoder.dim()) +
                            " vs configured " + std::to_string(model.align_config.text_dim));

  std::vector<TokenSequence> seqs;
  seqs.reserve(pairs.size());
  for (const auto& p : pairs)
    seqs.push_back(encode(rebase(p.function), vocab, model.encoder_config.max_seq_len));

  const bool learnable = model.align_config.learnable_temperature;
  const T inv_temp = static_cast<T>(1.0 / model.align_config.temperature);
  std::vector<AlignStepRecord> curve;
  for (std::size_t step = model.params.step_count(); step < cfg.steps; ++step) {
    Rng rng(mix_seed(cfg.seed, step));
    auto batch =
        detail::sample_alignment_batch(pairs, cfg.batch_size, rng, cfg.allow_group_repeats);
    Graph<T> g;
    auto b = bind_params(g, model.params);
    std::vector<typename Graph<T>::NodeId> asm_rows, text_rows;
    for (std::size_t idx : batch) {
      asm_rows.push_back(encode_function_node(g, model.encoder_config, b, seqs[idx]));
      const std::string& key =
          text_encoder.trainable() ? pairs[idx].explanation : pairs[idx].id;
      text_rows.push_back(text_encoder.embed_node(g, b, key));
    }
    auto ea = g.concat_rows(asm_rows);
    auto et = g.matmul(g.concat_rows(text_rows), b.at("proj_w"));
    if (model.align_config.normalize) {
      ea = g.l2_normalize_rows(ea);
      et = g.l2_normalize_rows(et);
    }
    auto logits = g.matmul_nt(ea, et);
    logits = learnable ? g.scale_exp(logits, b.at("logit_scale")) : g.scale(logits, inv_temp);
    std::vector<int> targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) targets[i] = static_cast<int>(i);
    auto loss = g.cross_entropy(logits, targets, Reduction::Mean);
    if (model.align_config.symmetric) {
      auto logits_t = g.matmul_nt(et, ea);
      logits_t = learnable ? g.scale_exp(logits_t, b.at("logit_scale"))
                           : g.scale(logits_t, inv_temp);
      loss = g.scale(g.add(loss, g.cross_entropy(logits_t, targets, Reduction::Mean)), T(0.5));
    }

    const auto& lv = g.value(logits);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < lv.rows(); ++i) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < lv.cols(); ++j)
        if (lv.at(i, j) > lv.at(i, arg)) arg = j;
      hits += (arg == i);
    }

    g.backward(loss);
    std::vector<Tensor<T>> grads(model.params.size());
    g.flush_param_grads(grads);
    model.params.step(grads, cfg.adam);
    curve.push_back({step, static_cast<double>(g.value(loss).data[0]),
                     static_cast<double>(hits) / static_cast<double>(lv.rows())});
  }
  if (!cfg.checkpoint_path.empty()) save_align(cfg.checkpoint_path, model);
  return curve;
}

}  // namespace asmalign
