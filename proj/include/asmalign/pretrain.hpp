#pragma once

#include <string>
#include <vector>

#include "asmalign/encoder.hpp"
#include "asmalign/tokenizer.hpp"

namespace asmalign {

enum class Replacement { Mask, Random, Keep };

struct MaskedPosition {
  std::size_t position;
  Replacement replacement;
  int replacement_id;  // token id substituted at this position
};

// m_x (normal-token masking) and l_x (jump-symbol masking) are disjoint by
// construction: jump symbols and PAD are never MLM-eligible.
struct MaskingPlan {
  std::vector<MaskedPosition> mlm;
  std::vector<std::size_t> jtp;

  bool empty() const { return mlm.empty() && jtp.empty(); }
};

// Per-position Bernoulli selection, deterministic for a fixed seed. MLM uses
// the 80/10/10 MASK/random/keep policy; jump symbols are always replaced with
// MASK.
inline MaskingPlan plan_masking(const TokenSequence& seq, double mlm_rate, double jtp_rate,
                                std::uint64_t seed, const Vocab& vocab) {
  if (mlm_rate < 0 || mlm_rate > 1 || jtp_rate < 0 || jtp_rate > 1)
    throw Error("plan_masking: rates must be in [0,1]");
  Rng rng(mix_seed(seed, 0x6d61736bULL));
  MaskingPlan plan;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    int id = seq.token_ids[i];
    if (seq.jump_symbol_mask[i]) {
      if (jtp_rate > 0 && rng.uniform_real() < jtp_rate) plan.jtp.push_back(i);
      continue;
    }
    if (id == Vocab::kPadId) continue;
    if (mlm_rate <= 0 || rng.uniform_real() >= mlm_rate) continue;
    MaskedPosition mp{i, Replacement::Mask, Vocab::kMaskId};
    double roll = rng.uniform_real();
    if (roll < 0.8) {
      mp.replacement = Replacement::Mask;
      mp.replacement_id = Vocab::kMaskId;
    } else if (roll < 0.9 && vocab.matchable_count() > 0) {
      mp.replacement = Replacement::Random;
      mp.replacement_id =
          static_cast<int>(vocab.learned_base() + rng.uniform_index(vocab.matchable_count()));
    } else {
      mp.replacement = Replacement::Keep;
      mp.replacement_id = id;
    }
    plan.mlm.push_back(mp);
  }
  return plan;
}

// Applies a plan to the token id stream only; instruction_index, position and
// jump_symbol_mask are never altered by masking.
inline TokenSequence apply_masking(const TokenSequence& seq, const MaskingPlan& plan) {
  TokenSequence masked = seq;
  for (const auto& mp : plan.mlm) masked.token_ids[mp.position] = mp.replacement_id;
  for (std::size_t p : plan.jtp) masked.token_ids[p] = Vocab::kMaskId;
  return masked;
}

template <typename T>
struct PretrainLossNodes {
  typename Graph<T>::NodeId total;
  T mlm_value = 0;
  T jtp_value = 0;
};

// Sum of masked-token and jump-target cross entropies over planned positions
// (unplanned positions contribute nothing). Jump targets are classified over
// instruction indices.
template <typename T>
PretrainLossNodes<T> pretrain_loss_node(Graph<T>& g, const EncoderConfig& cfg,
                                        const BoundParams<T>& b, const TokenSequence& seq,
                                        const MaskingPlan& plan) {
  PretrainLossNodes<T> out;
  if (plan.empty()) {
    out.total = g.constant(Tensor<T>::scalar(T(0)));
    return out;
  }
  TokenSequence masked = apply_masking(seq, plan);
  auto hidden = encoder_hidden_node(g, cfg, b, masked);
  std::vector<typename Graph<T>::NodeId> parts;
  if (!plan.mlm.empty()) {
    std::vector<std::size_t> rows;
    std::vector<int> targets;
    for (const auto& mp : plan.mlm) {
      rows.push_back(mp.position);
      targets.push_back(seq.token_ids[mp.position]);
    }
    auto logits = g.gather_rows(mlm_logits_node(g, b, hidden), rows);
    auto loss = g.cross_entropy(logits, targets, Reduction::Sum);
    out.mlm_value = g.value(loss).data[0];
    parts.push_back(loss);
  }
  if (!plan.jtp.empty()) {
    std::vector<std::size_t> rows;
    std::vector<int> targets;
    for (std::size_t p : plan.jtp) {
      rows.push_back(p);
      targets.push_back(seq.token_ids[p] - static_cast<int>(Vocab::kReservedBeforeJumps));
    }
    auto logits = g.gather_rows(jtp_logits_node(g, b, hidden), rows);
    auto loss = g.cross_entropy(logits, targets, Reduction::Sum);
    out.jtp_value = g.value(loss).data[0];
    parts.push_back(loss);
  }
  out.total = parts.size() == 1 ? parts[0] : g.add(parts[0], parts[1]);
  return out;
}

template <typename T>
T pretrain_loss(const TokenSequence& seq, const MaskingPlan& plan, const EncoderModel<T>& m) {
  Graph<T> g;
  auto b = bind_params(g, m.params);
  return g.value(pretrain_loss_node(g, m.config, b, seq, plan).total).data[0];
}

struct PretrainConfig {
  std::size_t steps = 600;
  std::size_t batch_size = 16;
  double mlm_rate = 0.15;
  double jtp_rate = 0.15;
  AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 0;
  std::size_t checkpoint_interval = 0;  // 0: final checkpoint only
  std::string checkpoint_path;          // empty: no checkpoints
};

struct PretrainStepRecord {
  std::size_t step;
  double mlm_loss;
  double jtp_loss;
  double total;
};

inline void write_loss_curve(const std::string& path,
                             const std::vector<PretrainStepRecord>& curve) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write loss curve: " + path);
  os << "step,mlm_loss,jtp_loss,total\n";
  for (const auto& r : curve)
    os << r.step << "," << r.mlm_loss << "," << r.jtp_loss << "," << r.total << "\n";
}

// Stage-1 training loop. Deterministic per seed: each step derives its RNG
// from (seed, step), so resuming from a checkpoint at step k reproduces the
// uninterrupted trajectory. Reported losses are batch means of per-sequence
// sums, so total = mlm + jtp.
template <typename T>
std::vector<PretrainStepRecord> run_pretraining(const std::vector<TokenSequence>& corpus,
                                                EncoderModel<T>& model, const Vocab& vocab,
                                                const PretrainConfig& cfg) {
  if (corpus.empty()) throw Error("run_pretraining: empty corpus");
  std::vector<PretrainStepRecord> curve;
  for (std::size_t step = model.params.step_count(); step < cfg.steps; ++step) {
    Rng rng(mix_seed(cfg.seed, step));
    std::size_t bsz = std::min(cfg.batch_size, corpus.size());
    std::vector<std::size_t> batch = rng.sample_without_replacement(corpus.size(), bsz);
    Graph<T> g;
    auto b = bind_params(g, model.params);
    typename Graph<T>::NodeId total = g.constant(Tensor<T>::scalar(T(0)));
    double mlm_sum = 0, jtp_sum = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& seq = corpus[batch[i]];
      MaskingPlan plan = plan_masking(seq, cfg.mlm_rate, cfg.jtp_rate,
                                      mix_seed(cfg.seed, step * 0x10000ULL + i), vocab);
      auto nodes = pretrain_loss_node(g, model.config, b, seq, plan);
      total = g.add(total, nodes.total);
      mlm_sum += static_cast<double>(nodes.mlm_value);
      jtp_sum += static_cast<double>(nodes.jtp_value);
    }
    auto loss = g.scale(total, T(1) / static_cast<T>(batch.size()));
    g.backward(loss);
    std::vector<Tensor<T>> grads(model.params.size());
    g.flush_param_grads(grads);
    model.params.step(grads, cfg.adam);
    double bs = static_cast<double>(batch.size());
    curve.push_back({step, mlm_sum / bs, jtp_sum / bs, (mlm_sum + jtp_sum) / bs});
    if (!cfg.checkpoint_path.empty() && cfg.checkpoint_interval > 0 &&
        (step + 1) % cfg.checkpoint_interval == 0)
      save_encoder(cfg.checkpoint_path, model);
  }
  if (!cfg.checkpoint_path.empty()) save_encoder(cfg.checkpoint_path, model);
  return curve;
}

}  // namespace asmalign
