#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "asmalign/graph.hpp"
#include "asmalign/optim.hpp"
#include "asmalign/tokenizer.hpp"

namespace asmalign {

struct IncompatibleCheckpoint : Error {
  explicit IncompatibleCheckpoint(const std::string& msg)
      : Error("IncompatibleCheckpoint: " + msg) {}
};

struct EncoderConfig {
  std::size_t vocab_size = 4096;
  std::size_t max_seq_len = 256;
  std::size_t max_instructions = 64;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  bool mlm_head = true;
  double layer_norm_eps = 1e-5;
  double init_stddev = 0.02;

  bool operator==(const EncoderConfig&) const = default;

  void validate() const {
    if (hidden_dim % heads != 0) throw Error("EncoderConfig: hidden_dim not divisible by heads");
    if (vocab_size < Vocab::kReservedBeforeJumps + max_instructions)
      throw Error("EncoderConfig: vocab_size below reserved token count");
  }

  nlohmann::json to_json() const {
    return {{"vocab_size", vocab_size},   {"max_seq_len", max_seq_len},
            {"max_instructions", max_instructions}, {"hidden_dim", hidden_dim},
            {"layers", layers},           {"heads", heads},
            {"mlm_head", mlm_head},       {"layer_norm_eps", layer_norm_eps},
            {"init_stddev", init_stddev}};
  }

  static EncoderConfig from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    c.max_instructions = j.at("max_instructions").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.mlm_head = j.at("mlm_head").get<bool>();
    c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
    c.init_stddev = j.at("init_stddev").get<double>();
    return c;
  }
};

// The assembly encoder. Token embedding rows for the reserved INSTR<k>
// symbols double as instruction-embedding rows: both reads index the same
// tok_emb storage at jump_base + k, so the sharing holds bit-for-bit and
// gradients from either pathway accumulate into one parameter row.
template <typename T>
struct EncoderModel {
  EncoderConfig config;
  ParamStore<T> params;

  static EncoderModel init(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    EncoderModel m;
    m.config = cfg;
    Rng rng(mix_seed(seed, 0x45434d00ULL));
    T sd = static_cast<T>(cfg.init_stddev);
    std::size_t d = cfg.hidden_dim;
    auto normal = [&](std::size_t r, std::size_t c) { return random_normal<T>(r, c, sd, rng); };
    auto ones = [&](std::size_t c) {
      Tensor<T> t(1, c, T(1));
      return t;
    };
    auto zeros = [&](std::size_t r, std::size_t c) { return Tensor<T>(r, c); };

    m.params.add("tok_emb", normal(cfg.vocab_size, d));
    m.params.add("pos_emb", normal(cfg.max_seq_len, d));
    m.params.add("emb_ln_g", ones(d));
    m.params.add("emb_ln_b", zeros(1, d));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      std::string p = "layer" + std::to_string(l) + ".";
      m.params.add(p + "wq", normal(d, d));
      m.params.add(p + "bq", zeros(1, d));
      m.params.add(p + "wk", normal(d, d));
      m.params.add(p + "wv", normal(d, d));
      m.params.add(p + "bv", zeros(1, d));
      m.params.add(p + "wo", normal(d, d));
      m.params.add(p + "bo", zeros(1, d));
      m.params.add(p + "ln1_g", ones(d));
      m.params.add(p + "ln1_b", zeros(1, d));
      m.params.add(p + "ff1_w", normal(d, 4 * d));
      m.params.add(p + "ff1_b", zeros(1, 4 * d));
      m.params.add(p + "ff2_w", normal(4 * d, d));
      m.params.add(p + "ff2_b", zeros(1, d));
      m.params.add(p + "ln2_g", ones(d));
      m.params.add(p + "ln2_b", zeros(1, d));
    }
    if (cfg.mlm_head) {
      m.params.add("mlm_w", normal(d, cfg.vocab_size));
      m.params.add("mlm_b", zeros(1, cfg.vocab_size));
    }
    m.params.add("jtp_w", normal(d, cfg.max_instructions));
    m.params.add("jtp_b", zeros(1, cfg.max_instructions));
    return m;
  }

  // Read-only view of instruction-embedding row k (shared storage check).
  std::vector<T> instruction_embedding_row(std::size_t k) const {
    const auto& t = params.value("tok_emb");
    std::vector<T> row(t.cols());
    std::size_t base = Vocab::kReservedBeforeJumps + k;
    for (std::size_t j = 0; j < t.cols(); ++j) row[j] = t.at(base, j);
    return row;
  }

  std::vector<T> token_embedding_row(std::size_t id) const {
    const auto& t = params.value("tok_emb");
    std::vector<T> row(t.cols());
    for (std::size_t j = 0; j < t.cols(); ++j) row[j] = t.at(id, j);
    return row;
  }
};

// Sum of token, position and instruction embeddings per token. The
// instruction embedding is the tok_emb row at jump_base + instruction_index.
template <typename T>
typename Graph<T>::NodeId embed_inputs_node(Graph<T>& g, const EncoderConfig& cfg,
                                            const BoundParams<T>& b, const TokenSequence& seq) {
  if (seq.size() == 0) throw Error("embed_inputs: empty sequence");
  if (seq.size() > cfg.max_seq_len)
    throw IndexOutOfBounds("sequence length " + std::to_string(seq.size()) + " > max_seq_len");
  std::vector<int> tok_ids = seq.token_ids;
  std::vector<int> pos_ids(seq.size());
  std::vector<int> instr_ids(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    pos_ids[i] = seq.position[i];
    if (seq.instruction_index[i] < 0 ||
        static_cast<std::size_t>(seq.instruction_index[i]) >= cfg.max_instructions)
      throw IndexOutOfBounds("instruction index " + std::to_string(seq.instruction_index[i]));
    instr_ids[i] =
        static_cast<int>(Vocab::kReservedBeforeJumps) + seq.instruction_index[i];
  }
  auto tok = g.embedding_rows(b.at("tok_emb"), tok_ids);
  auto pos = g.embedding_rows(b.at("pos_emb"), pos_ids);
  auto ins = g.embedding_rows(b.at("tok_emb"), instr_ids);
  return g.add(g.add(tok, pos), ins);
}

namespace detail {

// Additive attention mask: PAD key columns get a large negative bias.
template <typename T>
Tensor<T> attention_mask(const TokenSequence& seq) {
  std::size_t n = seq.size();
  Tensor<T> mask(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    if (seq.token_ids[j] == Vocab::kPadId)
      for (std::size_t i = 0; i < n; ++i) mask.at(i, j) = T(-1e9);
  }
  return mask;
}

template <typename T>
bool has_padding(const TokenSequence& seq) {
  for (int id : seq.token_ids)
    if (id == Vocab::kPadId) return true;
  return false;
}

}  // namespace detail

// Final-layer hidden states [len x d].
template <typename T>
typename Graph<T>::NodeId encoder_hidden_node(Graph<T>& g, const EncoderConfig& cfg,
                                              const BoundParams<T>& b, const TokenSequence& seq) {
  T eps = static_cast<T>(cfg.layer_norm_eps);
  auto x = embed_inputs_node(g, cfg, b, seq);
  x = g.layer_norm(x, b.at("emb_ln_g"), b.at("emb_ln_b"), eps);
  std::size_t dh = cfg.hidden_dim / cfg.heads;
  T inv_sqrt_dh = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  bool padded = detail::has_padding<T>(seq);
  typename Graph<T>::NodeId mask = 0;
  if (padded) mask = g.constant(detail::attention_mask<T>(seq));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    auto q = g.add(g.matmul(x, b.at(p + "wq")), b.at(p + "bq"));
    // no key bias: it only adds a per-row constant to the scores, which
    // softmax cancels exactly
    auto k = g.matmul(x, b.at(p + "wk"));
    auto v = g.add(g.matmul(x, b.at(p + "wv")), b.at(p + "bv"));
    std::vector<typename Graph<T>::NodeId> heads;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      auto qh = g.col_slice(q, h * dh, (h + 1) * dh);
      auto kh = g.col_slice(k, h * dh, (h + 1) * dh);
      auto vh = g.col_slice(v, h * dh, (h + 1) * dh);
      auto scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt_dh);
      if (padded) scores = g.add(scores, mask);
      heads.push_back(g.matmul(g.softmax_rows(scores), vh));
    }
    auto attn = g.add(g.matmul(g.concat_cols(heads), b.at(p + "wo")), b.at(p + "bo"));
    x = g.layer_norm(g.add(x, attn), b.at(p + "ln1_g"), b.at(p + "ln1_b"), eps);
    auto f1 = g.gelu(g.add(g.matmul(x, b.at(p + "ff1_w")), b.at(p + "ff1_b")));
    auto f2 = g.add(g.matmul(f1, b.at(p + "ff2_w")), b.at(p + "ff2_b"));
    x = g.layer_norm(g.add(x, f2), b.at(p + "ln2_g"), b.at(p + "ln2_b"), eps);
  }
  return x;
}

// Content positions used for pooling: PAD and MASK excluded.
inline std::vector<char> pooling_mask(const TokenSequence& seq) {
  std::vector<char> keep(seq.size(), 1);
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (seq.token_ids[i] == Vocab::kPadId || seq.token_ids[i] == Vocab::kMaskId) keep[i] = 0;
  return keep;
}

// Mean of final-layer outputs over content positions: the function embedding.
template <typename T>
typename Graph<T>::NodeId encode_function_node(Graph<T>& g, const EncoderConfig& cfg,
                                               const BoundParams<T>& b,
                                               const TokenSequence& seq) {
  auto hidden = encoder_hidden_node(g, cfg, b, seq);
  return g.mean_pool_rows(hidden, pooling_mask(seq));
}

template <typename T>
typename Graph<T>::NodeId mlm_logits_node(Graph<T>& g, const BoundParams<T>& b,
                                          typename Graph<T>::NodeId hidden) {
  return g.add(g.matmul(hidden, b.at("mlm_w")), b.at("mlm_b"));
}

template <typename T>
typename Graph<T>::NodeId jtp_logits_node(Graph<T>& g, const BoundParams<T>& b,
                                          typename Graph<T>::NodeId hidden) {
  return g.add(g.matmul(hidden, b.at("jtp_w")), b.at("jtp_b"));
}

// ---- forward-only conveniences ----

template <typename T>
Tensor<T> embed_inputs(const TokenSequence& seq, const EncoderModel<T>& m) {
  Graph<T> g;
  auto b = bind_params(g, m.params);
  return g.value(embed_inputs_node(g, m.config, b, seq));
}

template <typename T>
Tensor<T> encode_function(const TokenSequence& seq, const EncoderModel<T>& m) {
  Graph<T> g;
  auto b = bind_params(g, m.params);
  return g.value(encode_function_node(g, m.config, b, seq));
}

template <typename T>
Tensor<T> mlm_logits(const TokenSequence& seq, const EncoderModel<T>& m) {
  Graph<T> g;
  auto b = bind_params(g, m.params);
  return g.value(mlm_logits_node(g, b, encoder_hidden_node(g, m.config, b, seq)));
}

template <typename T>
Tensor<T> jtp_logits(const TokenSequence& seq, const EncoderModel<T>& m) {
  Graph<T> g;
  auto b = bind_params(g, m.params);
  return g.value(jtp_logits_node(g, b, encoder_hidden_node(g, m.config, b, seq)));
}

// ---- model checkpointing with config validation ----

template <typename T>
void save_encoder(const std::string& path, const EncoderModel<T>& m,
                  bool with_optimizer_state = true) {
  nlohmann::json j;
  j["kind"] = "asmalign-encoder";
  j["encoder"] = m.config.to_json();
  save_checkpoint(path, m.params, j.dump(), with_optimizer_state);
}

template <typename T>
EncoderModel<T> load_encoder(const std::string& path) {
  EncoderModel<T> m;
  std::string cfg_json = load_checkpoint(path, m.params);
  nlohmann::json j = nlohmann::json::parse(cfg_json, nullptr, false);
  if (j.is_discarded() || !j.contains("encoder"))
    throw IncompatibleCheckpoint(path + " has no encoder config");
  m.config = EncoderConfig::from_json(j.at("encoder"));
  m.config.validate();
  const char* expect[] = {"tok_emb", "pos_emb", "jtp_w"};
  for (const char* name : expect)
    if (!m.params.has(name))
      throw IncompatibleCheckpoint(path + " missing parameter " + name);
  if (m.params.value("tok_emb").rows() != m.config.vocab_size ||
      m.params.value("tok_emb").cols() != m.config.hidden_dim)
    throw IncompatibleCheckpoint(path + " tok_emb shape does not match config");
  return m;
}

}  // namespace asmalign
