#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "asmalign/graph.hpp"
#include "asmalign/optim.hpp"
#include "asmalign/tensor.hpp"

namespace asmalign {

struct MissingEmbedding : Error {
  explicit MissingEmbedding(const std::string& id) : Error("MissingEmbedding: " + id) {}
};

// ---- precomputed text-embedding file ----
// header {count, dim}, then per row {id-string, dim little-endian f32}.

inline void write_embedding_file(const std::string& path,
                                 const std::vector<std::pair<std::string, std::vector<float>>>& rows,
                                 std::size_t dim) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write embedding file: " + path);
  detail::write_u64(os, rows.size());
  detail::write_u32(os, static_cast<std::uint32_t>(dim));
  for (const auto& [id, vec] : rows) {
    if (vec.size() != dim) throw Error("embedding row " + id + " has wrong dimension");
    detail::write_str(os, id);
    for (float v : vec) detail::write_f32(os, v);
  }
}

inline std::map<std::string, std::vector<float>> read_embedding_file(const std::string& path,
                                                                     std::size_t* dim_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read embedding file: " + path);
  std::uint64_t count = detail::read_u64(is);
  std::uint32_t dim = detail::read_u32(is);
  std::map<std::string, std::vector<float>> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = detail::read_str(is);
    std::vector<float> vec(dim);
    for (auto& v : vec) v = detail::read_f32(is);
    if (!is) throw Error("truncated embedding file: " + path);
    out[id] = std::move(vec);
  }
  if (dim_out) *dim_out = dim;
  return out;
}

// Lowercased alphanumeric word stream for the bag encoder.
inline std::vector<std::string> text_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

// Explanation encoder interface. `key` is the explanation text for trainable
// encoders and the example id for the precomputed loader.
template <typename T>
struct TextEncoder {
  virtual ~TextEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual bool trainable() const { return false; }
  virtual Tensor<T> embed(const std::string& key) const = 0;
  virtual typename Graph<T>::NodeId embed_node(Graph<T>& g, const BoundParams<T>& bound,
                                               const std::string& key) const {
    (void)bound;
    return g.constant(embed(key));
  }
};

// Mean of hashed word embeddings; the table lives in the shared ParamStore
// (name "text_emb") so it trains jointly with the alignment objective.
template <typename T>
class BagTextEncoder : public TextEncoder<T> {
 public:
  BagTextEncoder(const ParamStore<T>* store, std::size_t buckets, std::size_t dim)
      : store_(store), buckets_(buckets), dim_(dim) {}

  std::size_t dim() const override { return dim_; }
  bool trainable() const override { return true; }

  std::vector<int> bucket_ids(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& w : text_words(text))
      ids.push_back(static_cast<int>(fnv1a64(w) % buckets_));
    if (ids.empty()) ids.push_back(0);
    return ids;
  }

  Tensor<T> embed(const std::string& key) const override {
    const auto& table = store_->value("text_emb");
    auto ids = bucket_ids(key);
    Tensor<T> out(1, dim_);
    for (int id : ids)
      for (std::size_t j = 0; j < dim_; ++j) out.at(0, j) += table.at(id, j);
    for (auto& v : out.data) v /= static_cast<T>(ids.size());
    return out;
  }

  typename Graph<T>::NodeId embed_node(Graph<T>& g, const BoundParams<T>& bound,
                                       const std::string& key) const override {
    auto rows = g.embedding_rows(bound.at("text_emb"), bucket_ids(key));
    return g.mean_pool_rows(rows, std::vector<char>(g.value(rows).rows(), 1));
  }

 private:
  const ParamStore<T>* store_;
  std::size_t buckets_;
  std::size_t dim_;
};

// Frozen encoder backed by a precomputed embedding file keyed by example id.
template <typename T>
class PrecomputedTextEncoder : public TextEncoder<T> {
 public:
  explicit PrecomputedTextEncoder(const std::string& path) {
    table_float_ = read_embedding_file(path, &dim_);
  }
  PrecomputedTextEncoder(std::map<std::string, std::vector<float>> table, std::size_t dim)
      : table_float_(std::move(table)), dim_(dim) {}

  std::size_t dim() const override { return dim_; }

  Tensor<T> embed(const std::string& key) const override {
    auto it = table_float_.find(key);
    if (it == table_float_.end()) throw MissingEmbedding(key);
    Tensor<T> out(1, dim_);
    for (std::size_t j = 0; j < dim_; ++j) out.at(0, j) = static_cast<T>(it->second[j]);
    return out;
  }

 private:
  std::map<std::string, std::vector<float>> table_float_;
  std::size_t dim_ = 0;
};

}  // namespace asmalign
