#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "asmalign/align.hpp"

namespace asmalign {

struct MissingPositive : Error {
  explicit MissingPositive(const std::string& query) : Error("MissingPositive: " + query) {}
};

struct EmptyClass : Error {
  explicit EmptyClass(int cls) : Error("EmptyClass: class " + std::to_string(cls) +
                                       " has no training examples") {}
};

struct InsufficientClassExamples : Error {
  explicit InsufficientClassExamples(const std::string& msg)
      : Error("InsufficientClassExamples: " + msg) {}
};

struct MetricsReport {
  double mrr = 0;
  double recall_at_1 = 0;
  double accuracy = 0;
  std::map<std::string, double> breakdown;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["mrr"] = mrr;
    j["recall_at_1"] = recall_at_1;
    j["accuracy"] = accuracy;
    j["breakdown"] = breakdown;
    return j;
  }
};

// ---- zero-shot prompt classification ----

template <typename T>
struct PromptSet {
  std::vector<std::string> labels;
  std::vector<std::string> prompts;
  Tensor<T> embeddings;  // [n x d], row-aligned with labels
};

// `label<TAB>prompt-template` lines; `{label}` in a template is substituted.
inline std::vector<std::pair<std::string, std::string>> read_prompt_templates(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read prompts file: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error("prompts " + path + " line " + std::to_string(line_no) +
                  ": expected label<TAB>template");
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

inline std::string render_prompt(const std::string& tmpl, const std::string& label) {
  std::string out = tmpl;
  const std::string key = "{label}";
  std::size_t pos;
  while ((pos = out.find(key)) != std::string::npos) out.replace(pos, key.size(), label);
  return out;
}

template <typename T>
PromptSet<T> build_prompt_set(const std::vector<std::pair<std::string, std::string>>& entries,
                              const AlignModel<T>& model, const TextEncoder<T>& enc) {
  PromptSet<T> ps;
  std::set<std::string> seen;
  for (const auto& [label, tmpl] : entries) {
    if (!seen.insert(label).second) throw Error("duplicate prompt label: " + label);
    ps.labels.push_back(label);
    ps.prompts.push_back(render_prompt(tmpl, label));
  }
  if (ps.labels.empty()) throw Error("empty prompt set");
  ps.embeddings = Tensor<T>(ps.labels.size(), model.encoder_config.hidden_dim);
  for (std::size_t i = 0; i < ps.prompts.size(); ++i) {
    Tensor<T> row = model.embed_text(enc, ps.prompts[i]);
    for (std::size_t j = 0; j < row.cols(); ++j) ps.embeddings.at(i, j) = row.at(0, j);
  }
  return ps;
}

template <typename T>
struct ZeroShotResult {
  std::size_t label_index = 0;
  std::vector<T> probabilities;
};

// Dot-product logits against each prompt embedding, softmax for probabilities,
// argmax with lowest-index tie-break.
template <typename T>
ZeroShotResult<T> zero_shot_classify(const Tensor<T>& asm_embedding, const PromptSet<T>& ps) {
  if (ps.labels.empty()) throw Error("zero_shot_classify: empty prompt set");
  if (asm_embedding.numel() != ps.embeddings.cols())
    throw DimensionMismatch("zero_shot_classify embedding dim " +
                            std::to_string(asm_embedding.numel()));
  std::size_t n = ps.embeddings.rows();
  std::vector<T> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    T dot = 0;
    for (std::size_t j = 0; j < ps.embeddings.cols(); ++j)
      dot += asm_embedding.data[j] * ps.embeddings.at(i, j);
    logits[i] = dot;
  }
  ZeroShotResult<T> r;
  r.label_index = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (logits[i] > logits[r.label_index]) r.label_index = i;
  T mx = logits[r.label_index];
  T z = 0;
  r.probabilities.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.probabilities[i] = std::exp(logits[i] - mx);
    z += r.probabilities[i];
  }
  for (auto& p : r.probabilities) p /= z;
  return r;
}

// ---- retrieval (MRR / Recall@1 with pool sampling) ----

template <typename T>
struct EmbeddedItem {
  std::string id;
  std::string group;
  std::vector<T> embedding;
};

struct RetrievalConfig {
  std::size_t pool_size = 32;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::size_t workers = 1;
};

namespace detail {

template <typename T>
T dot(const std::vector<T>& a, const std::vector<T>& b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// Per query: rank the designated positive (first candidate of the same group)
// among pool_size-1 negatives sampled without replacement from other groups.
// Ties rank the positive after equal-similarity negatives. Deterministic per
// seed regardless of worker count.
template <typename T>
MetricsReport retrieval_eval(const std::vector<EmbeddedItem<T>>& queries,
                             const std::vector<EmbeddedItem<T>>& candidates,
                             const RetrievalConfig& cfg) {
  if (cfg.pool_size < 1 || cfg.pool_size > candidates.size())
    throw Error("retrieval_eval: pool_size must be in [1, candidates]");
  if (queries.empty()) throw Error("retrieval_eval: no queries");

  struct PerQuery {
    std::size_t positive;
    std::vector<std::size_t> negatives;
  };
  std::vector<PerQuery> prep(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    bool found = false;
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      if (candidates[ci].group == queries[qi].group) {
        if (!found) {
          prep[qi].positive = ci;
          found = true;
        }
      } else {
        prep[qi].negatives.push_back(ci);
      }
    }
    if (!found) throw MissingPositive(queries[qi].id);
    if (prep[qi].negatives.size() + 1 < cfg.pool_size)
      throw Error("retrieval_eval: not enough negatives for pool of " +
                  std::to_string(cfg.pool_size));
  }

  std::size_t total = cfg.trials * queries.size();
  std::vector<double> reciprocal(total, 0.0);
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t flat = lo; flat < hi; ++flat) {
      std::size_t trial = flat / queries.size();
      std::size_t qi = flat % queries.size();
      const auto& q = queries[qi];
      const auto& pq = prep[qi];
      Rng rng(mix_seed(cfg.seed, trial * 0x100000ULL + qi));
      auto picks = rng.sample_without_replacement(pq.negatives.size(), cfg.pool_size - 1);
      T sim_pos = detail::dot(q.embedding, candidates[pq.positive].embedding);
      std::size_t rank = 1;
      for (std::size_t s : picks) {
        T sim = detail::dot(q.embedding, candidates[pq.negatives[s]].embedding);
        if (sim >= sim_pos) ++rank;
      }
      reciprocal[flat] = 1.0 / static_cast<double>(rank);
    }
  };
  std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  if (workers == 1) {
    run_range(0, total);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (total + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t lo = w * chunk, hi = std::min(total, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  MetricsReport report;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    double mrr = 0, r1 = 0;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      double rr = reciprocal[trial * queries.size() + qi];
      mrr += rr;
      r1 += (rr == 1.0);
    }
    mrr /= static_cast<double>(queries.size());
    r1 /= static_cast<double>(queries.size());
    report.breakdown["trial" + std::to_string(trial) + ".mrr"] = mrr;
    report.breakdown["trial" + std::to_string(trial) + ".recall_at_1"] = r1;
    report.mrr += mrr;
    report.recall_at_1 += r1;
  }
  report.mrr /= static_cast<double>(cfg.trials);
  report.recall_at_1 /= static_cast<double>(cfg.trials);
  return report;
}

// ---- linear probe ----

struct ProbeConfig {
  std::size_t epochs = 300;
  double lr = 0.1;
};

// Trains only a linear map + softmax cross entropy on frozen embeddings;
// returns eval accuracy.
template <typename T>
double linear_probe(const Tensor<T>& train_x, const std::vector<int>& train_y,
                    const Tensor<T>& eval_x, const std::vector<int>& eval_y,
                    std::size_t classes, const ProbeConfig& cfg = {}) {
  if (train_x.rows() != train_y.size() || eval_x.rows() != eval_y.size())
    throw Error("linear_probe: label count mismatch");
  if (classes < 2) throw Error("linear_probe: need at least 2 classes");
  std::vector<std::size_t> per_class(classes, 0);
  for (int y : train_y) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw Error("linear_probe: label out of range");
    ++per_class[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (per_class[c] == 0) throw EmptyClass(static_cast<int>(c));

  ParamStore<T> store;
  store.add("w", Tensor<T>(train_x.cols(), classes));
  store.add("b", Tensor<T>(1, classes));
  AdamConfig adam;
  adam.lr = cfg.lr;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Graph<T> g;
    auto b = bind_params(g, store);
    auto logits = g.add(g.matmul(g.constant(train_x), b.at("w")), b.at("b"));
    auto loss = g.cross_entropy(logits, train_y, Reduction::Mean);
    g.backward(loss);
    std::vector<Tensor<T>> grads(store.size());
    g.flush_param_grads(grads);
    store.step(grads, adam);
  }

  const auto& w = store.value("w");
  const auto& bias = store.value("b");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval_x.rows(); ++i) {
    std::size_t arg = 0;
    T best = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      T v = bias.at(0, c);
      for (std::size_t j = 0; j < eval_x.cols(); ++j) v += eval_x.at(i, j) * w.at(j, c);
      if (c == 0 || v > best) {
        best = v;
        arg = c;
      }
    }
    if (eval_y[i] >= 0 && arg == static_cast<std::size_t>(eval_y[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(eval_x.rows());
}

// ---- few-shot split protocol ----

struct FewShotSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

// Exactly k examples per class into train, remainder into eval; deterministic
// per seed.
inline FewShotSplit few_shot_split(const std::vector<int>& labels, std::size_t k,
                                   std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> per_class;
  for (std::size_t i = 0; i < labels.size(); ++i) per_class[labels[i]].push_back(i);
  FewShotSplit split;
  for (auto& [cls, idxs] : per_class) {
    if (idxs.size() < k)
      throw InsufficientClassExamples("class " + std::to_string(cls) + " has " +
                                      std::to_string(idxs.size()) + " < k=" + std::to_string(k));
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls) + 0x66657773ULL));
    rng.shuffle(idxs);
    for (std::size_t i = 0; i < idxs.size(); ++i)
      (i < k ? split.train : split.eval).push_back(idxs[i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.eval.begin(), split.eval.end());
  return split;
}

struct FewShotReport {
  // per k: the individual trial accuracies and their mean
  std::map<std::size_t, std::vector<double>> trial_accuracy;
  std::map<std::size_t, double> mean_accuracy;

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (const auto& [k, trials] : trial_accuracy) {
      nlohmann::json e;
      e["trials"] = trials;
      e["mean"] = mean_accuracy.at(k);
      j["k" + std::to_string(k)] = e;
    }
    return j;
  }
};

template <typename T>
FewShotReport few_shot_eval(const Tensor<T>& embeddings, const std::vector<int>& labels,
                            std::size_t classes, const std::vector<std::size_t>& ks,
                            std::size_t n_trials, std::uint64_t base_seed,
                            const ProbeConfig& probe = {}) {
  FewShotReport report;
  for (std::size_t k : ks) {
    double sum = 0;
    for (std::size_t trial = 0; trial < n_trials; ++trial) {
      auto split = few_shot_split(labels, k, mix_seed(base_seed, trial));
      auto take = [&](const std::vector<std::size_t>& idx, Tensor<T>& x, std::vector<int>& y) {
        x = Tensor<T>(idx.size(), embeddings.cols());
        y.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          for (std::size_t j = 0; j < embeddings.cols(); ++j)
            x.at(i, j) = embeddings.at(idx[i], j);
          y[i] = labels[idx[i]];
        }
      };
      Tensor<T> tx, ex;
      std::vector<int> ty, ey;
      take(split.train, tx, ty);
      take(split.eval, ex, ey);
      double acc = linear_probe(tx, ty, ex, ey, classes, probe);
      report.trial_accuracy[k].push_back(acc);
      sum += acc;
    }
    report.mean_accuracy[k] = sum / static_cast<double>(n_trials);
  }
  return report;
}

// ---- embedding export ----

template <typename T>
void export_embeddings(const std::vector<std::string>& ids, const Tensor<T>& embeddings,
                       const std::string& path) {
  if (ids.size() != embeddings.rows()) throw Error("export_embeddings: id/row mismatch");
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw Error("export_embeddings: duplicate id " + id);
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  rows.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<float> v(embeddings.cols());
    for (std::size_t j = 0; j < embeddings.cols(); ++j)
      v[j] = static_cast<float>(embeddings.at(i, j));
    rows.push_back({ids[i], std::move(v)});
  }
  write_embedding_file(path, rows, embeddings.cols());
}

}  // namespace asmalign
