#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "asmalign/util.hpp"

namespace asmalign {

struct VocabTooSmall : Error {
  explicit VocabTooSmall(const std::string& msg) : Error("VocabTooSmall: " + msg) {}
};

struct UnknownTokenId : Error {
  explicit UnknownTokenId(int id) : Error("UnknownTokenId: " + std::to_string(id)) {}
};

// Token id layout, fixed so reserved ids never depend on the corpus:
//   0        PAD
//   1        MASK
//   2..257   BYTE<0..255> fallback
//   258..258+K-1   INSTR<0..K-1> jump symbols (K = max_instructions)
//   258+K..  learned WordPiece tokens (alphabet chars, then merges, then filler)
class Vocab {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kMaskId = 1;
  static constexpr int kByteBase = 2;
  static constexpr std::size_t kReservedBeforeJumps = 258;

  Vocab() = default;
  Vocab(std::size_t max_instructions, std::vector<std::string> learned, std::size_t n_matchable)
      : max_instructions_(max_instructions),
        learned_(std::move(learned)),
        n_matchable_(n_matchable) {
    build_matcher();
  }

  std::size_t max_instructions() const { return max_instructions_; }
  std::size_t jump_base() const { return kReservedBeforeJumps; }
  std::size_t learned_base() const { return kReservedBeforeJumps + max_instructions_; }
  std::size_t size() const { return learned_base() + learned_.size(); }
  std::size_t matchable_count() const { return n_matchable_; }
  const std::vector<std::string>& learned_tokens() const { return learned_; }

  int jump_symbol_id(std::size_t k) const {
    if (k >= max_instructions_)
      throw UnknownTokenId(static_cast<int>(jump_base() + k));
    return static_cast<int>(jump_base() + k);
  }

  bool is_jump_symbol(int id) const {
    return id >= static_cast<int>(jump_base()) && id < static_cast<int>(learned_base());
  }

  // Text a single token stands for (PAD yields empty text).
  std::string token_text(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= size()) throw UnknownTokenId(id);
    if (id == kPadId) return "";
    if (id == kMaskId) return "[MASK]";
    if (id < static_cast<int>(jump_base()))
      return std::string(1, static_cast<char>(id - kByteBase));
    if (id < static_cast<int>(learned_base()))
      return "INSTR" + std::to_string(id - static_cast<int>(jump_base()));
    return learned_[static_cast<std::size_t>(id) - learned_base()];
  }

  // Greedy longest-match over learned tokens with byte fallback.
  std::vector<int> match(const std::string& text) const {
    std::vector<int> out;
    std::size_t p = 0;
    while (p < text.size()) {
      std::size_t best = 0;
      int best_id = -1;
      std::size_t cap = std::min(max_token_len_, text.size() - p);
      for (std::size_t len = cap; len >= 1; --len) {
        auto it = matcher_.find(text.substr(p, len));
        if (it != matcher_.end()) {
          best = len;
          best_id = it->second;
          break;
        }
      }
      if (best_id < 0) {
        out.push_back(kByteBase + static_cast<unsigned char>(text[p]));
        p += 1;
      } else {
        out.push_back(best_id);
        p += best;
      }
    }
    return out;
  }

  // ---- persistence (versioned text format, byte-deterministic) ----

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write vocab file: " + path);
    os << "asmalign-vocab v1\n";
    os << "max_instructions " << max_instructions_ << "\n";
    os << "pad " << kPadId << "\n";
    os << "mask " << kMaskId << "\n";
    os << "byte_base " << kByteBase << "\n";
    os << "jump_base " << jump_base() << "\n";
    os << "matchable " << n_matchable_ << "\n";
    os << "learned " << learned_.size() << "\n";
    for (const auto& t : learned_) os << escape(t) << "\n";
  }

  static Vocab load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot read vocab file: " + path);
    std::string line;
    std::getline(is, line);
    if (line != "asmalign-vocab v1") throw Error("bad vocab header in " + path);
    auto read_kv = [&](const std::string& key) -> std::uint64_t {
      std::getline(is, line);
      std::istringstream ls(line);
      std::string k;
      std::uint64_t v;
      if (!(ls >> k >> v) || k != key) throw Error("bad vocab field '" + key + "' in " + path);
      return v;
    };
    std::size_t max_instructions = read_kv("max_instructions");
    read_kv("pad");
    read_kv("mask");
    read_kv("byte_base");
    read_kv("jump_base");
    std::size_t matchable = read_kv("matchable");
    std::size_t count = read_kv("learned");
    std::vector<std::string> learned;
    learned.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(is, line)) throw Error("truncated vocab file: " + path);
      learned.push_back(unescape(line));
    }
    return Vocab(max_instructions, std::move(learned), matchable);
  }

 private:
  void build_matcher() {
    matcher_.clear();
    max_token_len_ = 1;
    for (std::size_t i = 0; i < n_matchable_ && i < learned_.size(); ++i) {
      matcher_[learned_[i]] = static_cast<int>(learned_base() + i);
      max_token_len_ = std::max(max_token_len_, learned_[i].size());
    }
  }

  static std::string escape(const std::string& s) {
    std::ostringstream os;
    for (unsigned char c : s) {
      if (c == '%' || c < 0x21 || c > 0x7e) {
        static const char* hex = "0123456789ABCDEF";
        os << '%' << hex[c >> 4] << hex[c & 0xf];
      } else {
        os << static_cast<char>(c);
      }
    }
    return os.str();
  }

  static std::string unescape(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '%' && i + 2 < s.size()) {
        auto hexval = [](char c) -> int {
          if (c >= '0' && c <= '9') return c - '0';
          if (c >= 'A' && c <= 'F') return c - 'A' + 10;
          if (c >= 'a' && c <= 'f') return c - 'a' + 10;
          return -1;
        };
        int hi = hexval(s[i + 1]), lo = hexval(s[i + 2]);
        if (hi >= 0 && lo >= 0) {
          out += static_cast<char>(hi * 16 + lo);
          i += 2;
          continue;
        }
      }
      out += s[i];
    }
    return out;
  }

  std::size_t max_instructions_ = 0;
  std::vector<std::string> learned_;
  std::size_t n_matchable_ = 0;
  std::unordered_map<std::string, int> matcher_;
  std::size_t max_token_len_ = 1;
};

namespace detail {

inline bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '.';
}

// Splits text into maximal word-character runs and single-character symbols.
inline std::vector<std::string> pretokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  for (char ch : text) {
    if (is_word_char(static_cast<unsigned char>(ch))) {
      word += ch;
      continue;
    }
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
    out.push_back(std::string(1, ch));
  }
  if (!word.empty()) out.push_back(word);
  return out;
}

inline bool looks_like_jump_symbol(const std::string& w) {
  if (w.rfind("INSTR", 0) != 0 || w.size() <= 5) return false;
  for (std::size_t i = 5; i < w.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(w[i]))) return false;
  return true;
}

}  // namespace detail

// WordPiece training: start from the corpus alphabet, then repeatedly merge
// the adjacent pair maximizing count(ab) / (count(a) * count(b)) until the
// vocabulary is full or no pair reaches min_freq. Remaining slots are padded
// with non-matchable filler so the result has exactly vocab_size entries.
inline Vocab train_wordpiece(const std::vector<std::string>& corpus, std::size_t vocab_size,
                             std::size_t min_freq = 2, std::size_t max_instructions = 64) {
  if (corpus.empty()) throw Error("train_wordpiece: empty corpus");

  std::map<std::string, std::uint64_t> word_freq;
  for (const auto& text : corpus)
    for (auto& w : detail::pretokenize(text))
      if (!detail::looks_like_jump_symbol(w)) ++word_freq[w];

  // alphabet = all distinct bytes of counted words, in byte order
  std::map<char, bool> alphabet_set;
  for (const auto& [w, n] : word_freq)
    for (char c : w) alphabet_set[c] = true;

  std::size_t reserved = Vocab::kReservedBeforeJumps + max_instructions;
  if (vocab_size < reserved + alphabet_set.size())
    throw VocabTooSmall("vocab_size " + std::to_string(vocab_size) + " < " +
                        std::to_string(reserved + alphabet_set.size()) +
                        " reserved + alphabet entries");

  std::vector<std::string> learned;
  for (auto& [c, _] : alphabet_set) learned.push_back(std::string(1, c));

  // each distinct word as a sequence of current symbols
  std::vector<std::pair<std::vector<std::string>, std::uint64_t>> words;
  for (const auto& [w, n] : word_freq) {
    std::vector<std::string> syms;
    for (char c : w) syms.push_back(std::string(1, c));
    words.push_back({std::move(syms), n});
  }

  while (reserved + learned.size() < vocab_size) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> pair_count;
    std::map<std::string, std::uint64_t> sym_count;
    for (const auto& [syms, n] : words) {
      for (std::size_t i = 0; i < syms.size(); ++i) {
        sym_count[syms[i]] += n;
        if (i + 1 < syms.size()) pair_count[{syms[i], syms[i + 1]}] += n;
      }
    }
    double best_score = -1.0;
    std::pair<std::string, std::string> best_pair;
    for (const auto& [pr, n] : pair_count) {
      if (n < min_freq) continue;
      double score = static_cast<double>(n) /
                     (static_cast<double>(sym_count[pr.first]) *
                      static_cast<double>(sym_count[pr.second]));
      if (score > best_score) {
        best_score = score;
        best_pair = pr;
      }
    }
    if (best_score < 0) break;
    std::string merged = best_pair.first + best_pair.second;
    learned.push_back(merged);
    for (auto& [syms, n] : words) {
      std::vector<std::string> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == best_pair.first && syms[i + 1] == best_pair.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(syms[i]);
        }
      }
      syms = std::move(next);
    }
  }

  std::size_t n_matchable = learned.size();
  std::size_t filler = 0;
  while (reserved + learned.size() < vocab_size)
    learned.push_back("[unused" + std::to_string(filler++) + "]");
  return Vocab(max_instructions, std::move(learned), n_matchable);
}

}  // namespace asmalign
