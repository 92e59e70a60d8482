#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "asmalign/asm_model.hpp"
#include "asmalign/vocab.hpp"

namespace asmalign {

// Rewrites absolute addresses as instruction indices 0..n-1 and internal jump
// operands as symbolic `INSTR<k>` text. Idempotent; invariant under a constant
// shift of all addresses.
inline AssemblyFunction rebase(const AssemblyFunction& f) {
  AssemblyFunction out = f;
  std::map<std::uint64_t, std::size_t> index_of;
  for (std::size_t i = 0; i < f.instructions.size(); ++i)
    index_of[f.instructions[i].address] = i;
  for (std::size_t i = 0; i < out.instructions.size(); ++i) {
    auto& insn = out.instructions[i];
    insn.address = i;
    if (insn.jump_target_address) {
      std::size_t k = index_of.at(*insn.jump_target_address);
      insn.jump_target_address = k;
      insn.operands[0] = "INSTR" + std::to_string(k);
    }
  }
  out.base_address = 0;
  return out;
}

inline bool is_rebased(const AssemblyFunction& f) {
  for (std::size_t i = 0; i < f.instructions.size(); ++i)
    if (f.instructions[i].address != i) return false;
  return true;
}

struct TokenSequence {
  std::vector<int> token_ids;
  std::vector<int> instruction_index;
  std::vector<int> position;
  std::vector<char> jump_symbol_mask;
  bool truncated = false;
  std::size_t instructions_encoded = 0;

  std::size_t size() const { return token_ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

// Canonical per-instruction content (no address prefix): mnemonic and
// operands with single-space / ", " separators.
inline std::string instruction_content(const Instruction& insn) {
  std::string out = insn.mnemonic;
  for (std::size_t i = 0; i < insn.operands.size(); ++i) {
    out += (i == 0 ? " " : ", ");
    out += insn.operands[i];
  }
  return out;
}

// Text stream used to train the tokenizer: instruction contents with resolved
// jump operands dropped (those are encoded via reserved symbols, never via
// learned pieces).
inline std::string tokenizer_training_text(const AssemblyFunction& f) {
  std::string out;
  for (const auto& insn : f.instructions) {
    std::string content = insn.mnemonic;
    for (std::size_t i = 0; i < insn.operands.size(); ++i) {
      if (i == 0 && insn.jump_target_address) continue;
      content += (i == 0 ? " " : ", ");
      content += insn.operands[i];
    }
    out += content;
    out += "\n";
  }
  return out;
}

// Encodes a rebased function. Tokens appear in instruction order and carry
// the owning instruction's index. Truncation happens at instruction
// boundaries (recorded, not an error); instructions beyond the vocabulary's
// max_instructions reservation are never encoded.
inline TokenSequence encode(const AssemblyFunction& f, const Vocab& v, std::size_t max_seq_len) {
  if (!is_rebased(f)) throw Error("encode: function must be rebased first");
  TokenSequence seq;
  std::size_t n = f.instructions.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= v.max_instructions()) {
      seq.truncated = true;
      break;
    }
    const auto& insn = f.instructions[i];
    std::vector<int> ids;
    std::vector<char> jmask;
    auto append_text = [&](const std::string& text) {
      for (int id : v.match(text)) {
        ids.push_back(id);
        jmask.push_back(0);
      }
    };
    append_text(insn.mnemonic);
    for (std::size_t j = 0; j < insn.operands.size(); ++j) {
      append_text(j == 0 ? " " : ", ");
      if (j == 0 && insn.jump_target_address &&
          *insn.jump_target_address < v.max_instructions()) {
        ids.push_back(v.jump_symbol_id(*insn.jump_target_address));
        jmask.push_back(1);
      } else {
        append_text(insn.operands[j]);
      }
    }
    if (seq.size() + ids.size() > max_seq_len) {
      if (i == 0) {
        // degenerate case: a single instruction longer than the whole budget
        ids.resize(max_seq_len);
        jmask.resize(max_seq_len);
        for (std::size_t t = 0; t < ids.size(); ++t) {
          seq.token_ids.push_back(ids[t]);
          seq.instruction_index.push_back(0);
          seq.jump_symbol_mask.push_back(jmask[t]);
        }
      }
      seq.truncated = true;
      break;
    }
    for (std::size_t t = 0; t < ids.size(); ++t) {
      seq.token_ids.push_back(ids[t]);
      seq.instruction_index.push_back(static_cast<int>(i));
      seq.jump_symbol_mask.push_back(jmask[t]);
    }
    seq.instructions_encoded = i + 1;
  }
  seq.position.resize(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) seq.position[i] = static_cast<int>(i);
  return seq;
}

// Reconstructs canonical rebased text. Byte-identical to the encoder input's
// canonical form when the sequence was not truncated.
inline std::string decode(const TokenSequence& seq, const Vocab& v) {
  std::ostringstream os;
  int current = -1;
  bool line_open = false;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    int id = seq.token_ids[i];
    std::string text = v.token_text(id);
    if (id == Vocab::kPadId) continue;
    if (seq.instruction_index[i] != current) {
      if (line_open) os << "\n";
      current = seq.instruction_index[i];
      os << detail::hex_address(static_cast<std::uint64_t>(current)) << ": ";
      line_open = true;
    }
    os << text;
  }
  if (line_open) os << "\n";
  return os.str();
}

// Appends PAD tokens up to target_len (instruction_index stays non-decreasing).
inline TokenSequence pad_sequence(const TokenSequence& seq, std::size_t target_len) {
  TokenSequence out = seq;
  int last_index = out.instruction_index.empty() ? 0 : out.instruction_index.back();
  while (out.size() < target_len) {
    out.token_ids.push_back(Vocab::kPadId);
    out.instruction_index.push_back(last_index);
    out.position.push_back(static_cast<int>(out.position.size()));
    out.jump_symbol_mask.push_back(0);
  }
  return out;
}

}  // namespace asmalign
