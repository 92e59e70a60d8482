#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "asmalign/util.hpp"

namespace asmalign {

struct MalformedLine : Error {
  std::size_t line_no;
  MalformedLine(std::size_t line, const std::string& detail)
      : Error("MalformedLine at line " + std::to_string(line) + ": " + detail), line_no(line) {}
};

struct EmptyFunction : Error {
  EmptyFunction() : Error("EmptyFunction: no instructions") {}
};

// Mnemonics treated as control-flow jumps. Calls are deliberately absent:
// call operands keep their textual form so callee names survive encoding.
inline const std::set<std::string>& default_jump_mnemonics() {
  static const std::set<std::string> kSet = {"jmp", "je",  "jne", "jz", "jnz", "jl",
                                             "jle", "jg",  "jge", "ja", "jb"};
  return kSet;
}

struct Instruction {
  std::uint64_t address = 0;
  std::string mnemonic;
  std::vector<std::string> operands;
  std::optional<std::uint64_t> jump_target_address;

  bool operator==(const Instruction&) const = default;
};

struct AssemblyFunction {
  std::string name;
  std::uint64_t base_address = 0;
  std::vector<Instruction> instructions;
  std::map<std::string, std::string> metadata;

  bool operator==(const AssemblyFunction&) const = default;

  // Index of the instruction at `address`, or -1.
  int index_of_address(std::uint64_t address) const {
    for (std::size_t i = 0; i < instructions.size(); ++i)
      if (instructions[i].address == address) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string collapse_spaces(const std::string& s) {
  std::string out;
  bool in_space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t') {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out += ' ';
    in_space = false;
    out += c;
  }
  return out;
}

inline std::string hex_address(std::uint64_t a) {
  std::ostringstream os;
  os << "0x" << std::hex << a;
  return os.str();
}

inline bool parse_address(const std::string& s, std::uint64_t& out) {
  if (s.size() > 2 && (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0)) {
    std::uint64_t v = 0;
    for (std::size_t i = 2; i < s.size(); ++i) {
      char c = s[i];
      int d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
      else return false;
      v = v * 16 + static_cast<std::uint64_t>(d);
    }
    out = v;
    return true;
  }
  if (s.empty()) return false;
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  out = v;
  return true;
}

inline bool is_label_line(const std::string& line, std::string& name) {
  if (line.size() < 2 || line.back() != ':') return false;
  std::string body = line.substr(0, line.size() - 1);
  if (body.empty()) return false;
  char c0 = body[0];
  if (!(std::isalpha(static_cast<unsigned char>(c0)) || c0 == '_' || c0 == '.' || c0 == '$' ||
        c0 == '@'))
    return false;
  for (char c : body)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$' ||
          c == '@'))
      return false;
  name = body;
  return true;
}

}  // namespace detail

// Parses the canonical disassembly text format: one instruction per line as
// `<hex-address>: <mnemonic> [op1, op2, ...]`, with optional `label:` lines.
// Jump operands are resolved to internal instruction addresses where possible
// and rewritten to the canonical `0x..` form. Unresolvable numeric targets are
// recorded in metadata under `external_jump.<index>`.
inline AssemblyFunction parse_disassembly(
    const std::string& text, const std::set<std::string>& jump_mnemonics = default_jump_mnemonics()) {
  AssemblyFunction f;
  struct PendingLabel {
    std::string name;
    std::size_t next_instruction;  // index the label attaches to
  };
  std::vector<PendingLabel> labels;
  std::istringstream is(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = detail::trim(raw);
    if (line.empty()) continue;
    std::string label;
    if (detail::is_label_line(line, label)) {
      labels.push_back({label, f.instructions.size()});
      continue;
    }
    std::size_t colon = line.find(':');
    if (colon == std::string::npos) throw MalformedLine(line_no, "missing address: " + line);
    std::uint64_t address = 0;
    if (!detail::parse_address(detail::trim(line.substr(0, colon)), address))
      throw MalformedLine(line_no, "bad address: " + line);
    std::string rest = detail::trim(line.substr(colon + 1));
    if (rest.empty()) throw MalformedLine(line_no, "missing mnemonic: " + line);
    Instruction insn;
    insn.address = address;
    std::size_t sp = rest.find_first_of(" \t");
    if (sp == std::string::npos) {
      insn.mnemonic = rest;
    } else {
      insn.mnemonic = rest.substr(0, sp);
      std::string ops = rest.substr(sp + 1);
      std::size_t pos = 0;
      while (true) {
        std::size_t comma = ops.find(',', pos);
        std::string piece =
            detail::collapse_spaces(detail::trim(ops.substr(pos, comma - pos)));
        if (piece.empty()) throw MalformedLine(line_no, "empty operand: " + line);
        insn.operands.push_back(piece);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }
    if (!f.instructions.empty() && address <= f.instructions.back().address)
      throw MalformedLine(line_no, "addresses must strictly increase: " + line);
    f.instructions.push_back(std::move(insn));
  }
  if (f.instructions.empty()) throw EmptyFunction();
  f.base_address = f.instructions.front().address;

  std::map<std::string, std::uint64_t> label_to_address;
  for (const auto& l : labels)
    if (l.next_instruction < f.instructions.size())
      label_to_address[l.name] = f.instructions[l.next_instruction].address;
  if (!labels.empty() && labels.front().next_instruction == 0) f.name = labels.front().name;

  for (std::size_t i = 0; i < f.instructions.size(); ++i) {
    auto& insn = f.instructions[i];
    if (!jump_mnemonics.count(insn.mnemonic) || insn.operands.empty()) continue;
    const std::string& target = insn.operands[0];
    auto lit = label_to_address.find(target);
    if (lit != label_to_address.end()) {
      insn.jump_target_address = lit->second;
      insn.operands[0] = detail::hex_address(lit->second);
      continue;
    }
    std::uint64_t address = 0;
    if (!detail::parse_address(target, address)) continue;  // textual target, kept as-is
    if (f.index_of_address(address) >= 0) {
      insn.jump_target_address = address;
      insn.operands[0] = detail::hex_address(address);
    } else {
      f.metadata["external_jump." + std::to_string(i)] = target;
    }
  }
  return f;
}

// Canonical serialization: numeric lowercase-hex addresses, resolved jump
// operands printed as addresses, labels dropped.
inline std::string canonical_text(const AssemblyFunction& f) {
  std::ostringstream os;
  for (const auto& insn : f.instructions) {
    os << detail::hex_address(insn.address) << ": " << insn.mnemonic;
    for (std::size_t i = 0; i < insn.operands.size(); ++i)
      os << (i == 0 ? " " : ", ") << insn.operands[i];
    os << "\n";
  }
  return os.str();
}

// Leader-based block count: leaders are the first instruction, every resolved
// internal jump target, and every instruction following a jump.
inline std::size_t count_basic_blocks(const AssemblyFunction& f,
                                      const std::set<std::string>& jump_mnemonics =
                                          default_jump_mnemonics()) {
  if (f.instructions.empty()) return 0;
  std::set<std::size_t> leaders = {0};
  for (std::size_t i = 0; i < f.instructions.size(); ++i) {
    const auto& insn = f.instructions[i];
    if (!jump_mnemonics.count(insn.mnemonic)) continue;
    if (insn.jump_target_address) {
      int t = f.index_of_address(*insn.jump_target_address);
      if (t >= 0) leaders.insert(static_cast<std::size_t>(t));
    }
    if (i + 1 < f.instructions.size()) leaders.insert(i + 1);
  }
  return leaders.size();
}

inline std::vector<AssemblyFunction> filter_corpus(const std::vector<AssemblyFunction>& funcs,
                                                   std::size_t min_blocks) {
  if (min_blocks < 1) throw Error("filter_corpus: min_blocks must be >= 1");
  std::vector<AssemblyFunction> out;
  for (const auto& f : funcs)
    if (count_basic_blocks(f) >= min_blocks) out.push_back(f);
  return out;
}

}  // namespace asmalign
