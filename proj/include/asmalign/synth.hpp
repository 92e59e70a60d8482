#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "asmalign/align.hpp"
#include "asmalign/asm_model.hpp"
#include "asmalign/tokenizer.hpp"

namespace asmalign {

struct TemplateParseError : Error {
  explicit TemplateParseError(const std::string& msg) : Error("TemplateParseError: " + msg) {}
};

struct TemplateSpec {
  std::string template_id;
  std::string class_label;
  std::string body;  // canonical disassembly text, >= 3 basic blocks
  std::vector<std::string> explanation_templates;
};

struct PerturbationConfig {
  bool register_rename = true;
  double nop_insertion_rate = 0.08;
  bool independent_reorder = true;
  bool block_shuffle = true;
  std::uint64_t variant_seed = 0;
};

namespace detail {

struct StructuralInsn {
  std::string mnemonic;
  std::vector<std::string> operands;
  int target = -1;  // index of the jump target instruction, -1 if none
};

inline std::vector<StructuralInsn> to_structural(const AssemblyFunction& f) {
  std::vector<StructuralInsn> out;
  out.reserve(f.instructions.size());
  for (const auto& insn : f.instructions) {
    StructuralInsn s;
    s.mnemonic = insn.mnemonic;
    s.operands = insn.operands;
    if (insn.jump_target_address) s.target = f.index_of_address(*insn.jump_target_address);
    out.push_back(std::move(s));
  }
  return out;
}

// Rebuilds a function with fresh addresses: base plus per-instruction byte
// sizes drawn from rng (or 1 when rng is null). Jump operands are rewritten.
inline AssemblyFunction from_structural(const std::vector<StructuralInsn>& insns,
                                        const std::string& name, std::uint64_t base,
                                        Rng* spacing_rng) {
  AssemblyFunction f;
  f.name = name;
  f.base_address = base;
  std::vector<std::uint64_t> addr(insns.size());
  std::uint64_t a = base;
  for (std::size_t i = 0; i < insns.size(); ++i) {
    addr[i] = a;
    a += spacing_rng ? 1 + spacing_rng->uniform_index(7) : 1;
  }
  for (std::size_t i = 0; i < insns.size(); ++i) {
    Instruction insn;
    insn.address = addr[i];
    insn.mnemonic = insns[i].mnemonic;
    insn.operands = insns[i].operands;
    if (insns[i].target >= 0) {
      insn.jump_target_address = addr[static_cast<std::size_t>(insns[i].target)];
      insn.operands[0] = hex_address(*insn.jump_target_address);
    }
    f.instructions.push_back(std::move(insn));
  }
  return f;
}

inline std::set<std::size_t> leader_set(const std::vector<StructuralInsn>& insns,
                                        const std::set<std::string>& jumps) {
  std::set<std::size_t> leaders = {0};
  for (std::size_t i = 0; i < insns.size(); ++i) {
    if (!jumps.count(insns[i].mnemonic)) continue;
    if (insns[i].target >= 0) leaders.insert(static_cast<std::size_t>(insns[i].target));
    if (i + 1 < insns.size()) leaders.insert(i + 1);
  }
  return leaders;
}

// The interchangeable register rows: all width aliases rename together.
inline const std::array<std::array<const char*, 3>, 8>& register_rows() {
  static const std::array<std::array<const char*, 3>, 8> rows = {{
      {"rax", "eax", "al"},
      {"rbx", "ebx", "bl"},
      {"rcx", "ecx", "cl"},
      {"rdx", "edx", "dl"},
      {"rsi", "esi", "sil"},
      {"rdi", "edi", "dil"},
      {"r8", "r8d", "r8b"},
      {"r9", "r9d", "r9b"},
  }};
  return rows;
}

inline std::string map_words(const std::string& text,
                             const std::map<std::string, std::string>& mapping) {
  std::string out;
  std::string word;
  auto flush = [&]() {
    if (word.empty()) return;
    auto it = mapping.find(word);
    out += (it == mapping.end()) ? word : it->second;
    word.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
      word += c;
    } else {
      flush();
      out += c;
    }
  }
  flush();
  return out;
}

inline std::set<std::string> register_words(const StructuralInsn& insn) {
  std::set<std::string> regs;
  static std::set<std::string> pool = [] {
    std::set<std::string> p;
    for (const auto& row : register_rows())
      for (const char* r : row) p.insert(r);
    return p;
  }();
  for (const auto& op : insn.operands) {
    std::string word;
    auto flush = [&]() {
      if (!word.empty() && pool.count(word)) regs.insert(word);
      word.clear();
    };
    for (char c : op) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
        word += c;
      else
        flush();
    }
    flush();
  }
  return regs;
}

inline bool touches_memory(const StructuralInsn& insn) {
  for (const auto& op : insn.operands)
    if (op.find('[') != std::string::npos) return true;
  return false;
}

}  // namespace detail

// Applies the configured structural perturbations. Internal jump targets stay
// resolvable and the basic-block count is preserved; with everything disabled
// the input is returned unchanged.
inline AssemblyFunction perturb(const AssemblyFunction& f, const PerturbationConfig& cfg,
                                std::uint64_t seed) {
  const auto& jumps = default_jump_mnemonics();
  auto insns = detail::to_structural(f);
  Rng rng(mix_seed(seed, 0x70657274ULL));
  bool changed = false;
  std::size_t blocks_before = detail::leader_set(insns, jumps).size();

  if (cfg.register_rename) {
    std::vector<std::size_t> perm(detail::register_rows().size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    std::map<std::string, std::string> mapping;
    for (std::size_t i = 0; i < perm.size(); ++i)
      for (std::size_t w = 0; w < 3; ++w)
        mapping[detail::register_rows()[i][w]] = detail::register_rows()[perm[i]][w];
    for (auto& insn : insns) {
      for (std::size_t o = 0; o < insn.operands.size(); ++o) {
        if (insn.target >= 0 && o == 0) continue;
        std::string renamed = detail::map_words(insn.operands[o], mapping);
        if (renamed != insn.operands[o]) {
          insn.operands[o] = renamed;
          changed = true;
        }
      }
    }
  }

  if (cfg.independent_reorder) {
    static const std::set<std::string> kSwappable = {"mov", "lea",  "movzx", "add", "sub",
                                                     "xor", "imul", "shl",   "shr", "not"};
    std::set<std::size_t> targets;
    for (const auto& insn : insns)
      if (insn.target >= 0) targets.insert(static_cast<std::size_t>(insn.target));
    for (std::size_t i = 0; i + 1 < insns.size(); ++i) {
      const auto& a = insns[i];
      const auto& b = insns[i + 1];
      if (targets.count(i) || targets.count(i + 1)) continue;
      if (!kSwappable.count(a.mnemonic) || !kSwappable.count(b.mnemonic)) continue;
      if (detail::touches_memory(a) && detail::touches_memory(b)) continue;
      auto ra = detail::register_words(a);
      auto rb = detail::register_words(b);
      bool overlap = false;
      for (const auto& r : ra)
        if (rb.count(r)) overlap = true;
      if (overlap) continue;
      if (rng.uniform_real() < 0.5) {
        std::swap(insns[i], insns[i + 1]);
        changed = true;
        ++i;  // do not re-swap the same pair
      }
    }
  }

  if (cfg.nop_insertion_rate > 0) {
    for (std::size_t g = insns.size() - 1; g >= 1; --g) {
      if (jumps.count(insns[g - 1].mnemonic)) continue;
      if (rng.uniform_real() >= cfg.nop_insertion_rate) continue;
      for (auto& insn : insns)
        if (insn.target >= static_cast<int>(g)) ++insn.target;
      insns.insert(insns.begin() + static_cast<std::ptrdiff_t>(g),
                   detail::StructuralInsn{"nop", {}, -1});
      changed = true;
    }
  }

  if (cfg.block_shuffle) {
    auto leaders = detail::leader_set(insns, jumps);
    std::vector<std::size_t> starts(leaders.begin(), leaders.end());
    std::set<std::size_t> targets;
    for (const auto& insn : insns)
      if (insn.target >= 0) targets.insert(static_cast<std::size_t>(insn.target));
    // movable: non-entry blocks that start at a jump target and end in an
    // unconditional jmp, so relocating them never merges or splits blocks
    std::vector<std::size_t> movable;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (std::size_t bi = 0; bi < starts.size(); ++bi) {
      std::size_t lo = starts[bi];
      std::size_t hi = (bi + 1 < starts.size()) ? starts[bi + 1] : insns.size();
      spans.push_back({lo, hi});
      if (bi == 0) continue;
      if (!targets.count(lo)) continue;
      const auto& last = insns[hi - 1];
      if (last.mnemonic == "jmp" && last.target >= 0) movable.push_back(bi);
    }
    if (movable.size() >= 2) {
      std::vector<std::size_t> order = movable;
      rng.shuffle(order);
      std::map<std::size_t, std::size_t> slot_fill;  // movable slot -> shuffled block
      for (std::size_t s = 0; s < movable.size(); ++s) slot_fill[movable[s]] = order[s];
      std::vector<detail::StructuralInsn> rebuilt;
      std::vector<int> old_to_new(insns.size(), -1);
      for (std::size_t bi = 0; bi < spans.size(); ++bi) {
        std::size_t src = slot_fill.count(bi) ? slot_fill[bi] : bi;
        for (std::size_t k = spans[src].first; k < spans[src].second; ++k) {
          old_to_new[k] = static_cast<int>(rebuilt.size());
          rebuilt.push_back(insns[k]);
        }
      }
      for (auto& insn : rebuilt)
        if (insn.target >= 0) insn.target = old_to_new[static_cast<std::size_t>(insn.target)];
      if (rebuilt.size() != insns.size()) throw Error("block_shuffle lost instructions");
      insns = std::move(rebuilt);
      changed = true;
    }
  }

  if (!changed) return f;
  std::size_t blocks_after = detail::leader_set(insns, jumps).size();
  if (blocks_after != blocks_before)
    throw Error("perturb: block count changed from " + std::to_string(blocks_before) + " to " +
                std::to_string(blocks_after));
  // round-trip through the parser so metadata (external jump flags) is rebuilt
  AssemblyFunction out =
      parse_disassembly(canonical_text(detail::from_structural(insns, f.name, f.base_address,
                                                               nullptr)));
  out.name = f.name;
  return out;
}

// Fresh address layout: random base and instruction byte sizes.
inline AssemblyFunction with_layout(const AssemblyFunction& f, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x6c61796fULL));
  std::uint64_t base = 0x400000 + rng.uniform_index(0x10000) * 0x10;
  auto insns = detail::to_structural(f);
  AssemblyFunction out =
      parse_disassembly(canonical_text(detail::from_structural(insns, f.name, base, &rng)));
  out.name = f.name;
  return out;
}

// ---- built-in templates ----

inline const std::vector<TemplateSpec>& builtin_templates() {
  static const std::vector<TemplateSpec> kTemplates = [] {
    std::vector<TemplateSpec> t;

    t.push_back({"bubble_sort", "sorting",
                 "0x0: xor ecx, ecx\n"
                 "0x1: cmp ecx, esi\n"
                 "0x2: jge 0x11\n"
                 "0x3: xor edx, edx\n"
                 "0x4: mov eax, esi\n"
                 "0x5: sub eax, ecx\n"
                 "0x6: cmp edx, eax\n"
                 "0x7: jge 0xf\n"
                 "0x8: mov r8d, [rdi+rdx*4]\n"
                 "0x9: mov r9d, [rdi+rdx*4+4]\n"
                 "0xa: cmp r8d, r9d\n"
                 "0xb: jle 0xd\n"
                 "0xc: call swap_cells\n"
                 "0xd: add edx, 1\n"
                 "0xe: jmp 0x6\n"
                 "0xf: add ecx, 1\n"
                 "0x10: jmp 0x1\n"
                 "0x11: ret\n",
                 {"Sorts an integer array in place by repeatedly swapping adjacent elements "
                  "that compare out of order. Tags: sorting, bubble sort, array, swap.",
                  "Implements bubble sort: nested passes move the largest remaining value "
                  "toward the end of the buffer. Tags: sorting, bubble sort, loops.",
                  "Orders a numeric buffer with pairwise adjacent exchanges until no "
                  "inversions remain. Tags: sorting, in-place, integers.",
                  "A quadratic exchange sort that arranges array entries in ascending order "
                  "by neighbor swaps. Tags: sorting, quadratic, array.",
                  "Walks the array repeatedly, exchanging neighboring cells that are out of "
                  "order, leaving the data sorted. Tags: sorting, swap, iteration.",
                  "Classic bubble sort over a contiguous int buffer; the inner sweep shrinks "
                  "as the sorted tail grows. Tags: sorting, exchange, buffer."}});

    t.push_back({"selection_sort", "sorting",
                 "0x0: xor ecx, ecx\n"
                 "0x1: cmp ecx, esi\n"
                 "0x2: jge 0x12\n"
                 "0x3: mov eax, ecx\n"
                 "0x4: lea edx, [rcx+1]\n"
                 "0x5: cmp edx, esi\n"
                 "0x6: jge 0xd\n"
                 "0x7: mov r8d, [rdi+rdx*4]\n"
                 "0x8: cmp r8d, [rdi+rax*4]\n"
                 "0x9: jge 0xb\n"
                 "0xa: mov eax, edx\n"
                 "0xb: add edx, 1\n"
                 "0xc: jmp 0x5\n"
                 "0xd: cmp eax, ecx\n"
                 "0xe: je 0x10\n"
                 "0xf: call swap_cells\n"
                 "0x10: add ecx, 1\n"
                 "0x11: jmp 0x1\n"
                 "0x12: ret\n",
                 {"Sorts an array by repeatedly selecting the minimum of the unsorted suffix "
                  "and swapping it into place. Tags: sorting, selection sort, array.",
                  "Implements selection sort: each outer pass finds the smallest remaining "
                  "element and exchanges it with the front. Tags: sorting, selection, swap.",
                  "Orders integers by scanning for the least element of the tail and placing "
                  "it at the current position. Tags: sorting, minimum, in-place.",
                  "A quadratic sort that tracks the index of the smallest candidate in an "
                  "inner scan, then swaps once per pass. Tags: sorting, selection sort, scan.",
                  "Arranges a buffer in ascending order with one swap per outer iteration, "
                  "chosen by a minimum search. Tags: sorting, array, comparison.",
                  "Selection sort over a contiguous int array; the inner loop hunts for the "
                  "minimum, the outer loop fixes it in place. Tags: sorting, loops, integers."}});

    t.push_back({"insertion_sort", "sorting",
                 "0x0: mov ecx, 1\n"
                 "0x1: cmp ecx, esi\n"
                 "0x2: jge 0xf\n"
                 "0x3: mov eax, [rdi+rcx*4]\n"
                 "0x4: lea edx, [rcx-1]\n"
                 "0x5: cmp edx, 0\n"
                 "0x6: jl 0xc\n"
                 "0x7: cmp [rdi+rdx*4], eax\n"
                 "0x8: jle 0xc\n"
                 "0x9: call shift_cell\n"
                 "0xa: sub edx, 1\n"
                 "0xb: jmp 0x5\n"
                 "0xc: mov [rdi+rdx*4+4], eax\n"
                 "0xd: add ecx, 1\n"
                 "0xe: jmp 0x1\n"
                 "0xf: ret\n",
                 {"Sorts an array by growing a sorted prefix: each element is shifted left "
                  "until it sits in order. Tags: sorting, insertion sort, array.",
                  "Implements insertion sort; the inner loop moves larger predecessors right "
                  "to open a slot for the current key. Tags: sorting, insertion, shift.",
                  "Orders integers by inserting each value into its position within the "
                  "already-sorted front of the buffer. Tags: sorting, in-place, key.",
                  "An incremental sort that keeps the prefix ordered and drops each new "
                  "element into place by backward scanning. Tags: sorting, insertion sort.",
                  "Builds a sorted region one element at a time, sliding entries over until "
                  "the key fits. Tags: sorting, array, loop.",
                  "Insertion sort over an int buffer: pick the next key, walk back past "
                  "bigger values, store it where it belongs. Tags: sorting, comparison."}});

    t.push_back({"fnv_hash", "hashing",
                 "0x0: mov eax, 2166136261\n"
                 "0x1: xor ecx, ecx\n"
                 "0x2: cmp ecx, esi\n"
                 "0x3: jge 0x9\n"
                 "0x4: movzx edx, [rdi+rcx]\n"
                 "0x5: xor eax, edx\n"
                 "0x6: imul eax, 16777619\n"
                 "0x7: add ecx, 1\n"
                 "0x8: jmp 0x2\n"
                 "0x9: ret\n",
                 {"Computes a 32-bit FNV-1a style hash of a byte buffer by xoring each byte "
                  "and multiplying by the FNV prime. Tags: hashing, fnv, checksum.",
                  "Hashes input bytes with the classic xor-then-multiply FNV recurrence. "
                  "Tags: hashing, hash function, bytes.",
                  "Produces a non-cryptographic digest of a buffer using the FNV constants. "
                  "Tags: hashing, digest, buffer.",
                  "Folds every byte of the input into a running 32-bit hash via xor and a "
                  "prime multiplication. Tags: hashing, fnv1a, loop.",
                  "A tight loop that mixes each input byte into an accumulator to produce a "
                  "hash value. Tags: hashing, accumulator, non-cryptographic.",
                  "Implements the FNV-1a hash over a memory region, returning the 32-bit "
                  "result. Tags: hashing, fnv, string hashing."}});

    t.push_back({"djb2_hash", "hashing",
                 "0x0: mov eax, 5381\n"
                 "0x1: xor ecx, ecx\n"
                 "0x2: movzx edx, [rdi+rcx]\n"
                 "0x3: cmp edx, 0\n"
                 "0x4: je 0xb\n"
                 "0x5: mov r8d, eax\n"
                 "0x6: shl eax, 5\n"
                 "0x7: add eax, r8d\n"
                 "0x8: add eax, edx\n"
                 "0x9: add ecx, 1\n"
                 "0xa: jmp 0x2\n"
                 "0xb: ret\n",
                 {"Computes the djb2 string hash: hash = hash * 33 + character, over a "
                  "NUL-terminated string. Tags: hashing, djb2, string.",
                  "Hashes a C string with the shift-and-add times-33 recurrence started at "
                  "5381. Tags: hashing, string hashing, djb2.",
                  "Produces a fast string digest by multiplying the accumulator by 33 and "
                  "adding each character. Tags: hashing, digest, characters.",
                  "A string hashing loop that terminates on the NUL byte and mixes each "
                  "character into a 32-bit state. Tags: hashing, loop, accumulator.",
                  "Implements the classic times-33 hash used for symbol tables and string "
                  "maps. Tags: hashing, symbol table, djb2.",
                  "Folds characters of a text buffer into a hash using shift-by-5 plus add. "
                  "Tags: hashing, shift, string."}});

    t.push_back({"crc_loop", "hashing",
                 "0x0: mov eax, 4294967295\n"
                 "0x1: xor ecx, ecx\n"
                 "0x2: cmp ecx, esi\n"
                 "0x3: jge 0xf\n"
                 "0x4: movzx edx, [rdi+rcx]\n"
                 "0x5: xor eax, edx\n"
                 "0x6: mov r8d, 8\n"
                 "0x7: test eax, 1\n"
                 "0x8: jz 0xa\n"
                 "0x9: xor eax, 3988292384\n"
                 "0xa: shr eax, 1\n"
                 "0xb: sub r8d, 1\n"
                 "0xc: jnz 0x7\n"
                 "0xd: add ecx, 1\n"
                 "0xe: jmp 0x2\n"
                 "0xf: not eax\n"
                 "0x10: ret\n",
                 {"Computes a bitwise CRC-32 checksum of a buffer using the reflected "
                  "polynomial, one bit at a time. Tags: hashing, crc, checksum.",
                  "Calculates a cyclic redundancy check over input bytes with an 8-step "
                  "shift-xor inner loop. Tags: hashing, crc32, integrity.",
                  "Produces an error-detection checksum by conditionally xoring the CRC "
                  "polynomial while shifting. Tags: hashing, checksum, polynomial.",
                  "A bit-serial CRC routine: each byte is folded in, then eight conditional "
                  "polynomial reductions run. Tags: hashing, crc, bitwise.",
                  "Implements table-free CRC-32 over a memory region and finalizes with a "
                  "bitwise complement. Tags: hashing, crc32, buffer.",
                  "Checksums data for integrity verification using shift-and-xor rounds per "
                  "byte. Tags: hashing, integrity, loop."}});

    t.push_back({"strlen_loop", "string",
                 "0x0: xor eax, eax\n"
                 "0x1: movzx ecx, [rdi+rax]\n"
                 "0x2: cmp ecx, 0\n"
                 "0x3: je 0x6\n"
                 "0x4: add eax, 1\n"
                 "0x5: jmp 0x1\n"
                 "0x6: ret\n",
                 {"Returns the length of a NUL-terminated string by scanning for the zero "
                  "byte. Tags: string, length, scan.",
                  "Counts characters of a C string up to its terminator. Tags: string, "
                  "strlen, counter.",
                  "Walks a byte buffer until the NUL sentinel and reports the offset. Tags: "
                  "string, scan, sentinel.",
                  "Implements strlen: increments an index while the current character is "
                  "nonzero. Tags: string, length, loop.",
                  "Measures how many bytes precede the terminating zero of a text buffer. "
                  "Tags: string, measurement, bytes.",
                  "A minimal scanning loop that yields a string's character count. Tags: "
                  "string, strlen, pointer."}});

    t.push_back({"strcopy_loop", "string",
                 "0x0: xor ecx, ecx\n"
                 "0x1: movzx eax, [rsi+rcx]\n"
                 "0x2: mov [rdi+rcx], al\n"
                 "0x3: cmp eax, 0\n"
                 "0x4: je 0x7\n"
                 "0x5: add ecx, 1\n"
                 "0x6: jmp 0x1\n"
                 "0x7: mov eax, edi\n"
                 "0x8: ret\n",
                 {"Copies a NUL-terminated string from source to destination, including the "
                  "terminator. Tags: string, copy, strcpy.",
                  "Implements strcpy: transfers bytes until the zero terminator is moved "
                  "across. Tags: string, copy, buffer.",
                  "Duplicates a C string into a destination buffer one character at a time. "
                  "Tags: string, duplication, loop.",
                  "Byte-wise string copy that stops after writing the NUL byte and returns "
                  "the destination. Tags: string, strcpy, pointer.",
                  "Moves characters from one buffer to another until the end-of-string "
                  "marker. Tags: string, copy, characters.",
                  "A classic copy loop for text buffers terminated by a zero byte. Tags: "
                  "string, buffer, copy."}});

    t.push_back({"strcmp_loop", "string",
                 "0x0: xor ecx, ecx\n"
                 "0x1: movzx eax, [rdi+rcx]\n"
                 "0x2: movzx edx, [rsi+rcx]\n"
                 "0x3: cmp eax, edx\n"
                 "0x4: jne 0x9\n"
                 "0x5: cmp eax, 0\n"
                 "0x6: je 0xb\n"
                 "0x7: add ecx, 1\n"
                 "0x8: jmp 0x1\n"
                 "0x9: sub eax, edx\n"
                 "0xa: ret\n"
                 "0xb: xor eax, eax\n"
                 "0xc: ret\n",
                 {"Compares two NUL-terminated strings and returns the difference of the "
                  "first mismatching characters, or zero. Tags: string, compare, strcmp.",
                  "Implements strcmp: walks both strings in lockstep until a mismatch or the "
                  "shared terminator. Tags: string, comparison, lexicographic.",
                  "Lexicographically compares two C strings character by character. Tags: "
                  "string, strcmp, ordering.",
                  "Returns negative, zero or positive according to the relative order of two "
                  "text buffers. Tags: string, compare, result code.",
                  "A dual-pointer scan that detects the first differing character of two "
                  "strings. Tags: string, scan, mismatch.",
                  "Checks two character sequences for equality and reports their ordering. "
                  "Tags: string, equality, comparison."}});

    t.push_back({"case_flip", "string",
                 "0x0: xor ecx, ecx\n"
                 "0x1: movzx eax, [rdi+rcx]\n"
                 "0x2: cmp eax, 0\n"
                 "0x3: je 0xa\n"
                 "0x4: cmp eax, 97\n"
                 "0x5: jb 0x8\n"
                 "0x6: xor eax, 32\n"
                 "0x7: mov [rdi+rcx], al\n"
                 "0x8: add ecx, 1\n"
                 "0x9: jmp 0x1\n"
                 "0xa: ret\n",
                 {"Uppercases lowercase letters of a NUL-terminated string in place by "
                  "flipping the case bit. Tags: string, case conversion, transform.",
                  "Transforms a text buffer by toggling bit 5 of characters at or above "
                  "lowercase 'a'. Tags: string, uppercase, in-place.",
                  "Converts letter case across a C string using an xor with 32. Tags: "
                  "string, case, xor.",
                  "Scans a string and rewrites lowercase characters as uppercase until the "
                  "terminator. Tags: string, conversion, scan.",
                  "In-place character transformation that flips the ASCII case bit of "
                  "eligible bytes. Tags: string, ascii, transform.",
                  "Normalizes the case of a character buffer one byte at a time. Tags: "
                  "string, normalize, loop."}});

    t.push_back({"dot_product", "math",
                 "0x0: xor eax, eax\n"
                 "0x1: xor ecx, ecx\n"
                 "0x2: cmp ecx, esi\n"
                 "0x3: jge 0x9\n"
                 "0x4: mov edx, [rdi+rcx*4]\n"
                 "0x5: imul edx, [r8+rcx*4]\n"
                 "0x6: add eax, edx\n"
                 "0x7: add ecx, 1\n"
                 "0x8: jmp 0x2\n"
                 "0x9: ret\n",
                 {"Computes the dot product of two integer vectors by accumulating "
                  "elementwise products. Tags: math, dot product, vectors.",
                  "Sums the pairwise products of two arrays, yielding their inner product. "
                  "Tags: math, inner product, accumulation.",
                  "Multiplies corresponding elements of two buffers and adds the results "
                  "into a scalar. Tags: math, vectors, multiply-add.",
                  "A reduction loop computing sum(a[i] * b[i]) over two integer arrays. "
                  "Tags: math, reduction, arrays.",
                  "Implements a scalar product kernel over two memory-resident vectors. "
                  "Tags: math, linear algebra, kernel.",
                  "Accumulates elementwise products of two sequences into a single result. "
                  "Tags: math, dot product, loop."}});

    t.push_back({"vector_scale", "math",
                 "0x0: xor ecx, ecx\n"
                 "0x1: cmp ecx, esi\n"
                 "0x2: jge 0x8\n"
                 "0x3: mov eax, [rdi+rcx*4]\n"
                 "0x4: imul eax, edx\n"
                 "0x5: mov [rdi+rcx*4], eax\n"
                 "0x6: add ecx, 1\n"
                 "0x7: jmp 0x1\n"
                 "0x8: ret\n",
                 {"Scales every element of an integer array in place by a constant factor. "
                  "Tags: math, scaling, array.",
                  "Multiplies each entry of a vector by a scalar and writes it back. Tags: "
                  "math, vector, multiply.",
                  "Applies a uniform multiplicative factor across a numeric buffer. Tags: "
                  "math, elementwise, in-place.",
                  "An elementwise update loop computing a[i] *= k over an int array. Tags: "
                  "math, loop, scalar.",
                  "Rescales the contents of a memory-resident vector by a given multiplier. "
                  "Tags: math, linear algebra, rescale.",
                  "Walks an array and multiplies every cell by the same constant. Tags: "
                  "math, array, transformation."}});

    t.push_back({"gcd_euclid", "math",
                 "0x0: mov eax, edi\n"
                 "0x1: mov ecx, esi\n"
                 "0x2: cmp ecx, 0\n"
                 "0x3: je 0x9\n"
                 "0x4: cdq\n"
                 "0x5: idiv ecx\n"
                 "0x6: mov eax, ecx\n"
                 "0x7: mov ecx, edx\n"
                 "0x8: jmp 0x2\n"
                 "0x9: ret\n",
                 {"Computes the greatest common divisor of two integers with the Euclidean "
                  "remainder loop. Tags: math, gcd, euclid.",
                  "Implements Euclid's algorithm: repeatedly replaces the pair by (divisor, "
                  "remainder) until the remainder is zero. Tags: math, gcd, number theory.",
                  "Finds the largest integer dividing both inputs via successive division. "
                  "Tags: math, divisor, algorithm.",
                  "A remainder-driven loop that reduces two values to their greatest common "
                  "divisor. Tags: math, euclidean, integers.",
                  "Calculates gcd(a, b) using division and swap steps. Tags: math, gcd, "
                  "modulo.",
                  "Number-theoretic helper returning the greatest common factor of its "
                  "arguments. Tags: math, number theory, gcd."}});

    t.push_back({"int_parse", "parsing",
                 "0x0: xor eax, eax\n"
                 "0x1: movzx ecx, [rdi]\n"
                 "0x2: cmp ecx, 48\n"
                 "0x3: jb 0xb\n"
                 "0x4: cmp ecx, 57\n"
                 "0x5: ja 0xb\n"
                 "0x6: imul eax, 10\n"
                 "0x7: lea eax, [rax+rcx-48]\n"
                 "0x8: add rdi, 1\n"
                 "0x9: movzx ecx, [rdi]\n"
                 "0xa: jmp 0x2\n"
                 "0xb: ret\n",
                 {"Parses a decimal integer from a character buffer, accumulating digits "
                  "until a non-digit appears. Tags: parsing, atoi, decimal.",
                  "Converts leading ASCII digits of a string into their integer value. Tags: "
                  "parsing, conversion, digits.",
                  "Implements an atoi-style reader: multiply by ten and add each digit's "
                  "value. Tags: parsing, integer, string.",
                  "Scans characters in the range '0'..'9' and builds the corresponding "
                  "number. Tags: parsing, number, scan.",
                  "Reads a textual number into a register, stopping at the first non-digit "
                  "byte. Tags: parsing, text, integer.",
                  "Digit-accumulation loop turning a decimal string prefix into a machine "
                  "integer. Tags: parsing, decimal, accumulator."}});

    t.push_back({"token_scan", "parsing",
                 "0x0: xor ecx, ecx\n"
                 "0x1: xor edx, edx\n"
                 "0x2: movzx eax, [rdi+rdx]\n"
                 "0x3: cmp eax, 0\n"
                 "0x4: je 0xa\n"
                 "0x5: cmp eax, 32\n"
                 "0x6: jne 0x8\n"
                 "0x7: add ecx, 1\n"
                 "0x8: add edx, 1\n"
                 "0x9: jmp 0x2\n"
                 "0xa: mov eax, ecx\n"
                 "0xb: ret\n",
                 {"Counts the separator characters in a NUL-terminated string, estimating "
                  "its token count. Tags: parsing, tokenizer, count.",
                  "Scans a text buffer and tallies space characters until the terminator. "
                  "Tags: parsing, whitespace, scan.",
                  "Counts word delimiters of an input line for later splitting. Tags: "
                  "parsing, delimiter, string.",
                  "A lexer helper that reports how many blank separators a string contains. "
                  "Tags: parsing, lexer, separator.",
                  "Walks characters of a buffer, incrementing a counter at each space byte. "
                  "Tags: parsing, counter, characters.",
                  "Tokenization pre-pass measuring the number of field boundaries in a "
                  "string. Tags: parsing, fields, scan."}});

    t.push_back({"memfill_loop", "memory",
                 "0x0: xor ecx, ecx\n"
                 "0x1: cmp ecx, edx\n"
                 "0x2: jge 0x6\n"
                 "0x3: mov [rdi+rcx], sil\n"
                 "0x4: add ecx, 1\n"
                 "0x5: jmp 0x1\n"
                 "0x6: mov eax, edi\n"
                 "0x7: ret\n",
                 {"Fills a memory region with a single byte value, like memset. Tags: "
                  "memory, fill, memset.",
                  "Writes the same byte into every cell of a buffer of the given length. "
                  "Tags: memory, initialization, buffer.",
                  "Initializes a block of memory to a constant byte pattern. Tags: memory, "
                  "memset, loop.",
                  "A byte-store loop that clears or patterns a destination region. Tags: "
                  "memory, store, fill.",
                  "Sets each of the first n bytes of a buffer to the supplied value and "
                  "returns the pointer. Tags: memory, buffer, byte.",
                  "Implements a simple memset over a destination pointer and count. Tags: "
                  "memory, fill, pointer."}});

    t.push_back({"max_search", "search",
                 "0x0: mov eax, [rdi]\n"
                 "0x1: mov ecx, 1\n"
                 "0x2: cmp ecx, esi\n"
                 "0x3: jge 0xa\n"
                 "0x4: mov edx, [rdi+rcx*4]\n"
                 "0x5: cmp edx, eax\n"
                 "0x6: jle 0x8\n"
                 "0x7: mov eax, edx\n"
                 "0x8: add ecx, 1\n"
                 "0x9: jmp 0x2\n"
                 "0xa: ret\n",
                 {"Finds the maximum element of an integer array with a single linear scan. "
                  "Tags: search, maximum, array.",
                  "Scans a buffer and keeps the largest value seen so far. Tags: search, "
                  "linear scan, max.",
                  "Returns the biggest entry of a numeric vector. Tags: search, maximum, "
                  "reduction.",
                  "A running-maximum loop over n array elements. Tags: search, array, "
                  "comparison.",
                  "Selects the greatest of the input integers by comparing each against the "
                  "current best. Tags: search, max, loop.",
                  "Linear pass extracting the largest element from a contiguous int buffer. "
                  "Tags: search, scan, integers."}});

    t.push_back({"binary_search", "search",
                 "0x0: xor ecx, ecx\n"
                 "0x1: lea edx, [rsi-1]\n"
                 "0x2: cmp ecx, edx\n"
                 "0x3: jg 0xe\n"
                 "0x4: lea eax, [rcx+rdx]\n"
                 "0x5: shr eax, 1\n"
                 "0x6: mov r8d, [rdi+rax*4]\n"
                 "0x7: cmp r8d, r9d\n"
                 "0x8: je 0x10\n"
                 "0x9: jl 0xc\n"
                 "0xa: lea edx, [rax-1]\n"
                 "0xb: jmp 0x2\n"
                 "0xc: lea ecx, [rax+1]\n"
                 "0xd: jmp 0x2\n"
                 "0xe: mov eax, 4294967295\n"
                 "0xf: ret\n"
                 "0x10: ret\n",
                 {"Searches a sorted integer array for a key by repeatedly halving the "
                  "candidate interval. Tags: search, binary search, sorted.",
                  "Implements binary search: compares the midpoint with the key and narrows "
                  "to the matching half. Tags: search, divide and conquer, array.",
                  "Locates a value in an ordered buffer in logarithmic time, returning its "
                  "index or a sentinel. Tags: search, binary search, index.",
                  "A lo/hi interval loop that probes the middle element until the key is "
                  "found or the range empties. Tags: search, interval, key.",
                  "Finds the position of a target in a sorted vector using midpoint "
                  "comparisons. Tags: search, sorted array, lookup.",
                  "Classic logarithmic lookup over a sorted int array with early exit on a "
                  "midpoint hit. Tags: search, lookup, algorithm."}});

    return t;
  }();
  return kTemplates;
}

// Generates variants_per_template perturbed copies of every template, each
// paired with an explanation rendering. Variants of one template share its
// group id and class label; phrasings are drawn without replacement while
// they last, so batches never see duplicate texts from one group.
inline std::vector<PairedExample> generate_corpus(const std::vector<TemplateSpec>& templates,
                                                  std::size_t variants_per_template,
                                                  const PerturbationConfig& config,
                                                  std::uint64_t seed) {
  if (variants_per_template < 1) throw Error("generate_corpus: variants_per_template >= 1");
  std::vector<PairedExample> out;
  for (const auto& tpl : templates) {
    AssemblyFunction base;
    try {
      base = parse_disassembly(tpl.body);
    } catch (const Error& e) {
      throw TemplateParseError(tpl.template_id + ": " + e.what());
    }
    base.name = tpl.template_id;
    if (count_basic_blocks(base) < 3)
      throw TemplateParseError(tpl.template_id + ": fewer than 3 basic blocks");
    std::uint64_t tpl_seed = mix_seed(seed, fnv1a64(tpl.template_id));
    std::vector<std::size_t> phrasing(tpl.explanation_templates.size());
    for (std::size_t i = 0; i < phrasing.size(); ++i) phrasing[i] = i;
    Rng phrasing_rng(mix_seed(tpl_seed, 0x70687261ULL));
    phrasing_rng.shuffle(phrasing);
    for (std::size_t v = 0; v < variants_per_template; ++v) {
      std::uint64_t variant_seed = mix_seed(tpl_seed, v);
      PerturbationConfig cfg = config;
      cfg.variant_seed = variant_seed;
      AssemblyFunction variant = perturb(base, cfg, variant_seed);
      variant = with_layout(variant, variant_seed);
      PairedExample ex;
      ex.id = tpl.template_id + "." + std::to_string(v);
      ex.function = variant;
      ex.explanation = tpl.explanation_templates[phrasing[v % phrasing.size()]];
      ex.labels = {tpl.class_label, tpl.template_id};
      ex.group = tpl.template_id;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

inline std::vector<CorpusRecord> to_records(const std::vector<PairedExample>& examples) {
  std::vector<CorpusRecord> records;
  records.reserve(examples.size());
  for (const auto& ex : examples) {
    CorpusRecord r;
    r.id = ex.id;
    r.name = ex.function.name;
    r.asm_text = canonical_text(ex.function);
    r.explanation = ex.explanation;
    r.labels = ex.labels;
    r.group = ex.group;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace asmalign
