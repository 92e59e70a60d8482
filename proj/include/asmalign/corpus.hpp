#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asmalign/asm_model.hpp"
#include "asmalign/util.hpp"

namespace asmalign {

// One line of the corpus record file (JSON object per line).
struct CorpusRecord {
  std::string id;
  std::string name;
  std::string asm_text;
  std::string explanation;       // empty when absent
  std::vector<std::string> labels;
  std::string group;             // empty when absent

  bool operator==(const CorpusRecord&) const = default;
};

inline nlohmann::json to_json(const CorpusRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["name"] = r.name;
  j["asm_text"] = r.asm_text;
  if (!r.explanation.empty()) j["explanation"] = r.explanation;
  if (!r.labels.empty()) j["labels"] = r.labels;
  if (!r.group.empty()) j["group"] = r.group;
  return j;
}

inline CorpusRecord record_from_json(const nlohmann::json& j) {
  CorpusRecord r;
  r.id = j.at("id").get<std::string>();
  r.name = j.value("name", std::string());
  r.asm_text = j.at("asm_text").get<std::string>();
  r.explanation = j.value("explanation", std::string());
  if (j.contains("labels")) r.labels = j.at("labels").get<std::vector<std::string>>();
  r.group = j.value("group", std::string());
  return r;
}

inline void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write corpus file: " + path);
  for (const auto& r : records) os << to_json(r).dump() << "\n";
}

inline std::vector<CorpusRecord> read_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read corpus file: " + path);
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error("corpus " + path + ": invalid JSON at line " + std::to_string(line_no));
    out.push_back(record_from_json(j));
  }
  return out;
}

}  // namespace asmalign
