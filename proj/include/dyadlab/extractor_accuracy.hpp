#pragma once

// Accuracy of an extractor model against human-annotated long answers.
// Annotation files are JSONL: {"long_answer": "...", "gold": "A" | "B" | "neither"}.

#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyadlab/error.hpp"
#include "dyadlab/llm/pipeline.hpp"

namespace dyadlab {

enum class Gold { A, B, Neither };

struct AnnotatedAnswer {
  std::string long_answer;
  Gold gold = Gold::Neither;
};

inline Gold parse_gold(const std::string& s) {
  if (s == "A" || s == "a") return Gold::A;
  if (s == "B" || s == "b") return Gold::B;
  if (s == "neither" || s == "Neither" || s == "none" || s == "invalid") return Gold::Neither;
  throw specification_error("unknown gold label '" + s + "'");
}

inline bool matches(llm::Extracted e, Gold g) {
  switch (g) {
    case Gold::A: return e == llm::Extracted::A;
    case Gold::B: return e == llm::Extracted::B;
    case Gold::Neither: return e == llm::Extracted::Invalid;
  }
  return false;
}

inline std::vector<AnnotatedAnswer> read_annotations(std::istream& is) {
  std::vector<AnnotatedAnswer> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("long_answer") || !j.contains("gold") ||
        !j["long_answer"].is_string() || !j["gold"].is_string())
      throw specification_error("annotation line " + std::to_string(lineno) + " is not {long_answer, gold}");
    out.push_back({j["long_answer"].get<std::string>(), parse_gold(j["gold"].get<std::string>())});
  }
  return out;
}

inline std::vector<AnnotatedAnswer> load_annotations(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::Io, "cannot open " + path);
  return read_annotations(is);
}

struct AccuracyReport {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<llm::Extracted> predictions;
};

inline AccuracyReport extractor_accuracy(const std::vector<AnnotatedAnswer>& set, const llm::ModelHandle& extractor) {
  if (set.empty()) throw specification_error("annotated set is empty");
  AccuracyReport r;
  r.total = set.size();
  for (const auto& item : set) {
    const auto e = llm::extract_choice(item.long_answer, extractor);
    r.predictions.push_back(e);
    if (matches(e, item.gold)) ++r.correct;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

}  // namespace dyadlab
