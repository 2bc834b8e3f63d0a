#pragma once

#include <cstddef>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ftpeval/core.hpp"

namespace ftpeval {

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}

  // 1-based line number; 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Normalized JSONL schema, one question per line:
//   {"id": "q1", "stem": "2+2?", "options": ["3", "4"], "gold_index": 1}
// Labels are assigned A, B, ... by position. Blank lines are skipped.
std::vector<Question> parse_jsonl(std::istream& in, const std::string& source = "<stream>");
std::vector<Question> load_jsonl(const std::string& path);

// Inverse of parse_jsonl; one line per question, trailing newline.
std::string to_jsonl(const std::vector<Question>& questions);

// 20 fixed general-knowledge questions with 3 or 4 options each.
const std::vector<Question>& builtin_toy_dataset();
inline constexpr const char* kToyDatasetName = "toy";

}  // namespace ftpeval
