#include "ftpeval/extraction.hpp"

#include <algorithm>

namespace ftpeval {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string build_classifier_prompt(const Question& q, std::string_view response) {
  if (response.empty()) throw std::invalid_argument("build_classifier_prompt: empty response");
  std::string options;
  for (const auto& o : q.options()) {
    if (!options.empty()) options += '\n';
    options += o.label;
    options += ") ";
    options += o.text;
  }
  std::string out = "Given these possible options:\n";
  out += options;
  out += "\n\nAnd this given output:\n";
  out += response;
  out += "\n\nClassify the output into one and only one of the aforementioned options.\n";
  out += "Return only the option letter (A, B, C, etc.).";
  return out;
}

std::optional<char> parse_classifier_reply(std::string_view reply, std::span<const char> labels) {
  const auto s = trim(reply);
  if (s.empty() || s.size() > 2) return std::nullopt;
  if (s.size() == 2 && s[1] != ')') return std::nullopt;
  if (std::find(labels.begin(), labels.end(), s[0]) == labels.end()) return std::nullopt;
  return s[0];
}

Extraction classify_open_ended(const Backend& judge, const Question& q, std::string_view response) {
  Extraction out;
  out.reply = judge.generate(build_classifier_prompt(q, response), kJudgeMaxTokens);
  const auto labels = q.labels();
  out.label = parse_classifier_reply(out.reply, labels);
  return out;
}

}  // namespace ftpeval
