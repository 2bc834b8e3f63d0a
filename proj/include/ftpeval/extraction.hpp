#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ftpeval/backend.hpp"
#include "ftpeval/core.hpp"

namespace ftpeval {

// Judge prompt asking an auxiliary model to map a free-form answer onto one
// of the question's option letters.
std::string build_classifier_prompt(const Question& q, std::string_view response);

// Accepts exactly "L" or "L)" for a label L, ignoring surrounding whitespace.
std::optional<char> parse_classifier_reply(std::string_view reply, std::span<const char> labels);

inline constexpr int kJudgeMaxTokens = 4;
// Cap on the evaluated model's free-form answer length.
inline constexpr int kOpenEndedMaxTokens = 256;

struct Extraction {
  std::string reply;
  // Empty when the reply did not follow the expected format.
  std::optional<char> label;
};

// Backend errors propagate; an unparseable reply is reported through an
// empty `label`.
Extraction classify_open_ended(const Backend& judge, const Question& q, std::string_view response);

}  // namespace ftpeval
