#pragma once

#include <map>
#include <optional>
#include <span>
#include <string_view>

#include "ftpeval/core.hpp"

namespace ftpeval {

// How candidate surfaces are credited to option labels.
enum class SurfaceMode {
  // "A", " A", "\nA", "  A", ... all count towards A.
  kAggregate,
  // Only the bare label "A" counts.
  kStrictSingle,
};

// A token is a valid answer when it is exactly one label, optionally preceded
// by at most two characters that are each a space or a newline.
std::optional<char> match_valid_label(std::string_view token_text, std::span<const char> labels);

// Option mass read off one position's candidates. Every label gets an entry.
std::map<char, double> option_probabilities(std::span<const TokenCandidate> candidates,
                                            std::span<const char> labels,
                                            SurfaceMode mode = SurfaceMode::kAggregate);

struct FtpChoice {
  char label = 'A';
  // Every option had zero mass.
  bool degenerate = false;
};

// Restricted argmax over the options; ties go to the alphabetically smallest
// label.
FtpChoice ftp_select(const std::map<char, double>& option_probs);

// Scores one question: greedy top-1 validity, restricted choice, and the
// greedy second token after a valid first token.
FirstTokenOutcome full_vocab_outcome(const GenerationTrace& trace, const Question& q,
                                     SurfaceMode mode = SurfaceMode::kAggregate);

}  // namespace ftpeval
