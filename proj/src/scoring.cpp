#include "ftpeval/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace ftpeval {

std::optional<char> match_valid_label(std::string_view token_text, std::span<const char> labels) {
  if (labels.empty()) throw std::invalid_argument("match_valid_label: labels must be non-empty");
  std::size_t skip = 0;
  while (skip < 2 && skip < token_text.size() &&
         (token_text[skip] == ' ' || token_text[skip] == '\n')) {
    ++skip;
  }
  const auto rest = token_text.substr(skip);
  if (rest.size() != 1) return std::nullopt;
  if (std::find(labels.begin(), labels.end(), rest[0]) == labels.end()) return std::nullopt;
  return rest[0];
}

std::map<char, double> option_probabilities(std::span<const TokenCandidate> candidates,
                                            std::span<const char> labels, SurfaceMode mode) {
  std::map<char, double> mass;
  for (char l : labels) mass[l] = 0.0;
  for (const auto& c : candidates) {
    std::optional<char> label;
    if (mode == SurfaceMode::kStrictSingle) {
      if (c.token_text().size() == 1 && mass.count(c.token_text()[0]) == 1) {
        label = c.token_text()[0];
      }
    } else {
      label = match_valid_label(c.token_text(), labels);
    }
    if (label) mass[*label] += std::exp(c.logprob());
  }
  // Provider rounding can push a sum a hair above one.
  for (auto& [l, p] : mass) p = std::min(p, 1.0);
  return mass;
}

FtpChoice ftp_select(const std::map<char, double>& option_probs) {
  if (option_probs.empty()) throw std::invalid_argument("ftp_select: no options");
  // std::map is ordered by label, and only a strictly larger mass displaces
  // the current best, which yields the alphabetical tie-break.
  auto best = option_probs.begin();
  for (auto it = std::next(best); it != option_probs.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return FtpChoice{best->first, best->second <= 0.0};
}

FirstTokenOutcome full_vocab_outcome(const GenerationTrace& trace, const Question& q,
                                     SurfaceMode mode) {
  const auto labels = q.labels();
  FirstTokenOutcome out;
  out.question_id = q.id();
  out.gold_label = q.gold_label();
  out.top1_token = trace.greedy_tokens().front();
  out.matched_label = match_valid_label(out.top1_token, labels);
  out.is_valid = out.matched_label.has_value();
  if (out.is_valid && trace.greedy_tokens().size() >= 2) {
    out.second_token = trace.greedy_tokens()[1];
  }
  out.option_probs = option_probabilities(trace.positions().front(), labels, mode);
  const auto choice = ftp_select(out.option_probs);
  out.restricted_choice = choice.label;
  out.degenerate = choice.degenerate;
  out.validate();
  return out;
}

}  // namespace ftpeval
