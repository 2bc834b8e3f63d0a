#pragma once

// Domain types shared by every stage of the evaluation pipeline.
//
// Value types (Question, ChatFormat, ...) validate their invariants on
// construction and are immutable afterwards. The two record types produced by
// the pipeline itself (FirstTokenOutcome, EvalReport) are aggregates with a
// validate() member that every producer calls before handing them out.

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ftpeval {

using nlohmann::json;

// Thrown when a value would violate one of its type invariants. The message
// always names the violated invariant.
class InvariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Option {
  char label = 'A';
  std::string text;

  bool operator==(const Option&) const = default;
};

class Question {
 public:
  Question(std::string id, std::string stem, std::vector<Option> options, char gold_label);

  const std::string& id() const { return id_; }
  const std::string& stem() const { return stem_; }
  const std::vector<Option>& options() const { return options_; }
  char gold_label() const { return gold_label_; }

  std::vector<char> labels() const;
  std::size_t gold_index() const { return static_cast<std::size_t>(gold_label_ - 'A'); }

  bool operator==(const Question&) const = default;

 private:
  std::string id_;
  std::string stem_;
  std::vector<Option> options_;
  char gold_label_;
};

class ChatFormat {
 public:
  ChatFormat(std::string name, std::string user_open, std::string user_close,
             std::string assistant_open, std::string assistant_close);

  const std::string& name() const { return name_; }
  const std::string& user_open() const { return user_open_; }
  const std::string& user_close() const { return user_close_; }
  const std::string& assistant_open() const { return assistant_open_; }
  const std::string& assistant_close() const { return assistant_close_; }

  bool operator==(const ChatFormat&) const = default;

 private:
  std::string name_;
  std::string user_open_;
  std::string user_close_;
  std::string assistant_open_;
  std::string assistant_close_;
};

class PrefillTemplate {
 public:
  PrefillTemplate(std::string id, std::string text);

  const std::string& id() const { return id_; }
  const std::string& text() const { return text_; }

  bool operator==(const PrefillTemplate&) const = default;

 private:
  std::string id_;
  std::string text_;
};

enum class PromptMode { kPlainFtp, kPromptInstruction, kPrefill };

std::string_view to_string(PromptMode mode);
PromptMode prompt_mode_from_string(std::string_view name);

class RenderedPrompt {
 public:
  // The byte-level half of the prefill invariant (bytes end with the
  // template text) is established by render_prompt(), not checked here.
  RenderedPrompt(std::string bytes, PromptMode mode, std::string chat_format_name,
                 std::optional<std::string> prefill_id);

  const std::string& bytes() const { return bytes_; }
  PromptMode mode() const { return mode_; }
  const std::string& chat_format_name() const { return chat_format_name_; }
  const std::optional<std::string>& prefill_id() const { return prefill_id_; }

  bool operator==(const RenderedPrompt&) const = default;

 private:
  std::string bytes_;
  PromptMode mode_;
  std::string chat_format_name_;
  std::optional<std::string> prefill_id_;
};

class TokenCandidate {
 public:
  TokenCandidate(std::string token_text, double logprob);

  const std::string& token_text() const { return token_text_; }
  double logprob() const { return logprob_; }

  bool operator==(const TokenCandidate&) const = default;

 private:
  std::string token_text_;
  double logprob_;
};

using CandidateList = std::vector<TokenCandidate>;

// Top-k candidates for each generated position plus the greedy path.
class GenerationTrace {
 public:
  GenerationTrace(std::vector<CandidateList> positions, std::vector<std::string> greedy_tokens,
                  int top_k);

  // Builds the greedy path from each position's first candidate.
  static GenerationTrace from_positions(std::vector<CandidateList> positions, int top_k);

  const std::vector<CandidateList>& positions() const { return positions_; }
  const std::vector<std::string>& greedy_tokens() const { return greedy_tokens_; }
  int top_k() const { return top_k_; }

  bool operator==(const GenerationTrace&) const = default;

 private:
  std::vector<CandidateList> positions_;
  std::vector<std::string> greedy_tokens_;
  int top_k_;
};

// Orders candidates by logprob descending, ties by token text ascending.
void sort_candidates(CandidateList& candidates);

struct FirstTokenOutcome {
  std::string question_id;
  std::string top1_token;
  bool is_valid = false;
  std::optional<char> matched_label;
  std::optional<std::string> second_token;
  // Unnormalized option mass read off the first position.
  std::map<char, double> option_probs;
  char restricted_choice = 'A';
  char gold_label = 'A';
  // All option masses were zero; restricted_choice fell back to the first label.
  bool degenerate = false;

  void validate() const;
  bool operator==(const FirstTokenOutcome&) const = default;
};

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> mean_confidence;
  std::optional<double> accuracy;
  std::size_t count = 0;

  bool operator==(const CalibrationBin&) const = default;
};

struct OpenEndedRecord {
  std::string question_id;
  std::string response;
  std::string judge_reply;
  std::optional<char> extracted_label;
  char gold_label = 'A';

  bool operator==(const OpenEndedRecord&) const = default;
};

inline constexpr int kReportSchemaVersion = 1;

// Metrics not applicable to a run's mode stay empty and are omitted from the
// serialized form.
struct EvalReport {
  std::string dataset_name;
  std::string model_name;
  std::string mode;
  std::optional<std::string> template_id;
  std::size_t n_questions = 0;

  std::optional<double> accuracy;
  std::optional<double> full_vocab_accuracy;
  std::optional<double> ftvr;
  std::optional<double> cd;
  std::optional<double> ace;
  std::optional<double> brier_x100;
  std::optional<double> log_loss;

  std::vector<CalibrationBin> calibration_bins;
  std::vector<FirstTokenOutcome> per_question;
  std::vector<OpenEndedRecord> open_ended;

  std::size_t degenerate_count = 0;
  std::optional<std::size_t> unparsed_replies;
  std::vector<std::string> notes;

  void validate() const;
  bool operator==(const EvalReport&) const = default;
};

// Per-template reports of a prefill sweep plus the aggregate accuracy.
struct SweepReport {
  std::vector<EvalReport> per_template;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;

  void validate() const;
  bool operator==(const SweepReport&) const = default;
};

}  // namespace ftpeval

namespace nlohmann {

#define FTPEVAL_DECLARE_SERIALIZER(Type)            \
  template <>                                       \
  struct adl_serializer<Type> {                     \
    static Type from_json(const json& j);           \
    static void to_json(json& j, const Type& v);    \
  }

FTPEVAL_DECLARE_SERIALIZER(ftpeval::Option);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::Question);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::ChatFormat);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::PrefillTemplate);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::RenderedPrompt);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::TokenCandidate);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::GenerationTrace);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::FirstTokenOutcome);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::CalibrationBin);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::OpenEndedRecord);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::EvalReport);
FTPEVAL_DECLARE_SERIALIZER(ftpeval::SweepReport);

#undef FTPEVAL_DECLARE_SERIALIZER

}  // namespace nlohmann
