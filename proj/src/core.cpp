#include "ftpeval/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ftpeval {
namespace {

constexpr double kMassTolerance = 1e-6;

void require(bool condition, const std::string& what) {
  if (!condition) throw InvariantError(what);
}

bool in_unit_range(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

Question::Question(std::string id, std::string stem, std::vector<Option> options, char gold_label)
    : id_(std::move(id)), stem_(std::move(stem)), options_(std::move(options)),
      gold_label_(gold_label) {
  require(!id_.empty(), "Question: id must be non-empty");
  require(options_.size() >= 2 && options_.size() <= 26,
          "Question '" + id_ + "': option count must be in [2, 26]");
  for (std::size_t i = 0; i < options_.size(); ++i) {
    require(options_[i].label == static_cast<char>('A' + i),
            "Question '" + id_ + "': option labels must be consecutive letters starting at A");
  }
  require(gold_label_ >= 'A' && gold_label_ < static_cast<char>('A' + options_.size()),
          "Question '" + id_ + "': gold_label must appear among option labels");
}

std::vector<char> Question::labels() const {
  std::vector<char> out;
  out.reserve(options_.size());
  for (const auto& o : options_) out.push_back(o.label);
  return out;
}

ChatFormat::ChatFormat(std::string name, std::string user_open, std::string user_close,
                       std::string assistant_open, std::string assistant_close)
    : name_(std::move(name)), user_open_(std::move(user_open)), user_close_(std::move(user_close)),
      assistant_open_(std::move(assistant_open)), assistant_close_(std::move(assistant_close)) {
  require(!name_.empty(), "ChatFormat: name must be non-empty");
  require(!assistant_open_.empty(),
          "ChatFormat '" + name_ + "': assistant_open must be non-empty");
}

PrefillTemplate::PrefillTemplate(std::string id, std::string text)
    : id_(std::move(id)), text_(std::move(text)) {
  require(!id_.empty(), "PrefillTemplate: id must be non-empty");
  require(!text_.empty(), "PrefillTemplate '" + id_ + "': text must be non-empty");
  require(text_.back() != '\n' && text_.back() != '\r',
          "PrefillTemplate '" + id_ + "': text must not end with a newline");
}

std::string_view to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::kPlainFtp:
      return "plain_ftp";
    case PromptMode::kPromptInstruction:
      return "prompt_instruction";
    case PromptMode::kPrefill:
      return "prefill";
  }
  throw std::invalid_argument("unknown prompt mode");
}

PromptMode prompt_mode_from_string(std::string_view name) {
  if (name == "plain_ftp") return PromptMode::kPlainFtp;
  if (name == "prompt_instruction") return PromptMode::kPromptInstruction;
  if (name == "prefill") return PromptMode::kPrefill;
  throw std::invalid_argument("unknown prompt mode '" + std::string(name) + "'");
}

RenderedPrompt::RenderedPrompt(std::string bytes, PromptMode mode, std::string chat_format_name,
                               std::optional<std::string> prefill_id)
    : bytes_(std::move(bytes)), mode_(mode), chat_format_name_(std::move(chat_format_name)),
      prefill_id_(std::move(prefill_id)) {
  require(!bytes_.empty(), "RenderedPrompt: bytes must be non-empty");
  require((mode_ == PromptMode::kPrefill) == prefill_id_.has_value(),
          "RenderedPrompt: mode = prefill iff prefill_id present");
}

TokenCandidate::TokenCandidate(std::string token_text, double logprob)
    : token_text_(std::move(token_text)), logprob_(logprob) {
  require(!token_text_.empty(), "TokenCandidate: token_text must be non-empty");
  require(std::isfinite(logprob_) && logprob_ <= kMassTolerance,
          "TokenCandidate '" + token_text_ + "': logprob must be finite and <= 0");
}

void sort_candidates(CandidateList& candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const TokenCandidate& a, const TokenCandidate& b) {
              if (a.logprob() != b.logprob()) return a.logprob() > b.logprob();
              return a.token_text() < b.token_text();
            });
}

GenerationTrace::GenerationTrace(std::vector<CandidateList> positions,
                                 std::vector<std::string> greedy_tokens, int top_k)
    : positions_(std::move(positions)), greedy_tokens_(std::move(greedy_tokens)), top_k_(top_k) {
  require(top_k_ >= 1, "GenerationTrace: top_k must be >= 1");
  require(!positions_.empty(), "GenerationTrace: at least one position required");
  require(greedy_tokens_.size() == positions_.size(),
          "GenerationTrace: |greedy_tokens| must equal |positions|");
  for (std::size_t p = 0; p < positions_.size(); ++p) {
    const auto& cands = positions_[p];
    const std::string where = "GenerationTrace position " + std::to_string(p) + ": ";
    require(!cands.empty(), where + "candidate list must be non-empty");
    require(cands.size() <= static_cast<std::size_t>(top_k_),
            where + "at most top_k candidates allowed");
    std::set<std::string_view> seen;
    double mass = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (i > 0) {
        require(cands[i - 1].logprob() >= cands[i].logprob(),
                where + "candidates must be sorted by logprob descending");
      }
      require(seen.insert(cands[i].token_text()).second, where + "token_texts must be distinct");
      mass += std::exp(cands[i].logprob());
    }
    require(mass <= 1.0 + kMassTolerance, where + "candidate probability mass must be <= 1");
    require(greedy_tokens_[p] == cands.front().token_text(),
            where + "greedy token must equal the top candidate");
  }
}

GenerationTrace GenerationTrace::from_positions(std::vector<CandidateList> positions, int top_k) {
  std::vector<std::string> greedy;
  greedy.reserve(positions.size());
  for (auto& cands : positions) {
    sort_candidates(cands);
    greedy.push_back(cands.empty() ? std::string() : cands.front().token_text());
  }
  return GenerationTrace(std::move(positions), std::move(greedy), top_k);
}

void FirstTokenOutcome::validate() const {
  const std::string where = "FirstTokenOutcome '" + question_id + "': ";
  require(!question_id.empty(), "FirstTokenOutcome: question_id must be non-empty");
  require(is_valid == matched_label.has_value(), where + "is_valid iff matched_label present");
  require(option_probs.count(restricted_choice) == 1,
          where + "restricted_choice must be an option label");
  require(option_probs.count(gold_label) == 1, where + "gold_label must be an option label");
  if (matched_label) {
    require(option_probs.count(*matched_label) == 1,
            where + "matched_label must be an option label");
  }
  double mass = 0.0;
  for (const auto& [label, p] : option_probs) {
    require(in_unit_range(p), where + "option_probs values must lie in [0, 1]");
    mass += p;
  }
  require(mass <= 1.0 + kMassTolerance, where + "option_probs must sum to <= 1");
}

void EvalReport::validate() const {
  const std::string where = "EvalReport: ";
  if (accuracy) require(in_unit_range(*accuracy), where + "accuracy must lie in [0, 1]");
  if (full_vocab_accuracy) {
    require(in_unit_range(*full_vocab_accuracy),
            where + "full_vocab_accuracy must lie in [0, 1]");
  }
  if (ftvr) require(*ftvr >= 0.0 && *ftvr <= 100.0, where + "ftvr must lie in [0, 100]");
  if (cd) require(*cd >= 0.0, where + "cd must be >= 0");
  if (ace) require(in_unit_range(*ace), where + "ace must lie in [0, 1]");
  if (brier_x100) {
    require(*brier_x100 >= 0.0 && *brier_x100 <= 100.0,
            where + "brier_x100 must lie in [0, 100]");
  }
  if (log_loss) require(*log_loss >= 0.0, where + "log_loss must be >= 0");
  if (full_vocab_accuracy && ftvr) {
    require(*full_vocab_accuracy <= *ftvr / 100.0 + 1e-12,
            where + "full_vocab_accuracy must not exceed ftvr/100");
  }
  if (!calibration_bins.empty()) {
    std::size_t total = 0;
    for (const auto& b : calibration_bins) total += b.count;
    require(total == n_questions, where + "calibration bin counts must sum to n_questions");
  }
  if (!per_question.empty()) {
    require(per_question.size() == n_questions,
            where + "per_question must hold one outcome per question");
  }
  for (const auto& o : per_question) o.validate();
}

void SweepReport::validate() const {
  require(!per_template.empty(), "SweepReport: at least one template report required");
  for (const auto& r : per_template) {
    r.validate();
    require(r.accuracy.has_value(), "SweepReport: every template report needs an accuracy");
  }
}

}  // namespace ftpeval

namespace nlohmann {
namespace {

using ftpeval::json;

char label_from_json(const json& j) {
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw ftpeval::InvariantError("label must be a single character: '" + s + "'");
  return s[0];
}

json label_to_json(char c) { return std::string(1, c); }

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

std::optional<char> get_optional_label(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return label_from_json(j.at(key));
}

}  // namespace

using namespace ftpeval;

Option adl_serializer<Option>::from_json(const json& j) {
  return Option{label_from_json(j.at("label")), j.at("text").get<std::string>()};
}
void adl_serializer<Option>::to_json(json& j, const Option& v) {
  j = json{{"label", label_to_json(v.label)}, {"text", v.text}};
}

Question adl_serializer<Question>::from_json(const json& j) {
  return Question(j.at("id").get<std::string>(), j.at("stem").get<std::string>(),
                  j.at("options").get<std::vector<Option>>(), label_from_json(j.at("gold_label")));
}
void adl_serializer<Question>::to_json(json& j, const Question& v) {
  j = json{{"id", v.id()},
           {"stem", v.stem()},
           {"options", v.options()},
           {"gold_label", label_to_json(v.gold_label())}};
}

ChatFormat adl_serializer<ChatFormat>::from_json(const json& j) {
  return ChatFormat(j.at("name").get<std::string>(), j.value("user_open", std::string()),
                    j.value("user_close", std::string()),
                    j.at("assistant_open").get<std::string>(),
                    j.value("assistant_close", std::string()));
}
void adl_serializer<ChatFormat>::to_json(json& j, const ChatFormat& v) {
  j = json{{"name", v.name()},
           {"user_open", v.user_open()},
           {"user_close", v.user_close()},
           {"assistant_open", v.assistant_open()},
           {"assistant_close", v.assistant_close()}};
}

PrefillTemplate adl_serializer<PrefillTemplate>::from_json(const json& j) {
  return PrefillTemplate(j.at("id").get<std::string>(), j.at("text").get<std::string>());
}
void adl_serializer<PrefillTemplate>::to_json(json& j, const PrefillTemplate& v) {
  j = json{{"id", v.id()}, {"text", v.text()}};
}

RenderedPrompt adl_serializer<RenderedPrompt>::from_json(const json& j) {
  return RenderedPrompt(j.at("bytes").get<std::string>(),
                        prompt_mode_from_string(j.at("mode").get<std::string>()),
                        j.at("chat_format_name").get<std::string>(),
                        get_optional<std::string>(j, "prefill_id"));
}
void adl_serializer<RenderedPrompt>::to_json(json& j, const RenderedPrompt& v) {
  j = json{{"bytes", v.bytes()},
           {"mode", std::string(to_string(v.mode()))},
           {"chat_format_name", v.chat_format_name()}};
  put_optional(j, "prefill_id", v.prefill_id());
}

TokenCandidate adl_serializer<TokenCandidate>::from_json(const json& j) {
  return TokenCandidate(j.at("token_text").get<std::string>(), j.at("logprob").get<double>());
}
void adl_serializer<TokenCandidate>::to_json(json& j, const TokenCandidate& v) {
  j = json{{"token_text", v.token_text()}, {"logprob", v.logprob()}};
}

GenerationTrace adl_serializer<GenerationTrace>::from_json(const json& j) {
  return GenerationTrace(j.at("positions").get<std::vector<CandidateList>>(),
                         j.at("greedy_tokens").get<std::vector<std::string>>(),
                         j.at("top_k").get<int>());
}
void adl_serializer<GenerationTrace>::to_json(json& j, const GenerationTrace& v) {
  j = json{{"positions", v.positions()}, {"greedy_tokens", v.greedy_tokens()}, {"top_k", v.top_k()}};
}

FirstTokenOutcome adl_serializer<FirstTokenOutcome>::from_json(const json& j) {
  FirstTokenOutcome o;
  o.question_id = j.at("question_id").get<std::string>();
  o.top1_token = j.at("top1_token").get<std::string>();
  o.is_valid = j.at("is_valid").get<bool>();
  o.matched_label = get_optional_label(j, "matched_label");
  o.second_token = get_optional<std::string>(j, "second_token");
  for (const auto& [key, p] : j.at("option_probs").items()) {
    if (key.size() != 1) throw InvariantError("option_probs key must be a single letter");
    o.option_probs[key[0]] = p.get<double>();
  }
  o.restricted_choice = label_from_json(j.at("restricted_choice"));
  o.gold_label = label_from_json(j.at("gold_label"));
  o.degenerate = j.value("degenerate", false);
  o.validate();
  return o;
}
void adl_serializer<FirstTokenOutcome>::to_json(json& j, const FirstTokenOutcome& v) {
  json probs = json::object();
  for (const auto& [label, p] : v.option_probs) probs[std::string(1, label)] = p;
  j = json{{"question_id", v.question_id},
           {"top1_token", v.top1_token},
           {"is_valid", v.is_valid},
           {"option_probs", std::move(probs)},
           {"restricted_choice", label_to_json(v.restricted_choice)},
           {"gold_label", label_to_json(v.gold_label)},
           {"degenerate", v.degenerate}};
  if (v.matched_label) j["matched_label"] = label_to_json(*v.matched_label);
  put_optional(j, "second_token", v.second_token);
}

CalibrationBin adl_serializer<CalibrationBin>::from_json(const json& j) {
  return CalibrationBin{j.at("bin_lo").get<double>(), j.at("bin_hi").get<double>(),
                        get_optional<double>(j, "mean_conf"), get_optional<double>(j, "accuracy"),
                        j.at("count").get<std::size_t>()};
}
void adl_serializer<CalibrationBin>::to_json(json& j, const CalibrationBin& v) {
  j = json{{"bin_lo", v.lo}, {"bin_hi", v.hi}, {"count", v.count}};
  put_optional(j, "mean_conf", v.mean_confidence);
  put_optional(j, "accuracy", v.accuracy);
}

OpenEndedRecord adl_serializer<OpenEndedRecord>::from_json(const json& j) {
  return OpenEndedRecord{j.at("question_id").get<std::string>(),
                         j.at("response").get<std::string>(),
                         j.at("judge_reply").get<std::string>(),
                         get_optional_label(j, "extracted_label"),
                         label_from_json(j.at("gold_label"))};
}
void adl_serializer<OpenEndedRecord>::to_json(json& j, const OpenEndedRecord& v) {
  j = json{{"question_id", v.question_id},
           {"response", v.response},
           {"judge_reply", v.judge_reply},
           {"gold_label", label_to_json(v.gold_label)}};
  if (v.extracted_label) j["extracted_label"] = label_to_json(*v.extracted_label);
}

EvalReport adl_serializer<EvalReport>::from_json(const json& j) {
  const int version = j.value("schema_version", 0);
  if (version != kReportSchemaVersion) {
    throw InvariantError("EvalReport: unsupported schema_version " + std::to_string(version));
  }
  EvalReport r;
  r.dataset_name = j.at("dataset_name").get<std::string>();
  r.model_name = j.at("model_name").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.template_id = get_optional<std::string>(j, "template_id");
  r.n_questions = j.at("n_questions").get<std::size_t>();
  r.accuracy = get_optional<double>(j, "accuracy");
  r.full_vocab_accuracy = get_optional<double>(j, "full_vocab_accuracy");
  r.ftvr = get_optional<double>(j, "ftvr");
  r.cd = get_optional<double>(j, "cd");
  r.ace = get_optional<double>(j, "ace");
  r.brier_x100 = get_optional<double>(j, "brier_x100");
  r.log_loss = get_optional<double>(j, "log_loss");
  r.calibration_bins = j.value("calibration_bins", std::vector<CalibrationBin>{});
  r.per_question = j.value("per_question", std::vector<FirstTokenOutcome>{});
  r.open_ended = j.value("open_ended", std::vector<OpenEndedRecord>{});
  r.degenerate_count = j.value("degenerate_count", std::size_t{0});
  r.unparsed_replies = get_optional<std::size_t>(j, "unparsed_replies");
  r.notes = j.value("notes", std::vector<std::string>{});
  r.validate();
  return r;
}
void adl_serializer<EvalReport>::to_json(json& j, const EvalReport& v) {
  j = json{{"schema_version", kReportSchemaVersion},
           {"dataset_name", v.dataset_name},
           {"model_name", v.model_name},
           {"mode", v.mode},
           {"n_questions", v.n_questions},
           {"calibration_bins", v.calibration_bins},
           {"per_question", v.per_question},
           {"degenerate_count", v.degenerate_count},
           {"notes", v.notes}};
  put_optional(j, "template_id", v.template_id);
  put_optional(j, "accuracy", v.accuracy);
  put_optional(j, "full_vocab_accuracy", v.full_vocab_accuracy);
  put_optional(j, "ftvr", v.ftvr);
  put_optional(j, "cd", v.cd);
  put_optional(j, "ace", v.ace);
  put_optional(j, "brier_x100", v.brier_x100);
  put_optional(j, "log_loss", v.log_loss);
  put_optional(j, "unparsed_replies", v.unparsed_replies);
  if (!v.open_ended.empty()) j["open_ended"] = v.open_ended;
}

SweepReport adl_serializer<SweepReport>::from_json(const json& j) {
  SweepReport s;
  s.per_template = j.at("per_template").get<std::vector<EvalReport>>();
  s.accuracy_mean = j.at("accuracy_mean").get<double>();
  s.accuracy_std = j.at("accuracy_std").get<double>();
  s.validate();
  return s;
}
void adl_serializer<SweepReport>::to_json(json& j, const SweepReport& v) {
  j = json{{"schema_version", kReportSchemaVersion},
           {"per_template", v.per_template},
           {"accuracy_mean", v.accuracy_mean},
           {"accuracy_std", v.accuracy_std}};
}

}  // namespace nlohmann
