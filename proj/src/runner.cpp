#include "ftpeval/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>

#include "ftpeval/extraction.hpp"
#include "ftpeval/metrics.hpp"

namespace ftpeval {
namespace {

PromptMode render_mode(EvalMode mode) {
  switch (mode) {
    case EvalMode::kPromptInstruction:
      return PromptMode::kPromptInstruction;
    case EvalMode::kPrefill:
      return PromptMode::kPrefill;
    case EvalMode::kPlainFtp:
    case EvalMode::kFullVocab:
    case EvalMode::kOpenEnded:
      return PromptMode::kPlainFtp;
  }
  throw std::invalid_argument("unknown eval mode");
}

void write_recovery(const RunConfig& cfg, const json& partial) {
  if (!cfg.recovery_path) return;
  std::ofstream out(*cfg.recovery_path, std::ios::binary);
  out << partial.dump(2) << "\n";
}

[[noreturn]] void abort_run(const RunConfig& cfg, json partial, std::size_t failures) {
  partial["schema_version"] = kReportSchemaVersion;
  partial["partial"] = true;
  partial["dataset_name"] = cfg.dataset_name;
  partial["mode"] = std::string(to_string(cfg.mode));
  write_recovery(cfg, partial);
  throw RunError("backend failed on " + std::to_string(failures) + " of " +
                     std::to_string(cfg.questions.size()) + " questions",
                 std::move(partial));
}

EvalReport report_skeleton(const RunConfig& cfg, const Backend& model) {
  EvalReport r;
  r.dataset_name = cfg.dataset_name;
  r.model_name = model.config().model_name;
  r.mode = std::string(to_string(cfg.mode));
  if (cfg.mode == EvalMode::kPrefill) r.template_id = cfg.template_id;
  r.n_questions = cfg.questions.size();
  return r;
}

EvalReport run_restricted(const RunConfig& cfg, const Backend& model) {
  const auto& fmt = find_chat_format(cfg.chat_formats, cfg.chat_format);
  const auto mode = render_mode(cfg.mode);
  std::optional<PrefillTemplate> prefill;
  if (mode == PromptMode::kPrefill) prefill = find_prefill_template(cfg.template_id);

  std::vector<RenderedPrompt> prompts;
  prompts.reserve(cfg.questions.size());
  for (const auto& q : cfg.questions) {
    prompts.push_back(render_prompt(q, cfg.layout, fmt, mode, prefill));
  }

  const auto batch = complete_batch(model, prompts);
  std::vector<FirstTokenOutcome> outcomes;
  outcomes.reserve(cfg.questions.size());
  for (std::size_t i = 0; i < cfg.questions.size(); ++i) {
    if (batch.traces[i]) outcomes.push_back(full_vocab_outcome(*batch.traces[i], cfg.questions[i], cfg.surface));
  }
  if (!batch.ok()) {
    json errors = json::array();
    for (const auto& e : batch.errors) {
      errors.push_back({{"index", e.index},
                        {"question_id", cfg.questions[e.index].id()},
                        {"message", e.message},
                        {"attempts", e.attempts}});
    }
    abort_run(cfg, json{{"completed", outcomes}, {"errors", std::move(errors)}},
              batch.errors.size());
  }

  std::sort(outcomes.begin(), outcomes.end(),
            [](const FirstTokenOutcome& a, const FirstTokenOutcome& b) {
              return a.question_id < b.question_id;
            });

  EvalReport r = report_skeleton(cfg, model);
  std::vector<ProbVector> vectors;
  std::vector<char> golds;
  vectors.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    vectors.push_back(cfg.raw_calibration ? raw_options(o.option_probs)
                                          : normalize_options(o.option_probs));
    golds.push_back(o.gold_label);
    r.degenerate_count += o.degenerate;
  }

  r.accuracy = accuracy(outcomes, AccuracyField::kRestrictedChoice);
  r.brier_x100 = brier_x100(vectors, golds);
  r.log_loss = log_loss(vectors, golds);
  if (outcomes.size() >= static_cast<std::size_t>(cfg.ace_ranges)) {
    r.ace = ace(vectors, golds, cfg.ace_ranges);
  } else {
    r.notes.push_back("ace omitted: " + std::to_string(outcomes.size()) +
                      " questions is fewer than " + std::to_string(cfg.ace_ranges) + " ranges");
  }
  r.calibration_bins = calibration_curve(vectors, golds, cfg.calibration_bins);

  if (cfg.full_vocab || cfg.mode == EvalMode::kFullVocab) {
    r.full_vocab_accuracy = accuracy(outcomes, AccuracyField::kMatchedLabel);
    r.ftvr = ftvr(outcomes);
    r.cd = continuation_diversity(outcomes);
    if (!r.cd) r.notes.push_back("cd omitted: no valid first token");
  }

  r.notes.push_back("option mass outside the top-" + std::to_string(model.config().top_k) +
                    " candidates is counted as 0");
  if (cfg.surface == SurfaceMode::kStrictSingle) {
    r.notes.push_back("strict single-surface label matching");
  }
  if (cfg.raw_calibration) r.notes.push_back("calibration over raw option mass");
  r.per_question = std::move(outcomes);
  r.validate();
  return r;
}

EvalReport run_open_ended(const RunConfig& cfg, const Backend& model, const Backend& judge) {
  const auto& fmt = find_chat_format(cfg.chat_formats, cfg.chat_format);
  const std::size_t n = cfg.questions.size();
  std::vector<std::optional<OpenEndedRecord>> records(n);
  std::mutex errors_mutex;
  json errors = json::array();

  for_each_bounded(n, model.config().max_in_flight, [&](std::size_t i) {
    const auto& q = cfg.questions[i];
    try {
      const auto prompt = render_prompt(q, cfg.layout, fmt, PromptMode::kPlainFtp);
      OpenEndedRecord rec;
      rec.question_id = q.id();
      rec.gold_label = q.gold_label();
      rec.response = model.generate(prompt.bytes(), kOpenEndedMaxTokens);
      if (!rec.response.empty()) {
        auto extraction = classify_open_ended(judge, q, rec.response);
        rec.judge_reply = std::move(extraction.reply);
        rec.extracted_label = extraction.label;
      }
      records[i] = std::move(rec);
    } catch (const std::exception& e) {
      const auto* be = dynamic_cast<const BackendError*>(&e);
      std::lock_guard<std::mutex> lock(errors_mutex);
      errors.push_back({{"index", i},
                        {"question_id", q.id()},
                        {"message", e.what()},
                        {"attempts", be != nullptr ? be->attempts() : 1}});
    }
  });

  std::vector<OpenEndedRecord> done;
  for (auto& rec : records) {
    if (rec) done.push_back(std::move(*rec));
  }
  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end(),
              [](const json& a, const json& b) { return a.at("index") < b.at("index"); });
    const auto failures = errors.size();
    abort_run(cfg, json{{"completed", done}, {"errors", std::move(errors)}}, failures);
  }
  std::sort(done.begin(), done.end(), [](const OpenEndedRecord& a, const OpenEndedRecord& b) {
    return a.question_id < b.question_id;
  });

  EvalReport r = report_skeleton(cfg, model);
  std::size_t correct = 0;
  std::size_t unparsed = 0;
  for (const auto& rec : done) {
    if (!rec.extracted_label) {
      ++unparsed;
    } else if (*rec.extracted_label == rec.gold_label) {
      ++correct;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  r.unparsed_replies = unparsed;
  r.notes.push_back("free-form answers capped at " + std::to_string(kOpenEndedMaxTokens) +
                    " tokens; judge model " + judge.config().model_name);
  r.open_ended = std::move(done);
  r.validate();
  return r;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_cell(const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

constexpr const char* kMetricsHeader =
    "dataset_name,model_name,mode,template_id,n_questions,accuracy,full_vocab_accuracy,ftvr,cd,"
    "ace,brier_x100,log_loss,degenerate_count,unparsed_replies\n";

std::string metrics_row(const EvalReport& r) {
  std::string row = csv_escape(r.dataset_name) + "," + csv_escape(r.model_name) + "," +
                    csv_escape(r.mode) + "," + csv_escape(r.template_id.value_or("")) + "," +
                    std::to_string(r.n_questions);
  for (const auto* v : {&r.accuracy, &r.full_vocab_accuracy, &r.ftvr, &r.cd, &r.ace,
                        &r.brier_x100, &r.log_loss}) {
    row += "," + csv_cell(*v);
  }
  row += "," + std::to_string(r.degenerate_count) + ",";
  if (r.unparsed_replies) row += std::to_string(*r.unparsed_replies);
  return row + "\n";
}

std::string bin_row(const CalibrationBin& b) {
  return fixed6(b.lo) + "," + fixed6(b.hi) + "," + csv_cell(b.mean_confidence) + "," +
         csv_cell(b.accuracy) + "," + std::to_string(b.count) + "\n";
}

}  // namespace

std::string_view to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::kPlainFtp:
      return "plain_ftp";
    case EvalMode::kPromptInstruction:
      return "prompt_instruction";
    case EvalMode::kPrefill:
      return "prefill";
    case EvalMode::kFullVocab:
      return "full_vocab";
    case EvalMode::kOpenEnded:
      return "open_ended";
  }
  throw std::invalid_argument("unknown eval mode");
}

EvalMode eval_mode_from_string(std::string_view name) {
  for (auto m : {EvalMode::kPlainFtp, EvalMode::kPromptInstruction, EvalMode::kPrefill,
                 EvalMode::kFullVocab, EvalMode::kOpenEnded}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  if (questions.empty()) throw std::invalid_argument("RunConfig: no questions");
  if (ace_ranges < 1) throw std::invalid_argument("RunConfig: ace_ranges must be >= 1");
  if (calibration_bins < 2) throw std::invalid_argument("RunConfig: calibration_bins must be >= 2");
  layout.validate();
  find_chat_format(chat_formats, chat_format);
  if (mode == EvalMode::kPrefill) find_prefill_template(template_id);
}

EvalReport run_eval(const RunConfig& cfg, const Backend& model, const Backend* judge) {
  cfg.validate();
  if (cfg.mode == EvalMode::kOpenEnded) {
    if (judge == nullptr) throw std::invalid_argument("open_ended mode requires a judge backend");
    return run_open_ended(cfg, model, *judge);
  }
  return run_restricted(cfg, model);
}

SweepReport run_template_sweep(const RunConfig& cfg, const Backend& model) {
  if (cfg.mode != EvalMode::kPrefill) {
    throw std::invalid_argument("template sweeps require prefill mode");
  }
  SweepReport sweep;
  std::vector<double> accuracies;
  for (const auto& t : builtin_prefill_templates()) {
    RunConfig one = cfg;
    one.template_id = t.id();
    sweep.per_template.push_back(run_eval(one, model));
    accuracies.push_back(*sweep.per_template.back().accuracy);
  }
  const auto stats = aggregate_mean_std(accuracies);
  sweep.accuracy_mean = stats.mean;
  sweep.accuracy_std = stats.std;
  sweep.validate();
  return sweep;
}

ReportFormat report_format_from_string(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw std::invalid_argument("unknown report format '" + std::string(name) + "'");
}

std::string emit_report(const EvalReport& report, ReportFormat format) {
  report.validate();
  if (format == ReportFormat::kJson) return json(report).dump(2) + "\n";
  std::string out = kMetricsHeader + metrics_row(report);
  out += "\nbin_lo,bin_hi,mean_conf,accuracy,count\n";
  for (const auto& b : report.calibration_bins) out += bin_row(b);
  return out;
}

std::string emit_sweep(const SweepReport& sweep, ReportFormat format) {
  sweep.validate();
  if (format == ReportFormat::kJson) return json(sweep).dump(2) + "\n";
  std::string out = kMetricsHeader;
  for (const auto& r : sweep.per_template) out += metrics_row(r);
  out += "\naccuracy_mean,accuracy_std\n" + fixed6(sweep.accuracy_mean) + "," +
         fixed6(sweep.accuracy_std) + "\n";
  out += "\ntemplate_id,bin_lo,bin_hi,mean_conf,accuracy,count\n";
  for (const auto& r : sweep.per_template) {
    for (const auto& b : r.calibration_bins) {
      out += csv_escape(r.template_id.value_or("")) + "," + bin_row(b);
    }
  }
  return out;
}

EvalReport parse_report_json(std::string_view bytes) {
  return json::parse(bytes).get<EvalReport>();
}

}  // namespace ftpeval
