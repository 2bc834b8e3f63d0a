#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ftpeval/backend.hpp"
#include "ftpeval/core.hpp"
#include "ftpeval/scoring.hpp"
#include "ftpeval/templating.hpp"

namespace ftpeval {

enum class EvalMode { kPlainFtp, kPromptInstruction, kPrefill, kFullVocab, kOpenEnded };

std::string_view to_string(EvalMode mode);
EvalMode eval_mode_from_string(std::string_view name);

struct RunConfig {
  EvalMode mode = EvalMode::kPrefill;
  // Adds full-vocabulary accuracy, FTVR and CD to a restricted mode.
  // Always on for EvalMode::kFullVocab.
  bool full_vocab = false;

  std::string dataset_name = "toy";
  std::vector<Question> questions;

  std::vector<ChatFormat> chat_formats = builtin_chat_formats();
  std::string chat_format = "chatml";
  PromptLayout layout = default_layout();
  std::string template_id = std::string(kDefaultPrefillId);

  SurfaceMode surface = SurfaceMode::kAggregate;
  // Calibration metrics over raw option mass instead of renormalized mass.
  bool raw_calibration = false;
  int ace_ranges = 10;
  int calibration_bins = 10;

  // Written with the completed items when a backend call fails.
  std::optional<std::string> recovery_path;

  void validate() const;
};

// A backend failure aborted the run. `partial` holds what completed, and the
// recovery file (if configured) has been written.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, json partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const json& partial() const { return partial_; }

 private:
  json partial_;
};

// Render -> complete -> score for every question, then aggregate. `judge` is
// required for EvalMode::kOpenEnded and ignored otherwise.
EvalReport run_eval(const RunConfig& cfg, const Backend& model, const Backend* judge = nullptr);

// Prefill run for each builtin template plus mean/std of the accuracies.
SweepReport run_template_sweep(const RunConfig& cfg, const Backend& model);

enum class ReportFormat { kJson, kCsv };

ReportFormat report_format_from_string(std::string_view name);

// Deterministic bytes. JSON has sorted keys and round-trips exactly; CSV uses
// fixed 6-decimal reals with a metrics table followed by a calibration-bin
// table.
std::string emit_report(const EvalReport& report, ReportFormat format);
std::string emit_sweep(const SweepReport& sweep, ReportFormat format);

EvalReport parse_report_json(std::string_view bytes);

}  // namespace ftpeval
