#include "ftpeval/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ftpeval/backend.hpp"
#include "ftpeval/dataset.hpp"
#include "ftpeval/runner.hpp"
#include "ftpeval/templating.hpp"

namespace ftpeval {
namespace {

constexpr const char* kBuiltinToy = "builtin:toy";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config_path;
  std::string mode = "prefill";
  std::string dataset = kBuiltinToy;
  std::string backend_url;
  std::string model = "mock";
  std::string mock_script;
  std::string template_id = std::string(kDefaultPrefillId);
  bool all_templates = false;
  std::string chat_format = "chatml";
  int top_k = 50;
  int n_positions = 2;
  int max_in_flight = 4;
  int timeout_ms = 60000;
  std::string report_format = "json";
  std::string out;
  std::string recovery;
  std::string judge_url;
  std::string judge_model = "judge";
  std::string judge_mock_script;
  bool strict_single_surface = false;
  bool full_vocab = false;
  bool raw_calibration = false;
  bool list = false;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

MockScript script_from_setting(const json& setting) {
  if (setting.is_string()) return load_mock_script(setting.get<std::string>());
  return mock_script_from_json(setting);
}

// A backend section from the config file, overridden by whichever flags the
// user passed explicitly.
std::unique_ptr<Backend> build_backend(const json& section, const std::string& url_flag,
                                       const std::string& script_flag,
                                       const std::optional<std::string>& model_flag,
                                       const Flags& flags, const CLI::App& app,
                                       bool is_judge) {
  BackendConfig cfg = backend_config_from_json(section);
  if (model_flag) cfg.model_name = *model_flag;
  if (!is_judge) {
    if (app.count("--top-k") > 0) cfg.top_k = flags.top_k;
    if (app.count("--n-positions") > 0) cfg.n_positions = flags.n_positions;
  }
  if (app.count("--max-in-flight") > 0) cfg.max_in_flight = flags.max_in_flight;
  if (app.count("--timeout-ms") > 0) cfg.timeout_ms = flags.timeout_ms;

  std::optional<json> script_setting;
  if (section.contains("mock_script")) script_setting = section.at("mock_script");
  if (!url_flag.empty()) {
    cfg.kind = BackendKind::kHttp;
    cfg.base_url = url_flag;
  } else if (!script_flag.empty()) {
    cfg.kind = BackendKind::kMock;
    script_setting = json(script_flag);
  } else if (!section.contains("kind")) {
    if (!script_setting) return nullptr;
    cfg.kind = BackendKind::kMock;
  }
  cfg.validate();
  if (cfg.kind == BackendKind::kHttp) return make_http_backend(cfg);
  if (!script_setting) throw ConfigError("mock backend needs a mock script");
  return make_mock_backend(cfg, script_from_setting(*script_setting));
}

void list_builtins(std::ostream& out) {
  out << "chat formats:\n";
  for (const auto& f : builtin_chat_formats()) out << "  " << f.name() << "\n";
  out << "prefill templates:\n";
  for (const auto& t : builtin_prefill_templates()) {
    out << "  " << t.id() << (t.id() == kDefaultPrefillId ? " (default)" : "") << "  " << t.text()
        << "\n";
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"First-token probability evaluation harness with output prefilling"};
  Flags f;
  app.add_option("--config", f.config_path, "JSON config file; flags override its values");
  app.add_option("--mode", f.mode,
                 "plain_ftp | prompt_instruction | prefill | full_vocab | open_ended");
  app.add_option("--dataset", f.dataset, "JSONL dataset path, or builtin:toy");
  app.add_option("--backend-url", f.backend_url, "base URL of a /v1/completions server");
  app.add_option("--model", f.model, "model name sent to the backend");
  app.add_option("--mock-script", f.mock_script, "use the mock backend with this JSON script");
  app.add_option("--template-id", f.template_id, "prefill template id (t01..t10)");
  app.add_flag("--all-templates", f.all_templates, "sweep all ten prefill templates");
  app.add_option("--chat-format", f.chat_format, "chat format name");
  app.add_option("--top-k", f.top_k, "logprobs requested per position");
  app.add_option("--n-positions", f.n_positions, "generated positions per prompt");
  app.add_option("--max-in-flight", f.max_in_flight, "concurrent backend requests");
  app.add_option("--timeout-ms", f.timeout_ms, "per-request timeout");
  app.add_option("--report-format", f.report_format, "json | csv");
  app.add_option("--out", f.out, "report path (default: stdout)");
  app.add_option("--recovery", f.recovery, "partial-results path written on backend failure");
  app.add_option("--judge-url", f.judge_url, "judge backend URL (open_ended only)");
  app.add_option("--judge-model", f.judge_model, "judge model name");
  app.add_option("--judge-mock-script", f.judge_mock_script, "mock judge script (open_ended)");
  app.add_flag("--strict-single-surface", f.strict_single_surface,
               "credit only the bare label token to each option");
  app.add_flag("--full-vocab", f.full_vocab, "also report full-vocabulary accuracy, FTVR, CD");
  app.add_flag("--raw-calibration", f.raw_calibration,
               "calibration metrics over raw option mass");
  app.add_flag("--list", f.list, "print builtin chat formats and prefill templates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (f.list) {
    list_builtins(out);
    return kExitOk;
  }

  RunConfig run;
  ReportFormat format = ReportFormat::kJson;
  std::unique_ptr<Backend> model;
  std::unique_ptr<Backend> judge;
  bool all_templates = f.all_templates;
  std::string out_path = f.out;

  try {
    json file = json::object();
    if (!f.config_path.empty()) file = read_json_file(f.config_path);
    auto pick = [&](const char* flag, const char* key, const std::string& flag_value) {
      if (app.count(flag) == 0 && file.contains(key)) return file.at(key).get<std::string>();
      return flag_value;
    };
    auto pick_bool = [&](const char* flag, const char* key, bool flag_value) {
      if (app.count(flag) == 0 && file.contains(key)) return file.at(key).get<bool>();
      return flag_value;
    };

    run.mode = eval_mode_from_string(pick("--mode", "mode", f.mode));
    const auto templating = templating_config_from_json(file);
    run.chat_formats = templating.chat_formats;
    run.layout = templating.layout;
    run.chat_format = pick("--chat-format", "chat_format", f.chat_format);
    run.template_id = pick("--template-id", "template_id", f.template_id);
    run.full_vocab = pick_bool("--full-vocab", "full_vocab", f.full_vocab);
    run.raw_calibration = pick_bool("--raw-calibration", "raw_calibration", f.raw_calibration);
    if (pick_bool("--strict-single-surface", "strict_single_surface", f.strict_single_surface)) {
      run.surface = SurfaceMode::kStrictSingle;
    }
    all_templates = pick_bool("--all-templates", "all_templates", f.all_templates);
    format = report_format_from_string(pick("--report-format", "report_format", f.report_format));
    out_path = pick("--out", "out", f.out);
    const auto recovery = pick("--recovery", "recovery", f.recovery);
    if (!recovery.empty()) {
      run.recovery_path = recovery;
    } else {
      run.recovery_path = out_path.empty() ? "ftpeval-recovery.json" : out_path + ".recovery.json";
    }
    if (all_templates && run.mode != EvalMode::kPrefill) {
      throw ConfigError("--all-templates requires --mode prefill");
    }

    const json model_section = file.value("backend", json::object());
    const std::optional<std::string> model_flag =
        app.count("--model") > 0 ? std::optional<std::string>(f.model) : std::nullopt;
    model = build_backend(model_section, f.backend_url, f.mock_script, model_flag, f, app, false);
    if (!model) throw ConfigError("no backend: pass --backend-url or --mock-script");

    if (run.mode == EvalMode::kOpenEnded) {
      const json judge_section = file.value("judge", json::object());
      const std::optional<std::string> judge_flag =
          app.count("--judge-model") > 0 ? std::optional<std::string>(f.judge_model)
                                         : std::nullopt;
      judge = build_backend(judge_section, f.judge_url, f.judge_mock_script, judge_flag, f, app,
                            true);
      if (!judge) throw ConfigError("open_ended mode needs --judge-url or --judge-mock-script");
    }

    const auto dataset = pick("--dataset", "dataset", f.dataset);
    if (dataset == kBuiltinToy) {
      run.questions = builtin_toy_dataset();
      run.dataset_name = kToyDatasetName;
    } else {
      try {
        run.questions = load_jsonl(dataset);
      } catch (const DatasetError& e) {
        err << "dataset error: " << e.what() << "\n";
        return kExitDatasetError;
      }
      run.dataset_name = dataset;
    }
    run.validate();
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  std::string bytes;
  try {
    if (all_templates) {
      bytes = emit_sweep(run_template_sweep(run, *model), format);
    } else {
      bytes = emit_report(run_eval(run, *model, judge.get()), format);
    }
  } catch (const RunError& e) {
    err << "backend failure: " << e.what();
    if (run.recovery_path) err << " (partial results in " << *run.recovery_path << ")";
    err << "\n";
    return kExitBackendFailure;
  } catch (const BackendError& e) {
    err << "backend failure: " << e.what() << "\n";
    return kExitBackendFailure;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  if (out_path.empty()) {
    out << bytes;
  } else {
    std::ofstream file(out_path, std::ios::binary);
    if (!file) {
      err << "cannot write '" << out_path << "'\n";
      return kExitConfigError;
    }
    file << bytes;
  }
  return kExitOk;
}

}  // namespace ftpeval
