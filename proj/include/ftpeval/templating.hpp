#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ftpeval/core.hpp"

namespace ftpeval {

// How the user turn is laid out. `option_line_format` must contain the
// `{label}` placeholder and may contain `{text}`.
struct PromptLayout {
  std::string instruction;
  std::string option_line_format = "{label}) {text}";
  std::string answer_cue = "Answer:";

  void validate() const;
  bool operator==(const PromptLayout&) const = default;
};

PromptLayout default_layout();

// Formats one option line with the layout's pattern.
std::string format_option_line(const PromptLayout& layout, const Option& option);

// The user-turn body: instruction, stem, one line per option, answer cue.
std::string render_user_content(const Question& q, const PromptLayout& layout, PromptMode mode);

// Renders the exact prompt bytes. In prefill mode the template text follows
// assistant_open directly and the assistant turn is left open.
RenderedPrompt render_prompt(const Question& q, const PromptLayout& layout, const ChatFormat& fmt,
                             PromptMode mode,
                             const std::optional<PrefillTemplate>& prefill = std::nullopt);

// Stable, ordered registry: chatml, llama3, gemma, zephyr.
const std::vector<ChatFormat>& builtin_chat_formats();
const ChatFormat& find_chat_format(const std::vector<ChatFormat>& formats, std::string_view name);

// The ten robustness-study templates, ids t01..t10.
const std::vector<PrefillTemplate>& builtin_prefill_templates();
inline constexpr std::string_view kDefaultPrefillId = "t07";
const PrefillTemplate& default_prefill_template();
const PrefillTemplate& find_prefill_template(std::string_view id);

// Template configuration read from a JSON file:
//   {"chat_formats": [ChatFormat...], "layout": {...}}
// Both keys are optional; custom formats are appended after the builtins and
// replace a builtin with the same name.
struct TemplatingConfig {
  std::vector<ChatFormat> chat_formats;
  PromptLayout layout;
};

TemplatingConfig templating_config_from_json(const json& j);
json to_json(const PromptLayout& layout);
PromptLayout layout_from_json(const json& j);

}  // namespace ftpeval
