#include "ftpeval/templating.hpp"

#include <algorithm>

namespace ftpeval {
namespace {

constexpr std::string_view kDefaultInstruction =
    "The following is a multiple choice question. Choose the correct option.";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string label_list(const Question& q) {
  std::string out;
  for (const auto& o : q.options()) {
    if (!out.empty()) out += ", ";
    out += o.label;
  }
  return out;
}

}  // namespace

void PromptLayout::validate() const {
  if (option_line_format.find("{label}") == std::string::npos) {
    throw InvariantError("PromptLayout: option_line_format must contain {label}");
  }
  if (option_line_format.find('\n') != std::string::npos) {
    throw InvariantError("PromptLayout: option_line_format must yield exactly one line");
  }
}

PromptLayout default_layout() {
  return PromptLayout{std::string(kDefaultInstruction), "{label}) {text}", "Answer:"};
}

std::string format_option_line(const PromptLayout& layout, const Option& option) {
  // Substitute {text} last so option text containing "{label}" stays literal.
  std::string line = layout.option_line_format;
  const auto text_pos = line.find("{text}");
  std::string head = line.substr(0, text_pos);
  std::string tail = text_pos == std::string::npos ? std::string() : line.substr(text_pos + 6);
  replace_all(head, "{label}", std::string(1, option.label));
  replace_all(tail, "{label}", std::string(1, option.label));
  if (text_pos == std::string::npos) return head;
  return head + option.text + tail;
}

std::string render_user_content(const Question& q, const PromptLayout& layout, PromptMode mode) {
  layout.validate();
  std::string instruction = layout.instruction;
  if (mode == PromptMode::kPromptInstruction) {
    if (!instruction.empty()) instruction += ' ';
    instruction += "Please answer only with " + label_list(q);
  }

  std::string out;
  if (!instruction.empty()) out += instruction + "\n";
  out += q.stem();
  for (const auto& o : q.options()) out += "\n" + format_option_line(layout, o);
  if (!layout.answer_cue.empty()) out += "\n" + layout.answer_cue;
  return out;
}

RenderedPrompt render_prompt(const Question& q, const PromptLayout& layout, const ChatFormat& fmt,
                             PromptMode mode, const std::optional<PrefillTemplate>& prefill) {
  switch (mode) {
    case PromptMode::kPlainFtp:
    case PromptMode::kPromptInstruction:
      if (prefill) {
        throw std::invalid_argument("render_prompt: a prefill template is only valid in "
                                    "prefill mode");
      }
      break;
    case PromptMode::kPrefill:
      if (!prefill) throw std::invalid_argument("render_prompt: prefill mode needs a template");
      break;
    default:
      throw std::invalid_argument("render_prompt: unknown mode");
  }

  const auto user_mode =
      mode == PromptMode::kPromptInstruction ? mode : PromptMode::kPlainFtp;
  std::string bytes = fmt.user_open() + render_user_content(q, layout, user_mode) +
                      fmt.user_close() + fmt.assistant_open();
  std::optional<std::string> prefill_id;
  if (mode == PromptMode::kPrefill) {
    bytes += prefill->text();
    prefill_id = prefill->id();
  }
  return RenderedPrompt(std::move(bytes), mode, fmt.name(), std::move(prefill_id));
}

const std::vector<ChatFormat>& builtin_chat_formats() {
  static const std::vector<ChatFormat> formats = {
      ChatFormat("chatml", "<|im_start|>user\n", "<|im_end|>\n", "<|im_start|>assistant\n",
                 "<|im_end|>\n"),
      ChatFormat("llama3", "<|start_header_id|>user<|end_header_id|>\n\n", "<|eot_id|>",
                 "<|start_header_id|>assistant<|end_header_id|>\n\n", "<|eot_id|>"),
      ChatFormat("gemma", "<start_of_turn>user\n", "<end_of_turn>\n", "<start_of_turn>model\n",
                 "<end_of_turn>\n"),
      ChatFormat("zephyr", "<|user|>\n", "</s>\n", "<|assistant|>\n", "</s>\n"),
  };
  return formats;
}

const ChatFormat& find_chat_format(const std::vector<ChatFormat>& formats, std::string_view name) {
  auto it = std::find_if(formats.begin(), formats.end(),
                         [&](const ChatFormat& f) { return f.name() == name; });
  if (it == formats.end()) {
    throw std::invalid_argument("unknown chat format '" + std::string(name) + "'");
  }
  return *it;
}

const std::vector<PrefillTemplate>& builtin_prefill_templates() {
  static const std::vector<PrefillTemplate> templates = {
      PrefillTemplate("t01", "I choose:"),
      PrefillTemplate("t02", "Having evaluated the question and its choices, I conclude with:"),
      PrefillTemplate("t03", "My final answer is:"),
      PrefillTemplate("t04", "Upon careful reflection, the response I find most appropriate is:"),
      PrefillTemplate("t05", "Alright, I'm going with:"),
      PrefillTemplate("t06", "After reviewing the options thoughtfully, I've decided on:"),
      PrefillTemplate("t07", "Given the question and the possible options, my answer is:"),
      PrefillTemplate("t08", "Let's cut to the chase, the answer is:"),
      PrefillTemplate("t09", "After thorough consideration of the question and all potential "
                             "answers, my final selection is:"),
      PrefillTemplate("t10", "Given the context and underlying assumptions in both the question "
                             "and its options, I determine the most fitting response to be:"),
  };
  return templates;
}

const PrefillTemplate& find_prefill_template(std::string_view id) {
  const auto& all = builtin_prefill_templates();
  auto it = std::find_if(all.begin(), all.end(),
                         [&](const PrefillTemplate& t) { return t.id() == id; });
  if (it == all.end()) {
    throw std::invalid_argument("unknown prefill template '" + std::string(id) + "'");
  }
  return *it;
}

const PrefillTemplate& default_prefill_template() {
  return find_prefill_template(kDefaultPrefillId);
}

json to_json(const PromptLayout& layout) {
  return json{{"instruction", layout.instruction},
              {"option_line_format", layout.option_line_format},
              {"answer_cue", layout.answer_cue}};
}

PromptLayout layout_from_json(const json& j) {
  const PromptLayout defaults = default_layout();
  PromptLayout layout{j.value("instruction", defaults.instruction),
                      j.value("option_line_format", defaults.option_line_format),
                      j.value("answer_cue", defaults.answer_cue)};
  layout.validate();
  return layout;
}

TemplatingConfig templating_config_from_json(const json& j) {
  TemplatingConfig cfg{builtin_chat_formats(), default_layout()};
  if (j.contains("chat_formats")) {
    for (const auto& f : j.at("chat_formats").get<std::vector<ChatFormat>>()) {
      auto it = std::find_if(cfg.chat_formats.begin(), cfg.chat_formats.end(),
                             [&](const ChatFormat& c) { return c.name() == f.name(); });
      if (it != cfg.chat_formats.end()) {
        *it = f;
      } else {
        cfg.chat_formats.push_back(f);
      }
    }
  }
  if (j.contains("layout")) cfg.layout = layout_from_json(j.at("layout"));
  return cfg;
}

}  // namespace ftpeval
