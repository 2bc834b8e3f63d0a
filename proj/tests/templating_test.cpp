#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ftpeval/templating.hpp"

namespace ftpeval {
namespace {

const Question& sample_question() {
  static const Question q("q1", "Which planet is known as the red planet?",
                          {{'A', "Venus"}, {'B', "Mars"}, {'C', "Jupiter"}, {'D', "Saturn"}}, 'B');
  return q;
}

const ChatFormat kAngle("angle", "<|user|>", "<|end|>", "<|assistant|>", "<|end|>");

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

TEST(RenderPrompt, PrefillEndsWithAssistantOpenThenTemplate) {
  const auto p = render_prompt(sample_question(), default_layout(), kAngle, PromptMode::kPrefill,
                               default_prefill_template());
  EXPECT_TRUE(ends_with(
      p.bytes(), "<|assistant|>Given the question and the possible options, my answer is:"));
  EXPECT_EQ(p.prefill_id(), std::optional<std::string>("t07"));
  EXPECT_EQ(p.mode(), PromptMode::kPrefill);
}

TEST(RenderPrompt, PlainEndsExactlyWithAssistantOpen) {
  const auto p = render_prompt(sample_question(), default_layout(), kAngle, PromptMode::kPlainFtp);
  EXPECT_TRUE(ends_with(p.bytes(), "<|assistant|>"));
  EXPECT_FALSE(p.prefill_id().has_value());
}

TEST(RenderPrompt, PromptInstructionListsLabels) {
  const auto p =
      render_prompt(sample_question(), default_layout(), kAngle, PromptMode::kPromptInstruction);
  EXPECT_NE(p.bytes().find("Please answer only with A, B, C, D"), std::string::npos);
  const Question three("q3", "s", {{'A', "x"}, {'B', "y"}, {'C', "z"}}, 'A');
  const auto p3 = render_prompt(three, default_layout(), kAngle, PromptMode::kPromptInstruction);
  EXPECT_NE(p3.bytes().find("Please answer only with A, B, C\n"), std::string::npos);
}

TEST(RenderPrompt, PlainLayoutIsInstructionStemOptionsCue) {
  const auto p = render_prompt(sample_question(), default_layout(), kAngle, PromptMode::kPlainFtp);
  EXPECT_EQ(p.bytes(),
            "<|user|>" + default_layout().instruction +
                "\nWhich planet is known as the red planet?\nA) Venus\nB) Mars\nC) Jupiter\n"
                "D) Saturn\nAnswer:<|end|><|assistant|>");
}

TEST(RenderPrompt, RejectsPrefillArityMismatch) {
  EXPECT_THROW(render_prompt(sample_question(), default_layout(), kAngle, PromptMode::kPrefill),
               std::invalid_argument);
  EXPECT_THROW(render_prompt(sample_question(), default_layout(), kAngle, PromptMode::kPlainFtp,
                             default_prefill_template()),
               std::invalid_argument);
  EXPECT_THROW(render_prompt(sample_question(), default_layout(), kAngle,
                             static_cast<PromptMode>(42)),
               std::invalid_argument);
}

TEST(RenderPrompt, OptionTextIsNotReinterpreted) {
  const Question q("q", "s", {{'A', "{label} {text}"}, {'B', "b"}}, 'A');
  EXPECT_EQ(format_option_line(default_layout(), q.options()[0]), "A) {label} {text}");
}

TEST(Layout, RejectsFormatsWithoutLabelOrWithNewline) {
  PromptLayout l = default_layout();
  l.option_line_format = "{text}";
  EXPECT_THROW(l.validate(), InvariantError);
  l.option_line_format = "{label})\n{text}";
  EXPECT_THROW(l.validate(), InvariantError);
}

TEST(BuiltinChatFormats, AtLeastThreeDistinctNames) {
  const auto& formats = builtin_chat_formats();
  ASSERT_GE(formats.size(), 3u);
  std::set<std::string> names;
  for (const auto& f : formats) names.insert(f.name());
  EXPECT_EQ(names.size(), formats.size());
  EXPECT_NO_THROW(find_chat_format(formats, "chatml"));
  EXPECT_NO_THROW(find_chat_format(formats, "llama3"));
  EXPECT_NO_THROW(find_chat_format(formats, "gemma"));
  EXPECT_THROW(find_chat_format(formats, "nope"), std::invalid_argument);
}

TEST(BuiltinChatFormats, ChatmlEmptyTurnsAreDelimitersConcatenated) {
  const auto& f = find_chat_format(builtin_chat_formats(), "chatml");
  EXPECT_EQ(f.user_open() + f.user_close() + f.assistant_open() + f.assistant_close(),
            "<|im_start|>user\n<|im_end|>\n<|im_start|>assistant\n<|im_end|>\n");
}

TEST(BuiltinChatFormats, RoundTripThroughJsonConfig) {
  json config;
  config["chat_formats"] = builtin_chat_formats();
  const auto back = templating_config_from_json(json::parse(config.dump()));
  EXPECT_EQ(back.chat_formats, builtin_chat_formats());
}

TEST(TemplatingConfig, CustomFormatsAppendOrReplace) {
  const auto cfg = templating_config_from_json(json::parse(R"({
    "chat_formats": [
      {"name": "chatml", "user_open": "U:", "user_close": "", "assistant_open": "A:", "assistant_close": ""},
      {"name": "plain", "user_open": "", "user_close": "\n", "assistant_open": "Reply:", "assistant_close": ""}
    ],
    "layout": {"instruction": "Pick one.", "answer_cue": ""}
  })"));
  EXPECT_EQ(cfg.chat_formats.size(), builtin_chat_formats().size() + 1);
  EXPECT_EQ(find_chat_format(cfg.chat_formats, "chatml").user_open(), "U:");
  EXPECT_EQ(cfg.chat_formats.back().name(), "plain");
  EXPECT_EQ(cfg.layout.instruction, "Pick one.");
  EXPECT_EQ(cfg.layout.option_line_format, "{label}) {text}");
  const auto p = render_prompt(sample_question(), cfg.layout,
                               find_chat_format(cfg.chat_formats, "plain"), PromptMode::kPlainFtp);
  EXPECT_TRUE(ends_with(p.bytes(), "D) Saturn\nReply:"));
  EXPECT_EQ(layout_from_json(to_json(cfg.layout)), cfg.layout);
}

TEST(TemplatingConfig, RejectsInvalidFormat) {
  EXPECT_ANY_THROW(templating_config_from_json(json::parse(R"({
    "chat_formats": [{"name": "x", "user_open": "", "user_close": "", "assistant_open": "", "assistant_close": ""}]
  })")));
}

TEST(BuiltinPrefillTemplates, TenTemplatesWithT07Default) {
  const auto& all = builtin_prefill_templates();
  ASSERT_EQ(all.size(), 10u);
  EXPECT_EQ(all[0].text(), "I choose:");
  for (std::size_t i = 0; i < all.size(); ++i) {
    char id[4];
    std::snprintf(id, sizeof id, "t%02zu", i + 1);
    EXPECT_EQ(all[i].id(), id);
  }
  EXPECT_EQ(kDefaultPrefillId, "t07");
  EXPECT_EQ(default_prefill_template().text(),
            "Given the question and the possible options, my answer is:");
  EXPECT_THROW(find_prefill_template("t11"), std::invalid_argument);
}

// Random question generator shared by the property tests below.
Question random_question(std::mt19937_64& rng, int idx) {
  static const std::string alphabet = "abcXYZ 01?!\n\t{}()<>|éü";
  std::uniform_int_distribution<int> len(0, 24);
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
  auto text = [&] {
    std::string s;
    for (int n = len(rng); n > 0; --n) s += alphabet[ch(rng)];
    return s;
  };
  const int k = std::uniform_int_distribution<int>(2, 6)(rng);
  std::vector<Option> opts;
  for (int i = 0; i < k; ++i) opts.push_back({static_cast<char>('A' + i), text()});
  const char gold = static_cast<char>('A' + std::uniform_int_distribution<int>(0, k - 1)(rng));
  return Question("r" + std::to_string(idx), text(), std::move(opts), gold);
}

TEST(RenderProperties, PrefillIsPlainPlusTemplateAndUserTurnUnchanged) {
  std::mt19937_64 rng(11);
  const auto& formats = builtin_chat_formats();
  const auto& templates = builtin_prefill_templates();
  for (int i = 0; i < 300; ++i) {
    const auto q = random_question(rng, i);
    const auto& fmt = formats[static_cast<std::size_t>(i) % formats.size()];
    const auto& tpl = templates[static_cast<std::size_t>(i) % templates.size()];
    const auto plain = render_prompt(q, default_layout(), fmt, PromptMode::kPlainFtp);
    const auto pre = render_prompt(q, default_layout(), fmt, PromptMode::kPrefill, tpl);
    ASSERT_EQ(pre.bytes(), plain.bytes() + tpl.text());
    const auto user_turn =
        fmt.user_open() + render_user_content(q, default_layout(), PromptMode::kPlainFtp) +
        fmt.user_close();
    EXPECT_EQ(plain.bytes().substr(0, user_turn.size()), user_turn);
    EXPECT_EQ(pre.bytes().substr(0, user_turn.size()), user_turn);
    // Determinism.
    EXPECT_EQ(render_prompt(q, default_layout(), fmt, PromptMode::kPrefill, tpl), pre);
  }
}

std::string golden_path(const std::string& name) {
  return std::string(FTPEVAL_GOLDEN_DIR) + "/" + name + ".txt";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Byte-exact golden files per builtin format and mode. Regenerate with
// FTPEVAL_UPDATE_GOLDEN=1 after an intentional rendering change.
TEST(Golden, BuiltinFormatsRenderByteExact) {
  const bool update = std::getenv("FTPEVAL_UPDATE_GOLDEN") != nullptr;
  const std::pair<PromptMode, const char*> modes[] = {
      {PromptMode::kPlainFtp, "plain_ftp"},
      {PromptMode::kPromptInstruction, "prompt_instruction"},
      {PromptMode::kPrefill, "prefill"},
  };
  for (const auto& fmt : builtin_chat_formats()) {
    for (const auto& [mode, mode_name] : modes) {
      std::optional<PrefillTemplate> tpl;
      if (mode == PromptMode::kPrefill) tpl = default_prefill_template();
      const auto bytes = render_prompt(sample_question(), default_layout(), fmt, mode, tpl).bytes();
      const auto path = golden_path(fmt.name() + "_" + mode_name);
      if (update) std::ofstream(path, std::ios::binary) << bytes;
      EXPECT_EQ(read_file(path), bytes) << path;
    }
  }
}

}  // namespace
}  // namespace ftpeval
