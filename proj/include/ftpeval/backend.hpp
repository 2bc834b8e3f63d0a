#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ftpeval/core.hpp"

namespace ftpeval {

enum class BackendKind { kHttp, kMock };

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::optional<std::string> base_url;
  std::string model_name = "mock";
  int top_k = 50;
  int n_positions = 2;
  int timeout_ms = 60000;
  int max_in_flight = 4;
  int max_attempts = 3;
  int backoff_base_ms = 250;

  void validate() const;
};

json to_json(const BackendConfig& cfg);
// Missing keys keep their defaults.
BackendConfig backend_config_from_json(const json& j, BackendConfig base = {});

// Environment variable holding the bearer token sent to HTTP backends.
inline constexpr const char* kApiKeyEnv = "FTP_HARNESS_API_KEY";

class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retryable, int attempts)
      : std::runtime_error(what), retryable_(retryable), attempts_(attempts) {}

  bool retryable() const { return retryable_; }
  int attempts() const { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

// Connection failures and 5xx responses, after all retries were used.
class TransportError : public BackendError {
 public:
  TransportError(const std::string& what, int attempts) : BackendError(what, true, attempts) {}
};

// The server answered but the body is unusable; never retried.
class MalformedResponseError : public BackendError {
 public:
  explicit MalformedResponseError(const std::string& what, int attempts = 1)
      : BackendError(what, false, attempts) {}
};

struct ScriptedToken {
  std::string token_text;
  double prob = 0.0;

  bool operator==(const ScriptedToken&) const = default;
};

using Distribution = std::vector<ScriptedToken>;

// Deterministic script for the mock backend.
//
// A prompt containing one of the override triggers uses that trigger's
// per-position distributions (longest trigger wins, ties go to the
// lexicographically smallest). Positions past the end of an override, and
// prompts without a trigger, use `default_distribution`. An empty default
// distribution makes the mock synthesize one from (seed, prompt bytes,
// position), which is handy for desk-scale sweeps.
class MockScript {
 public:
  MockScript(Distribution default_distribution,
             std::map<std::string, std::vector<Distribution>> per_prompt_overrides,
             std::uint64_t seed = 0);

  const Distribution& default_distribution() const { return default_distribution_; }
  const std::map<std::string, std::vector<Distribution>>& per_prompt_overrides() const {
    return overrides_;
  }
  std::uint64_t seed() const { return seed_; }

  // The override whose trigger occurs in `prompt`, if any.
  const std::vector<Distribution>* match(std::string_view prompt) const;

  // Distribution used at `position` for `prompt`.
  Distribution distribution_at(std::string_view prompt, std::size_t position) const;

  // Number of positions the mock emits before stopping in free generation.
  std::size_t scripted_length(std::string_view prompt) const;

 private:
  Distribution default_distribution_;
  std::map<std::string, std::vector<Distribution>> overrides_;
  std::uint64_t seed_;
};

MockScript mock_script_from_json(const json& j);
json to_json(const MockScript& script);
MockScript load_mock_script(const std::string& path);

using WarningSink = std::function<void(const std::string&)>;

class Backend {
 public:
  explicit Backend(BackendConfig cfg);
  virtual ~Backend() = default;

  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendConfig& config() const { return cfg_; }

  // Next-token top-k distributions along the greedy path, n_positions long.
  virtual GenerationTrace complete(const RenderedPrompt& prompt) const = 0;

  // Free greedy generation of up to `max_tokens` tokens.
  virtual std::string generate(std::string_view prompt, int max_tokens) const = 0;

  // Receives non-fatal diagnostics; defaults to stderr. Called from worker
  // threads during batches.
  void set_warning_sink(WarningSink sink) { warn_ = std::move(sink); }

 protected:
  void warn(const std::string& message) const;

 private:
  BackendConfig cfg_;
  WarningSink warn_;
};

std::unique_ptr<Backend> make_mock_backend(BackendConfig cfg, MockScript script);
std::unique_ptr<Backend> make_http_backend(BackendConfig cfg);

// Builds the request body sent to POST {base_url}/v1/completions.
json completion_request(const BackendConfig& cfg, std::string_view prompt);
// Parses a completions response into a trace. `warn` receives shortfall notes.
GenerationTrace parse_completion_response(const json& body, const BackendConfig& cfg,
                                          const WarningSink& warn = {});

struct BatchError {
  std::size_t index = 0;
  std::string message;
  int attempts = 1;
};

struct BatchResult {
  // Same order as the input; empty where the item failed.
  std::vector<std::optional<GenerationTrace>> traces;
  // Sorted by index.
  std::vector<BatchError> errors;

  bool ok() const { return errors.empty(); }
};

BatchResult complete_batch(const Backend& backend, std::span<const RenderedPrompt> prompts);

// Runs fn(0..n-1) with at most `max_in_flight` calls outstanding.
void for_each_bounded(std::size_t n, int max_in_flight,
                      const std::function<void(std::size_t)>& fn);

}  // namespace ftpeval
