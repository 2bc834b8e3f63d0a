#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "ftpeval/backend.hpp"

namespace ftpeval {
namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw InvariantError("BackendConfig: base_url must start with http:// or https://");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) ep.prefix = url.substr(path_start);
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg)
      : Backend(std::move(cfg)), endpoint_(split_url(*config().base_url)) {
    if (const char* key = std::getenv(kApiKeyEnv); key != nullptr && *key != '\0') {
      api_key_ = key;
    }
  }

  GenerationTrace complete(const RenderedPrompt& prompt) const override {
    const auto [body, attempts] = post(completion_request(config(), prompt.bytes()));
    try {
      return parse_completion_response(body, config(), [this](const std::string& m) { warn(m); });
    } catch (const MalformedResponseError& e) {
      throw MalformedResponseError(e.what(), attempts);
    }
  }

  std::string generate(std::string_view prompt, int max_tokens) const override {
    json request{{"model", config().model_name},
                 {"prompt", std::string(prompt)},
                 {"max_tokens", max_tokens},
                 {"temperature", 0},
                 {"echo", false}};
    const auto [body, attempts] = post(request);
    try {
      return body.at("choices").at(0).at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw MalformedResponseError(std::string("malformed completion response: ") + e.what(),
                                   attempts);
    }
  }

 private:
  struct Reply {
    json body;
    int attempts;
  };

  Reply post(const json& request) const {
    const auto& cfg = config();
    const std::string payload = request.dump();
    const std::string path = endpoint_.prefix + "/v1/completions";
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
      if (attempt > 1) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(cfg.backoff_base_ms << (attempt - 2)));
      }
      httplib::Client client(endpoint_.origin);
      const auto timeout = std::chrono::milliseconds(cfg.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);

      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "server error: HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw BackendError("backend rejected request: HTTP " + std::to_string(res->status) +
                               ": " + res->body,
                           false, attempt);
      }
      try {
        return {json::parse(res->body), attempt};
      } catch (const json::parse_error& e) {
        throw MalformedResponseError(std::string("response is not JSON: ") + e.what(), attempt);
      }
    }
    throw TransportError(last_error + " (after " + std::to_string(cfg.max_attempts) +
                             " attempts)",
                         cfg.max_attempts);
  }

  Endpoint endpoint_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<Backend> make_http_backend(BackendConfig cfg) {
  cfg.kind = BackendKind::kHttp;
  return std::make_unique<HttpBackend>(std::move(cfg));
}

}  // namespace ftpeval
