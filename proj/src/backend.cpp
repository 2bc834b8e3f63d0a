#include "ftpeval/backend.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

namespace ftpeval {
namespace {

std::mutex& stderr_mutex() {
  static std::mutex m;
  return m;
}

void validate_distribution(const Distribution& dist, const std::string& where) {
  std::set<std::string_view> seen;
  double total = 0.0;
  for (const auto& t : dist) {
    if (t.token_text.empty()) throw InvariantError(where + ": token_text must be non-empty");
    if (!(t.prob > 0.0)) throw InvariantError(where + ": probabilities must be > 0");
    if (!seen.insert(t.token_text).second) {
      throw InvariantError(where + ": token_texts must be distinct");
    }
    total += t.prob;
  }
  if (total > 1.0 + 1e-9) throw InvariantError(where + ": probabilities must sum to <= 1");
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Label surfaces plus the usual preamble tokens.
const std::vector<std::string>& synthetic_vocabulary() {
  static const std::vector<std::string> vocab = {"A", "B", "C", "D", " A", " B",
                                                 " C", " D", "The", "I", "\n"};
  return vocab;
}

Distribution synthesize(std::uint64_t seed, std::string_view prompt, std::size_t position) {
  std::uint64_t state = fnv1a(prompt) ^ seed ^ (0x51afd7ed558ccd00ULL * (position + 1));
  const auto& vocab = synthetic_vocabulary();
  std::vector<double> weights(vocab.size());
  double total = 0.0;
  for (auto& w : weights) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    w = u * u * u + 1e-3;
    total += w;
  }
  Distribution dist;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    dist.push_back({vocab[i], 0.95 * weights[i] / total});
  }
  return dist;
}

CandidateList to_candidates(const Distribution& dist, int top_k) {
  CandidateList cands;
  cands.reserve(dist.size());
  for (const auto& t : dist) cands.emplace_back(t.token_text, std::log(t.prob));
  sort_candidates(cands);
  if (cands.size() > static_cast<std::size_t>(top_k)) cands.erase(cands.begin() + top_k, cands.end());
  return cands;
}

Distribution distribution_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw InvariantError(where + ": distribution must be an object");
  Distribution dist;
  for (const auto& [token, p] : j.items()) dist.push_back({token, p.get<double>()});
  validate_distribution(dist, where);
  return dist;
}

json distribution_to_json(const Distribution& dist) {
  json j = json::object();
  for (const auto& t : dist) j[t.token_text] = t.prob;
  return j;
}

class MockBackend final : public Backend {
 public:
  MockBackend(BackendConfig cfg, MockScript script)
      : Backend(std::move(cfg)), script_(std::move(script)) {}

  GenerationTrace complete(const RenderedPrompt& prompt) const override {
    const auto& cfg = config();
    std::vector<CandidateList> positions;
    positions.reserve(static_cast<std::size_t>(cfg.n_positions));
    for (int p = 0; p < cfg.n_positions; ++p) {
      positions.push_back(
          to_candidates(script_.distribution_at(prompt.bytes(), static_cast<std::size_t>(p)),
                        cfg.top_k));
    }
    return GenerationTrace::from_positions(std::move(positions), cfg.top_k);
  }

  std::string generate(std::string_view prompt, int max_tokens) const override {
    const std::size_t n =
        std::min(script_.scripted_length(prompt), static_cast<std::size_t>(std::max(0, max_tokens)));
    std::string out;
    for (std::size_t p = 0; p < n; ++p) {
      out += to_candidates(script_.distribution_at(prompt, p), 1).front().token_text();
    }
    return out;
  }

 private:
  MockScript script_;
};

}  // namespace

void BackendConfig::validate() const {
  if (kind == BackendKind::kHttp && (!base_url || base_url->empty())) {
    throw InvariantError("BackendConfig: http backend requires base_url");
  }
  if (top_k < 1) throw InvariantError("BackendConfig: top_k must be >= 1");
  if (n_positions < 1) throw InvariantError("BackendConfig: n_positions must be >= 1");
  if (max_in_flight < 1) throw InvariantError("BackendConfig: max_in_flight must be >= 1");
  if (max_attempts < 1) throw InvariantError("BackendConfig: max_attempts must be >= 1");
  if (timeout_ms < 1) throw InvariantError("BackendConfig: timeout_ms must be >= 1");
}

json to_json(const BackendConfig& cfg) {
  json j{{"kind", cfg.kind == BackendKind::kHttp ? "http" : "mock"},
         {"model_name", cfg.model_name},
         {"top_k", cfg.top_k},
         {"n_positions", cfg.n_positions},
         {"timeout_ms", cfg.timeout_ms},
         {"max_in_flight", cfg.max_in_flight}};
  if (cfg.base_url) j["base_url"] = *cfg.base_url;
  return j;
}

BackendConfig backend_config_from_json(const json& j, BackendConfig cfg) {
  if (j.contains("kind")) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "http") {
      cfg.kind = BackendKind::kHttp;
    } else if (kind == "mock") {
      cfg.kind = BackendKind::kMock;
    } else {
      throw InvariantError("BackendConfig: unknown kind '" + kind + "'");
    }
  }
  if (j.contains("base_url")) cfg.base_url = j.at("base_url").get<std::string>();
  cfg.model_name = j.value("model_name", cfg.model_name);
  cfg.top_k = j.value("top_k", cfg.top_k);
  cfg.n_positions = j.value("n_positions", cfg.n_positions);
  cfg.timeout_ms = j.value("timeout_ms", cfg.timeout_ms);
  cfg.max_in_flight = j.value("max_in_flight", cfg.max_in_flight);
  cfg.validate();
  return cfg;
}

MockScript::MockScript(Distribution default_distribution,
                       std::map<std::string, std::vector<Distribution>> per_prompt_overrides,
                       std::uint64_t seed)
    : default_distribution_(std::move(default_distribution)),
      overrides_(std::move(per_prompt_overrides)), seed_(seed) {
  validate_distribution(default_distribution_, "MockScript default_distribution");
  for (const auto& [trigger, positions] : overrides_) {
    if (trigger.empty()) throw InvariantError("MockScript: override trigger must be non-empty");
    if (positions.empty()) {
      throw InvariantError("MockScript override '" + trigger + "': needs at least one position");
    }
    for (std::size_t p = 0; p < positions.size(); ++p) {
      if (positions[p].empty()) {
        throw InvariantError("MockScript override '" + trigger + "' position " +
                             std::to_string(p) + ": distribution must be non-empty");
      }
      validate_distribution(positions[p], "MockScript override '" + trigger + "' position " +
                                              std::to_string(p));
    }
  }
}

const std::vector<Distribution>* MockScript::match(std::string_view prompt) const {
  const std::vector<Distribution>* best = nullptr;
  std::size_t best_len = 0;
  // std::map iterates triggers in lexicographic order, so the first of equal
  // length wins.
  for (const auto& [trigger, positions] : overrides_) {
    if (trigger.size() > best_len && prompt.find(trigger) != std::string_view::npos) {
      best = &positions;
      best_len = trigger.size();
    }
  }
  return best;
}

Distribution MockScript::distribution_at(std::string_view prompt, std::size_t position) const {
  if (const auto* o = match(prompt); o != nullptr && position < o->size()) return (*o)[position];
  if (!default_distribution_.empty()) return default_distribution_;
  return synthesize(seed_, prompt, position);
}

std::size_t MockScript::scripted_length(std::string_view prompt) const {
  if (const auto* o = match(prompt)) return o->size();
  return 1;
}

MockScript mock_script_from_json(const json& j) {
  Distribution def;
  if (j.contains("default_distribution")) {
    def = distribution_from_json(j.at("default_distribution"), "MockScript default_distribution");
  }
  std::map<std::string, std::vector<Distribution>> overrides;
  if (j.contains("per_prompt_overrides")) {
    for (const auto& [trigger, positions] : j.at("per_prompt_overrides").items()) {
      std::vector<Distribution> list;
      for (const auto& d : positions) {
        list.push_back(distribution_from_json(d, "MockScript override '" + trigger + "'"));
      }
      overrides.emplace(trigger, std::move(list));
    }
  }
  return MockScript(std::move(def), std::move(overrides), j.value("seed", std::uint64_t{0}));
}

json to_json(const MockScript& script) {
  json overrides = json::object();
  for (const auto& [trigger, positions] : script.per_prompt_overrides()) {
    json list = json::array();
    for (const auto& d : positions) list.push_back(distribution_to_json(d));
    overrides[trigger] = std::move(list);
  }
  return json{{"default_distribution", distribution_to_json(script.default_distribution())},
              {"per_prompt_overrides", std::move(overrides)},
              {"seed", script.seed()}};
}

MockScript load_mock_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mock script '" + path + "'");
  return mock_script_from_json(json::parse(in));
}

Backend::Backend(BackendConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

void Backend::warn(const std::string& message) const {
  if (warn_) {
    warn_(message);
    return;
  }
  std::lock_guard<std::mutex> lock(stderr_mutex());
  std::cerr << "warning: " << message << "\n";
}

std::unique_ptr<Backend> make_mock_backend(BackendConfig cfg, MockScript script) {
  cfg.kind = BackendKind::kMock;
  return std::make_unique<MockBackend>(std::move(cfg), std::move(script));
}

json completion_request(const BackendConfig& cfg, std::string_view prompt) {
  return json{{"model", cfg.model_name},
              {"prompt", std::string(prompt)},
              {"max_tokens", cfg.n_positions},
              {"temperature", 0},
              {"logprobs", cfg.top_k},
              {"echo", false}};
}

GenerationTrace parse_completion_response(const json& body, const BackendConfig& cfg,
                                          const WarningSink& warn) {
  try {
    const auto& choices = body.at("choices");
    if (!choices.is_array() || choices.empty()) {
      throw MalformedResponseError("response has no choices");
    }
    const auto& top = choices.at(0).at("logprobs").at("top_logprobs");
    if (!top.is_array() || top.empty()) {
      throw MalformedResponseError("response has no top_logprobs positions");
    }
    const std::size_t wanted = static_cast<std::size_t>(cfg.n_positions);
    if (top.size() < wanted && warn) {
      warn("backend returned " + std::to_string(top.size()) + " positions, requested " +
           std::to_string(wanted));
    }
    std::vector<CandidateList> positions;
    for (std::size_t p = 0; p < std::min(top.size(), wanted); ++p) {
      const auto& entry = top.at(p);
      if (!entry.is_object()) throw MalformedResponseError("top_logprobs entry is not an object");
      CandidateList cands;
      for (const auto& [token, lp] : entry.items()) {
        if (!lp.is_number()) throw MalformedResponseError("logprob for '" + token + "' is not a number");
        cands.emplace_back(token, lp.get<double>());
      }
      if (cands.empty()) throw MalformedResponseError("empty top_logprobs entry");
      if (cands.size() < static_cast<std::size_t>(cfg.top_k) && warn) {
        warn("position " + std::to_string(p) + ": backend returned " +
             std::to_string(cands.size()) + " logprobs, requested " + std::to_string(cfg.top_k));
      }
      sort_candidates(cands);
      if (cands.size() > static_cast<std::size_t>(cfg.top_k)) {
        cands.erase(cands.begin() + cfg.top_k, cands.end());
      }
      positions.push_back(std::move(cands));
    }
    return GenerationTrace::from_positions(std::move(positions), cfg.top_k);
  } catch (const MalformedResponseError&) {
    throw;
  } catch (const std::exception& e) {
    throw MalformedResponseError(std::string("malformed completion response: ") + e.what());
  }
}

BatchResult complete_batch(const Backend& backend, std::span<const RenderedPrompt> prompts) {
  if (prompts.empty()) throw std::invalid_argument("complete_batch: no prompts");
  BatchResult result;
  result.traces.resize(prompts.size());
  std::mutex errors_mutex;
  for_each_bounded(prompts.size(), backend.config().max_in_flight, [&](std::size_t i) {
    try {
      result.traces[i] = backend.complete(prompts[i]);
    } catch (const BackendError& e) {
      std::lock_guard<std::mutex> lock(errors_mutex);
      result.errors.push_back({i, e.what(), e.attempts()});
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(errors_mutex);
      result.errors.push_back({i, e.what(), 1});
    }
  });
  std::sort(result.errors.begin(), result.errors.end(),
            [](const BatchError& a, const BatchError& b) { return a.index < b.index; });
  return result;
}

void for_each_bounded(std::size_t n, int max_in_flight,
                      const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min(n, static_cast<std::size_t>(std::max(1, max_in_flight)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ftpeval
