#pragma once

// Mock scripts shared by the runner, CLI and acceptance tests.

#include <string>

#include "ftpeval/backend.hpp"
#include "ftpeval/templating.hpp"

namespace scripts {

// Unprefilled prompts open with "The"; the default prefill template pushes
// " A" to the top, followed by a "." continuation.
inline ftpeval::MockScript steering() {
  return ftpeval::MockScript(
      {{"The", 0.6}, {" A", 0.15}, {" B", 0.1}, {" C", 0.05}},
      {{"my answer is:", {{{" A", 0.7}, {" B", 0.1}, {" C", 0.1}, {"The", 0.05}}, {{".", 0.9}}}}});
}

// Each builtin prefill template steers towards a different label:
// template i (0-based) puts label 'A' + i % 3 on top.
inline char sweep_label(std::size_t template_index) {
  return static_cast<char>('A' + template_index % 3);
}

inline ftpeval::MockScript sweep() {
  std::map<std::string, std::vector<ftpeval::Distribution>> overrides;
  const auto& templates = ftpeval::builtin_prefill_templates();
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const std::string top(1, sweep_label(i));
    ftpeval::Distribution d = {{top, 0.6}};
    for (char other : {'A', 'B', 'C'}) {
      if (other != top[0]) d.push_back({" " + std::string(1, other), 0.1});
    }
    overrides[templates[i].text()] = {d};
  }
  return ftpeval::MockScript({{"The", 0.9}}, std::move(overrides));
}

}  // namespace scripts
