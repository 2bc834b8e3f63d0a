#include "ftpeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

namespace ftpeval {
namespace {

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw MetricError(std::string(what) + ": empty input");
}

void require_matching(std::span<const ProbVector> vectors, std::span<const char> golds,
                      const char* what) {
  if (vectors.size() != golds.size()) {
    throw MetricError(std::string(what) + ": arity mismatch between vectors and golds");
  }
  require_nonempty(vectors.size(), what);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = vectors[i];
    if (v.labels.size() != v.probs.size() ||
        std::find(v.labels.begin(), v.labels.end(), golds[i]) == v.labels.end()) {
      throw MetricError(std::string(what) + ": arity mismatch at item " + std::to_string(i));
    }
  }
}

}  // namespace

double ProbVector::at(char label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return probs[i];
  }
  return 0.0;
}

std::size_t ProbVector::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

ProbVector raw_options(const std::map<char, double>& option_probs) {
  ProbVector v;
  for (const auto& [label, p] : option_probs) {
    if (p < 0.0) throw MetricError("raw_options: negative mass");
    v.labels.push_back(label);
    v.probs.push_back(p);
  }
  return v;
}

ProbVector normalize_options(const std::map<char, double>& option_probs) {
  if (option_probs.empty()) throw MetricError("normalize_options: no options");
  ProbVector v = raw_options(option_probs);
  double total = 0.0;
  for (double p : v.probs) total += p;
  if (total <= 0.0) {
    std::fill(v.probs.begin(), v.probs.end(), 1.0 / static_cast<double>(v.probs.size()));
    v.degenerate = true;
    return v;
  }
  for (double& p : v.probs) p /= total;
  return v;
}

double accuracy(std::span<const FirstTokenOutcome> outcomes, AccuracyField field) {
  require_nonempty(outcomes.size(), "accuracy");
  std::size_t correct = 0;
  for (const auto& o : outcomes) {
    if (field == AccuracyField::kRestrictedChoice) {
      correct += o.restricted_choice == o.gold_label;
    } else {
      correct += o.matched_label.has_value() && *o.matched_label == o.gold_label;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(outcomes.size());
}

double ftvr(std::span<const FirstTokenOutcome> outcomes) {
  require_nonempty(outcomes.size(), "ftvr");
  std::size_t valid = 0;
  for (const auto& o : outcomes) valid += o.is_valid;
  return 100.0 * static_cast<double>(valid) / static_cast<double>(outcomes.size());
}

std::optional<double> continuation_diversity(std::span<const FirstTokenOutcome> outcomes) {
  const double rate = ftvr(outcomes);
  if (rate <= 0.0) return std::nullopt;
  std::set<std::string> distinct;
  for (const auto& o : outcomes) {
    if (o.is_valid && o.second_token) distinct.insert(*o.second_token);
  }
  return static_cast<double>(distinct.size()) / rate;
}

double brier_x100(std::span<const ProbVector> vectors, std::span<const char> golds) {
  require_matching(vectors, golds, "brier_x100");
  double sum = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double gap = vectors[i].at(golds[i]) - 1.0;
    sum += gap * gap;
  }
  return 100.0 * sum / static_cast<double>(vectors.size());
}

double log_loss(std::span<const ProbVector> vectors, std::span<const char> golds) {
  require_matching(vectors, golds, "log_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    sum -= std::log(std::max(vectors[i].at(golds[i]), kLogLossFloor));
  }
  return sum / static_cast<double>(vectors.size());
}

double ace(std::span<const ProbVector> vectors, std::span<const char> golds, int ranges) {
  require_matching(vectors, golds, "ace");
  if (ranges < 1) throw MetricError("ace: need at least one range");
  const std::size_t n = vectors.size();
  const auto r_count = static_cast<std::size_t>(ranges);
  if (n < r_count) throw MetricError("ace: fewer predictions than ranges");

  std::set<char> classes;
  for (const auto& v : vectors) classes.insert(v.labels.begin(), v.labels.end());
  if (classes.size() < 2) throw MetricError("ace: need at least two classes");

  const std::size_t per_range = n / r_count;
  std::vector<std::pair<double, int>> column(n);
  double total = 0.0;
  for (char k : classes) {
    for (std::size_t i = 0; i < n; ++i) column[i] = {vectors[i].at(k), golds[i] == k ? 1 : 0};
    std::sort(column.begin(), column.end());
    for (std::size_t r = 0; r < r_count; ++r) {
      const std::size_t begin = r * per_range;
      const std::size_t end = r + 1 == r_count ? n : begin + per_range;
      double conf = 0.0;
      double hits = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        conf += column[i].first;
        hits += column[i].second;
      }
      const auto size = static_cast<double>(end - begin);
      total += std::abs(hits / size - conf / size);
    }
  }
  return total / (static_cast<double>(classes.size()) * static_cast<double>(r_count));
}

std::vector<CalibrationBin> calibration_curve(std::span<const ProbVector> vectors,
                                              std::span<const char> golds, int bins) {
  if (bins < 2) throw MetricError("calibration_curve: need at least two bins");
  if (vectors.size() != golds.size()) {
    throw MetricError("calibration_curve: arity mismatch between vectors and golds");
  }
  const auto b_count = static_cast<std::size_t>(bins);
  std::vector<double> conf_sum(b_count, 0.0);
  std::vector<double> hit_sum(b_count, 0.0);
  std::vector<std::size_t> counts(b_count, 0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = vectors[i];
    if (v.probs.empty()) throw MetricError("calibration_curve: empty probability vector");
    const std::size_t top = v.argmax();
    const double conf = v.probs[top];
    auto b = static_cast<std::size_t>(std::floor(conf * static_cast<double>(b_count)));
    b = std::min(b, b_count - 1);
    conf_sum[b] += conf;
    hit_sum[b] += v.labels[top] == golds[i] ? 1.0 : 0.0;
    ++counts[b];
  }
  std::vector<CalibrationBin> rows(b_count);
  for (std::size_t b = 0; b < b_count; ++b) {
    rows[b].lo = static_cast<double>(b) / static_cast<double>(b_count);
    rows[b].hi = static_cast<double>(b + 1) / static_cast<double>(b_count);
    rows[b].count = counts[b];
    if (counts[b] > 0) {
      rows[b].mean_confidence = conf_sum[b] / static_cast<double>(counts[b]);
      rows[b].accuracy = hit_sum[b] / static_cast<double>(counts[b]);
    }
  }
  return rows;
}

MeanStd aggregate_mean_std(std::span<const double> values) {
  require_nonempty(values.size(), "aggregate_mean_std");
  // Welford's update.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double x : values) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  return MeanStd{mean, std::sqrt(std::max(0.0, m2 / static_cast<double>(n)))};
}

}  // namespace ftpeval
