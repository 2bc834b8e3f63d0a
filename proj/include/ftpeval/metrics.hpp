#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ftpeval/core.hpp"

namespace ftpeval {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Per-label probabilities for one question, labels in ascending order.
struct ProbVector {
  std::vector<char> labels;
  std::vector<double> probs;
  // Built from all-zero option mass.
  bool degenerate = false;

  // Probability of `label`, or 0 when the question has no such option.
  double at(char label) const;
  // Index of the most probable label; ties go to the smallest label.
  std::size_t argmax() const;
};

// Divides each mass by the total. All-zero input maps to the uniform vector
// with the degenerate flag set.
ProbVector normalize_options(const std::map<char, double>& option_probs);

// Keeps the unnormalized masses (for calibration over raw vocabulary mass).
ProbVector raw_options(const std::map<char, double>& option_probs);

enum class AccuracyField { kRestrictedChoice, kMatchedLabel };

double accuracy(std::span<const FirstTokenOutcome> outcomes, AccuracyField field);

// Percentage (0..100) of outcomes whose greedy first token is a valid label.
double ftvr(std::span<const FirstTokenOutcome> outcomes);

// Distinct second tokens after a valid first token, divided by the FTVR
// percentage. Empty when no first token is valid.
std::optional<double> continuation_diversity(std::span<const FirstTokenOutcome> outcomes);

// 100 * mean (p_gold - 1)^2.
double brier_x100(std::span<const ProbVector> vectors, std::span<const char> golds);

inline constexpr double kLogLossFloor = 1e-12;
// Mean of -ln p_gold, with p_gold clamped below at kLogLossFloor.
double log_loss(std::span<const ProbVector> vectors, std::span<const char> golds);

// Adaptive calibration error over `ranges` equal-count ranges per class.
//
// Classes are the union of all labels; a question without a given option
// contributes probability 0 for it. Per class the N probabilities are sorted
// ascending (ties: non-gold before gold), cut into ranges of floor(N/R)
// items, and the last range takes the remainder.
double ace(std::span<const ProbVector> vectors, std::span<const char> golds, int ranges = 10);

// Reliability-diagram rows over equal-width confidence bins on [0, 1]; the
// last bin is closed. Empty bins have count 0 and no means.
std::vector<CalibrationBin> calibration_curve(std::span<const ProbVector> vectors,
                                              std::span<const char> golds, int bins = 10);

struct MeanStd {
  double mean = 0.0;
  // Population standard deviation (divisor N).
  double std = 0.0;
};

MeanStd aggregate_mean_std(std::span<const double> values);

}  // namespace ftpeval
