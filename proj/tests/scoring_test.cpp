#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "ftpeval/scoring.hpp"
#include "oracles.hpp"

namespace ftpeval {
namespace {

const std::vector<char> kAbcd = {'A', 'B', 'C', 'D'};

const Question& abcd_question() {
  static const Question q("q", "s", {{'A', "a"}, {'B', "b"}, {'C', "c"}, {'D', "d"}}, 'A');
  return q;
}

CandidateList cands(std::initializer_list<std::pair<const char*, double>> probs) {
  CandidateList out;
  for (const auto& [text, p] : probs) out.emplace_back(text, std::log(p));
  sort_candidates(out);
  return out;
}

GenerationTrace greedy_trace(std::vector<std::string> tokens) {
  std::vector<CandidateList> positions;
  for (const auto& t : tokens) positions.push_back({TokenCandidate(t, std::log(0.6))});
  return GenerationTrace(std::move(positions), std::move(tokens), 5);
}

TEST(MatchValidLabel, Examples) {
  EXPECT_EQ(match_valid_label(" A", kAbcd), 'A');
  EXPECT_EQ(match_valid_label("A", kAbcd), 'A');
  EXPECT_EQ(match_valid_label("\n\nD", kAbcd), 'D');
  EXPECT_EQ(match_valid_label(" \nB", kAbcd), 'B');
  EXPECT_EQ(match_valid_label("\n\n\nA", kAbcd), std::nullopt);
  EXPECT_EQ(match_valid_label("A.", kAbcd), std::nullopt);
  EXPECT_EQ(match_valid_label("a", kAbcd), std::nullopt);
  EXPECT_EQ(match_valid_label("E", kAbcd), std::nullopt);
  EXPECT_EQ(match_valid_label("\tA", kAbcd), std::nullopt);
  EXPECT_EQ(match_valid_label("", kAbcd), std::nullopt);
  EXPECT_EQ(match_valid_label("  ", kAbcd), std::nullopt);
  EXPECT_EQ(match_valid_label("AB", kAbcd), std::nullopt);
}

// Property: agrees with the regex oracle on random strings drawn from an
// alphabet that makes near-misses common.
TEST(MatchValidLabel, AgreesWithRegexOracle) {
  std::mt19937_64 rng(17);
  const std::string alphabet = " \n\tABCDEab.)";
  std::uniform_int_distribution<int> len(0, 5);
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
  for (int i = 0; i < 3000; ++i) {
    std::string s;
    for (int n = len(rng); n > 0; --n) s += alphabet[ch(rng)];
    ASSERT_EQ(match_valid_label(s, kAbcd), oracle::match_label(s, kAbcd)) << '"' << s << '"';
  }
}

TEST(OptionProbabilities, SumsSurfaceVariants) {
  const auto probs = option_probabilities(cands({{"A", 0.5}, {" A", 0.2}, {"B", 0.1}}), kAbcd);
  EXPECT_NEAR(probs.at('A'), 0.7, 1e-15);
  EXPECT_NEAR(probs.at('B'), 0.1, 1e-15);
  EXPECT_EQ(probs.at('C'), 0.0);
  EXPECT_EQ(probs.at('D'), 0.0);
}

TEST(OptionProbabilities, IgnoresNonLabelMass) {
  const auto probs = option_probabilities(cands({{"The", 0.9}, {"A", 0.05}}), kAbcd);
  EXPECT_NEAR(probs.at('A'), 0.05, 1e-15);
  EXPECT_EQ(probs.at('B'), 0.0);
}

TEST(OptionProbabilities, EmptyCandidatesGiveZeros) {
  const auto probs = option_probabilities({}, kAbcd);
  ASSERT_EQ(probs.size(), 4u);
  for (const auto& [label, p] : probs) EXPECT_EQ(p, 0.0) << label;
}

TEST(OptionProbabilities, StrictModeCountsOnlyBareLabel) {
  const auto probs = option_probabilities(cands({{"A", 0.5}, {" A", 0.2}, {"\nB", 0.1}}), kAbcd,
                                          SurfaceMode::kStrictSingle);
  EXPECT_NEAR(probs.at('A'), 0.5, 1e-15);
  EXPECT_EQ(probs.at('B'), 0.0);
}

TEST(FtpSelect, Examples) {
  EXPECT_EQ(ftp_select({{'A', 0.7}, {'B', 0.1}, {'C', 0}, {'D', 0}}).label, 'A');
  const auto tie = ftp_select({{'A', 0.25}, {'B', 0.25}, {'C', 0.25}, {'D', 0.25}});
  EXPECT_EQ(tie.label, 'A');
  EXPECT_FALSE(tie.degenerate);
  const auto zero = ftp_select({{'A', 0}, {'B', 0}, {'C', 0}, {'D', 0}});
  EXPECT_EQ(zero.label, 'A');
  EXPECT_TRUE(zero.degenerate);
  EXPECT_EQ(ftp_select({{'A', 0.1}, {'B', 0.3}, {'C', 0.3}}).label, 'B');
}

CandidateList random_candidates(std::mt19937_64& rng) {
  static const std::vector<std::string> surfaces = {"A", " A", "\nA", "B", " B", "  B", "C",
                                                    "\n C", "D", "The", "I", "a", "A."};
  std::uniform_int_distribution<int> n(0, 6);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<std::string> picked = surfaces;
  std::shuffle(picked.begin(), picked.end(), rng);
  picked.resize(static_cast<std::size_t>(n(rng)));
  CandidateList out;
  double remaining = 1.0;
  for (const auto& s : picked) {
    // Quantized so exact ties between labels occur.
    const double p = remaining * std::round(u(rng) * 4.0) / 8.0;
    if (p <= 0.0) continue;
    remaining -= p;
    out.emplace_back(s, std::log(p));
  }
  sort_candidates(out);
  return out;
}

// Property: restricted argmax equals a brute-force scan that accumulates mass
// per label with the regex oracle and keeps the first maximal label.
TEST(FtpSelect, MatchesBruteForceScan) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 2000; ++i) {
    const auto list = random_candidates(rng);
    std::map<char, double> mass;
    for (char l : kAbcd) mass[l] = 0.0;
    for (const auto& c : list) {
      if (auto l = oracle::match_label(c.token_text(), kAbcd)) mass[*l] += std::exp(c.logprob());
    }
    char best = 'A';
    for (char l : kAbcd) {
      if (mass[l] > mass[best]) best = l;
    }
    const auto got = option_probabilities(list, kAbcd);
    for (char l : kAbcd) ASSERT_NEAR(got.at(l), mass[l], 1e-15);
    ASSERT_EQ(ftp_select(got).label, best);
  }
}

// Property: scaling every candidate probability by c in (0, 1] keeps the
// selected label.
TEST(FtpSelect, InvariantUnderScaling) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> scale(0.01, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const auto list = random_candidates(rng);
    const double c = scale(rng);
    CandidateList scaled;
    for (const auto& cand : list) scaled.emplace_back(cand.token_text(), cand.logprob() + std::log(c));
    ASSERT_EQ(ftp_select(option_probabilities(list, kAbcd)).label,
              ftp_select(option_probabilities(scaled, kAbcd)).label);
  }
}

TEST(FullVocabOutcome, ValidFirstTokenWithSecond) {
  const auto o = full_vocab_outcome(greedy_trace({"A", "."}), abcd_question());
  EXPECT_TRUE(o.is_valid);
  EXPECT_EQ(o.matched_label, 'A');
  EXPECT_EQ(o.second_token, std::optional<std::string>("."));
  EXPECT_EQ(o.top1_token, "A");
  EXPECT_EQ(o.gold_label, 'A');
}

TEST(FullVocabOutcome, InvalidFirstTokenHasNoSecond) {
  const auto o = full_vocab_outcome(greedy_trace({"The", " correct"}), abcd_question());
  EXPECT_FALSE(o.is_valid);
  EXPECT_FALSE(o.matched_label.has_value());
  EXPECT_FALSE(o.second_token.has_value());
}

TEST(FullVocabOutcome, SinglePositionHasNoSecond) {
  const auto o = full_vocab_outcome(greedy_trace({" B"}), abcd_question());
  EXPECT_TRUE(o.is_valid);
  EXPECT_EQ(o.matched_label, 'B');
  EXPECT_FALSE(o.second_token.has_value());
}

// Property: a valid first token always carries nonzero restricted mass for
// its label, so full-vocab correctness implies validity.
TEST(FullVocabOutcome, ValidImpliesNonzeroMass) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 2000; ++i) {
    auto list = random_candidates(rng);
    if (list.empty()) continue;
    const auto trace = GenerationTrace::from_positions({list}, 20);
    const auto o = full_vocab_outcome(trace, abcd_question());
    ASSERT_NO_THROW(o.validate());
    if (o.is_valid) ASSERT_GT(o.option_probs.at(*o.matched_label), 0.0);
  }
}

TEST(FullVocabOutcome, StrictModeStillValidatesLeadingSpaceToken) {
  // Validity follows the matching rule; strict mode only changes the mass.
  const auto trace = GenerationTrace::from_positions({cands({{" A", 0.6}, {"B", 0.3}})}, 5);
  const auto o = full_vocab_outcome(trace, abcd_question(), SurfaceMode::kStrictSingle);
  EXPECT_TRUE(o.is_valid);
  EXPECT_EQ(o.restricted_choice, 'B');
}

}  // namespace
}  // namespace ftpeval
