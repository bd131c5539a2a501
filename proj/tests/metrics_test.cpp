#include <gtest/gtest.h>

#include <random>

#include "gwap/engine.hpp"
#include "gwap/metrics.hpp"

using namespace gwap;

namespace {

std::map<std::string, std::string> labeling(const std::vector<std::string>& v) {
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out["t" + std::to_string(1000 + i)] = v[i];
  return out;
}

// Adjusted Rand index from explicit pair enumeration:
// 2(ad - bc) / ((a+b)(b+d) + (a+c)(c+d)).
double pairwise_ari(const std::vector<std::string>& x, const std::vector<std::string>& y) {
  double a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const bool sx = x[i] == x[j], sy = y[i] == y[j];
      if (sx && sy) ++a;
      else if (sx) ++b;
      else if (sy) ++c;
      else ++d;
    }
  }
  return 2.0 * (a * d - b * c) / ((a + b) * (b + d) + (a + c) * (c + d));
}

std::vector<std::string> random_labels(std::size_t n, std::size_t L, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(1, L);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("v" + std::to_string(d(rng)));
  return out;
}

}  // namespace

TEST(Redundancy, Examples) {
  EXPECT_EQ(theoretical_redundancy(1000, 5, 3), 11000u);
  EXPECT_EQ(theoretical_redundancy(27700, 6, 4), 526300u);
  EXPECT_EQ(theoretical_redundancy(10, 2, 1), 10u);
  EXPECT_LT(std::abs(526300.0 / 525000.0 - 1.0), 0.003);
}

TEST(Redundancy, LinearAndIncreasing) {
  for (std::uint64_t L = 2; L < 8; ++L) {
    for (std::uint64_t p = 2; p < 6; ++p) {
      EXPECT_EQ(theoretical_redundancy(300, L, p), 3 * theoretical_redundancy(100, L, p));
      EXPECT_LT(theoretical_redundancy(100, L, p), theoretical_redundancy(100, L, p + 1));
      EXPECT_LT(theoretical_redundancy(100, L, p), theoretical_redundancy(100, L + 1, p));
    }
  }
}

TEST(Redundancy, BadParameters) {
  EXPECT_THROW(theoretical_redundancy(10, 1, 3), Error);
  EXPECT_THROW(theoretical_redundancy(10, 3, 0), Error);
}

TEST(Saving, Examples) {
  EXPECT_DOUBLE_EQ(round_one_decimal(redundancy_saving(6400, 11500)), -44.3);
  EXPECT_DOUBLE_EQ(round_one_decimal(redundancy_saving(205000, 525000)), -61.0);
  EXPECT_DOUBLE_EQ(redundancy_saving(123, 123), 0.0);
  try {
    redundancy_saving(5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivisionByZero);
  }
}

TEST(Agreement, IdenticalLabelingsArePerfect) {
  const auto labels = LabelSet::numbered(3);
  const auto a = labeling({"v1", "v2", "v3", "v1", "v2"});
  const auto r = agreement_report(a, a, labels);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.percent_diff, 0.0);
  EXPECT_EQ(r.kappa, 1.0);
  EXPECT_EQ(r.adjusted_rand, 1.0);
  const auto one = labeling({"v2", "v2", "v2"});
  const auto s = agreement_report(one, one, labels);
  EXPECT_EQ(s.kappa, 1.0);
  EXPECT_EQ(s.adjusted_rand, 1.0);
}

TEST(Agreement, HandComputedTwoByTwo) {
  const auto labels = LabelSet::numbered(2);
  const auto r = agreement_report(labeling({"v1", "v1", "v2", "v2"}), labeling({"v1", "v1", "v2", "v1"}), labels);
  EXPECT_EQ(r.confusion, (std::vector<std::vector<std::size_t>>{{2, 0}, {1, 1}}));
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.percent_diff, 25.0);
  // po = 3/4; marginals a = (1/2, 1/2), b = (3/4, 1/4); pe = 1/2.
  EXPECT_NEAR(r.kappa, 0.5, 1e-12);
  EXPECT_NEAR(r.adjusted_rand,
              pairwise_ari({"v1", "v1", "v2", "v2"}, {"v1", "v1", "v2", "v1"}), 1e-12);
}

TEST(Agreement, AdjustedRandMatchesPairEnumeration) {
  std::mt19937_64 rng(5);
  const auto labels = LabelSet::numbered(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = random_labels(60, 4, rng);
    auto y = x;
    std::uniform_int_distribution<std::size_t> flip(0, 59);
    for (int k = 0; k < trial; ++k) y[flip(rng)] = random_labels(1, 4, rng)[0];
    const auto r = agreement_report(labeling(x), labeling(y), labels);
    EXPECT_NEAR(r.adjusted_rand, pairwise_ari(x, y), 1e-12);
  }
}

TEST(Agreement, IndependentLabelingsCenterOnZero) {
  const auto labels = LabelSet::numbered(4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto a = random_labels(10000, 4, rng), b = random_labels(10000, 4, rng);
    const auto r = agreement_report(labeling(a), labeling(b), labels);
    EXPECT_NEAR(r.kappa, 0.0, 0.03);
    EXPECT_NEAR(r.adjusted_rand, 0.0, 0.03);
  }
}

TEST(Agreement, SymmetryAndKappaBound) {
  std::mt19937_64 rng(9);
  const auto labels = LabelSet::numbered(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_labels(40, 3, rng);
    auto y = x;
    for (std::size_t i = 0; i < y.size(); i += 1 + trial % 5) y[i] = random_labels(1, 3, rng)[0];
    const auto ab = agreement_report(labeling(x), labeling(y), labels);
    const auto ba = agreement_report(labeling(y), labeling(x), labels);
    EXPECT_DOUBLE_EQ(ab.accuracy, ba.accuracy);
    EXPECT_NEAR(ab.adjusted_rand, ba.adjusted_rand, 1e-12);
    EXPECT_NEAR(ab.kappa, ba.kappa, 1e-12);
    EXPECT_LE(ab.kappa, ab.accuracy + 1e-12);
  }
}

TEST(Agreement, KeyMismatch) {
  const auto labels = LabelSet::numbered(2);
  try {
    agreement_report({{"a", "v1"}}, {{"b", "v1"}}, labels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KeyMismatch);
  }
}

namespace {

// Feeds each answer as its own perfect round (two correct controls).
AggregationReport play_script(const std::vector<std::string>& answers, int p) {
  Engine engine(LabelSet::numbered(3), EngineConfig::for_agreement(p), {"t"});
  long long round = 0;
  for (const auto& a : answers) {
    if (!engine.has_unsolved()) break;
    engine.apply_round({"p" + std::to_string(round), round,
                        {{"g1", "v1", std::string("v1")}, {"g2", "v2", std::string("v2")}, {"t", a, std::nullopt}}});
    ++round;
  }
  return engine.report();
}

}  // namespace

TEST(DifficultyProxy, UnanimousTaskNeedsExactlyP) {
  const auto proxy = difficulty_proxy(play_script({"v1", "v1", "v1", "v1"}, 3));
  EXPECT_EQ(proxy.counts.at("t"), 3u);
  EXPECT_TRUE(proxy.unsolved.empty());
}

TEST(DifficultyProxy, SplitVotesNeedMore) {
  const auto report = play_script({"v1", "v2", "v1", "v2", "v1", "v1", "v1"}, 3);
  EXPECT_EQ(report.tasks.at("t").label, std::optional<std::string>("v1"));
  EXPECT_GE(difficulty_proxy(report).counts.at("t"), 4u);
  EXPECT_EQ(difficulty_proxy(report).counts.at("t"), 5u);
}

TEST(DifficultyProxy, UnsolvedTasksAreFlagged) {
  const auto report = play_script({"v1", "v2"}, 3);
  const auto proxy = difficulty_proxy(report, {"t"});
  EXPECT_EQ(proxy.counts.at("t"), 2u);
  EXPECT_EQ(proxy.unsolved, std::set<std::string>{"t"});
  try {
    difficulty_proxy(report, {"nope"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownTask);
  }
}

TEST(RankCorrelation, Spearman) {
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-12);
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-12);
  EXPECT_EQ(average_ranks({5, 1, 5, 3}), (std::vector<double>{3.5, 1, 3.5, 2}));
  // Nonlinear but monotone.
  EXPECT_NEAR(spearman({1, 2, 3, 4, 5}, {1, 8, 27, 64, 125}), 1.0, 1e-12);
}
