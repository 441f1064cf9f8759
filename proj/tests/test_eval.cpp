#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mcle/eval.hpp"
#include "oracles.hpp"

using namespace mcle;
using mcle::testing::brute_force_ap;

TEST(AveragePrecision, ThreeItems) {
  const std::vector<double> s{3, 2, 1};
  const std::vector<int> r{1, -1, 1};
  EXPECT_NEAR(average_precision(s, r), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
}

TEST(AveragePrecision, PerfectRanking) {
  const std::vector<double> s{0.9, 0.8, 0.1, -4};
  const std::vector<int> r{1, 1, -1, -1};
  EXPECT_EQ(average_precision(s, r), 1.0);
}

TEST(AveragePrecision, ReversedRankingMatchesBruteForce) {
  const std::vector<double> s{4, 3, 2, 1, 0};
  const std::vector<int> r{-1, -1, -1, 1, 1};
  EXPECT_NEAR(average_precision(s, r), brute_force_ap({4, 3, 2, 1, 0}, r), 1e-15);
}

TEST(AveragePrecision, NoPositivesIsAnError) {
  const std::vector<double> s{1, 2};
  const std::vector<int> r{-1, -1};
  EXPECT_THROW(average_precision(s, r), std::domain_error);
}

TEST(AveragePrecision, TiesBreakByIndex) {
  const std::vector<double> s{1, 1, 1};
  EXPECT_EQ(average_precision(s, std::vector<int>{1, -1, -1}), 1.0);
  EXPECT_NEAR(average_precision(s, std::vector<int>{-1, -1, 1}), 1.0 / 3.0, 1e-15);
}

TEST(AveragePrecision, MatchesBruteForce) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(50);
    std::vector<int> r(50, -1);
    for (auto& v : s) v = n(rng);
    std::vector<std::size_t> idx(50);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int k = 0; k < 10; ++k) r[idx[k]] = 1;
    // Quantized scores force ties.
    if (trial % 2)
      for (auto& v : s) v = std::round(v * 2.0) / 2.0;
    EXPECT_NEAR(average_precision(s, r), brute_force_ap(s, r), 1e-12);
  }
}

TEST(AveragePrecision, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> s(40), t(40);
  std::vector<int> r(40);
  for (std::size_t k = 0; k < 40; ++k) {
    s[k] = n(rng);
    t[k] = std::exp(3.0 * s[k]) + 7.0;
    r[k] = k % 3 == 0 ? 1 : -1;
  }
  EXPECT_EQ(average_precision(s, r), average_precision(t, r));
}

TEST(MeanAp, ArithmeticMeanAndNearestEarlier) {
  LearningCurve a{"a", "mcle", {}, {}}, b{"b", "mcle", {}, {}};
  a.push(0, 0.1);
  a.push(100, 0.2);
  b.push(0, 0.3);
  b.push(100, 0.4);
  std::vector<LearningCurve> both{a, b};
  EXPECT_NEAR(mean_ap(both, 100), 0.3, 1e-15);
  EXPECT_NEAR(mean_ap(both, 150), 0.3, 1e-15);
  EXPECT_NEAR(mean_ap(both, 99), 0.2, 1e-15);
  std::vector<LearningCurve> one{a};
  EXPECT_EQ(mean_ap(one, 100), 0.2);
  std::vector<LearningCurve> swapped{b, a};
  EXPECT_EQ(mean_ap(swapped, 100), mean_ap(both, 100));
  EXPECT_THROW(mean_ap(std::span<const LearningCurve>{}, 0), std::invalid_argument);
}

TEST(CurveCsv, TableGrid) {
  EXPECT_EQ(grid(300), (std::vector<std::size_t>{0, 50, 100, 150, 200, 250, 300}));
  LearningCurve a{"c0", "mcle", {}, {}}, b{"c1", "mcle", {}, {}};
  for (std::size_t t = 0; t <= 300; ++t) {
    a.push(t, 0.5);
    b.push(t, 0.25);
  }
  std::vector<LearningCurve> curves{a, b};
  std::ostringstream out;
  write_curve_csv(out, curves, grid(300));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,c0,c1,mean");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
  }
  EXPECT_EQ(rows, 7);
  EXPECT_NE(out.str().find("0.375"), std::string::npos);
}
