#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mcle/svm.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mcle;

namespace {

Pool make_pool(const std::vector<std::vector<double>>& rows) {
  Pool p;
  const std::size_t d = rows.empty() ? 0 : rows[0].size();
  p.features = Matrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) p.features(i, j) = rows[i][j];
  p.split.assign(rows.size(), Split::train);
  for (std::size_t i = 0; i < rows.size(); ++i) p.sample_ids.push_back(std::to_string(i));
  p.display_uri.assign(rows.size(), "");
  return p;
}

struct Problem {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

Problem random_problem(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Problem p;
  std::vector<double> dir(d);
  for (auto& v : dir) v = normal(rng);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = normal(rng);
      s += row[j] * dir[j];
    }
    p.x.push_back(row);
    p.y.push_back(s + 0.5 * normal(rng) > 0 ? 1 : -1);
  }
  p.y[0] = 1;
  p.y[1] = -1;
  return p;
}

LinearModel train_all(const Pool& pool, const std::vector<int>& y, const SolverConfig& cfg = {}) {
  std::map<std::size_t, int> labels;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < y.size(); ++i) {
    labels[i] = y[i];
    ids.push_back(i);
  }
  return train_incremental(LinearModel::untrained(pool.dim(), pool.n_samples()), pool, labels, ids,
                           cfg);
}

}  // namespace

TEST(DecisionValue, DotProductAndMismatch) {
  LinearModel m = LinearModel::untrained(2, 0);
  m.w = {1.0, 0.0};
  const std::vector<double> x{2.0, 3.0};
  EXPECT_DOUBLE_EQ(decision_value(m, x), 2.0);
  m.w = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(decision_value(m, x), 0.0);
  const std::vector<double> bad{1.0};
  EXPECT_THROW(decision_value(m, bad), std::invalid_argument);
}

TEST(TrainIncremental, SymmetricPair) {
  const auto pool = make_pool({{1, 0}, {-1, 0}});
  const auto m = train_all(pool, {1, -1});
  ASSERT_EQ(m.selected.size(), 2u);
  EXPECT_NEAR(m.selected[0].alpha, 0.5, 1e-9);
  EXPECT_NEAR(m.selected[1].alpha, 0.5, 1e-9);
  EXPECT_NEAR(m.w[0], 1.0, 1e-9);
  EXPECT_NEAR(m.w[1], 0.0, 1e-12);
  EXPECT_NEAR(m.b, 0.0, 1e-9);
  const std::vector<double> x{1.0, 0.0};
  EXPECT_NEAR(decision_value(m, x), 1.0, 1e-9);
}

TEST(TrainIncremental, SingleSignSetIsDegenerate) {
  const auto pool = make_pool({{1, 2}, {0.5, -1}, {3, 0}});
  const auto pos = train_all(pool, {1, 1, 1});
  for (const auto& s : pos.selected) EXPECT_EQ(s.alpha, 0.0);
  EXPECT_EQ(pos.w, (std::vector<double>{0.0, 0.0}));
  EXPECT_GT(decision_value(pos, pool.x(0)), 0.0);
  const auto neg = train_all(pool, {-1, -1, -1});
  EXPECT_LT(decision_value(neg, pool.x(2)), 0.0);
}

TEST(TrainIncremental, MatchesQpOracleOn20Points) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto prob = random_problem(seed, 20, 3);
    const auto pool = make_pool(prob.x);
    const auto m = train_all(pool, prob.y);
    const auto oracle = mcle::testing::solve_dual_qp(prob.x, prob.y, 1.0);
    const double got = m.dual_objective(pool);
    EXPECT_LE(std::abs(got - oracle.objective), 1e-4 * std::max(1.0, std::abs(oracle.objective)))
        << "seed " << seed << ": " << got << " vs " << oracle.objective;
    EXPECT_TRUE(m.converged);
    EXPECT_LE(check_kkt(m, pool).max_residual, 1e-3);
  }
}

TEST(TrainIncremental, UnconstrainedModeMatchesBoxOnlyOracle) {
  SolverConfig cfg;
  cfg.bias_mode = BiasMode::none;
  const auto prob = random_problem(17, 15, 2);
  const auto pool = make_pool(prob.x);
  const auto m = train_all(pool, prob.y, cfg);
  const auto oracle = mcle::testing::solve_dual_qp(prob.x, prob.y, 1.0, false);
  EXPECT_NEAR(m.dual_objective(pool), oracle.objective, 1e-4 * std::abs(oracle.objective));
  EXPECT_EQ(m.b, 0.0);
}

TEST(CheckKkt, ConvergedModelWithinTolerance) {
  const auto prob = random_problem(3, 20, 3);
  const auto pool = make_pool(prob.x);
  const auto m = train_all(pool, prob.y);
  const auto r = check_kkt(m, pool);
  EXPECT_LE(r.max_residual, 1e-3);
  EXPECT_LE(r.equality_residual, 1e-6);
  EXPECT_EQ(r.box_violation, 0.0);
  EXPECT_TRUE(r.satisfied(1e-3, 1e-6));
}

TEST(CheckKkt, PerturbedAlphaShowsEqualityResidual) {
  const auto prob = random_problem(4, 20, 3);
  const auto pool = make_pool(prob.x);
  auto m = train_all(pool, prob.y);
  auto sv = std::find_if(m.selected.begin(), m.selected.end(),
                         [&](const SelectedSample& s) { return s.alpha > 0.0; });
  ASSERT_NE(sv, m.selected.end());
  sv->alpha += 0.1;
  const auto r = check_kkt(m, pool);
  EXPECT_NEAR(r.equality_residual, 0.1, 1e-6);
  EXPECT_FALSE(r.satisfied(1e-3, 1e-6));
}

TEST(CheckKkt, ResidualsMatchIndependentRecomputation) {
  const auto prob = random_problem(5, 20, 3);
  const auto pool = make_pool(prob.x);
  const auto m = train_all(pool, prob.y);
  const auto r = check_kkt(m, pool);
  ASSERT_EQ(r.residuals.size(), 20u);
  for (std::size_t k = 0; k < m.selected.size(); ++k) {
    const auto& s = m.selected[k];
    double f = m.b;
    for (std::size_t j = 0; j < 3; ++j) f += m.w[j] * prob.x[s.index][j];
    const double margin = prob.y[s.index] * f;
    double expected;
    if (s.alpha <= 0.0)
      expected = std::max(0.0, 1.0 - margin);
    else if (s.alpha >= m.C)
      expected = std::max(0.0, margin - 1.0);
    else
      expected = std::abs(margin - 1.0);
    EXPECT_EQ(r.residuals[k], expected) << "sample " << s.index;
  }
}

TEST(TrainIncremental, WarmStartAgreesWithColdStart) {
  const auto prob = random_problem(8, 20, 3);
  const auto pool = make_pool(prob.x);
  std::map<std::size_t, int> labels;
  for (std::size_t i = 0; i < 20; ++i) labels[i] = prob.y[i];

  auto warm = LinearModel::untrained(3, 20);
  for (std::size_t start = 0; start < 20; start += 5) {
    std::vector<std::size_t> chunk;
    for (std::size_t i = start; i < start + 5; ++i) chunk.push_back(i);
    warm = train_incremental(warm, pool, labels, chunk);
  }
  const auto cold = train_all(pool, prob.y);
  const auto oracle = mcle::testing::solve_dual_qp(prob.x, prob.y, 1.0);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(warm.w[j], cold.w[j], 1e-2);
  EXPECT_NEAR(warm.dual_objective(pool), oracle.objective, 1e-4 * std::abs(oracle.objective));
}

TEST(TrainIncremental, SelectionOnlyGrows) {
  const auto prob = random_problem(9, 12, 2);
  const auto pool = make_pool(prob.x);
  std::map<std::size_t, int> labels;
  for (std::size_t i = 0; i < 12; ++i) labels[i] = prob.y[i];
  auto m = LinearModel::untrained(2, 12);
  auto prev = m.gamma;
  for (std::size_t i = 0; i < 12; ++i) {
    const std::vector<std::size_t> one{i};
    m = train_incremental(m, pool, labels, one);
    for (std::size_t k = 0; k < 12; ++k) EXPECT_GE(m.gamma[k], prev[k]);
    EXPECT_EQ(m.gamma[i], 1);
    prev = m.gamma;
  }
  const std::vector<std::size_t> again{3};
  EXPECT_THROW(train_incremental(m, pool, labels, again), std::invalid_argument);
  const std::vector<std::size_t> unlabeled{99};
  EXPECT_THROW(train_incremental(m, pool, labels, unlabeled), std::invalid_argument);
}

TEST(TrainIncremental, OutsideMarginPointLeavesWUnchanged) {
  const auto pool = make_pool({{1, 0}, {-1, 0}, {5, 1}});
  std::map<std::size_t, int> labels{{0, 1}, {1, -1}, {2, 1}};
  const std::vector<std::size_t> first{0, 1};
  const auto before = train_incremental(LinearModel::untrained(2, 3), pool, labels, first);
  ASSERT_GT(decision_value(before, pool.x(2)), 1.0);
  const std::vector<std::size_t> extra{2};
  const auto after = train_incremental(before, pool, labels, extra);
  EXPECT_EQ(after.selected.back().alpha, 0.0);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(after.w[j], before.w[j], 1e-9);
}

TEST(TrainIncremental, BalanceIdentityCrossTermNegative) {
  const auto prob = random_problem(12, 20, 3);
  const auto pool = make_pool(prob.x);
  const auto m = train_all(pool, prob.y);
  double sum = 0.0, cross = 0.0, sq = 0.0;
  for (const auto& s : m.selected) {
    sum += s.alpha * s.label;
    sq += s.alpha * s.alpha;
  }
  cross = sum * sum - sq;  // sum over i != j of a_i a_j y_i y_j
  EXPECT_NEAR(sum, 0.0, 1e-6);
  EXPECT_LT(cross, 0.0);
}

TEST(ModelSnapshot, RoundTrip) {
  mcle::testing::TempDir dir("svm");
  const auto prob = random_problem(6, 10, 3);
  const auto pool = make_pool(prob.x);
  const auto m = train_all(pool, prob.y);
  write_model_snapshot(m, dir / "m.model");
  const auto back = read_model_snapshot(dir / "m.model", 10, 1.0);
  ASSERT_EQ(back.w.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(back.w[j], static_cast<float>(m.w[j]));
  EXPECT_EQ(back.b, static_cast<float>(m.b));
  ASSERT_EQ(back.selected.size(), m.selected.size());
  for (std::size_t k = 0; k < m.selected.size(); ++k) {
    EXPECT_EQ(back.selected[k].index, m.selected[k].index);
    EXPECT_EQ(back.selected[k].label, m.selected[k].label);
    EXPECT_EQ(back.selected[k].alpha, static_cast<float>(m.selected[k].alpha));
    EXPECT_TRUE(back.is_selected(m.selected[k].index));
  }
  std::ofstream(dir / "bad.model") << "NOPE";
  EXPECT_THROW(read_model_snapshot(dir / "bad.model", 10, 1.0), DataError);
}
