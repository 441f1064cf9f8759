#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "mcle/engine.hpp"

using namespace mcle;

namespace {

std::shared_ptr<const Dataset> bench(std::uint64_t seed = 7, std::size_t per_class = 100) {
  return std::make_shared<const Dataset>(generate_synthetic(5, per_class, 16, 0.5, seed));
}

SessionConfig config_for(const std::string& cls, StrategyKind kind = StrategyKind::mcle,
                         std::size_t iters = 300) {
  SessionConfig c;
  c.class_name = cls;
  c.strategy.kind = kind;
  c.max_iters = iters;
  return c;
}

std::vector<std::size_t> ranking(const std::vector<double>& s) {
  std::vector<std::size_t> o(s.size());
  std::iota(o.begin(), o.end(), 0);
  std::stable_sort(o.begin(), o.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  return o;
}

}  // namespace

TEST(Session, CreateAndErrors) {
  const auto d = bench();
  Session s(d, config_for("c0"));
  EXPECT_EQ(s.status(), SessionStatus::awaiting_query);
  EXPECT_EQ(s.t(), 0u);
  EXPECT_TRUE(s.model().selected.empty());
  ASSERT_EQ(s.log().size(), 1u);
  EXPECT_TRUE(s.log()[0].test_ap.has_value());
  try {
    Session bad(d, config_for("zzz"));
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionError::Code::unknown_class);
  }

  auto no_train = std::make_shared<Dataset>(*d);
  for (auto& sp : no_train->pool.split) sp = Split::test;
  try {
    Session bad(no_train, config_for("c0"));
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionError::Code::empty_train);
  }
}

TEST(Session, InitialRankingIsPriorRanking) {
  const auto d = bench();
  Session s(d, config_for("c1"));
  const auto prior = ZeroShotPrior::for_target(*d, "c1");
  std::vector<double> engine, zs;
  for (auto i : d->pool.test_indices()) {
    engine.push_back(s.score(i));
    zs.push_back(prior.score(d->pool.x(i)));
  }
  EXPECT_EQ(engine, zs);
  EXPECT_EQ(ranking(engine), ranking(zs));
}

TEST(Session, FiveStepsFiveDistinctQueries) {
  const auto d = bench();
  Session s(d, config_for("c2"));
  std::set<std::size_t> ids;
  for (int k = 0; k < 5; ++k) {
    const auto& rec = s.step();
    ASSERT_EQ(rec.queried.size(), 1u);
    ids.insert(rec.queried[0].sample_id);
    EXPECT_EQ(*rec.queried[0].label, d->labels.at(rec.queried[0].sample_id, 2));
    EXPECT_EQ(d->pool.split[rec.queried[0].sample_id], Split::train);
  }
  EXPECT_EQ(ids.size(), 5u);
  EXPECT_EQ(s.curve().iterations.size(), 6u);
  EXPECT_EQ(s.t(), 5u);
}

TEST(Session, StepOnFinishedThrowsAndKeepsState) {
  const auto d = bench();
  Session s(d, config_for("c0", StrategyKind::mcle, 2));
  s.step();
  s.step();
  EXPECT_EQ(s.status(), SessionStatus::finished);
  const auto log_size = s.log().size();
  EXPECT_THROW(s.step(), SessionError);
  EXPECT_EQ(s.log().size(), log_size);
  EXPECT_EQ(s.t(), 2u);
}

TEST(Session, ZeroItersIsPriorOnly) {
  const auto d = bench();
  Session s(d, config_for("c0", StrategyKind::mcle, 0));
  EXPECT_EQ(s.status(), SessionStatus::finished);
  const auto r = run_to_completion(s);
  EXPECT_EQ(r.curve.iterations, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.log.size(), 1u);
}

TEST(Session, RepeatedRunIsIdentical) {
  const auto d = bench();
  Session a(d, config_for("c3", StrategyKind::mcle, 100));
  Session b(d, config_for("c3", StrategyKind::mcle, 100));
  const auto ra = run_to_completion(a);
  const auto rb = run_to_completion(b);
  EXPECT_NEAR(ra.curve.ap_values.back(), rb.curve.ap_values.back(), 0.02);
  EXPECT_EQ(ra.curve.ap_values, rb.curve.ap_values);
  EXPECT_EQ(run_result_json(ra, "x").dump(), run_result_json(rb, "x").dump());
}

TEST(Session, ExhaustionMatchesSupervised) {
  const auto d = bench(11, 30);
  for (auto kind : {StrategyKind::mcle, StrategyKind::random}) {
    auto cfg = config_for("c1", kind, 10000);
    cfg.strategy.seed = 5;
    Session s(d, cfg);
    const auto r = run_to_completion(s);
    EXPECT_TRUE(s.unlabeled().empty());
    EXPECT_EQ(r.model.selected.size(), d->pool.train_indices().size());
    const auto sup = train_supervised(*d, "c1");
    EXPECT_NEAR(test_ap(*d, "c1", r.model), test_ap(*d, "c1", sup), 0.01);
    EXPECT_NEAR(r.model.dual_objective(d->pool), sup.dual_objective(d->pool),
                1e-3 * sup.dual_objective(d->pool));
  }
}

TEST(Session, BudgetAndMonotoneSelection) {
  const auto d = bench(3, 20);
  auto cfg = config_for("c4", StrategyKind::mcle, 1000);
  cfg.budget = 3;
  Session s(d, cfg);
  const auto train = d->pool.train_indices().size();
  std::vector<std::uint8_t> prev = s.model().gamma;
  while (s.status() != SessionStatus::finished) {
    const auto before = s.unlabeled().size();
    const auto& rec = s.step();
    EXPECT_EQ(rec.queried.size(), std::min<std::size_t>(3, before));
    for (std::size_t i = 0; i < prev.size(); ++i) EXPECT_GE(s.model().gamma[i], prev[i]);
    prev = s.model().gamma;
    const auto kkt = check_kkt(s.model(), d->pool);
    EXPECT_EQ(kkt.box_violation, 0.0);
    EXPECT_LE(kkt.equality_residual, 1e-6);
  }
  EXPECT_EQ(s.model().selected.size(), train);
  EXPECT_EQ(s.log().size(), s.t() + 1);
}

TEST(Session, PriorDropGivesModelOnlyRanking) {
  const auto d = bench(5, 60);
  auto cfg = config_for("c0", StrategyKind::mcle, 40);
  cfg.schedule.drop_after = 30;
  Session s(d, cfg);
  while (s.status() != SessionStatus::finished) s.step();
  ASSERT_GE(s.t(), 30u);
  std::vector<double> engine, model_only;
  for (auto i : d->pool.test_indices()) {
    engine.push_back(s.score(i));
    model_only.push_back(decision_value(s.model(), d->pool.x(i)));
  }
  EXPECT_EQ(ranking(engine), ranking(model_only));
}

TEST(Session, ExternalOracleStateMachine) {
  const auto d = bench();
  auto cfg = config_for("c0");
  cfg.oracle = OracleKind::external;
  Session s(d, cfg);
  EXPECT_THROW(s.submit_label(0, 1), SessionError);
  const auto first = s.request_queries();
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(s.status(), SessionStatus::awaiting_label);
  EXPECT_EQ(s.request_queries()[0].sample_id, first[0].sample_id);

  const std::size_t other = first[0].sample_id == 0 ? 1 : 0;
  try {
    s.submit_label(other, 1);
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionError::Code::mismatched_sample);
  }
  try {
    s.submit_label(first[0].sample_id, 0);
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionError::Code::invalid_label);
  }
  EXPECT_EQ(s.t(), 0u);
  EXPECT_TRUE(s.submit_label(first[0].sample_id, -1));
  EXPECT_EQ(s.t(), 1u);
  EXPECT_EQ(s.status(), SessionStatus::awaiting_query);
  EXPECT_EQ(s.balance().n_neg, 1u);
}

TEST(Session, ExternalReplayMatchesSimulated) {
  const auto d = bench();
  Session sim(d, config_for("c2", StrategyKind::mcle, 20));
  const auto r = run_to_completion(sim);

  auto cfg = config_for("c2", StrategyKind::mcle, 20);
  cfg.oracle = OracleKind::external;
  Session ext(d, cfg);
  while (ext.status() != SessionStatus::finished) {
    const auto q = ext.request_queries()[0];
    ext.submit_label(q.sample_id, d->labels.at(q.sample_id, 2));
  }
  ASSERT_EQ(ext.log().size(), r.log.size());
  for (std::size_t k = 1; k < r.log.size(); ++k) {
    EXPECT_EQ(ext.log()[k].queried[0].sample_id, r.log[k].queried[0].sample_id);
    EXPECT_EQ(ext.log()[k].queried[0].score, r.log[k].queried[0].score);
  }
  EXPECT_EQ(iteration_json(ext.log().back()).dump(), iteration_json(r.log.back()).dump());
}

TEST(Session, ZoneHistogramCoversUnlabeled) {
  const auto d = bench();
  Session s(d, config_for("c1"));
  for (int k = 0; k < 7; ++k) s.step();
  const auto h = s.zone_histogram();
  EXPECT_EQ(h.f_minus + h.f_zero + h.f_plus, s.unlabeled().size());
}

TEST(RunResultJson, FieldOrderAndConfigRoundTrip) {
  const auto d = bench();
  auto cfg = config_for("c4", StrategyKind::fzero_only, 3);
  cfg.schedule.kind = ScheduleKind::linear_decay;
  Session s(d, cfg);
  const auto j = run_result_json(run_to_completion(s), "out.model");
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"config", "iterations", "final_model_path"}));
  ASSERT_EQ(j["iterations"].size(), 4u);
  const auto& it1 = j["iterations"][1];
  std::vector<std::string> ikeys;
  for (auto it = it1.begin(); it != it1.end(); ++it) ikeys.push_back(it.key());
  EXPECT_EQ(ikeys, (std::vector<std::string>{"t", "queried", "rho", "tracker", "test_ap"}));
  std::vector<std::string> qkeys;
  for (auto it = it1["queried"][0].begin(); it != it1["queried"][0].end(); ++it)
    qkeys.push_back(it.key());
  EXPECT_EQ(qkeys, (std::vector<std::string>{"id", "zone_intended", "zone_actual", "score", "label"}));

  const auto back = config_from_json(j["config"]);
  EXPECT_EQ(back.class_name, "c4");
  EXPECT_EQ(back.strategy.kind, StrategyKind::fzero_only);
  EXPECT_EQ(back.schedule.kind, ScheduleKind::linear_decay);
  EXPECT_EQ(back.max_iters, 3u);
  EXPECT_EQ(config_json(back).dump(), j["config"].dump());
}
