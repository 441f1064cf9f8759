#pragma once

// Active-learning session: scores the unlabeled train pool with the combined
// prior + model score, picks queries, collects labels from an oracle, retrains
// the dual solver and logs the test AP after every iteration.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcle/data.hpp"
#include "mcle/eval.hpp"
#include "mcle/prior.hpp"
#include "mcle/sampler.hpp"
#include "mcle/svm.hpp"

namespace mcle {

enum class OracleKind { simulated, external };
enum class SessionStatus { awaiting_query, awaiting_label, finished };

inline std::string_view to_string(OracleKind k) {
  return k == OracleKind::simulated ? "simulated" : "external";
}

inline std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::awaiting_query: return "awaiting_query";
    case SessionStatus::awaiting_label: return "awaiting_label";
    case SessionStatus::finished: return "finished";
  }
  return "?";
}

inline std::string_view to_string(BiasMode m) {
  return m == BiasMode::constrained ? "constrained" : "none";
}

inline BiasMode parse_bias_mode(std::string_view s) {
  if (s == "constrained") return BiasMode::constrained;
  if (s == "none") return BiasMode::none;
  throw std::invalid_argument("unknown bias mode '" + std::string(s) + "'");
}

class SessionError : public std::runtime_error {
 public:
  enum class Code { unknown_class, empty_train, finished, wrong_state, mismatched_sample, invalid_label };

  SessionError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

struct SessionConfig {
  std::string class_name;
  StrategyConfig strategy;
  PriorSchedule schedule;
  SolverConfig solver;
  OracleKind oracle = OracleKind::simulated;
  std::size_t budget = 1;
  std::size_t max_iters = 300;
};

struct QueryRecord {
  std::size_t sample_id;
  ZoneTag intended_zone;
  ZoneTag actual_zone;
  double score;
  std::optional<int> label;
};

struct IterationRecord {
  std::size_t t = 0;
  std::vector<QueryRecord> queried;
  double rho = 0.0;
  std::array<double, 4> tracker{};
  std::optional<double> test_ap;
};

struct ZoneHistogram {
  std::size_t f_minus = 0;
  std::size_t f_zero = 0;
  std::size_t f_plus = 0;
};

class Session {
 public:
  Session(std::shared_ptr<const Dataset> data, SessionConfig config,
          std::optional<ZeroShotPrior> prior = std::nullopt)
      : data_(std::move(data)),
        config_(std::move(config)),
        prior_(prior ? std::move(*prior) : make_prior(*data_, config_.class_name)),
        model_(LinearModel::untrained(data_->pool.dim(), data_->pool.n_samples(), config_.solver.C)),
        solver_(data_->pool, config_.solver) {
    config_.strategy.validate();
    config_.schedule.validate();
    if (config_.budget < 1) throw std::invalid_argument("budget must be >= 1");

    class_column_ = data_->labels.find(config_.class_name);
    if (config_.oracle == OracleKind::simulated && !class_column_)
      throw SessionError(SessionError::Code::unknown_class,
                         "class '" + config_.class_name + "' has no ground-truth labels");
    unlabeled_ = data_->pool.train_indices();
    if (unlabeled_.empty())
      throw SessionError(SessionError::Code::empty_train, "train split is empty");
    if (class_column_) {
      for (auto i : data_->pool.test_indices()) {
        test_idx_.push_back(i);
        test_relevance_.push_back(data_->labels.at(i, *class_column_));
      }
    }
    curve_.class_name = config_.class_name;
    curve_.strategy = std::string(to_string(config_.strategy.kind));

    IterationRecord first;
    first.t = 0;
    first.rho = balance_.rho();
    first.tracker = tracker_.values();
    first.test_ap = evaluate();
    log_.push_back(first);
    if (first.test_ap) curve_.push(0, *first.test_ap);
    if (config_.max_iters == 0) status_ = SessionStatus::finished;
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const SessionConfig& config() const noexcept { return config_; }
  const Dataset& data() const noexcept { return *data_; }
  SessionStatus status() const noexcept { return status_; }
  std::size_t t() const noexcept { return t_; }
  const LinearModel& model() const noexcept { return model_; }
  const ZeroShotPrior& prior() const noexcept { return prior_; }
  const BalanceStat& balance() const noexcept { return balance_; }
  const LikelihoodTracker& tracker() const noexcept { return tracker_; }
  const std::vector<IterationRecord>& log() const noexcept { return log_; }
  const LearningCurve& curve() const noexcept { return curve_; }
  const std::vector<QueryRecord>& pending() const noexcept { return pending_; }
  const std::vector<std::size_t>& unlabeled() const noexcept { return unlabeled_; }
  bool has_ground_truth() const noexcept { return class_column_.has_value(); }

  double score(std::size_t sample) const {
    return combined_score(prior_, config_.schedule, model_, data_->pool.x(sample), t_);
  }

  std::vector<double> scores(std::span<const std::size_t> samples) const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (auto i : samples) out.push_back(score(i));
    return out;
  }

  ZoneHistogram zone_histogram() const {
    ZoneHistogram h;
    for (auto i : unlabeled_) {
      switch (zone_of(score(i))) {
        case ZoneTag::f_minus: ++h.f_minus; break;
        case ZoneTag::f_zero: ++h.f_zero; break;
        case ZoneTag::f_plus: ++h.f_plus; break;
      }
    }
    return h;
  }

  /// Selects this iteration's batch (idempotent while labels are pending).
  /// With a simulated oracle each pick is labeled immediately and the balance
  /// statistic is updated before the next pick; with an external oracle the
  /// whole batch is chosen up front.
  const std::vector<QueryRecord>& request_queries() {
    if (status_ == SessionStatus::finished)
      throw SessionError(SessionError::Code::finished, "session is finished");
    if (status_ == SessionStatus::awaiting_label) return pending_;

    const std::size_t batch = std::min(config_.budget, unlabeled_.size());
    std::vector<std::size_t> candidates = unlabeled_;
    std::vector<double> cand_scores = scores(candidates);
    for (std::size_t k = 0; k < batch; ++k) {
      const auto choice =
          select_query(config_.strategy, cand_scores, candidates, balance_, t_);
      const auto pos = static_cast<std::size_t>(
          std::find(candidates.begin(), candidates.end(), choice.sample_id) - candidates.begin());
      const double s = cand_scores[pos];
      pending_.push_back({choice.sample_id, choice.intended_zone, zone_of(s), s, std::nullopt});
      candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pos));
      cand_scores.erase(cand_scores.begin() + static_cast<std::ptrdiff_t>(pos));
      if (config_.oracle == OracleKind::simulated)
        apply_label(pending_.back(), data_->labels.at(choice.sample_id, *class_column_));
    }
    status_ = SessionStatus::awaiting_label;
    return pending_;
  }

  /// First pending query still waiting for a label, if any.
  const QueryRecord* next_unanswered() const {
    for (const auto& q : pending_)
      if (!q.label) return &q;
    return nullptr;
  }

  /// Applies an external label to the next unanswered pending query. Returns
  /// true when this completed the iteration (model retrained, t advanced).
  bool submit_label(std::size_t sample_id, int label) {
    if (status_ == SessionStatus::finished)
      throw SessionError(SessionError::Code::finished, "session is finished");
    if (status_ != SessionStatus::awaiting_label)
      throw SessionError(SessionError::Code::wrong_state, "no query is pending");
    if (label != 1 && label != -1)
      throw SessionError(SessionError::Code::invalid_label, "label must be +1 or -1");
    auto* q = const_cast<QueryRecord*>(next_unanswered());
    if (q == nullptr || q->sample_id != sample_id)
      throw SessionError(SessionError::Code::mismatched_sample,
                         "sample " + std::to_string(sample_id) + " is not the pending query" +
                             (q ? " (pending: " + std::to_string(q->sample_id) + ")" : ""));
    apply_label(*q, label);
    if (next_unanswered() != nullptr) return false;
    finish_iteration();
    return true;
  }

  /// One full iteration with the simulated oracle.
  const IterationRecord& step() {
    if (config_.oracle != OracleKind::simulated)
      throw SessionError(SessionError::Code::wrong_state,
                         "step() needs a simulated oracle; use request_queries/submit_label");
    request_queries();
    finish_iteration();
    return log_.back();
  }

 private:
  static ZeroShotPrior make_prior(const Dataset& d, const std::string& cls) {
    if (!d.relations.find(cls)) {
      if (d.labels.find(cls)) return ZeroShotPrior::zero(d.pool.dim());
      throw SessionError(SessionError::Code::unknown_class, "unknown class '" + cls + "'");
    }
    return ZeroShotPrior::for_target(d, cls);
  }

  void apply_label(QueryRecord& q, int label) {
    q.label = label;
    balance_ = update_balance(balance_, label);
    tracker_.update(q.intended_zone, label);
  }

  void finish_iteration() {
    std::vector<std::pair<std::size_t, int>> additions;
    for (const auto& q : pending_) additions.emplace_back(q.sample_id, *q.label);
    solver_.train(model_, additions);
    for (const auto& q : pending_)
      unlabeled_.erase(std::find(unlabeled_.begin(), unlabeled_.end(), q.sample_id));
    ++t_;

    IterationRecord rec;
    rec.t = t_;
    rec.queried = std::move(pending_);
    pending_.clear();
    rec.rho = balance_.rho();
    rec.tracker = tracker_.values();
    rec.test_ap = evaluate();
    if (rec.test_ap) curve_.push(t_, *rec.test_ap);
    log_.push_back(std::move(rec));

    status_ = (t_ >= config_.max_iters || unlabeled_.empty()) ? SessionStatus::finished
                                                             : SessionStatus::awaiting_query;
  }

  std::optional<double> evaluate() const {
    if (test_idx_.empty() ||
        std::none_of(test_relevance_.begin(), test_relevance_.end(), [](int r) { return r > 0; }))
      return std::nullopt;
    return average_precision(scores(test_idx_), test_relevance_);
  }

  std::shared_ptr<const Dataset> data_;
  SessionConfig config_;
  ZeroShotPrior prior_;
  LinearModel model_;
  DualSolver solver_;
  std::optional<std::size_t> class_column_;
  BalanceStat balance_;
  LikelihoodTracker tracker_;
  std::size_t t_ = 0;
  SessionStatus status_ = SessionStatus::awaiting_query;
  std::vector<std::size_t> unlabeled_;  // ascending train indices
  std::vector<std::size_t> test_idx_;
  std::vector<int> test_relevance_;
  std::vector<QueryRecord> pending_;
  std::vector<IterationRecord> log_;
  LearningCurve curve_;
};

struct RunResult {
  SessionConfig config;
  LearningCurve curve;
  std::vector<IterationRecord> log;
  LinearModel model;
};

inline RunResult run_to_completion(Session& session) {
  if (session.config().oracle != OracleKind::simulated)
    throw SessionError(SessionError::Code::wrong_state, "run_to_completion needs a simulated oracle");
  while (session.status() != SessionStatus::finished) session.step();
  return {session.config(), session.curve(), session.log(), session.model()};
}

/// Fully supervised reference: trains once on every train sample of `cls`.
inline LinearModel train_supervised(const Dataset& d, const std::string& cls,
                                    const SolverConfig& config = {}) {
  const auto column = d.labels.find(cls);
  if (!column) throw SessionError(SessionError::Code::unknown_class, "unknown class '" + cls + "'");
  std::vector<std::pair<std::size_t, int>> additions;
  for (auto i : d.pool.train_indices()) additions.emplace_back(i, d.labels.at(i, *column));
  auto model = LinearModel::untrained(d.pool.dim(), d.pool.n_samples(), config.C);
  DualSolver solver(d.pool, config);
  solver.train(model, additions);
  return model;
}

/// Test-split AP of a plain linear model for class `cls`.
inline double test_ap(const Dataset& d, const std::string& cls, const LinearModel& model) {
  const auto column = d.labels.find(cls);
  if (!column) throw SessionError(SessionError::Code::unknown_class, "unknown class '" + cls + "'");
  std::vector<double> scores;
  std::vector<int> relevance;
  for (auto i : d.pool.test_indices()) {
    scores.push_back(decision_value(model, d.pool.x(i)));
    relevance.push_back(d.labels.at(i, *column));
  }
  return average_precision(scores, relevance);
}

// ---------------------------------------------------------------------------
// JSON

using ojson = nlohmann::ordered_json;

inline ojson tracker_json(const std::array<double, 4>& p) {
  ojson j;
  j["pos_fplus"] = p[0];
  j["neg_fplus"] = p[1];
  j["pos_fzero"] = p[2];
  j["neg_fzero"] = p[3];
  const double fplus = p[0] + p[1], fzero = p[2] + p[3];
  j["per_zone"] = ojson{{"pos_given_fplus", fplus > 0 ? p[0] / fplus : 0.0},
                        {"pos_given_fzero", fzero > 0 ? p[2] / fzero : 0.0}};
  return j;
}

inline ojson config_json(const SessionConfig& c) {
  ojson j;
  j["class"] = c.class_name;
  j["strategy"] = ojson{{"kind", to_string(c.strategy.kind)},
                        {"rho_prime", c.strategy.rho_prime},
                        {"burn_in", c.strategy.burn_in},
                        {"seed", c.strategy.seed}};
  j["schedule"] = ojson{{"kind", to_string(c.schedule.kind)},
                        {"t0", c.schedule.t0},
                        {"drop_after", c.schedule.drop_after}};
  j["solver"] = ojson{{"C", c.solver.C},
                      {"kkt_tol", c.solver.kkt_tol},
                      {"max_passes", c.solver.max_passes},
                      {"eq_tol", c.solver.eq_tol},
                      {"bias_mode", to_string(c.solver.bias_mode)}};
  j["oracle"] = to_string(c.oracle);
  j["budget"] = c.budget;
  j["max_iters"] = c.max_iters;
  j["batch_mode"] = c.budget == 1 ? "single"
                    : c.oracle == OracleKind::simulated ? "greedy_labeled"
                                                        : "unlabeled_batch";
  return j;
}

inline SessionConfig config_from_json(const ojson& j) {
  SessionConfig c;
  c.class_name = j.at("class").get<std::string>();
  const auto& s = j.at("strategy");
  c.strategy.kind = parse_strategy(s.at("kind").get<std::string>());
  c.strategy.rho_prime = s.value("rho_prime", c.strategy.rho_prime);
  c.strategy.burn_in = s.value("burn_in", c.strategy.burn_in);
  c.strategy.seed = s.value("seed", c.strategy.seed);
  const auto& p = j.at("schedule");
  c.schedule.kind = parse_schedule(p.at("kind").get<std::string>());
  c.schedule.t0 = p.value("t0", c.schedule.t0);
  c.schedule.drop_after = p.value("drop_after", c.schedule.drop_after);
  if (j.contains("solver")) {
    const auto& v = j["solver"];
    c.solver.C = v.value("C", c.solver.C);
    c.solver.kkt_tol = v.value("kkt_tol", c.solver.kkt_tol);
    c.solver.max_passes = v.value("max_passes", c.solver.max_passes);
    c.solver.eq_tol = v.value("eq_tol", c.solver.eq_tol);
    c.solver.bias_mode = parse_bias_mode(v.value("bias_mode", std::string("constrained")));
  }
  c.oracle = j.value("oracle", std::string("simulated")) == "external" ? OracleKind::external
                                                                     : OracleKind::simulated;
  c.budget = j.value("budget", c.budget);
  c.max_iters = j.value("max_iters", c.max_iters);
  return c;
}

inline ojson query_json(const QueryRecord& q) {
  ojson j;
  j["id"] = q.sample_id;
  j["zone_intended"] = to_string(q.intended_zone);
  j["zone_actual"] = to_string(q.actual_zone);
  j["score"] = q.score;
  j["label"] = q.label ? ojson(*q.label) : ojson(nullptr);
  return j;
}

inline ojson iteration_json(const IterationRecord& r) {
  ojson j;
  j["t"] = r.t;
  ojson queried = ojson::array();
  for (const auto& q : r.queried) queried.push_back(query_json(q));
  j["queried"] = std::move(queried);
  j["rho"] = r.rho;
  j["tracker"] = tracker_json(r.tracker);
  j["test_ap"] = r.test_ap ? ojson(*r.test_ap) : ojson(nullptr);
  return j;
}

inline ojson run_result_json(const SessionConfig& config, const std::vector<IterationRecord>& log,
                             const std::string& final_model_path) {
  ojson j;
  j["config"] = config_json(config);
  ojson its = ojson::array();
  for (const auto& r : log) its.push_back(iteration_json(r));
  j["iterations"] = std::move(its);
  j["final_model_path"] = final_model_path;
  return j;
}

inline ojson run_result_json(const RunResult& r, const std::string& final_model_path) {
  return run_result_json(r.config, r.log, final_model_path);
}

}  // namespace mcle
