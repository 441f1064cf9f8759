#pragma once

// HTTP facade for sessions driven by an external (human) oracle.
//
// SessionManager holds the request logic and is usable without sockets;
// HttpService binds it to cpp-httplib routes.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "mcle/engine.hpp"

namespace mcle {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct ServiceOptions {
  std::filesystem::path checkpoint_dir = "mcle_sessions";
  std::size_t max_sessions = 64;
  std::chrono::seconds idle_timeout{3600};
  SolverConfig solver;
  PriorSchedule schedule;  // t0 and drop_after defaults for new sessions
};

/// Two leading principal directions of the train features, used to place
/// samples without a display URI on a plane.
class Projection2D {
 public:
  explicit Projection2D(const Pool& pool) : mean_(pool.dim(), 0.0) {
    const auto train = pool.train_indices();
    const std::size_t d = pool.dim();
    if (train.empty() || d == 0) return;
    for (auto i : train)
      for (std::size_t k = 0; k < d; ++k) mean_[k] += pool.x(i)[k];
    for (auto& m : mean_) m /= static_cast<double>(train.size());
    Matrix cov(d, d);
    for (auto i : train) {
      const auto x = pool.x(i);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) cov(a, b) += (x[a] - mean_[a]) * (x[b] - mean_[b]);
    }
    for (std::size_t c = 0; c < 2 && c < d; ++c) {
      std::vector<double> v(d);
      for (std::size_t k = 0; k < d; ++k) v[k] = 1.0 / std::sqrt(static_cast<double>(k + 1 + c));
      for (int it = 0; it < 200; ++it) {
        std::vector<double> next(d, 0.0);
        for (std::size_t a = 0; a < d; ++a) next[a] = dot(cov.row(a), v);
        for (const auto& prev : axes_) {
          const double p = dot(next, prev);
          for (std::size_t k = 0; k < d; ++k) next[k] -= p * prev[k];
        }
        const double norm = std::sqrt(dot(next, next));
        if (norm == 0.0) break;
        for (std::size_t k = 0; k < d; ++k) v[k] = next[k] / norm;
      }
      axes_.push_back(v);
    }
  }

  std::array<double, 2> operator()(std::span<const double> x) const {
    std::array<double, 2> out{0.0, 0.0};
    for (std::size_t c = 0; c < axes_.size(); ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - mean_[k]) * axes_[c][k];
      out[c] = s;
    }
    return out;
  }

 private:
  std::vector<double> mean_;
  std::vector<std::vector<double>> axes_;
};

class SessionManager {
 public:
  using Clock = std::chrono::steady_clock;

  SessionManager(std::shared_ptr<const Dataset> data, ServiceOptions options = {})
      : data_(std::move(data)), options_(std::move(options)), projection_(data_->pool) {
    std::random_device rd;
    rng_.seed((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  }

  HttpResponse create(const std::string& body) {
    ojson req;
    try {
      req = ojson::parse(body);
    } catch (const std::exception& e) {
      return error(400, std::string("invalid JSON: ") + e.what());
    }
    if (!req.is_object()) return error(400, "request body must be a JSON object");
    static const std::set<std::string> allowed{"class",   "strategy", "prior",     "rho_prime",
                                               "burn_in", "budget",   "max_iters", "seed",
                                               "drop_after", "t0"};
    for (const auto& [key, _] : req.items())
      if (!allowed.count(key)) return error(400, "unknown field", key);

    SessionConfig config;
    config.oracle = OracleKind::external;
    config.solver = options_.solver;
    config.schedule = options_.schedule;
    try {
      if (!req.contains("class") || !req["class"].is_string())
        return error(400, "class is required", "class");
      config.class_name = req["class"].get<std::string>();
      if (!data_->relations.find(config.class_name) && !data_->labels.find(config.class_name))
        return error(400, "unknown class '" + config.class_name + "'", "class");
      if (req.contains("strategy")) {
        try {
          config.strategy.kind = parse_strategy(req["strategy"].get<std::string>());
        } catch (const std::exception& e) {
          return error(400, e.what(), "strategy");
        }
      }
      if (req.contains("prior")) {
        try {
          config.schedule.kind = parse_schedule(req["prior"].get<std::string>());
        } catch (const std::exception& e) {
          return error(400, e.what(), "prior");
        }
      }
      if (req.contains("rho_prime")) {
        config.strategy.rho_prime = req["rho_prime"].get<double>();
        if (!(config.strategy.rho_prime > 0.0 && config.strategy.rho_prime < 1.0))
          return error(400, "rho_prime must lie in (0, 1)", "rho_prime");
      }
      if (req.contains("burn_in")) config.strategy.burn_in = req["burn_in"].get<std::size_t>();
      if (req.contains("budget")) {
        config.budget = req["budget"].get<std::size_t>();
        if (config.budget < 1) return error(400, "budget must be >= 1", "budget");
      }
      if (req.contains("max_iters")) config.max_iters = req["max_iters"].get<std::size_t>();
      if (req.contains("seed")) config.strategy.seed = req["seed"].get<std::uint64_t>();
      if (req.contains("drop_after")) config.schedule.drop_after = req["drop_after"].get<std::size_t>();
      if (req.contains("t0")) {
        config.schedule.t0 = req["t0"].get<std::size_t>();
        if (config.schedule.t0 < 1) return error(400, "t0 must be >= 1", "t0");
      }
    } catch (const nlohmann::json::exception& e) {
      return error(400, std::string("malformed field: ") + e.what());
    }

    std::shared_ptr<Entry> entry;
    std::string id;
    {
      std::lock_guard lock(mutex_);
      evict_idle_locked(Clock::now());
      if (sessions_.size() >= options_.max_sessions)
        return error(409, "session capacity (" + std::to_string(options_.max_sessions) +
                              ") exceeded");
      try {
        entry = std::make_shared<Entry>(std::make_unique<Session>(data_, config));
      } catch (const SessionError& e) {
        return error(400, e.what(), "class");
      } catch (const std::invalid_argument& e) {
        return error(400, e.what());
      }
      id = fresh_id_locked();
      sessions_.emplace(id, entry);
    }
    std::lock_guard lock(entry->mutex);
    ojson out;
    out["session_id"] = id;
    out["t"] = entry->session->t();
    out["status"] = to_string(entry->session->status());
    return {201, out.dump()};
  }

  HttpResponse query(const std::string& id) {
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");
    std::lock_guard lock(entry->mutex);
    entry->touch();
    auto& s = *entry->session;
    if (s.status() == SessionStatus::finished) return error(410, "session is finished");
    s.request_queries();
    const auto* q = s.next_unanswered();
    ojson out;
    out["sample_id"] = q->sample_id;
    out["sample_name"] = data_->pool.sample_ids[q->sample_id];
    out["display_uri"] = data_->pool.display_uri[q->sample_id];
    out["score"] = q->score;
    out["intended_zone"] = to_string(q->intended_zone);
    out["actual_zone"] = to_string(q->actual_zone);
    out["t"] = s.t();
    out["rho"] = s.balance().rho();
    out["status"] = to_string(s.status());
    return {200, out.dump()};
  }

  HttpResponse label(const std::string& id, const std::string& body) {
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");
    ojson req;
    try {
      req = ojson::parse(body);
    } catch (const std::exception& e) {
      return error(400, std::string("invalid JSON: ") + e.what());
    }
    if (!req.is_object()) return error(400, "request body must be a JSON object");
    for (const auto& [key, _] : req.items())
      if (key != "sample_id" && key != "label") return error(400, "unknown field", key);
    if (!req.contains("sample_id") || !req["sample_id"].is_number_integer() ||
        req["sample_id"].get<std::int64_t>() < 0)
      return error(400, "sample_id must be a non-negative integer", "sample_id");
    if (!req.contains("label")) return error(400, "label is required", "label");
    if (!req["label"].is_number_integer()) return error(422, "label must be +1 or -1", "label");
    const auto sample = req["sample_id"].get<std::size_t>();
    const auto value = req["label"].get<std::int64_t>();
    if (value != 1 && value != -1) return error(422, "label must be +1 or -1", "label");

    std::lock_guard lock(entry->mutex);
    entry->touch();
    auto& s = *entry->session;
    try {
      s.submit_label(sample, static_cast<int>(value));
    } catch (const SessionError& e) {
      switch (e.code()) {
        case SessionError::Code::finished: return error(410, e.what());
        case SessionError::Code::invalid_label: return error(422, e.what(), "label");
        default: return error(409, e.what(), "sample_id");
      }
    }
    ojson out;
    out["t"] = s.t();
    out["rho"] = s.balance().rho();
    out["tracker"] = tracker_json(s.tracker().values());
    out["n_pos"] = s.balance().n_pos;
    out["n_neg"] = s.balance().n_neg;
    out["status"] = to_string(s.status());
    if (s.log().back().test_ap && s.log().back().t == s.t())
      out["test_ap"] = *s.log().back().test_ap;
    return {200, out.dump()};
  }

  HttpResponse state(const std::string& id) {
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");
    std::lock_guard lock(entry->mutex);
    entry->touch();
    const auto& s = *entry->session;
    ojson out;
    out["session_id"] = id;
    out["class"] = s.config().class_name;
    out["strategy"] = to_string(s.config().strategy.kind);
    out["prior"] = to_string(s.config().schedule.kind);
    out["status"] = to_string(s.status());
    out["t"] = s.t();
    ojson curve = ojson::array();
    for (std::size_t k = 0; k < s.curve().iterations.size(); ++k)
      curve.push_back({{"t", s.curve().iterations[k]}, {"ap", s.curve().ap_values[k]}});
    out["curve"] = std::move(curve);
    ojson qlog = ojson::array();
    ojson points = ojson::array();
    for (const auto& rec : s.log()) {
      for (const auto& q : rec.queried) {
        auto j = query_json(q);
        j["t"] = rec.t;
        qlog.push_back(std::move(j));
        const auto p = projection_(data_->pool.x(q.sample_id));
        points.push_back({{"id", q.sample_id}, {"x", p[0]}, {"y", p[1]}, {"label", *q.label}});
      }
    }
    for (const auto& q : s.pending()) {
      if (!q.label) continue;
      auto j = query_json(q);
      j["t"] = s.t() + 1;
      qlog.push_back(std::move(j));
    }
    out["query_log"] = std::move(qlog);
    const auto h = s.zone_histogram();
    out["zone_histogram"] = {{"F_minus", h.f_minus}, {"F_zero", h.f_zero}, {"F_plus", h.f_plus}};
    out["rho"] = s.balance().rho();
    out["rho_prime"] = s.config().strategy.rho_prime;
    out["tracker"] = tracker_json(s.tracker().values());
    out["n_pos"] = s.balance().n_pos;
    out["n_neg"] = s.balance().n_neg;
    ojson projection;
    projection["labeled"] = std::move(points);
    if (const auto* q = s.next_unanswered()) {
      const auto p = projection_(data_->pool.x(q->sample_id));
      projection["query"] = {{"id", q->sample_id}, {"x", p[0]}, {"y", p[1]}};
    } else {
      projection["query"] = nullptr;
    }
    out["projection"] = std::move(projection);
    return {200, out.dump()};
  }

  /// Writes every live session to the checkpoint directory.
  void checkpoint_all() {
    std::map<std::string, std::shared_ptr<Entry>> snapshot;
    {
      std::lock_guard lock(mutex_);
      snapshot = sessions_;
    }
    for (auto& [id, entry] : snapshot) {
      std::lock_guard lock(entry->mutex);
      checkpoint(id, *entry->session);
    }
  }

  /// Checkpoints and drops sessions idle for longer than the timeout.
  std::size_t evict_idle(Clock::time_point now = Clock::now()) {
    std::lock_guard lock(mutex_);
    return evict_idle_locked(now);
  }

  /// Rebuilds every checkpointed session by replaying its labels.
  std::size_t restore_all() {
    std::size_t restored = 0;
    if (!std::filesystem::is_directory(options_.checkpoint_dir)) return 0;
    for (const auto& f : std::filesystem::directory_iterator(options_.checkpoint_dir)) {
      if (f.path().extension() != ".json") continue;
      const auto id = f.path().stem().string();
      std::lock_guard lock(mutex_);
      if (sessions_.count(id)) continue;
      if (auto entry = restore(id)) {
        sessions_.emplace(id, entry);
        ++restored;
      }
    }
    return restored;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

  const ServiceOptions& options() const noexcept { return options_; }

 private:
  struct Entry {
    explicit Entry(std::unique_ptr<Session> s) : session(std::move(s)) { touch(); }
    void touch() { last_activity.store(Clock::now().time_since_epoch().count()); }

    std::unique_ptr<Session> session;
    std::mutex mutex;
    std::atomic<Clock::rep> last_activity{0};
  };

  static HttpResponse error(int status, const std::string& message, const std::string& field = {}) {
    ojson out;
    out["error"] = message;
    if (!field.empty()) out["field"] = field;
    return {status, out.dump()};
  }

  std::shared_ptr<Entry> find(const std::string& id) {
    std::lock_guard lock(mutex_);
    if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
    // Evicted sessions come back from their checkpoint on first access.
    auto entry = restore(id);
    if (entry) sessions_.emplace(id, entry);
    return entry;
  }

  std::string fresh_id_locked() {
    static constexpr char kHex[] = "0123456789abcdef";
    while (true) {
      std::string id = "s";
      auto v = rng_();
      for (int k = 0; k < 16; ++k, v >>= 4) id += kHex[v & 0xf];
      if (!sessions_.count(id) && !std::filesystem::exists(checkpoint_path(id))) return id;
    }
  }

  std::filesystem::path checkpoint_path(const std::string& id) const {
    return options_.checkpoint_dir / (id + ".json");
  }

  void checkpoint(const std::string& id, const Session& s) const {
    std::filesystem::create_directories(options_.checkpoint_dir);
    const auto model_path = options_.checkpoint_dir / (id + ".model");
    write_model_snapshot(s.model(), model_path);
    auto j = run_result_json(s.config(), s.log(), model_path.string());
    ojson pending = ojson::array();
    for (const auto& q : s.pending())
      if (q.label) pending.push_back({{"id", q.sample_id}, {"label", *q.label}});
    j["pending_labels"] = std::move(pending);
    const auto tmp = checkpoint_path(id).string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, checkpoint_path(id));
  }

  std::shared_ptr<Entry> restore(const std::string& id) const {
    const auto path = checkpoint_path(id);
    if (id.empty() || id.find_first_of("/\\.") != std::string::npos ||
        !std::filesystem::exists(path))
      return nullptr;
    std::ifstream in(path);
    const auto j = ojson::parse(in);
    auto config = config_from_json(j.at("config"));
    config.oracle = OracleKind::external;
    auto session = std::make_unique<Session>(data_, config);
    auto replay = [&](std::size_t sample, int label) {
      session->request_queries();
      session->submit_label(sample, label);
    };
    for (const auto& it : j.at("iterations"))
      for (const auto& q : it.at("queried"))
        replay(q.at("id").get<std::size_t>(), q.at("label").get<int>());
    for (const auto& q : j.value("pending_labels", ojson::array()))
      replay(q.at("id").get<std::size_t>(), q.at("label").get<int>());
    return std::make_shared<Entry>(std::move(session));
  }

  std::size_t evict_idle_locked(Clock::time_point now) {
    const auto limit =
        std::chrono::duration_cast<Clock::duration>(options_.idle_timeout).count();
    std::size_t evicted = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      auto& entry = *it->second;
      if (now.time_since_epoch().count() - entry.last_activity.load() > limit) {
        std::lock_guard lock(entry.mutex);
        checkpoint(it->first, *entry.session);
        it = sessions_.erase(it);
        ++evicted;
      } else {
        ++it;
      }
    }
    return evicted;
  }

  std::shared_ptr<const Dataset> data_;
  ServiceOptions options_;
  Projection2D projection_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mt19937_64 rng_;
};

/// Binds a SessionManager to HTTP routes.
class HttpService {
 public:
  explicit HttpService(SessionManager& manager, std::filesystem::path console_dir = {})
      : manager_(manager) {
    auto reply = [](httplib::Response& res, const HttpResponse& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type.c_str());
    };
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("ok", "text/plain");
    });
    server_.Post("/sessions", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, manager_.create(req.body));
    });
    server_.Get(R"(/sessions/([^/]+)/query)",
                [this, reply](const httplib::Request& req, httplib::Response& res) {
                  reply(res, manager_.query(req.matches[1]));
                });
    server_.Post(R"(/sessions/([^/]+)/label)",
                 [this, reply](const httplib::Request& req, httplib::Response& res) {
                   reply(res, manager_.label(req.matches[1], req.body));
                 });
    server_.Get(R"(/sessions/([^/]+)/state)",
                [this, reply](const httplib::Request& req, httplib::Response& res) {
                  reply(res, manager_.state(req.matches[1]));
                });
    if (!console_dir.empty()) server_.set_mount_point("/console", console_dir.string());
  }

  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  int bind_any(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  bool running() const { return server_.is_running(); }

 private:
  SessionManager& manager_;
  httplib::Server server_;
};

}  // namespace mcle
