#pragma once

// Command-line front end: synth, run, sweep, serve.
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <algorithm>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcle/data.hpp"
#include "mcle/engine.hpp"
#include "mcle/eval.hpp"
#include "mcle/service.hpp"

namespace mcle::cli {

namespace fs = std::filesystem;

inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kUsageError = 2;

/// Flags shared by `run` and `sweep`.
struct RunFlags {
  std::string data_dir;
  std::string class_name;
  bool all_unknown = false;
  double known_fraction = 0.75;
  std::uint64_t split_seed = 0;
  std::string strategy = "mcle";
  std::string prior = "constant";
  double rho_prime = 0.5;
  std::size_t burn_in = 10;
  std::size_t drop_after = 150;
  std::size_t t0 = 20;
  std::size_t budget = 1;
  std::size_t iters = 300;
  double C = 1.0;
  double kkt_tol = 1e-3;
  std::size_t max_passes = 10000;
  std::string bias_mode = "constrained";
  std::uint64_t seed = 0;
  std::string out;
  std::string curve_out;
  std::string config_file;
};

inline SessionConfig to_session_config(const RunFlags& f, const std::string& cls) {
  SessionConfig c;
  c.class_name = cls;
  c.strategy.kind = parse_strategy(f.strategy);
  c.strategy.rho_prime = f.rho_prime;
  c.strategy.burn_in = f.burn_in;
  c.strategy.seed = f.seed;
  c.schedule.kind = parse_schedule(f.prior);
  c.schedule.t0 = f.t0;
  c.schedule.drop_after = f.drop_after;
  c.solver.C = f.C;
  c.solver.kkt_tol = f.kkt_tol;
  c.solver.max_passes = f.max_passes;
  c.solver.bias_mode = parse_bias_mode(f.bias_mode);
  c.oracle = OracleKind::simulated;
  c.budget = f.budget;
  c.max_iters = f.iters;
  return c;
}

/// Registers the run flags on `app`; `with_class` adds the class selectors.
inline void add_run_flags(CLI::App& app, RunFlags& f, bool with_class) {
  app.add_option("--data", f.data_dir, "Dataset directory")->envname("MCLE_DATA_DIR");
  if (with_class) {
    app.add_option("--class", f.class_name, "Target class");
    app.add_flag("--all-unknown", f.all_unknown, "Run every unknown class of a random class split");
    app.add_option("--known-fraction", f.known_fraction, "Fraction of known classes")
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--split-seed", f.split_seed, "Seed of the known/unknown class split");
  }
  app.add_option("--prior", f.prior, "vanilla | constant | inverse_decay | linear_decay");
  app.add_option("--rho-prime", f.rho_prime, "Balance threshold")->check(CLI::Range(0.0, 1.0));
  app.add_option("--burn-in", f.burn_in, "Iterations that sample only the top score");
  app.add_option("--drop-after", f.drop_after, "Iteration after which the prior is dropped (0: never)");
  app.add_option("--t0", f.t0, "Linear-decay offset")->check(CLI::PositiveNumber);
  app.add_option("--budget", f.budget, "Labels per iteration")->check(CLI::PositiveNumber);
  app.add_option("--iters", f.iters, "Maximum iterations");
  app.add_option("--C", f.C, "Box constraint")->check(CLI::PositiveNumber);
  app.add_option("--kkt-tol", f.kkt_tol, "Solver KKT tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-passes", f.max_passes, "Solver update cap")->check(CLI::PositiveNumber);
  app.add_option("--bias-mode", f.bias_mode, "constrained | none")
      ->check(CLI::IsMember({"constrained", "none"}));
  app.add_option("--config", f.config_file, "RunConfig JSON; explicit flags take precedence");
}

/// Fills every option that was not given on the command line from the JSON
/// config file (keys are the long flag names without dashes, '-' as '_').
inline void apply_config_file(CLI::App& app, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  const auto j = nlohmann::json::parse(in);
  if (!j.is_object()) throw CLI::ValidationError("--config", "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = nullptr;
    try {
      opt = app.get_option(flag);
    } catch (const CLI::OptionNotFound&) {
      throw CLI::ValidationError("--config", "unknown config key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else {
      text = value.dump();
    }
    opt->clear();
    opt->add_result(text);
    opt->run_callback();
  }
}

inline std::string with_extension(const std::string& path, const std::string& ext) {
  return fs::path(path).replace_extension(ext).string();
}

inline void write_json(const fs::path& path, const ojson& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path.string(), std::nullopt, "cannot write file");
  out << j.dump(2) << '\n';
}

inline int cmd_synth(std::size_t classes, std::size_t per_class, std::size_t dim, double noise,
                     std::uint64_t seed, const std::string& out, std::ostream& log) {
  const auto d = generate_synthetic(classes, per_class, dim, noise, seed);
  write_dataset(d, out);
  log << "wrote " << out << ": " << d.pool.n_samples() << " samples, d=" << d.pool.dim() << ", "
      << d.labels.n_classes() << " classes, " << d.pool.train_indices().size() << " train / "
      << d.pool.test_indices().size() << " test, K=" << d.sources.size() << " sources\n";
  return kOk;
}

inline int cmd_run(const RunFlags& f, std::ostream& log) {
  auto data = std::make_shared<const Dataset>(load_dataset(f.data_dir));
  for (const auto& w : data->warnings) log << "warning: " << w << '\n';
  std::vector<std::string> classes;
  if (f.all_unknown) {
    classes = make_class_split(data->labels.class_names, f.known_fraction, f.split_seed).unknown;
  } else {
    classes.push_back(f.class_name);
  }

  std::vector<LearningCurve> curves;
  for (const auto& cls : classes) {
    const auto config = to_session_config(f, cls);
    Session session(data, config);
    auto result = run_to_completion(session);
    std::string json_path = f.out;
    if (classes.size() > 1) {
      const fs::path p(f.out);
      json_path = (p.parent_path() / (p.stem().string() + "." + cls + p.extension().string())).string();
    }
    const auto model_path = with_extension(json_path, ".model");
    write_model_snapshot(result.model, model_path);
    write_json(json_path, run_result_json(result, model_path));
    log << cls << ": " << result.log.size() - 1 << " iterations";
    if (!result.curve.ap_values.empty())
      log << ", AP " << result.curve.ap_values.front() << " -> " << result.curve.ap_values.back();
    log << " (" << json_path << ")\n";
    if (!result.curve.iterations.empty()) curves.push_back(std::move(result.curve));
  }
  if (!curves.empty()) {
    const auto curve_path = f.curve_out.empty() ? with_extension(f.out, ".csv") : f.curve_out;
    std::ofstream out(curve_path, std::ios::trunc);
    if (!out) throw DataError(curve_path, std::nullopt, "cannot write file");
    write_curve_csv(out, curves, grid(f.iters));
  }
  return kOk;
}

struct SweepFlags {
  RunFlags run;
  std::vector<std::string> strategies{"mcle", "random", "fplus", "fzero"};
  std::vector<std::string> classes;
  std::size_t seeds = 30;
  std::size_t jobs = 1;
  std::vector<std::size_t> win_points{25, 50};
};

inline int cmd_sweep(const SweepFlags& f, std::ostream& log) {
  auto data = std::make_shared<const Dataset>(load_dataset(f.run.data_dir));
  auto classes = f.classes.empty() ? data->labels.class_names : f.classes;
  for (const auto& c : classes)
    if (!data->labels.find(c)) throw SessionError(SessionError::Code::unknown_class, "unknown class '" + c + "'");
  std::vector<StrategyKind> strategies;
  for (const auto& s : f.strategies) strategies.push_back(parse_strategy(s));

  struct Job {
    std::size_t strategy;
    std::size_t cls;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < strategies.size(); ++s)
    for (std::size_t c = 0; c < classes.size(); ++c)
      for (std::uint64_t seed = 1; seed <= f.seeds; ++seed) jobs.push_back({s, c, seed});

  std::vector<LearningCurve> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::string first_error;
  auto worker = [&] {
    for (auto k = next++; k < jobs.size(); k = next++) {
      try {
        auto flags = f.run;
        flags.seed = jobs[k].seed;
        auto config = to_session_config(flags, classes[jobs[k].cls]);
        config.strategy.kind = strategies[jobs[k].strategy];
        Session session(data, config);
        results[k] = run_to_completion(session).curve;
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::max<std::size_t>(1, f.jobs); ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw std::runtime_error(first_error);

  fs::create_directories(f.run.out);
  const auto g = grid(f.run.iters);
  {
    std::ofstream out(fs::path(f.run.out) / "curves.csv", std::ios::trunc);
    out << "strategy,class,seed";
    for (auto t : g) out << ",t" << t;
    out << '\n' << std::fixed;
    out.precision(6);
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      out << to_string(strategies[jobs[k].strategy]) << ',' << classes[jobs[k].cls] << ','
          << jobs[k].seed;
      for (auto t : g) out << ',' << results[k].at(t);
      out << '\n';
    }
  }
  {
    std::ofstream out(fs::path(f.run.out) / "summary.csv", std::ios::trunc);
    out << "strategy";
    for (auto t : g) out << ",t" << t;
    out << '\n' << std::fixed;
    out.precision(6);
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      std::vector<LearningCurve> mine;
      for (std::size_t k = 0; k < jobs.size(); ++k)
        if (jobs[k].strategy == s) mine.push_back(results[k]);
      out << to_string(strategies[s]);
      for (auto t : g) out << ',' << mean_ap(mine, t);
      out << '\n';
    }
  }
  {
    // Paired comparison of mcle against every other strategy at the same
    // (class, seed).
    std::ofstream out(fs::path(f.run.out) / "winrate.csv", std::ios::trunc);
    out << "strategy,baseline,t,wins,pairs,win_rate\n" << std::fixed;
    out.precision(6);
    const auto mcle = std::find(strategies.begin(), strategies.end(), StrategyKind::mcle);
    if (mcle != strategies.end()) {
      const auto ms = static_cast<std::size_t>(mcle - strategies.begin());
      const std::size_t per = classes.size() * f.seeds;
      for (std::size_t s = 0; s < strategies.size(); ++s) {
        if (s == ms) continue;
        for (auto t : f.win_points) {
          std::size_t wins = 0;
          for (std::size_t p = 0; p < per; ++p)
            if (results[ms * per + p].at(t) >= results[s * per + p].at(t)) ++wins;
          out << "mcle," << to_string(strategies[s]) << ',' << t << ',' << wins << ',' << per << ','
              << static_cast<double>(wins) / static_cast<double>(per) << '\n';
          log << "mcle >= " << to_string(strategies[s]) << " at t=" << t << ": " << wins << "/"
              << per << '\n';
        }
      }
    }
  }
  log << "sweep: " << jobs.size() << " runs -> " << f.run.out << '\n';
  return kOk;
}

namespace detail {
inline std::atomic<bool>& stop_requested() {
  static std::atomic<bool> flag{false};
  return flag;
}
inline void on_signal(int) { stop_requested().store(true); }
}  // namespace detail

struct ServeFlags {
  std::string data_dir;
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string checkpoint_dir = "mcle_sessions";
  std::size_t max_sessions = 64;
  long idle_timeout = 3600;
  std::string console_dir;
};

inline int cmd_serve(const ServeFlags& f, std::ostream& log) {
  auto data = std::make_shared<const Dataset>(load_dataset(f.data_dir));
  ServiceOptions options;
  options.checkpoint_dir = f.checkpoint_dir;
  options.max_sessions = f.max_sessions;
  options.idle_timeout = std::chrono::seconds(f.idle_timeout);
  SessionManager manager(data, options);
  const auto restored = manager.restore_all();
  HttpService http(manager, f.console_dir);
  if (!http.bind(f.host, f.port)) {
    log << "error: cannot bind " << f.host << ":" << f.port << " (port in use?)\n";
    return kRuntimeError;
  }
  log << "serving " << f.data_dir << " on " << f.host << ":" << f.port << " (" << restored
      << " sessions restored)\n";

  detail::stop_requested().store(false);
  std::signal(SIGTERM, detail::on_signal);
  std::signal(SIGINT, detail::on_signal);
  std::thread watcher([&] {
    auto last_sweep = std::chrono::steady_clock::now();
    while (!detail::stop_requested().load()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
      if (std::chrono::steady_clock::now() - last_sweep > std::chrono::seconds(10)) {
        manager.evict_idle();
        last_sweep = std::chrono::steady_clock::now();
      }
    }
    http.stop();
  });
  const bool ok = http.listen();
  detail::stop_requested().store(true);
  watcher.join();
  manager.checkpoint_all();
  log << "checkpointed " << manager.size() << " sessions to " << f.checkpoint_dir << '\n';
  return ok ? kOk : kRuntimeError;
}

/// Entry point shared by the `mcle` binary and the tests.
inline int main(int argc, const char* const* argv, std::ostream& log = std::cout,
                std::ostream& err = std::cerr) {
  CLI::App app{"Zero-shot active learning with MCLE sampling"};
  app.require_subcommand(1);

  std::size_t classes = 5, per_class = 100, dim = 16;
  double prior_noise = 0.5;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian-blob bundle");
  synth->add_option("--classes", classes)->check(CLI::PositiveNumber);
  synth->add_option("--per-class", per_class)->check(CLI::PositiveNumber);
  synth->add_option("--dim", dim)->check(CLI::PositiveNumber);
  synth->add_option("--prior-noise", prior_noise)->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out)->required();

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one session with the simulated oracle");
  add_run_flags(*run, run_flags, true);
  run->add_option("--strategy", run_flags.strategy, "mcle | random | fplus | fzero | fminus");
  run->add_option("--seed", run_flags.seed);
  run->add_option("--out", run_flags.out, "RunResult JSON path");
  run->add_option("--curve", run_flags.curve_out, "Curve CSV path (default: <out>.csv)");

  SweepFlags sweep_flags;
  std::string strategies_list = "mcle,random,fplus,fzero", classes_list, win_list = "25,50";
  auto* sweep = app.add_subcommand("sweep", "Strategies x classes x seeds comparison");
  add_run_flags(*sweep, sweep_flags.run, false);
  sweep->add_option("--strategies", strategies_list, "Comma-separated strategies");
  sweep->add_option("--classes", classes_list, "Comma-separated classes (default: all)");
  sweep->add_option("--seeds", sweep_flags.seeds, "Seeds 1..N")->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", sweep_flags.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  sweep->add_option("--win-at", win_list, "Comma-separated iterations for the win-rate table");
  sweep->add_option("--out", sweep_flags.run.out, "Output directory");

  ServeFlags serve_flags;
  auto* serve = app.add_subcommand("serve", "HTTP service for external-oracle sessions");
  serve->add_option("--data", serve_flags.data_dir)->envname("MCLE_DATA_DIR");
  serve->add_option("--host", serve_flags.host);
  serve->add_option("--port", serve_flags.port)->check(CLI::Range(0, 65535));
  serve->add_option("--checkpoint-dir", serve_flags.checkpoint_dir);
  serve->add_option("--max-sessions", serve_flags.max_sessions)->check(CLI::PositiveNumber);
  serve->add_option("--idle-timeout", serve_flags.idle_timeout, "Seconds")->check(CLI::PositiveNumber);
  serve->add_option("--console-dir", serve_flags.console_dir, "Static console assets for /console/");

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
    return out;
  };

  try {
    app.parse(argc, argv);
    if (*run && !run_flags.config_file.empty()) apply_config_file(*run, run_flags.config_file);
    if (*sweep && !sweep_flags.run.config_file.empty())
      apply_config_file(*sweep, sweep_flags.run.config_file);
    if (*run) {
      if (run_flags.data_dir.empty()) throw CLI::RequiredError("--data");
      if (run_flags.out.empty()) throw CLI::RequiredError("--out");
      if (run_flags.class_name.empty() == !run_flags.all_unknown)
        throw CLI::ValidationError("--class", "give exactly one of --class or --all-unknown");
      parse_strategy(run_flags.strategy);
      parse_schedule(run_flags.prior);
    }
    if (*sweep) {
      if (sweep_flags.run.data_dir.empty()) throw CLI::RequiredError("--data");
      if (sweep_flags.run.out.empty()) throw CLI::RequiredError("--out");
      sweep_flags.strategies = split(strategies_list);
      sweep_flags.classes = split(classes_list);
      sweep_flags.win_points.clear();
      for (const auto& w : split(win_list)) sweep_flags.win_points.push_back(std::stoul(w));
      for (const auto& s : sweep_flags.strategies) parse_strategy(s);
      parse_schedule(sweep_flags.run.prior);
    }
    if (*serve && serve_flags.data_dir.empty()) throw CLI::RequiredError("--data");
  } catch (const CLI::CallForHelp& e) {
    log << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    log << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }

  try {
    if (*synth) return cmd_synth(classes, per_class, dim, prior_noise, synth_seed, synth_out, log);
    if (*run) return cmd_run(run_flags, log);
    if (*sweep) return cmd_sweep(sweep_flags, log);
    if (*serve) return cmd_serve(serve_flags, log);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace mcle::cli
