#pragma once

// Incremental soft-margin linear SVM trained in the dual over the samples
// selected so far. The selection only grows; dual variables are warm-started
// across calls and new samples enter with alpha = 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcle/data.hpp"
#include "mcle/matrix.hpp"

namespace mcle {

/// `constrained` keeps the equality constraint sum(alpha_i y_i) = 0 and a
/// bias term; `none` drops both (f(x) = w.x).
enum class BiasMode { constrained, none };

struct SolverConfig {
  double C = 1.0;
  double kkt_tol = 1e-3;
  /// Upper bound on pair updates (constrained) or coordinate sweeps (none).
  std::size_t max_passes = 10000;
  double eq_tol = 1e-6;
  BiasMode bias_mode = BiasMode::constrained;

  void validate() const {
    if (!(C > 0.0) || !(kkt_tol > 0.0) || max_passes == 0 || !(eq_tol > 0.0))
      throw std::invalid_argument("SolverConfig: C, kkt_tol, max_passes and eq_tol must be positive");
  }
};

struct SelectedSample {
  std::size_t index;  // pool row
  int label;          // +1 / -1
  double alpha;
};

struct LinearModel {
  std::vector<double> w;
  double b = 0.0;
  double C = 1.0;
  std::vector<SelectedSample> selected;  // in selection order
  std::vector<std::uint8_t> gamma;       // per pool row
  bool converged = true;
  std::size_t iterations = 0;  // solver updates spent in the last call

  static LinearModel untrained(std::size_t dim, std::size_t n_samples, double C = 1.0) {
    LinearModel m;
    m.w.assign(dim, 0.0);
    m.C = C;
    m.gamma.assign(n_samples, 0);
    return m;
  }

  std::size_t dim() const noexcept { return w.size(); }
  bool is_selected(std::size_t i) const { return i < gamma.size() && gamma[i] != 0; }

  /// Dual objective sum(alpha) - 1/2 ||sum alpha_i y_i x_i||^2.
  double dual_objective(const Pool& pool) const {
    std::vector<double> v(pool.dim(), 0.0);
    double sum_alpha = 0.0;
    for (const auto& s : selected) {
      sum_alpha += s.alpha;
      const auto x = pool.x(s.index);
      for (std::size_t k = 0; k < v.size(); ++k) v[k] += s.alpha * s.label * x[k];
    }
    return sum_alpha - 0.5 * dot(v, v);
  }
};

inline double decision_value(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.w.size())
    throw std::invalid_argument("decision_value: dimension mismatch (model " +
                                std::to_string(model.w.size()) + ", x " +
                                std::to_string(x.size()) + ")");
  return dot(model.w, x) + model.b;
}

/// Dual solver with a dot-product cache over the selected set. A session keeps
/// one instance alive so the cache grows with the selection instead of being
/// rebuilt each iteration.
class DualSolver {
 public:
  DualSolver(const Pool& pool, SolverConfig config) : pool_(&pool), config_(config) {
    config_.validate();
  }

  const SolverConfig& config() const noexcept { return config_; }

  /// Marks `additions` (pool row, label) as selected and re-optimizes.
  void train(LinearModel& model, std::span<const std::pair<std::size_t, int>> additions) {
    if (model.w.size() != pool_->dim())
      throw std::invalid_argument("train: model dimension does not match pool");
    if (model.gamma.size() != pool_->n_samples()) model.gamma.resize(pool_->n_samples(), 0);
    for (const auto& [index, label] : additions) {
      if (index >= pool_->n_samples())
        throw std::out_of_range("train: sample " + std::to_string(index) + " outside pool");
      if (model.gamma[index])
        throw std::invalid_argument("train: sample " + std::to_string(index) +
                                    " is already selected");
      if (label != 1 && label != -1)
        throw std::invalid_argument("train: label must be +1 or -1");
      model.gamma[index] = 1;
      model.selected.push_back({index, label, 0.0});
    }
    model.C = config_.C;
    sync_cache(model);
    if (config_.bias_mode == BiasMode::constrained) {
      solve_constrained(model);
    } else {
      solve_unconstrained(model);
    }
    rebuild_w(model);
  }

 private:
  double k(std::size_t a, std::size_t b) const { return a >= b ? gram_[a][b] : gram_[b][a]; }

  void sync_cache(const LinearModel& model) {
    std::size_t keep = 0;
    while (keep < cached_.size() && keep < model.selected.size() &&
           cached_[keep] == model.selected[keep].index)
      ++keep;
    cached_.resize(keep);
    gram_.resize(keep);
    for (std::size_t p = keep; p < model.selected.size(); ++p) {
      const auto xp = pool_->x(model.selected[p].index);
      std::vector<double> row(p + 1);
      for (std::size_t q = 0; q <= p; ++q) row[q] = dot(xp, pool_->x(model.selected[q].index));
      gram_.push_back(std::move(row));
      cached_.push_back(model.selected[p].index);
    }
  }

  std::vector<double> gradient(const LinearModel& model) const {
    const std::size_t n = model.selected.size();
    std::vector<double> g(n, -1.0);
    for (std::size_t s = 0; s < n; ++s) {
      const auto& ss = model.selected[s];
      if (ss.alpha == 0.0) continue;
      for (std::size_t t = 0; t < n; ++t)
        g[t] += model.selected[t].label * ss.label * k(t, s) * ss.alpha;
    }
    return g;
  }

  void solve_constrained(LinearModel& model) {
    auto& sel = model.selected;
    const std::size_t n = sel.size();
    const double C = config_.C;
    constexpr double kTau = 1e-12;
    auto g = gradient(model);
    auto in_up = [&](std::size_t t) {
      return (sel[t].label > 0 && sel[t].alpha < C) || (sel[t].label < 0 && sel[t].alpha > 0);
    };
    auto in_low = [&](std::size_t t) {
      return (sel[t].label > 0 && sel[t].alpha > 0) || (sel[t].label < 0 && sel[t].alpha < C);
    };

    model.converged = false;
    model.iterations = 0;
    if (n == 0) model.converged = true;
    while (n > 0) {
      // i: maximal KKT violator. j: largest second-order objective decrease
      // among violating partners. Ties resolve toward the lowest pool index.
      std::size_t i = n, j = n;
      double gmax = -std::numeric_limits<double>::infinity();
      double gmin = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < n; ++t) {
        const double v = -sel[t].label * g[t];
        if (in_up(t) && (i == n || v > gmax || (v == gmax && sel[t].index < sel[i].index))) {
          gmax = v;
          i = t;
        }
        if (in_low(t)) gmin = std::min(gmin, v);
      }
      if (i == n || !(gmax - gmin > config_.kkt_tol)) {
        model.converged = true;
        break;
      }
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < n; ++t) {
        if (!in_low(t)) continue;
        const double diff = gmax + sel[t].label * g[t];
        if (diff <= 0) continue;
        double quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
        if (quad <= 0) quad = kTau;
        const double gain = -(diff * diff) / quad;
        if (j == n || gain < best || (gain == best && sel[t].index < sel[j].index)) {
          best = gain;
          j = t;
        }
      }
      if (model.iterations >= config_.max_passes) break;
      ++model.iterations;

      const int yi = sel[i].label, yj = sel[j].label;
      const double qij = yi * yj * k(i, j);
      const double old_i = sel[i].alpha, old_j = sel[j].alpha;
      double& ai = sel[i].alpha;
      double& aj = sel[j].alpha;
      if (yi != yj) {
        double quad = k(i, i) + k(j, j) + 2.0 * qij;
        if (quad <= 0) quad = kTau;
        const double delta = (-g[i] - g[j]) / quad;
        const double diff = ai - aj;
        ai += delta;
        aj += delta;
        if (diff > 0) {
          if (aj < 0) { aj = 0; ai = diff; }
        } else {
          if (ai < 0) { ai = 0; aj = -diff; }
        }
        if (diff > 0) {
          if (ai > C) { ai = C; aj = C - diff; }
        } else {
          if (aj > C) { aj = C; ai = C + diff; }
        }
      } else {
        double quad = k(i, i) + k(j, j) - 2.0 * qij;
        if (quad <= 0) quad = kTau;
        const double delta = (g[i] - g[j]) / quad;
        const double sum = ai + aj;
        ai -= delta;
        aj += delta;
        if (sum > C) {
          if (ai > C) { ai = C; aj = sum - C; }
        } else {
          if (aj < 0) { aj = 0; ai = sum; }
        }
        if (sum > C) {
          if (aj > C) { aj = C; ai = sum - C; }
        } else {
          if (ai < 0) { ai = 0; aj = sum; }
        }
      }
      const double di = ai - old_i, dj = aj - old_j;
      for (std::size_t t = 0; t < n; ++t) {
        const int yt = sel[t].label;
        g[t] += yt * yi * k(t, i) * di + yt * yj * k(t, j) * dj;
      }
    }

    // Bias from free support vectors, else the midpoint of the feasible range.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const double yg = sel[t].label * g[t];
      if (sel[t].alpha >= C) {
        if (sel[t].label < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else if (sel[t].alpha <= 0) {
        if (sel[t].label > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    double r = 0.0;
    if (n_free > 0) {
      r = sum_free / static_cast<double>(n_free);
    } else if (std::isfinite(ub) && std::isfinite(lb)) {
      r = 0.5 * (ub + lb);
    } else if (std::isfinite(ub)) {
      r = ub;
    } else if (std::isfinite(lb)) {
      r = lb;
    }
    model.b = -r;
  }

  void solve_unconstrained(LinearModel& model) {
    auto& sel = model.selected;
    const std::size_t n = sel.size();
    const double C = config_.C;
    auto g = gradient(model);
    model.converged = n == 0;
    model.iterations = 0;
    while (n > 0 && model.iterations < config_.max_passes) {
      ++model.iterations;
      double max_pg = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double pg = g[i];
        if (sel[i].alpha <= 0) pg = std::min(pg, 0.0);
        if (sel[i].alpha >= C) pg = std::max(pg, 0.0);
        max_pg = std::max(max_pg, std::abs(pg));
        if (pg == 0.0 || k(i, i) <= 0.0) continue;
        const double old = sel[i].alpha;
        sel[i].alpha = std::clamp(old - g[i] / k(i, i), 0.0, C);
        const double d = sel[i].alpha - old;
        if (d == 0.0) continue;
        for (std::size_t t = 0; t < n; ++t)
          g[t] += sel[t].label * sel[i].label * k(t, i) * d;
      }
      if (max_pg <= config_.kkt_tol) {
        model.converged = true;
        break;
      }
    }
    model.b = 0.0;
  }

  void rebuild_w(LinearModel& model) const {
    std::fill(model.w.begin(), model.w.end(), 0.0);
    for (const auto& s : model.selected) {
      if (s.alpha == 0.0) continue;
      const auto x = pool_->x(s.index);
      for (std::size_t k = 0; k < model.w.size(); ++k) model.w[k] += s.alpha * s.label * x[k];
    }
  }

  const Pool* pool_;
  SolverConfig config_;
  std::vector<std::size_t> cached_;
  std::vector<std::vector<double>> gram_;  // lower triangle over selection positions
};

/// Functional form: returns `model` with `newly_selected` added (labels taken
/// from `labels`) and re-optimized from the incoming dual variables.
inline LinearModel train_incremental(LinearModel model, const Pool& pool,
                                     const std::map<std::size_t, int>& labels,
                                     std::span<const std::size_t> newly_selected,
                                     const SolverConfig& config = {}) {
  std::vector<std::pair<std::size_t, int>> additions;
  for (auto i : newly_selected) {
    auto it = labels.find(i);
    if (it == labels.end())
      throw std::invalid_argument("train_incremental: no label for selected sample " +
                                  std::to_string(i));
    additions.emplace_back(i, it->second);
  }
  DualSolver solver(pool, config);
  solver.train(model, additions);
  return model;
}

struct KktReport {
  std::vector<double> residuals;  // aligned with model.selected
  double max_residual = 0.0;
  double equality_residual = 0.0;  // |sum alpha_i y_i|
  double box_violation = 0.0;      // max distance of alpha outside [0, C]
  double w_residual = 0.0;         // max |w - sum alpha_i y_i x_i| per coordinate

  bool satisfied(double kkt_tol, double eq_tol) const {
    return max_residual <= kkt_tol && equality_residual <= eq_tol && box_violation == 0.0;
  }
};

/// Per-sample complementary-slackness residuals over the selected set:
/// alpha = 0 needs y f >= 1, alpha = C needs y f <= 1, free needs y f = 1.
inline KktReport check_kkt(const LinearModel& model, const Pool& pool) {
  KktReport r;
  const double bound_eps = 1e-12 * std::max(1.0, model.C);
  std::vector<double> w(model.w.size(), 0.0);
  double eq = 0.0;
  for (const auto& s : model.selected) {
    const auto x = pool.x(s.index);
    const double margin = s.label * decision_value(model, x);
    double res = 0.0;
    if (s.alpha <= bound_eps) {
      res = std::max(0.0, 1.0 - margin);
    } else if (s.alpha >= model.C - bound_eps) {
      res = std::max(0.0, margin - 1.0);
    } else {
      res = std::abs(margin - 1.0);
    }
    r.residuals.push_back(res);
    r.max_residual = std::max(r.max_residual, res);
    r.box_violation = std::max({r.box_violation, -s.alpha, s.alpha - model.C});
    eq += s.alpha * s.label;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += s.alpha * s.label * x[k];
  }
  r.box_violation = std::max(r.box_violation, 0.0);
  r.equality_residual = std::abs(eq);
  for (std::size_t k = 0; k < w.size(); ++k)
    r.w_residual = std::max(r.w_residual, std::abs(w[k] - model.w[k]));
  return r;
}

/// Binary snapshot: magic `ALMD`, u32 version, u32 d, f32 w[d], f32 b,
/// u32 n_selected, then (u32 index, f32 alpha, i8 label) per selected sample.
inline void write_model_snapshot(const LinearModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string(), std::nullopt, "cannot write model snapshot");
  out.write("ALMD", 4);
  detail::write_le(out, std::uint32_t{1});
  detail::write_le(out, static_cast<std::uint32_t>(model.w.size()));
  for (double v : model.w) detail::write_le(out, static_cast<float>(v));
  detail::write_le(out, static_cast<float>(model.b));
  detail::write_le(out, static_cast<std::uint32_t>(model.selected.size()));
  for (const auto& s : model.selected) {
    detail::write_le(out, static_cast<std::uint32_t>(s.index));
    detail::write_le(out, static_cast<float>(s.alpha));
    detail::write_le(out, static_cast<std::int8_t>(s.label));
  }
  if (!out) throw DataError(path.string(), std::nullopt, "write failed");
}

inline LinearModel read_model_snapshot(const std::filesystem::path& path, std::size_t n_samples,
                                       double C = 1.0) {
  const auto name = path.filename().string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(name, std::nullopt, "cannot open model snapshot");
  char magic[4] = {};
  if (!in.read(magic, 4) || std::string(magic, 4) != "ALMD")
    throw DataError(name, std::nullopt, "bad magic (expected 'ALMD')");
  std::uint32_t version = 0, d = 0, count = 0;
  if (!detail::read_le(in, version) || version != 1)
    throw DataError(name, std::nullopt, "unsupported version");
  if (!detail::read_le(in, d)) throw DataError(name, std::nullopt, "truncated header");
  auto m = LinearModel::untrained(d, n_samples, C);
  for (auto& v : m.w) {
    float f = 0;
    if (!detail::read_le(in, f)) throw DataError(name, std::nullopt, "truncated weights");
    v = f;
  }
  float b = 0;
  if (!detail::read_le(in, b) || !detail::read_le(in, count))
    throw DataError(name, std::nullopt, "truncated header");
  m.b = b;
  for (std::uint32_t r = 0; r < count; ++r) {
    std::uint32_t index = 0;
    float alpha = 0;
    std::int8_t label = 0;
    if (!detail::read_le(in, index) || !detail::read_le(in, alpha) || !detail::read_le(in, label))
      throw DataError(name, r, "truncated selection record");
    if (index >= n_samples) throw DataError(name, r, "sample index outside pool");
    m.selected.push_back({index, label, alpha});
    m.gamma[index] = 1;
  }
  return m;
}

}  // namespace mcle
