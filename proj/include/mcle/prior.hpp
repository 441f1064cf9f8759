#pragma once

// Zero-shot prior built from a bank of known-concept classifiers, and the
// schedules that mix it with the actively learned model.

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mcle/data.hpp"
#include "mcle/svm.hpp"

namespace mcle {

/// Linear zero-shot scorer: w_zs = sum_k beta_k w_k, b_zs = sum_k beta_k b_k.
class ZeroShotPrior {
 public:
  ZeroShotPrior(const SourceBank& bank, std::span<const double> beta_row)
      : beta_(beta_row.begin(), beta_row.end()), w_(bank.weights.cols(), 0.0) {
    if (beta_.size() != bank.size())
      throw std::invalid_argument("ZeroShotPrior: " + std::to_string(beta_.size()) +
                                  " relation weights for " + std::to_string(bank.size()) +
                                  " sources");
    for (std::size_t k = 0; k < bank.size(); ++k) {
      const auto wk = bank.weights.row(k);
      for (std::size_t j = 0; j < w_.size(); ++j) w_[j] += beta_[k] * wk[j];
      b_ += beta_[k] * bank.biases[k];
    }
  }

  /// Prior for the relation row named `target`.
  static ZeroShotPrior for_target(const Dataset& d, std::string_view target) {
    const auto row = d.relations.find(target);
    if (!row) throw std::invalid_argument("no relation weights for class '" + std::string(target) + "'");
    return ZeroShotPrior(d.sources, d.relations.betas.row(*row));
  }

  /// Prior that contributes nothing.
  static ZeroShotPrior zero(std::size_t dim) {
    ZeroShotPrior p;
    p.w_.assign(dim, 0.0);
    return p;
  }

  double score(std::span<const double> x) const {
    if (x.size() != w_.size())
      throw std::invalid_argument("zs_score: dimension mismatch (prior " +
                                  std::to_string(w_.size()) + ", x " + std::to_string(x.size()) +
                                  ")");
    return dot(w_, x) + b_;
  }

  const std::vector<double>& weights() const noexcept { return w_; }
  double bias() const noexcept { return b_; }
  const std::vector<double>& betas() const noexcept { return beta_; }

 private:
  ZeroShotPrior() = default;

  std::vector<double> beta_;
  std::vector<double> w_;
  double b_ = 0.0;
};

enum class ScheduleKind { vanilla, constant, inverse_decay, linear_decay };

struct PriorSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  std::size_t t0 = 20;
  std::size_t drop_after = 150;  // 0 disables the drop

  void validate() const {
    if (t0 < 1) throw std::invalid_argument("PriorSchedule: t0 must be >= 1");
  }
};

struct MixWeights {
  double prior;
  double model;
};

inline MixWeights mix_weights(const PriorSchedule& s, std::size_t t) {
  const double td = static_cast<double>(t);
  MixWeights m{1.0, 1.0};
  switch (s.kind) {
    case ScheduleKind::vanilla:
      m.prior = t == 0 ? 1.0 : 0.0;
      break;
    case ScheduleKind::constant:
      break;
    case ScheduleKind::inverse_decay:
      m.prior = 1.0 / (td + 1.0);
      break;
    case ScheduleKind::linear_decay: {
      const double t0 = static_cast<double>(s.t0);
      m.prior = t0 / (td + t0);
      m.model = td / (td + t0);
      break;
    }
  }
  if (s.drop_after > 0 && t >= s.drop_after) m.prior = 0.0;
  return m;
}

/// eta_prior * f_zs(x) + eta_model * (w.x + b) at iteration t.
inline double combined_score(const ZeroShotPrior& prior, const PriorSchedule& schedule,
                             const LinearModel& model, std::span<const double> x, std::size_t t) {
  const auto m = mix_weights(schedule, t);
  const double zs = prior.score(x);
  const double dv = decision_value(model, x);
  return m.prior * zs + m.model * dv;
}

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::vanilla: return "vanilla";
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::inverse_decay: return "inverse_decay";
    case ScheduleKind::linear_decay: return "linear_decay";
  }
  return "?";
}

inline ScheduleKind parse_schedule(std::string_view s) {
  if (s == "vanilla") return ScheduleKind::vanilla;
  if (s == "constant") return ScheduleKind::constant;
  if (s == "inverse_decay" || s == "inverse") return ScheduleKind::inverse_decay;
  if (s == "linear_decay" || s == "linear") return ScheduleKind::linear_decay;
  throw std::invalid_argument("unknown prior schedule '" + std::string(s) + "'");
}

}  // namespace mcle
