#pragma once

// Zone partition of the unlabeled pool and query selection rules.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mcle {

enum class ZoneTag : std::uint8_t { f_minus, f_zero, f_plus };

/// F- below -1, F0 on the closed interval [-1, +1], F+ above +1.
inline ZoneTag zone_of(double score) {
  if (score < -1.0) return ZoneTag::f_minus;
  if (score > 1.0) return ZoneTag::f_plus;
  return ZoneTag::f_zero;
}

inline std::vector<ZoneTag> partition(std::span<const double> scores) {
  std::vector<ZoneTag> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(zone_of(s));
  return out;
}

inline std::string_view to_string(ZoneTag z) {
  switch (z) {
    case ZoneTag::f_minus: return "F_minus";
    case ZoneTag::f_zero: return "F_zero";
    case ZoneTag::f_plus: return "F_plus";
  }
  return "?";
}

/// Running estimate of p(label | zone) for the F+ and F0 zones. Each labeled
/// query adds count/n to every cell (n = tracked queries so far) on top of
/// the previous value, then the four cells are renormalized jointly.
class LikelihoodTracker {
 public:
  enum Cell : std::size_t { pos_fplus = 0, neg_fplus = 1, pos_fzero = 2, neg_fzero = 3 };

  LikelihoodTracker() {
    p_[pos_fplus] = 0.5;
    p_[pos_fzero] = 0.1;
    const double rest = 1.0 - p_[pos_fplus] - p_[pos_fzero];
    p_[neg_fplus] = rest / 2.0;
    p_[neg_fzero] = rest / 2.0;
    normalize();
  }

  /// Returns false (and changes nothing) for F- queries, which are untracked.
  bool update(ZoneTag zone, int label) {
    if (zone == ZoneTag::f_minus) {
      ++untracked_;
      return false;
    }
    const bool pos = label > 0;
    const Cell cell = zone == ZoneTag::f_plus ? (pos ? pos_fplus : neg_fplus)
                                              : (pos ? pos_fzero : neg_fzero);
    ++counts_[cell];
    ++n_;
    for (std::size_t c = 0; c < 4; ++c)
      p_[c] += static_cast<double>(counts_[c]) / static_cast<double>(n_);
    normalize();
    return true;
  }

  double value(Cell c) const { return p_[c]; }
  const std::array<double, 4>& values() const noexcept { return p_; }
  const std::array<std::size_t, 4>& counts() const noexcept { return counts_; }
  std::size_t updates() const noexcept { return n_; }
  std::size_t untracked() const noexcept { return untracked_; }

  /// p(+ | F+) and p(+ | F0) with each zone's pair normalized on its own.
  std::array<double, 2> per_zone_positive() const {
    return {p_[pos_fplus] / (p_[pos_fplus] + p_[neg_fplus]),
            p_[pos_fzero] / (p_[pos_fzero] + p_[neg_fzero])};
  }

 private:
  void normalize() {
    const double s = p_[0] + p_[1] + p_[2] + p_[3];
    for (auto& v : p_) v /= s;
  }

  std::array<double, 4> p_{};
  std::array<std::size_t, 4> counts_{};
  std::size_t n_ = 0;
  std::size_t untracked_ = 0;
};

struct BalanceStat {
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;

  /// Fraction of positives among queried labels; 0 before any query.
  double rho() const {
    const auto total = n_pos + n_neg;
    return total == 0 ? 0.0 : static_cast<double>(n_pos) / static_cast<double>(total);
  }
};

inline BalanceStat update_balance(BalanceStat b, int label) {
  (label > 0 ? b.n_pos : b.n_neg)++;
  return b;
}

enum class StrategyKind { mcle, fplus_only, fzero_only, fminus_only, random };

struct StrategyConfig {
  StrategyKind kind = StrategyKind::mcle;
  double rho_prime = 0.5;
  std::size_t burn_in = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(rho_prime > 0.0 && rho_prime < 1.0))
      throw std::invalid_argument("rho_prime must lie in (0, 1)");
  }
};

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::mcle: return "mcle";
    case StrategyKind::fplus_only: return "fplus_only";
    case StrategyKind::fzero_only: return "fzero_only";
    case StrategyKind::fminus_only: return "fminus_only";
    case StrategyKind::random: return "random";
  }
  return "?";
}

inline StrategyKind parse_strategy(std::string_view s) {
  if (s == "mcle") return StrategyKind::mcle;
  if (s == "fplus" || s == "fplus_only") return StrategyKind::fplus_only;
  if (s == "fzero" || s == "fzero_only") return StrategyKind::fzero_only;
  if (s == "fminus" || s == "fminus_only") return StrategyKind::fminus_only;
  if (s == "random") return StrategyKind::random;
  throw std::invalid_argument("unknown strategy '" + std::string(s) + "'");
}

struct QueryChoice {
  std::size_t sample_id;
  ZoneTag intended_zone;
};

/// Picks one query among `ids` (scores aligned). Ranked selection inside a
/// zone: top score for F+, smallest |score| for F0, lowest score for F-.
/// Ties go to the lowest sample id. `random` draws uniformly from a generator
/// seeded by (seed, t, pool size), so the choice is a pure function of its
/// inputs.
inline QueryChoice select_query(const StrategyConfig& strategy, std::span<const double> scores,
                                std::span<const std::size_t> ids, const BalanceStat& balance,
                                std::size_t t) {
  if (ids.empty()) throw std::invalid_argument("select_query: no unlabeled samples");
  if (scores.size() != ids.size())
    throw std::invalid_argument("select_query: scores and ids differ in length");

  auto pick = [&](auto key) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < ids.size(); ++k) {
      const double a = key(scores[k]), b = key(scores[best]);
      if (a > b || (a == b && ids[k] < ids[best])) best = k;
    }
    return best;
  };
  auto top = [&] { return pick([](double s) { return s; }); };
  auto most_uncertain = [&] { return pick([](double s) { return -std::abs(s); }); };
  auto bottom = [&] { return pick([](double s) { return -s; }); };

  switch (strategy.kind) {
    case StrategyKind::mcle:
      if (t < strategy.burn_in || balance.rho() < strategy.rho_prime)
        return {ids[top()], ZoneTag::f_plus};
      return {ids[most_uncertain()], ZoneTag::f_zero};
    case StrategyKind::fplus_only:
      return {ids[top()], ZoneTag::f_plus};
    case StrategyKind::fzero_only:
      return {ids[most_uncertain()], ZoneTag::f_zero};
    case StrategyKind::fminus_only:
      return {ids[bottom()], ZoneTag::f_minus};
    case StrategyKind::random: {
      std::seed_seq seq{static_cast<std::uint32_t>(strategy.seed),
                        static_cast<std::uint32_t>(strategy.seed >> 32),
                        static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(ids.size())};
      std::mt19937_64 rng(seq);
      std::uniform_int_distribution<std::size_t> dist(0, ids.size() - 1);
      const auto k = dist(rng);
      return {ids[k], zone_of(scores[k])};
    }
  }
  throw std::logic_error("select_query: unhandled strategy");
}

}  // namespace mcle
