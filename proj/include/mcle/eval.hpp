#pragma once

// Ranking metrics and learning-curve aggregation.

#include <algorithm>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcle {

/// Non-interpolated average precision. Items are ranked by descending score,
/// ties by ascending position. Throws when no item is relevant.
inline double average_precision(std::span<const double> scores, std::span<const int> relevance) {
  if (scores.size() != relevance.size())
    throw std::invalid_argument("average_precision: scores and relevance differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevance[order[rank]] > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw std::domain_error("average_precision: no positive items");
  return sum / static_cast<double>(hits);
}

struct LearningCurve {
  std::string class_name;
  std::string strategy;
  std::vector<std::size_t> iterations;
  std::vector<double> ap_values;

  void push(std::size_t t, double ap) {
    iterations.push_back(t);
    ap_values.push_back(ap);
  }

  /// AP at the latest logged iteration <= t.
  double at(std::size_t t) const {
    auto it = std::upper_bound(iterations.begin(), iterations.end(), t);
    if (it == iterations.begin())
      throw std::out_of_range("LearningCurve '" + class_name + "' has no entry at or before t=" +
                              std::to_string(t));
    return ap_values[static_cast<std::size_t>(it - iterations.begin()) - 1];
  }
};

inline double mean_ap(std::span<const LearningCurve> curves, std::size_t t) {
  if (curves.empty()) throw std::invalid_argument("mean_ap: no curves");
  double sum = 0.0;
  for (const auto& c : curves) sum += c.at(t);
  return sum / static_cast<double>(curves.size());
}

/// 0, step, 2*step, ... up to `last` inclusive.
inline std::vector<std::size_t> grid(std::size_t last, std::size_t step = 50) {
  std::vector<std::size_t> g;
  for (std::size_t t = 0; t <= last; t += step) g.push_back(t);
  return g;
}

/// CSV with header `t,<class...>,mean` and one row per grid point.
inline void write_curve_csv(std::ostream& out, std::span<const LearningCurve> curves,
                            std::span<const std::size_t> grid_points) {
  out << 't';
  for (const auto& c : curves) out << ',' << c.class_name;
  out << ",mean\n";
  out.precision(6);
  out << std::fixed;
  for (auto t : grid_points) {
    out << t;
    for (const auto& c : curves) out << ',' << c.at(t);
    out << ',' << mean_ap(curves, t) << '\n';
  }
  out.unsetf(std::ios::fixed);
}

}  // namespace mcle
