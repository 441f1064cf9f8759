#pragma once

// Independent reference computations for the tests. Nothing here shares code
// with the library paths it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mcle::testing {

struct QpSolution {
  std::vector<double> alpha;
  double objective;
};

/// Maximizes sum(a) - 1/2 a'Qa over {0 <= a <= C, y'a = 0} with
/// Q_ij = y_i y_j <x_i, x_j>, by accelerated projected gradient. The
/// projection onto the box-and-hyperplane set bisects on the multiplier of
/// the hyperplane. With `equality = false` the hyperplane is dropped.
inline QpSolution solve_dual_qp(const std::vector<std::vector<double>>& x,
                                const std::vector<int>& y, double C, bool equality = true,
                                int iterations = 20000) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> Q(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double k = 0.0;
      for (std::size_t d = 0; d < x[i].size(); ++d) k += x[i][d] * x[j][d];
      Q[i][j] = y[i] * y[j] * k;
    }
  // Largest eigenvalue by power iteration, padded so the step stays safe.
  double lmax = 0.0;
  {
    std::vector<double> v(n, 1.0), u(n);
    for (int it = 0; it < 500; ++it) {
      double norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        u[i] = 0.0;
        for (std::size_t j = 0; j < n; ++j) u[i] += Q[i][j] * v[j];
        norm += u[i] * u[i];
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) break;
      lmax = norm;
      for (std::size_t i = 0; i < n; ++i) v[i] = u[i] / norm;
    }
  }
  const double step = 1.0 / std::max(1.01 * lmax, 1e-12);

  auto project = [&](const std::vector<double>& v) {
    std::vector<double> a(n);
    if (!equality) {
      for (std::size_t i = 0; i < n; ++i) a[i] = std::clamp(v[i], 0.0, C);
      return a;
    }
    auto residual = [&](double mu) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += y[i] * std::clamp(v[i] - mu * y[i], 0.0, C);
      return s;
    };
    double lo = -1.0, hi = 1.0;
    while (residual(lo) < 0) lo *= 2;
    while (residual(hi) > 0) hi *= 2;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (residual(mid) > 0 ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < n; ++i) a[i] = std::clamp(v[i] - mu * y[i], 0.0, C);
    return a;
  };

  auto objective = [&](const std::vector<double>& a) {
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lin += a[i];
      for (std::size_t j = 0; j < n; ++j) quad += a[i] * Q[i][j] * a[j];
    }
    return lin - 0.5 * quad;
  };

  std::vector<double> a(n, 0.0), z = a, prev = a;
  double tk = 1.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      double g = -1.0;
      for (std::size_t j = 0; j < n; ++j) g += Q[i][j] * z[j];
      v[i] = z[i] - step * g;
    }
    prev = a;
    a = project(v);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    for (std::size_t i = 0; i < n; ++i) z[i] = a[i] + ((tk - 1.0) / tn) * (a[i] - prev[i]);
    tk = tn;
  }
  return {a, objective(a)};
}

/// AP by explicit enumeration: for every relevant item count how many items
/// rank at or above it (higher score, or equal score and lower position).
inline double brute_force_ap(const std::vector<double>& scores, const std::vector<int>& relevance) {
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (relevance[i] <= 0) continue;
    ++n_pos;
    std::size_t above = 0, pos_above = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool ahead = scores[j] > scores[i] || (scores[j] == scores[i] && j <= i);
      if (!ahead) continue;
      ++above;
      if (relevance[j] > 0) ++pos_above;
    }
    sum += static_cast<double>(pos_above) / static_cast<double>(above);
  }
  return sum / static_cast<double>(n_pos);
}

}  // namespace mcle::testing
