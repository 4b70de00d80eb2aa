#include <algorithm>
#include <limits>

#include "tvae/data.hpp"
#include "tvae/elbo.hpp"
#include "tvae/errors.hpp"

namespace tvae {

namespace {

// Minimum-cost assignment on an n x n matrix (potentials / shortest
// augmenting path). Returns row_to_col.
std::vector<std::size_t> assign_min_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

Matching match_clusters_to_classes(const std::vector<std::vector<double>>& confusion) {
  const std::size_t rows = confusion.size();
  std::size_t cols = 0;
  for (const auto& r : confusion) cols = std::max(cols, r.size());
  const std::size_t n = std::max(rows, cols);
  Matching m;
  if (n == 0) return m;
  double total = 0.0;
  double hi = 0.0;
  for (const auto& r : confusion)
    for (double v : r) {
      if (!(v >= 0.0)) throw ContractError("match_clusters_to_classes: counts must be nonnegative");
      total += v;
      hi = std::max(hi, v);
    }
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, hi));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < confusion[i].size(); ++j) cost[i][j] = hi - confusion[i][j];
  const auto a = assign_min_cost(cost);
  double matched = 0.0;
  m.perm.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    m.perm[i] = a[i];
    if (a[i] < confusion[i].size()) matched += confusion[i][a[i]];
  }
  m.matched = static_cast<std::size_t>(matched + 0.5);
  m.total = static_cast<std::size_t>(total + 0.5);
  m.accuracy = total > 0.0 ? matched / total : 0.0;
  return m;
}

std::vector<std::vector<double>> confusion_matrix(const std::vector<int>& predicted, const std::vector<int>& labels,
                                                  std::size_t clusters, std::size_t classes) {
  if (predicted.size() != labels.size()) throw ContractError("confusion_matrix: length mismatch");
  std::vector<std::vector<double>> c(clusters, std::vector<double>(classes, 0.0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kUnlabeled) continue;
    if (predicted[i] < 0 || static_cast<std::size_t>(predicted[i]) >= clusters || labels[i] < 0 ||
        static_cast<std::size_t>(labels[i]) >= classes) {
      throw ContractError("confusion_matrix: entry " + std::to_string(i) + " out of range");
    }
    c[static_cast<std::size_t>(predicted[i])][static_cast<std::size_t>(labels[i])] += 1.0;
  }
  return c;
}

}  // namespace tvae
