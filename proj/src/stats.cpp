#include "gcq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gcq/error.hpp"

namespace gcq::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw StateError("mean of an empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double median(std::span<const double> xs) {
  if (xs.empty()) throw StateError("median of an empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double rank_sum_p_greater(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw StateError("rank-sum test needs two non-empty samples");
  const std::size_t n = a.size() + b.size();
  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(n);
  for (double x : a) pooled.emplace_back(x, true);
  for (double x : b) pooled.emplace_back(x, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });

  // Doubled midranks keep every rank an integer.
  std::vector<std::size_t> rank2(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    for (std::size_t k = i; k < j; ++k) rank2[k] = i + j + 1;
    i = j;
  }
  std::size_t observed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (pooled[i].second) observed += rank2[i];

  // ways[k][s]: number of k-subsets with doubled rank sum s.
  const std::size_t m = a.size();
  const std::size_t max_sum = 2 * n * n;
  std::vector<std::vector<double>> ways(m + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = std::min(m, i + 1); k >= 1; --k)
      for (std::size_t s = max_sum; s >= rank2[i]; --s) ways[k][s] += ways[k - 1][s - rank2[i]];

  double total = 0.0;
  double tail = 0.0;
  for (std::size_t s = 0; s <= max_sum; ++s) {
    total += ways[m][s];
    if (s >= observed) tail += ways[m][s];
  }
  return tail / total;
}

}  // namespace gcq::stats
