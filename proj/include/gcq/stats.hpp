#pragma once

#include <span>

namespace gcq::stats {

double mean(std::span<const double> xs);
double median(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> xs);

// Exact one-sided Wilcoxon rank-sum p-value for "a tends to be larger than b":
// the permutation probability of a rank sum for `a` at least as large as the
// observed one. Ties take midranks.
double rank_sum_p_greater(std::span<const double> a, std::span<const double> b);

}  // namespace gcq::stats
