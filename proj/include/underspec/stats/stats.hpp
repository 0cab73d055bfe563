#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace underspec::stats {

// Predictors x metrics, with a grouping label per predictor. Missing cells are
// NaN and are dropped per metric.
struct EnsembleTable {
  std::vector<std::string> predictor_id;
  std::vector<std::string> group;
  std::map<std::string, std::vector<double>> metrics;
};

struct FResult {
  double f = 0.0;  // +infinity when within-group variance is 0
  double p = 1.0;  // upper tail of F(df_between, df_within); descriptive only
  double msb = 0.0, msw = 0.0;
  int df_between = 0, df_within = 0;
  int rows_used = 0;
};

// One-way ANOVA F = MSB / MSW. Needs >= 2 groups with >= 2 rows each.
FResult f_statistic(const std::vector<double>& values, const std::vector<std::string>& groups);
// Drops NaN cells of `metric`, appending one warning per dropped row.
FResult f_statistic(const EnsembleTable& table, const std::string& metric,
                    std::vector<std::string>* warnings = nullptr);

struct SpearmanResult {
  double rho = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95%, Fisher z
  int n = 0;
};

// Ranks 1..n with ties sharing their average rank.
std::vector<double> average_ranks(const std::vector<double>& v);
SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y);

// correct[p][e]: whether predictor p got example e right.
struct StratifiedOutcomes {
  std::vector<std::string> predictor_id;
  std::vector<std::string> example_id;
  std::vector<std::string> stratum;
  std::vector<std::vector<std::uint8_t>> correct;

  int n_examples() const { return static_cast<int>(stratum.size()); }
  int n_predictors() const { return static_cast<int>(correct.size()); }
  void validate() const;
};

// Sample variance across predictors of accuracy on the examples in `member`.
double accuracy_variance(const StratifiedOutcomes& outcomes, const std::vector<int>& member);

struct PermutationResult {
  double observed = 0.0;
  double p = 1.0;
  long long n_perm = 0;  // permutations drawn, or subsets enumerated when exact
  bool exact = false;
};

// One-sided test of the across-predictor accuracy variance inside a stratum.
// The null reassigns the stratum labels across examples. With at most 8
// examples every relabelling is enumerated; otherwise
// p = (1 + #{null >= observed}) / (1 + n_perm).
PermutationResult permutation_variance_test(const StratifiedOutcomes& outcomes,
                                            const std::string& stratum_label, int n_perm,
                                            std::uint64_t seed, unsigned threads = 1);
// Full enumeration regardless of size.
PermutationResult exact_permutation_variance_test(const StratifiedOutcomes& outcomes,
                                                  const std::string& stratum_label);

double disagreement(const std::vector<std::string>& a, const std::vector<std::string>& b);
double disagreement(const std::vector<int>& a, const std::vector<int>& b);
// Mean over all unordered pairs.
double mean_pairwise_disagreement(const std::vector<std::vector<std::string>>& predictions);

using Vec = std::vector<double>;

struct EmbeddingSets {
  std::vector<Vec> target_x, target_y, attr_a, attr_b;
};

struct WeatResult {
  double score = 0.0;   // sum_X s(x) - sum_Y s(y)
  double effect = 0.0;  // (mean_X s - mean_Y s) / sample std of s over X u Y
  double p = 1.0;       // one-sided, over re-partitions of X u Y
  long long n_perm = 0;
  bool exact = false;
};

double cosine(const Vec& u, const Vec& v);
// s(w, A, B) = mean cos(w, a) - mean cos(w, b).
double weat_association(const Vec& w, const std::vector<Vec>& a, const std::vector<Vec>& b);
// Enumerates all partitions when there are at most n_perm of them.
WeatResult weat(const EmbeddingSets& sets, int n_perm, std::uint64_t seed);

// Kolmogorov-Smirnov distance between the empirical CDF of `sample` and
// Uniform(0, 1).
double ks_uniform_distance(std::vector<double> sample);

}  // namespace underspec::stats
