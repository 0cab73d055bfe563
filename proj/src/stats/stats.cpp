#include "underspec/stats/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "underspec/common/error.hpp"
#include "underspec/common/parallel.hpp"
#include "underspec/common/random.hpp"

namespace underspec::stats {

namespace {

constexpr double kZ975 = 1.959963984540054;

// Calls visit(indices) for every k-subset of {0..n-1} in lexicographic order.
template <class Visit>
void for_each_subset(int n, int k, Visit&& visit) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  for (;;) {
    visit(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// Uniform random k-subset via a partial Fisher-Yates shuffle.
std::vector<int> random_subset(int n, int k, Rng& rng) {
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

long long binomial(int n, int k) {
  long double c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c > 9e18L ? std::numeric_limits<long long>::max() : std::llround(c);
}

bool at_least(double null_value, double observed) {
  return null_value >= observed - 1e-12 * std::max(1.0, std::abs(observed));
}

}  // namespace

FResult f_statistic(const std::vector<double>& values, const std::vector<std::string>& groups) {
  if (values.size() != groups.size()) throw UsageError("values and groups differ in length");
  std::map<std::string, std::vector<double>> by_group;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw UsageError("metric values must be finite");
    by_group[groups[i]].push_back(values[i]);
  }
  if (by_group.size() < 2) throw UsageError("F statistic needs at least 2 groups");
  for (const auto& [g, v] : by_group)
    if (v.size() < 2) throw UsageError("group '" + g + "' has fewer than 2 rows");

  const double n = static_cast<double>(values.size());
  const double grand = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ssb = 0.0, ssw = 0.0;
  for (const auto& [g, v] : by_group) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    ssb += v.size() * (mean - grand) * (mean - grand);
    for (double x : v) ssw += (x - mean) * (x - mean);
  }
  FResult r;
  r.rows_used = static_cast<int>(values.size());
  r.df_between = static_cast<int>(by_group.size()) - 1;
  r.df_within = static_cast<int>(values.size() - by_group.size());
  r.msb = ssb / r.df_between;
  r.msw = ssw / r.df_within;
  // Exact zeros only arise from identical values; rounding noise of order
  // eps * scale is treated the same way.
  double scale = 0.0;
  for (double x : values) scale = std::max(scale, std::abs(x));
  const double noise = 1e-24 * std::max(1.0, scale * scale);
  if (r.msw <= noise && r.msb <= noise)
    throw DegenerateInputError("all metric values are identical; F is undefined");
  if (r.msw <= noise) {
    r.f = std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.f = r.msb / r.msw;
  boost::math::fisher_f dist(r.df_between, r.df_within);
  r.p = boost::math::cdf(boost::math::complement(dist, r.f));
  return r;
}

FResult f_statistic(const EnsembleTable& table, const std::string& metric,
                    std::vector<std::string>* warnings) {
  const auto it = table.metrics.find(metric);
  if (it == table.metrics.end()) throw UsageError("unknown metric '" + metric + "'");
  std::vector<double> v;
  std::vector<std::string> g;
  for (std::size_t i = 0; i < it->second.size(); ++i) {
    if (std::isnan(it->second[i])) {
      if (warnings)
        warnings->push_back("dropped row '" + table.predictor_id[i] + "': missing " + metric);
      continue;
    }
    v.push_back(it->second[i]);
    g.push_back(table.group[i]);
  }
  return f_statistic(v, g);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw UsageError("spearman inputs differ in length");
  if (x.size() < 4) throw UsageError("spearman needs at least 4 pairs");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw UsageError("non-finite value");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInputError("constant input: ranks are undefined");
  SpearmanResult r;
  r.n = static_cast<int>(x.size());
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(r.rho) == 1.0) {
    r.ci_low = r.ci_high = r.rho;
  } else {
    const double z = std::atanh(r.rho), half = kZ975 / std::sqrt(n - 3.0);
    r.ci_low = std::tanh(z - half);
    r.ci_high = std::tanh(z + half);
  }
  return r;
}

void StratifiedOutcomes::validate() const {
  if (correct.empty()) throw UsageError("no predictors");
  for (const auto& row : correct)
    if (row.size() != stratum.size())
      throw UsageError("all predictors must cover the same examples");
}

double accuracy_variance(const StratifiedOutcomes& outcomes, const std::vector<int>& member) {
  const int np = outcomes.n_predictors();
  if (np < 2 || member.empty()) return 0.0;
  std::vector<double> acc(np);
  for (int p = 0; p < np; ++p) {
    int hits = 0;
    for (int e : member) hits += outcomes.correct[p][e] ? 1 : 0;
    acc[p] = static_cast<double>(hits) / member.size();
  }
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / np;
  double ss = 0.0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  return ss / (np - 1);
}

namespace {

std::vector<int> stratum_members(const StratifiedOutcomes& outcomes, const std::string& label) {
  outcomes.validate();
  std::vector<int> member;
  for (int e = 0; e < outcomes.n_examples(); ++e)
    if (outcomes.stratum[e] == label) member.push_back(e);
  if (member.empty()) throw UsageError("stratum '" + label + "' has no examples");
  if (static_cast<int>(member.size()) == outcomes.n_examples())
    throw DegenerateInputError("stratum '" + label +
                               "' covers every example; shuffling labels changes nothing");
  return member;
}

}  // namespace

PermutationResult exact_permutation_variance_test(const StratifiedOutcomes& outcomes,
                                                  const std::string& stratum_label) {
  const auto member = stratum_members(outcomes, stratum_label);
  PermutationResult r;
  r.exact = true;
  r.observed = accuracy_variance(outcomes, member);
  long long hits = 0, total = 0;
  for_each_subset(outcomes.n_examples(), static_cast<int>(member.size()),
                  [&](const std::vector<int>& subset) {
                    ++total;
                    if (at_least(accuracy_variance(outcomes, subset), r.observed)) ++hits;
                  });
  r.n_perm = total;
  r.p = static_cast<double>(hits) / static_cast<double>(total);
  return r;
}

PermutationResult permutation_variance_test(const StratifiedOutcomes& outcomes,
                                            const std::string& stratum_label, int n_perm,
                                            std::uint64_t seed, unsigned threads) {
  if (n_perm < 1000) throw UsageError("n_perm must be >= 1000");
  const auto member = stratum_members(outcomes, stratum_label);
  if (outcomes.n_examples() <= 8) return exact_permutation_variance_test(outcomes, stratum_label);
  PermutationResult r;
  r.observed = accuracy_variance(outcomes, member);
  r.n_perm = n_perm;
  const int n = outcomes.n_examples(), k = static_cast<int>(member.size());
  std::vector<std::uint8_t> exceed(n_perm);
  parallel_for(static_cast<std::size_t>(n_perm), threads, [&](std::size_t b) {
    Rng rng = make_rng(seed, "stats.perm", b);
    exceed[b] = at_least(accuracy_variance(outcomes, random_subset(n, k, rng)), r.observed);
  });
  const long long hits = std::accumulate(exceed.begin(), exceed.end(), 0LL);
  r.p = (1.0 + hits) / (1.0 + n_perm);
  return r;
}

template <class T>
static double disagreement_impl(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) throw UsageError("prediction vectors differ in length");
  if (a.empty()) throw UsageError("empty prediction vectors");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i] ? 1 : 0;
  return static_cast<double>(diff) / a.size();
}

double disagreement(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return disagreement_impl(a, b);
}

double disagreement(const std::vector<int>& a, const std::vector<int>& b) {
  return disagreement_impl(a, b);
}

double mean_pairwise_disagreement(const std::vector<std::vector<std::string>>& predictions) {
  if (predictions.size() < 2) throw UsageError("need at least 2 predictors");
  double sum = 0.0;
  long long pairs = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    for (std::size_t j = i + 1; j < predictions.size(); ++j) {
      sum += disagreement(predictions[i], predictions[j]);
      ++pairs;
    }
  return sum / pairs;
}

double cosine(const Vec& u, const Vec& v) {
  if (u.size() != v.size()) throw UsageError("embedding dimensions differ");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw DegenerateInputError("zero embedding vector");
  return uv / std::sqrt(uu * vv);
}

double weat_association(const Vec& w, const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double sa = 0.0, sb = 0.0;
  for (const auto& v : a) sa += cosine(w, v);
  for (const auto& v : b) sb += cosine(w, v);
  return sa / a.size() - sb / b.size();
}

WeatResult weat(const EmbeddingSets& sets, int n_perm, std::uint64_t seed) {
  if (sets.target_x.empty() || sets.target_y.empty() || sets.attr_a.empty() ||
      sets.attr_b.empty())
    throw UsageError("WEAT needs four nonempty sets");
  if (n_perm < 1) throw UsageError("n_perm must be >= 1");
  // Zero vectors anywhere are rejected up front, including attribute sets
  // whose cosines would otherwise be skipped.
  for (const auto* set : {&sets.target_x, &sets.target_y, &sets.attr_a, &sets.attr_b})
    for (const auto& v : *set) cosine(v, v);

  std::vector<double> s;
  for (const auto& w : sets.target_x) s.push_back(weat_association(w, sets.attr_a, sets.attr_b));
  for (const auto& w : sets.target_y) s.push_back(weat_association(w, sets.attr_a, sets.attr_b));
  const int nx = static_cast<int>(sets.target_x.size());
  const int nt = static_cast<int>(s.size());
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  auto score_of = [&](const std::vector<int>& xs) {
    double sx = 0.0;
    for (int i : xs) sx += s[i];
    return sx - (total - sx);
  };
  std::vector<int> observed_x(nx);
  std::iota(observed_x.begin(), observed_x.end(), 0);

  WeatResult r;
  // Direct sums keep X = Y and A = B at exactly zero.
  double sum_x = 0.0, sum_y = 0.0;
  for (int i = 0; i < nx; ++i) sum_x += s[i];
  for (int i = nx; i < nt; ++i) sum_y += s[i];
  r.score = sum_x - sum_y;
  const double mean_all = total / nt;
  double ss = 0.0;
  for (double v : s) ss += (v - mean_all) * (v - mean_all);
  const double sd = nt > 1 ? std::sqrt(ss / (nt - 1)) : 0.0;
  const double mean_diff = sum_x / nx - sum_y / (nt - nx);
  r.effect = sd > 0.0 ? mean_diff / sd : 0.0;

  const double observed = score_of(observed_x);
  const long long partitions = binomial(nt, nx);
  long long hits = 0;
  if (partitions <= n_perm) {
    r.exact = true;
    r.n_perm = partitions;
    for_each_subset(nt, nx, [&](const std::vector<int>& xs) {
      if (at_least(score_of(xs), observed)) ++hits;
    });
    r.p = static_cast<double>(hits) / partitions;
  } else {
    r.n_perm = n_perm;
    for (int b = 0; b < n_perm; ++b) {
      Rng rng = make_rng(seed, "stats.weat", static_cast<std::uint64_t>(b));
      if (at_least(score_of(random_subset(nt, nx, rng)), observed)) ++hits;
    }
    r.p = (1.0 + hits) / (1.0 + n_perm);
  }
  return r;
}

double ks_uniform_distance(std::vector<double> sample) {
  if (sample.empty()) throw UsageError("empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double u = std::clamp(sample[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / n - u, u - i / n});
  }
  return d;
}

}  // namespace underspec::stats
