#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace underspec::cluster {

struct ClusterPopulationConfig {
  int k_clusters = 20;
  int m_per_cluster = 5;
  double rho_train = 0.95;
  double rho_shift = 0.3;
  int causal_index = 0;
  // One coefficient per cluster; empty draws them from N(0, 1).
  std::vector<double> effect_sizes;
  int n_train = 20000;
  int n_test = 10000;
  int n_shift = 10000;
  double noise_std = 4.0;

  int n_features() const { return k_clusters * m_per_cluster; }
  void validate() const;
};

// Feature column of variant v in cluster c is c * m_per_cluster + v.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

struct Population {
  Dataset train, iid_test, shifted_test;
  std::vector<double> effect_sizes;
};

struct RepresentativeSet {
  std::vector<int> choice;  // per-cluster variant index
  bool heuristic_flag = false;
};

enum class SelectionMode { kRandom, kIndexHeuristic };

// Equicorrelated Gaussian blocks (Cholesky of the block correlation matrix;
// a non-positive-definite request throws). The outcome uses the causal
// variant of every cluster in all three domains.
Population generate_population(const ClusterPopulationConfig& config, std::uint64_t seed);

// Random mode draws each cluster's representative uniformly from stream
// (seed, "cluster.reps"). Heuristic mode picks, per cluster, the variant with
// the largest |corr(x, y)| on the last fifth of `train`.
RepresentativeSet sample_representatives(const ClusterPopulationConfig& config,
                                         SelectionMode mode, std::uint64_t seed,
                                         const Dataset* train = nullptr);

struct FitOptions {
  std::vector<double> lambda_grid{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  int cv_folds = 10;
};

struct Evaluation {
  double lambda = 0.0;  // chosen by cross validation
  std::vector<double> nmse;  // one per eval set, in order
};

// Ridge with intercept on the selected columns, penalty lambda |b|^2 against
// the mean squared training error; lambda by contiguous k-fold CV. NMSE is
// MSE / population variance of the eval outcome.
Evaluation fit_and_evaluate(const Dataset& train, const std::vector<const Dataset*>& eval_sets,
                            const RepresentativeSet& reps, int m_per_cluster,
                            const FitOptions& options = {});

struct DemoRow {
  int set_id = 0;
  bool is_heuristic = false;
  double nmse_train = 0.0, nmse_iid = 0.0, nmse_shift = 0.0;
};

struct DemoSummary {
  double iid_spread = 0.0, shift_spread = 0.0;  // max - min over random sets
  double iid_cv = 0.0;                          // std / mean over random sets
  double spearman_rho = 0.0;                    // iid vs shifted, random sets
  double heuristic_iid = 0.0, median_random_iid = 0.0;
  double heuristic_shift_percentile = 0.0;  // share of random sets with lower shifted NMSE
};

struct DemoResult {
  std::vector<DemoRow> rows;  // set 0 is the heuristic set, then random sets
  DemoSummary summary;
};

DemoResult run_demo(const ClusterPopulationConfig& config, int n_sets, std::uint64_t seed,
                    unsigned threads, const FitOptions& options = {});

}  // namespace underspec::cluster
