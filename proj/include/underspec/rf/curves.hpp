#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "underspec/rf/activation.hpp"
#include "underspec/rf/theory.hpp"

namespace underspec::rf {

// One row of a curve file; empirical and theory files share this layout so
// they join on (n_over_d, width_over_n, metric).
struct CurveRow {
  double n_over_d = 0.0;
  double width_over_n = 0.0;
  std::string metric;
  double mean = 0.0;
  double mc_stderr = 0.0;
  int replicates = 0;
};

struct SweepConfig {
  int d = 80;
  std::vector<double> n_over_d{2.0, 5.0};
  std::vector<double> width_over_n{0.25, 0.5, 0.75, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
  // When nonempty, replaces width_over_n: the grid is given as N/d, shared by
  // every n_over_d, and rows report width_over_n = (N/d) / (n/d).
  std::vector<double> width_over_d;
  double r = 1.0;
  double s = 0.0;
  double lambda = 0.0;  // 0 selects min-norm
  Activation activation = Activation::kRelu;
  int replicates = 50;
  int n_test = 20000;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

// Integer problem sizes behind a nominal ratio pair.
struct GridSizes {
  int n = 0;
  int width = 0;
};
GridSizes grid_sizes(int d, double n_over_d, double width_over_n);

// Nominal width_over_n of grid entry `k` for n_over_d value `n_over_d`.
double grid_width_over_n(const std::vector<double>& width_over_n,
                         const std::vector<double>& width_over_d, double n_over_d, std::size_t k);

// Metrics: risk, targeted_ratio, independent_ratio. `delta` holds one value
// per n_over_d entry.
std::vector<CurveRow> shift_curve(const SweepConfig& cfg, const std::vector<double>& delta);

// Metrics: risk, sensitivity, s_over_r, error_cross (E[h1 h2] for the two
// predictors' error functions).
std::vector<CurveRow> sensitivity_curve(const SweepConfig& cfg);

// Metric: risk.
std::vector<CurveRow> risk_curve(const SweepConfig& cfg);

enum class TheoryMetric { kRisk, kSensitivity, kShift };
TheoryMetric parse_theory_metric(const std::string& name);

struct TheoryCurveConfig {
  TheoryMetric metric = TheoryMetric::kRisk;
  double zeta = 0.0;
  double mu1 = 0.5;
  // When d > 0 the ratios are rounded to the integer sizes an empirical sweep
  // at that d would use.
  int d = 0;
  std::vector<double> n_over_d{2.0, 5.0};
  std::vector<double> width_over_n{0.25, 0.5, 0.75, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
  std::vector<double> width_over_d;  // as in SweepConfig
  double lambda_bar = 0.0;
  double r = 1.0;
  double s = 0.0;
  std::vector<double> delta;  // shift metric only, one per n_over_d
  TheoryOptions options;
  unsigned threads = 1;
};

struct TheoryCurveResult {
  std::vector<CurveRow> rows;
  // Notes keyed by grid point (provisional region, flags, near-pole points).
  std::vector<std::string> notes;
};

// Rows per metric choice: risk -> risk; sensitivity -> risk, sensitivity,
// s_over_r, error_cross (R - S/2); shift -> risk, targeted_ratio, independent_ratio. Points where the
// evaluation hits a pole are skipped and listed in notes.
TheoryCurveResult theory_curve(const TheoryCurveConfig& cfg);

// Delta per n_over_d making the theory targeted ratio equal `targeted_ratio`
// at width_over_n = `reference_width_over_n`.
std::vector<double> calibrate_deltas(const TheoryCurveConfig& cfg, double targeted_ratio,
                                     double reference_width_over_n);

}  // namespace underspec::rf
