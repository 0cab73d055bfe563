#include "underspec/cluster/cluster.hpp"

#include <algorithm>
#include <cmath>

#include "underspec/common/error.hpp"
#include "underspec/common/parallel.hpp"
#include "underspec/common/random.hpp"
#include "underspec/stats/stats.hpp"

namespace underspec::cluster {

void ClusterPopulationConfig::validate() const {
  if (k_clusters < 1 || m_per_cluster < 1) throw UsageError("need k_clusters, m_per_cluster >= 1");
  if (!(rho_shift >= 0.0 && rho_shift <= rho_train && rho_train < 1.0))
    throw UsageError("need 0 <= rho_shift <= rho_train < 1");
  if (causal_index < 0 || causal_index >= m_per_cluster)
    throw UsageError("causal_index must be < m_per_cluster");
  if (!effect_sizes.empty() && static_cast<int>(effect_sizes.size()) != k_clusters)
    throw UsageError("effect_sizes needs one entry per cluster");
  if (n_train < 2 || n_test < 2 || n_shift < 2) throw UsageError("sample counts must be >= 2");
  if (!(noise_std >= 0.0)) throw UsageError("noise_std must be >= 0");
}

namespace {

Eigen::MatrixXd block_factor(int m, double rho) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(m, m, rho);
  c.diagonal().setOnes();
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success)
    throw UsageError("within-cluster correlation " + std::to_string(rho) +
                     " is not positive definite");
  return llt.matrixL();
}

Dataset draw(const ClusterPopulationConfig& cfg, const std::vector<double>& effects, double rho,
             int rows, std::uint64_t seed, std::string_view tag) {
  const int k = cfg.k_clusters, m = cfg.m_per_cluster;
  const Eigen::MatrixXd l = block_factor(m, rho);
  Rng rng = make_rng(seed, tag);
  std::normal_distribution<double> normal;
  Dataset ds;
  ds.x.resize(rows, k * m);
  ds.y.resize(rows);
  Eigen::VectorXd z(m);
  for (int i = 0; i < rows; ++i) {
    double y = 0.0;
    for (int c = 0; c < k; ++c) {
      for (int v = 0; v < m; ++v) z(v) = normal(rng);
      ds.x.row(i).segment(c * m, m) = (l * z).transpose();
      y += effects[c] * ds.x(i, c * m + cfg.causal_index);
    }
    ds.y(i) = y + cfg.noise_std * normal(rng);
  }
  return ds;
}

double variance(const Eigen::VectorXd& v) {
  return (v.array() - v.mean()).square().mean();
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const RepresentativeSet& reps, int m) {
  Eigen::MatrixXd out(x.rows(), reps.choice.size());
  for (std::size_t c = 0; c < reps.choice.size(); ++c)
    out.col(c) = x.col(static_cast<Eigen::Index>(c) * m + reps.choice[c]);
  return out;
}

struct RidgeModel {
  Eigen::VectorXd coef;
  double intercept = 0.0;
};

RidgeModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  RidgeModel model;
  const double n = static_cast<double>(x.rows());
  if (x.cols() == 0) {
    model.intercept = y.mean();
    return model;
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mean;
  const double ymean = y.mean();
  Eigen::MatrixXd a = xc.transpose() * xc / n;
  a.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
    throw NumericalError("singular design after representative selection");
  model.coef = ldlt.solve(xc.transpose() * (y.array() - ymean).matrix() / n);
  model.intercept = ymean - mean.dot(model.coef);
  return model;
}

double mse(const RidgeModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(y.size(), model.intercept);
  if (x.cols() > 0) pred += x * model.coef;
  return (y - pred).squaredNorm() / y.size();
}

}  // namespace

Population generate_population(const ClusterPopulationConfig& config, std::uint64_t seed) {
  config.validate();
  Population pop;
  pop.effect_sizes = config.effect_sizes;
  if (pop.effect_sizes.empty()) {
    Rng rng = make_rng(seed, "cluster.effects");
    std::normal_distribution<double> normal;
    for (int c = 0; c < config.k_clusters; ++c) pop.effect_sizes.push_back(normal(rng));
  }
  pop.train = draw(config, pop.effect_sizes, config.rho_train, config.n_train, seed, "cluster.train");
  pop.iid_test = draw(config, pop.effect_sizes, config.rho_train, config.n_test, seed, "cluster.iid");
  pop.shifted_test =
      draw(config, pop.effect_sizes, config.rho_shift, config.n_shift, seed, "cluster.shift");
  return pop;
}

RepresentativeSet sample_representatives(const ClusterPopulationConfig& config,
                                         SelectionMode mode, std::uint64_t seed,
                                         const Dataset* train) {
  config.validate();
  const int k = config.k_clusters, m = config.m_per_cluster;
  RepresentativeSet reps;
  reps.choice.resize(k);
  if (mode == SelectionMode::kRandom) {
    Rng rng = make_rng(seed, "cluster.reps");
    std::uniform_int_distribution<int> pick(0, m - 1);
    for (int c = 0; c < k; ++c) reps.choice[c] = pick(rng);
    return reps;
  }
  if (!train) throw UsageError("the index heuristic needs training data");
  if (train->x.cols() != k * m) throw UsageError("training data does not match the layout");
  reps.heuristic_flag = true;
  const Eigen::Index rows = train->x.rows();
  const Eigen::Index hold = std::max<Eigen::Index>(2, rows / 5);
  const Eigen::VectorXd y = train->y.tail(hold);
  const Eigen::VectorXd yc = y.array() - y.mean();
  for (int c = 0; c < k; ++c) {
    double best = -1.0;
    for (int v = 0; v < m; ++v) {
      const Eigen::VectorXd col = train->x.col(c * m + v).tail(hold);
      const Eigen::VectorXd xc = col.array() - col.mean();
      const double denom = std::sqrt(xc.squaredNorm() * yc.squaredNorm());
      const double corr = denom > 0.0 ? std::abs(xc.dot(yc)) / denom : 0.0;
      if (corr > best) {
        best = corr;
        reps.choice[c] = v;
      }
    }
  }
  return reps;
}

Evaluation fit_and_evaluate(const Dataset& train, const std::vector<const Dataset*>& eval_sets,
                            const RepresentativeSet& reps, int m_per_cluster,
                            const FitOptions& options) {
  if (options.lambda_grid.empty()) throw UsageError("empty lambda grid");
  if (options.cv_folds < 2) throw UsageError("cv_folds must be >= 2");
  for (std::size_t c = 0; c < reps.choice.size(); ++c)
    if (reps.choice[c] < 0 || reps.choice[c] >= m_per_cluster ||
        static_cast<Eigen::Index>((c + 1) * m_per_cluster) > train.x.cols())
      throw UsageError("representative set does not match the feature layout");
  const Eigen::MatrixXd x = select_columns(train.x, reps, m_per_cluster);
  const Eigen::Index n = x.rows();
  if (n < options.cv_folds) throw UsageError("fewer training rows than CV folds");

  Evaluation out;
  double best = std::numeric_limits<double>::infinity();
  for (double lambda : options.lambda_grid) {
    double total = 0.0;
    for (int f = 0; f < options.cv_folds; ++f) {
      const Eigen::Index lo = n * f / options.cv_folds, hi = n * (f + 1) / options.cv_folds;
      Eigen::MatrixXd xt(n - (hi - lo), x.cols());
      Eigen::VectorXd yt(n - (hi - lo));
      xt << x.topRows(lo), x.bottomRows(n - hi);
      yt << train.y.head(lo), train.y.tail(n - hi);
      const RidgeModel model = fit_ridge(xt, yt, lambda);
      total += mse(model, x.middleRows(lo, hi - lo), train.y.segment(lo, hi - lo)) * (hi - lo);
    }
    if (total < best) {
      best = total;
      out.lambda = lambda;
    }
  }
  const RidgeModel model = fit_ridge(x, train.y, out.lambda);
  for (const Dataset* ds : eval_sets) {
    const double var = variance(ds->y);
    if (!(var > 0.0)) throw DegenerateInputError("evaluation outcome has zero variance");
    out.nmse.push_back(mse(model, select_columns(ds->x, reps, m_per_cluster), ds->y) / var);
  }
  return out;
}

DemoResult run_demo(const ClusterPopulationConfig& config, int n_sets, std::uint64_t seed,
                    unsigned threads, const FitOptions& options) {
  if (n_sets < 2) throw UsageError("n_sets must be >= 2");
  const Population pop = generate_population(config, seed);
  const std::vector<const Dataset*> evals{&pop.train, &pop.iid_test, &pop.shifted_test};

  DemoResult res;
  res.rows.resize(n_sets + 1);
  parallel_for(res.rows.size(), threads, [&](std::size_t i) {
    const RepresentativeSet reps =
        i == 0 ? sample_representatives(config, SelectionMode::kIndexHeuristic, seed, &pop.train)
               : sample_representatives(config, SelectionMode::kRandom,
                                        derive_seed(seed, "cluster.set", i));
    const Evaluation ev = fit_and_evaluate(pop.train, evals, reps, config.m_per_cluster, options);
    res.rows[i] = DemoRow{static_cast<int>(i), i == 0, ev.nmse[0], ev.nmse[1], ev.nmse[2]};
  });

  std::vector<double> iid, shift;
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    iid.push_back(res.rows[i].nmse_iid);
    shift.push_back(res.rows[i].nmse_shift);
  }
  DemoSummary& s = res.summary;
  const auto [iid_lo, iid_hi] = std::minmax_element(iid.begin(), iid.end());
  const auto [sh_lo, sh_hi] = std::minmax_element(shift.begin(), shift.end());
  s.iid_spread = *iid_hi - *iid_lo;
  s.shift_spread = *sh_hi - *sh_lo;
  double mean = 0.0, ss = 0.0;
  for (double v : iid) mean += v;
  mean /= iid.size();
  for (double v : iid) ss += (v - mean) * (v - mean);
  s.iid_cv = std::sqrt(ss / (iid.size() - 1)) / mean;
  try {
    s.spearman_rho = stats::spearman(iid, shift).rho;
  } catch (const DegenerateInputError&) {
    s.spearman_rho = 0.0;
  }
  std::vector<double> sorted = iid;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median_random_iid =
      sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  s.heuristic_iid = res.rows[0].nmse_iid;
  std::size_t below = 0;
  for (double v : shift) below += v < res.rows[0].nmse_shift ? 1 : 0;
  s.heuristic_shift_percentile = static_cast<double>(below) / shift.size();
  return res;
}

}  // namespace underspec::cluster
