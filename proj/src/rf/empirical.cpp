#include "underspec/rf/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "underspec/common/error.hpp"

namespace underspec::rf {

namespace {

constexpr int kMcChunk = 2000;

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

void RFConfig::validate() const {
  if (d < 1 || n < 1 || width < 1) throw UsageError("d, n and width must be >= 1");
  if (!(r >= 0.0)) throw UsageError("r must be >= 0");
  if (!(s >= 0.0)) throw UsageError("s must be >= 0");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
}

Eigen::VectorXd Predictor::predict(const Eigen::MatrixXd& x) const {
  // Row blocks keep the feature matrix cache-sized for wide layers.
  constexpr Eigen::Index kBlock = 128;
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index start = 0; start < x.rows(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, x.rows() - start);
    out.segment(start, rows) = features(x.middleRows(start, rows), w, activation) * theta;
  }
  return out;
}

Eigen::MatrixXd sample_sphere(int rows, int d, double radius, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(rows, d);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) out(i, j) = normal(rng);
    const double norm = out.row(i).norm();
    out.row(i) *= radius / norm;
  }
  return out;
}

RFDataset sample_dataset(const RFConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, "rf.data");
  RFDataset ds;
  ds.noise_std = config.s;
  ds.beta0 = sample_sphere(1, config.d, 1.0, rng).row(0).transpose() * config.r;
  ds.x = sample_sphere(config.n, config.d, std::sqrt(static_cast<double>(config.d)), rng);
  ds.y = ds.x * ds.beta0;
  if (config.s > 0.0) {
    std::normal_distribution<double> normal;
    for (int i = 0; i < config.n; ++i) ds.y(i) += config.s * normal(rng);
  }
  return ds;
}

Eigen::MatrixXd sample_weights(int width, int d, std::uint64_t seed) {
  Rng rng = make_rng(seed, "rf.weights");
  return sample_sphere(width, d, 1.0, rng);
}

Eigen::MatrixXd features(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, Activation a) {
  Eigen::MatrixXd z = x * w.transpose();
  switch (a) {
    case Activation::kRelu: return z.cwiseMax(0.0);
    case Activation::kLinear: return z;
    case Activation::kQuadratic: return z.array().square().matrix();
    case Activation::kTanh: return z.array().tanh().matrix();
  }
  return z;
}

namespace {

// Pseudoinverse solve of a square (or small) system through its SVD.
Eigen::VectorXd svd_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double cutoff_scale) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double cutoff = cutoff_scale * std::numeric_limits<double>::epsilon() * smax;
  Eigen::VectorXd utb = svd.matrixU().transpose() * b;
  for (Eigen::Index k = 0; k < sv.size(); ++k) utb(k) = sv(k) > cutoff ? utb(k) / sv(k) : 0.0;
  return svd.matrixV() * utb;
}

}  // namespace

Eigen::VectorXd train_min_norm(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y) {
  if (phi.rows() != y.size()) throw UsageError("features and labels disagree in length");
  if (!all_finite(phi) || !y.allFinite()) throw NumericalError("non-finite training inputs");
  const Eigen::Index n = phi.rows(), big_n = phi.cols();
  const double scale = static_cast<double>(std::max(n, big_n));
  // A thin QR first reduces the SVD to the short side. The singular values of
  // the triangular factor are those of phi, so the cutoff rule is unchanged.
  if (big_n > n) {
    // phi^T = Q R  =>  phi^+ = Q (R^T)^+
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(phi.transpose());
    const Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    const Eigen::VectorXd z = svd_solve(r.transpose(), y, scale);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(big_n);
    theta.head(n) = z;
    return qr.householderQ() * theta;
  }
  if (n > big_n) {
    // phi = Q R  =>  phi^+ = R^+ Q^T
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(phi);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(big_n).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qty = (qr.householderQ().transpose() * y).head(big_n);
    return svd_solve(r, qty, scale);
  }
  return svd_solve(phi, y, scale);
}

Eigen::VectorXd train_ridge(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, double lambda,
                            int d) {
  if (!(lambda > 0.0)) throw UsageError("ridge requires lambda > 0");
  if (phi.rows() != y.size()) throw UsageError("features and labels disagree in length");
  if (!all_finite(phi) || !y.allFinite()) throw NumericalError("non-finite training inputs");
  const double n = static_cast<double>(phi.rows());
  const double big_n = static_cast<double>(phi.cols());
  // Stationarity: (phi^T phi / n + c I) theta = phi^T y / n with c = N lambda / d.
  const double c = big_n * lambda / d;
  Eigen::VectorXd theta;
  if (phi.cols() <= phi.rows()) {
    Eigen::MatrixXd a = phi.transpose() * phi / n;
    a.diagonal().array() += c;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalError("ridge system not positive definite");
    theta = llt.solve(phi.transpose() * y / n);
  } else {
    // theta = phi^T (phi phi^T + n c I)^{-1} y
    Eigen::MatrixXd k = phi * phi.transpose();
    k.diagonal().array() += n * c;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) throw NumericalError("ridge system not positive definite");
    theta = phi.transpose() * llt.solve(y);
  }
  return theta;
}

Predictor train(const RFConfig& config, const RFDataset& data, std::uint64_t weight_seed) {
  config.validate();
  Predictor p;
  p.activation = config.activation;
  if (config.activation != Activation::kLinear) p.moments = activation_moments(config.activation);
  p.w = sample_weights(config.width, config.d, weight_seed);
  const Eigen::MatrixXd phi = features(data.x, p.w, config.activation);
  p.theta = config.lambda > 0.0 ? train_ridge(phi, data.y, config.lambda, config.d)
                                : train_min_norm(phi, data.y);
  return p;
}

namespace {

// Shared Monte Carlo kernel. Test points come in fixed-size chunks, each with
// its own derived stream, so the draws do not depend on anything but the seed.
McEstimate mc_risk(const Predictor& p, const Eigen::VectorXd* x0, const Eigen::VectorXd& beta0,
                   double noise_std, int n_test, std::uint64_t seed) {
  if (n_test < 100) throw UsageError("n_test must be >= 100");
  const int d = static_cast<int>(p.w.cols());
  if (beta0.size() != d) throw UsageError("beta0 dimension does not match the predictor");
  if (x0 && x0->size() != d) throw UsageError("shift dimension does not match the predictor");
  const double radius = std::sqrt(static_cast<double>(d));
  double sum = 0.0, sum_sq = 0.0;
  std::normal_distribution<double> normal;
  for (int start = 0, chunk = 0; start < n_test; start += kMcChunk, ++chunk) {
    const int rows = std::min(kMcChunk, n_test - start);
    Rng rng = make_rng(seed, "rf.mc", static_cast<std::uint64_t>(chunk));
    Eigen::MatrixXd x = sample_sphere(rows, d, radius, rng);
    if (x0) x.rowwise() += x0->transpose();
    Eigen::VectorXd err = x * beta0 - p.predict(x);
    if (noise_std > 0.0)
      for (int i = 0; i < rows; ++i) err(i) += noise_std * normal(rng);
    for (int i = 0; i < rows; ++i) {
      const double e2 = err(i) * err(i);
      sum += e2;
      sum_sq += e2 * e2;
    }
  }
  McEstimate est;
  est.samples = n_test;
  est.mean = sum / n_test;
  if (n_test > 1) {
    const double var = std::max(0.0, (sum_sq - n_test * est.mean * est.mean) / (n_test - 1));
    est.std_error = std::sqrt(var / n_test);
  }
  return est;
}

}  // namespace

McEstimate estimate_risk(const Predictor& p, const Eigen::VectorXd& beta0, double noise_std,
                         int n_test, std::uint64_t seed) {
  return mc_risk(p, nullptr, beta0, noise_std, n_test, seed);
}

ShiftSpec adversarial_shift_from_direction(const Eigen::VectorXd& v, const Eigen::VectorXd& beta0,
                                           double delta, std::string source_id) {
  if (v.size() != beta0.size()) throw UsageError("direction and beta0 dimensions differ");
  if (!(delta >= 0.0)) throw UsageError("delta must be >= 0");
  const double b2 = beta0.squaredNorm();
  Eigen::VectorXd perp = v;
  if (b2 > 0.0) perp -= (beta0.dot(v) / b2) * beta0;
  const double norm = perp.norm();
  if (!(norm >= 1e-12))
    throw DegenerateInputError("shift direction vanishes after projecting out beta0");
  ShiftSpec s;
  s.delta = delta;
  s.x0 = perp * (-delta / norm);
  // One more projection removes the rounding left by the first.
  if (b2 > 0.0) s.x0 -= (beta0.dot(s.x0) / b2) * beta0;
  s.source_predictor_id = std::move(source_id);
  return s;
}

ShiftSpec adversarial_shift(const Predictor& p0, const Eigen::VectorXd& beta0, double delta,
                            std::string source_id) {
  return adversarial_shift_from_direction(p0.w.transpose() * p0.theta, beta0, delta,
                                          std::move(source_id));
}

McEstimate shifted_risk(const Predictor& p, const ShiftSpec& shift, const Eigen::VectorXd& beta0,
                        int n_test, std::uint64_t seed, double noise_std) {
  if (shift.delta == 0.0) return mc_risk(p, nullptr, beta0, noise_std, n_test, seed);
  return mc_risk(p, &shift.x0, beta0, noise_std, n_test, seed);
}

namespace {

template <class Term>
McEstimate mc_paired(const Predictor& p1, const Predictor& p2, int n_test, std::uint64_t seed,
                     Term term) {
  if (p1.w.cols() != p2.w.cols()) throw UsageError("predictors have different input dimensions");
  if (n_test < 100) throw UsageError("n_test must be >= 100");
  const int d = static_cast<int>(p1.w.cols());
  const double radius = std::sqrt(static_cast<double>(d));
  double sum = 0.0, sum_sq = 0.0;
  for (int start = 0, chunk = 0; start < n_test; start += kMcChunk, ++chunk) {
    const int rows = std::min(kMcChunk, n_test - start);
    Rng rng = make_rng(seed, "rf.mc", static_cast<std::uint64_t>(chunk));
    const Eigen::MatrixXd x = sample_sphere(rows, d, radius, rng);
    const Eigen::VectorXd f1 = p1.predict(x), f2 = p2.predict(x);
    for (int i = 0; i < rows; ++i) {
      const double v = term(x, i, f1(i), f2(i));
      sum += v;
      sum_sq += v * v;
    }
  }
  McEstimate est;
  est.samples = n_test;
  est.mean = sum / n_test;
  if (n_test > 1) {
    const double var = std::max(0.0, (sum_sq - n_test * est.mean * est.mean) / (n_test - 1));
    est.std_error = std::sqrt(var / n_test);
  }
  return est;
}

}  // namespace

McEstimate sensitivity(const Predictor& p1, const Predictor& p2, int n_test, std::uint64_t seed) {
  return mc_paired(p1, p2, n_test, seed, [](const Eigen::MatrixXd&, int, double a, double b) {
    return (a - b) * (a - b);
  });
}

McEstimate error_cross_moment(const Predictor& p1, const Predictor& p2,
                              const Eigen::VectorXd& beta0, int n_test, std::uint64_t seed) {
  if (beta0.size() != p1.w.cols()) throw UsageError("beta0 dimension does not match the predictor");
  return mc_paired(p1, p2, n_test, seed,
                   [&beta0](const Eigen::MatrixXd& x, int i, double a, double b) {
                     const double y = x.row(i).dot(beta0);
                     return (a - y) * (b - y);
                   });
}

}  // namespace underspec::rf
