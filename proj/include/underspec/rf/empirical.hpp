#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "underspec/common/random.hpp"
#include "underspec/rf/activation.hpp"

namespace underspec::rf {

struct RFConfig {
  int d = 80;
  int n = 160;
  int width = 320;
  double r = 1.0;
  double s = 0.0;
  double lambda = 0.0;  // 0 selects the min-norm solution
  Activation activation = Activation::kRelu;

  double psi1() const { return static_cast<double>(width) / d; }
  double psi2() const { return static_cast<double>(n) / d; }
  void validate() const;
};

struct RFDataset {
  Eigen::MatrixXd x;  // n x d, rows on the radius-sqrt(d) sphere
  Eigen::VectorXd y;
  Eigen::VectorXd beta0;  // norm r
  double noise_std = 0.0;
};

struct Predictor {
  Eigen::MatrixXd w;  // width x d, unit rows
  Eigen::VectorXd theta;
  Activation activation = Activation::kRelu;
  ActivationMoments moments;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

struct ShiftSpec {
  double delta = 0.0;
  Eigen::VectorXd x0;
  std::string source_predictor_id;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

// Rows i.i.d. uniform on the sphere of the given radius.
Eigen::MatrixXd sample_sphere(int rows, int d, double radius, Rng& rng);

RFDataset sample_dataset(const RFConfig& config, std::uint64_t seed);
Eigen::MatrixXd sample_weights(int width, int d, std::uint64_t seed);

// sigma(x W^T), n x width.
Eigen::MatrixXd features(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, Activation a);

// Pseudoinverse solution through an SVD with cutoff max(n,N) eps sigma_max.
Eigen::VectorXd train_min_norm(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y);

// argmin (1/n)|y - phi theta|^2 + (N lambda / d)|theta|^2 via a Cholesky solve
// on whichever of the primal (N x N) or dual (n x n) systems is smaller.
Eigen::VectorXd train_ridge(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, double lambda,
                            int d);

// Draws W from `weight_seed` and fits theta on the dataset (ridge when
// config.lambda > 0, min-norm otherwise).
Predictor train(const RFConfig& config, const RFDataset& data, std::uint64_t weight_seed);

// Monte Carlo risk on fresh x ~ Unif(sqrt(d) sphere), y = <beta0, x> + s g.
McEstimate estimate_risk(const Predictor& p, const Eigen::VectorXd& beta0, double noise_std,
                         int n_test, std::uint64_t seed);

// x0 = -delta P_perp(beta0) W0^T theta0 / |P_perp(beta0) W0^T theta0|.
ShiftSpec adversarial_shift(const Predictor& p0, const Eigen::VectorXd& beta0, double delta,
                            std::string source_id = "w0");
ShiftSpec adversarial_shift_from_direction(const Eigen::VectorXd& v, const Eigen::VectorXd& beta0,
                                           double delta, std::string source_id = "w0");

// Risk under x_test = x0 + x with label <beta0, x_test> (+ s g). With delta = 0
// and the same seed this reproduces estimate_risk bit for bit.
McEstimate shifted_risk(const Predictor& p, const ShiftSpec& shift, const Eigen::VectorXd& beta0,
                        int n_test, std::uint64_t seed, double noise_std = 0.0);

// E (f1(x) - f2(x))^2 on fresh unshifted draws.
McEstimate sensitivity(const Predictor& p1, const Predictor& p2, int n_test, std::uint64_t seed);

// E[(f1(x) - y)(f2(x) - y)] with y = <beta0, x>, on fresh unshifted draws.
McEstimate error_cross_moment(const Predictor& p1, const Predictor& p2,
                              const Eigen::VectorXd& beta0, int n_test, std::uint64_t seed);

}  // namespace underspec::rf
