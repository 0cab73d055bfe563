#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace underspec::sir {

struct SirParams {
  double beta = 0.0;   // transmission rate, 1/time
  double dur = 1.0;    // mean infectious duration D
  double n_pop = 1.0;  // population size N
  void validate() const;
};

struct SirState {
  double s = 0.0, i = 0.0, r = 0.0;
};

struct SirTrajectory {
  std::vector<double> times, s, i, r;
};

// Classical RK4 on dS = -beta I S / N, dI = beta I S / N - I / D, dR = I / D at
// fixed step dt, over the grid {0, dt, ..., round(t_max/dt) dt}.
SirTrajectory simulate_sir(const SirParams& params, const SirState& initial, double t_max,
                           double dt);

// Early exponential rate beta - 1/D.
double growth_rate(const SirParams& params);

struct Peak {
  double time = 0.0;
  double infections = 0.0;
};
Peak peak_infections(const SirTrajectory& traj);

struct SirObservations {
  std::vector<double> times;  // on the integrator grid, starting at 0
  std::vector<double> infections;
};

// Infections of `traj` at t <= t_obs, plus optional i.i.d. Gaussian noise.
SirObservations observe(const SirTrajectory& traj, double t_obs, double noise_std = 0.0,
                        std::uint64_t seed = 0);

struct SirFitConfig {
  double t_obs = 15.0;
  double step_size = 0.1;
  // Longest move in (log beta, log D) per iteration; longer steps are scaled
  // down. Keeps the first steps from jumping to a dead epidemic.
  double max_log_step = 0.25;
  int max_iters = 50000;
  double d0_init = 4.0;
  double beta_init = 0.5;
  double tol = 1e-12;
  double dt = 0.05;
  double n_pop = 1e6;
  double i0 = 10.0;
  // Halve the step and retry whenever a step would raise the loss. Without it
  // a rising loss is reported as a step-size error.
  bool backtracking = true;
  void validate() const;
};

struct SirFitResult {
  SirParams params;
  double final_mse = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> loss_trace;  // training MSE per accepted iterate
};

struct LossGradient {
  double mse = 0.0;
  double d_log_beta = 0.0;  // derivatives of the MSE
  double d_log_dur = 0.0;
};

// MSE of simulated infections against observations and its exact gradient
// through the discretised integrator (forward-mode dual numbers).
LossGradient sir_loss(const SirObservations& obs, const SirFitConfig& config, double log_beta,
                      double log_dur);

// Gradient descent in (log beta, log D) on MSE / mean(obs^2), starting at
// (beta_init, d0_init).
SirFitResult fit_sir(const SirObservations& obs, const SirFitConfig& config);

struct EnsembleMember {
  int index = 0;
  double d0 = 0.0;
  std::optional<SirFitResult> fit;
  SirTrajectory forecast;
  std::string error;  // set when the fit failed
};

// One fit + forecast to `horizon` per d0 sample, in parallel, ordered by index.
std::vector<EnsembleMember> forecast_ensemble(const SirObservations& obs,
                                              const SirFitConfig& config_template,
                                              const std::vector<double>& d0_samples,
                                              double horizon, unsigned threads);

// Log-uniform d0 draws on [lo, hi]; draw k uses stream (seed, "sir.d0", k).
std::vector<double> sample_d0_log_uniform(double lo, double hi, int count, std::uint64_t seed);

}  // namespace underspec::sir
