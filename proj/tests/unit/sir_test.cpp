#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "underspec/common/error.hpp"
#include "underspec/sir/sir.hpp"

namespace underspec::sir {
namespace {

constexpr double kPop = 1e6;
constexpr double kI0 = 10.0;

SirState start() { return {kPop - kI0, kI0, 0.0}; }

// Plain RK4 written out independently of the library, used as a fine-grid
// reference.
struct Ref {
  double s, i, r;
};
Ref ref_deriv(const Ref& y, double beta, double dur) {
  const double inf = beta * y.i * y.s / kPop;
  return {-inf, inf - y.i / dur, y.i / dur};
}
std::pair<double, double> reference_peak(double beta, double dur, double t_max, double h) {
  Ref y{kPop - kI0, kI0, 0.0};
  double best_i = y.i, best_t = 0.0;
  const long steps = std::lround(t_max / h);
  for (long k = 1; k <= steps; ++k) {
    auto add = [](const Ref& a, const Ref& b, double c) {
      return Ref{a.s + c * b.s, a.i + c * b.i, a.r + c * b.r};
    };
    const Ref k1 = ref_deriv(y, beta, dur);
    const Ref k2 = ref_deriv(add(y, k1, h / 2), beta, dur);
    const Ref k3 = ref_deriv(add(y, k2, h / 2), beta, dur);
    const Ref k4 = ref_deriv(add(y, k3, h), beta, dur);
    y = {y.s + h / 6 * (k1.s + 2 * k2.s + 2 * k3.s + k4.s),
         y.i + h / 6 * (k1.i + 2 * k2.i + 2 * k3.i + k4.i),
         y.r + h / 6 * (k1.r + 2 * k2.r + 2 * k3.r + k4.r)};
    if (y.i > best_i) {
      best_i = y.i;
      best_t = k * h;
    }
  }
  return {best_t, best_i};
}

TEST(GrowthRate, Arithmetic) {
  EXPECT_DOUBLE_EQ(growth_rate({0.5, 2.0, kPop}), 0.0);
  EXPECT_DOUBLE_EQ(growth_rate({0.4, 5.0, kPop}), 0.2);
  EXPECT_DOUBLE_EQ(growth_rate({0.3, 4.0, kPop}), 0.05);
}

TEST(Simulate, ZeroGrowthStaysFlatEarly) {
  const auto traj = simulate_sir({0.25, 4.0, kPop}, start(), 30.0, 0.05);
  for (double v : traj.i) EXPECT_NEAR(v / kI0, 1.0, 0.01);
}

TEST(Simulate, ZeroBetaDecaysExponentially) {
  const double dur = 3.0;
  const auto traj = simulate_sir({0.0, dur, kPop}, start(), 20.0, 0.05);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    EXPECT_DOUBLE_EQ(traj.s[k], kPop - kI0);
    EXPECT_NEAR(traj.i[k] / kI0, std::exp(-traj.times[k] / dur), 1e-8);
  }
}

TEST(Simulate, PeakMatchesFineGridReference) {
  const double dt = 0.05;
  const auto traj = simulate_sir({0.45, 4.0, kPop}, start(), 150.0, dt);
  const Peak p = peak_infections(traj);
  const auto [t_ref, i_ref] = reference_peak(0.45, 4.0, 150.0, dt / 100);
  EXPECT_NEAR(p.infections / i_ref, 1.0, 1e-4);
  EXPECT_NEAR(p.time, t_ref, dt);
}

TEST(Simulate, ConservesPopulation) {
  const auto traj = simulate_sir({0.6, 3.0, kPop}, start(), 120.0, 0.01);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    EXPECT_LE(std::abs(traj.s[k] + traj.i[k] + traj.r[k] - kPop), 1e-6 * kPop);
    EXPECT_GE(traj.s[k], -1e-6 * kPop);
    EXPECT_GE(traj.i[k], -1e-6 * kPop);
  }
}

TEST(Simulate, OverflowNamesTheStep) {
  try {
    simulate_sir({1e306, 1.0, 1.0}, {0.5, 0.5, 0.0}, 10.0, 0.5);
    FAIL() << "expected an integration failure";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Simulate, RejectsBadGrid) {
  EXPECT_THROW(simulate_sir({0.3, 4.0, kPop}, start(), 1.0, 0.0), UsageError);
  EXPECT_THROW(simulate_sir({0.3, 4.0, kPop}, start(), 0.01, 0.05), UsageError);
}

TEST(Simulate, EqualGrowthRatesAreIndistinguishableEarly) {
  // Random pairs sharing beta - 1/D, with D over the range the ensembles
  // initialise from.
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> rate(0.1, 0.3), log_d(0.0, std::log(30.0));
  for (int trial = 0; trial < 20; ++trial) {
    const double g = rate(rng), da = std::exp(log_d(rng)), db = std::exp(log_d(rng));
    const auto a = simulate_sir({g + 1.0 / da, da, kPop}, start(), 200.0, 0.05);
    const auto b = simulate_sir({g + 1.0 / db, db, kPop}, start(), 200.0, 0.05);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.times.size(); ++k) {
      if (a.s[k] < 0.99 * kPop || b.s[k] < 0.99 * kPop) break;
      worst = std::max(worst, std::abs(a.i[k] - b.i[k]) / a.i[k]);
    }
    EXPECT_LE(worst, 0.02) << "g=" << g << " D=" << da << "," << db;
  }
}

SirObservations truth_obs(double t_obs, double noise = 0.0, std::uint64_t seed = 1) {
  const auto traj = simulate_sir({0.45, 4.0, kPop}, start(), t_obs, 0.05);
  return observe(traj, t_obs, noise, seed);
}

TEST(Loss, GradientMatchesCentralDifferences) {
  const auto obs = truth_obs(20.0, 1.0);
  SirFitConfig cfg;
  cfg.t_obs = 20.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lb(std::log(0.2), std::log(1.0));
  std::uniform_real_distribution<double> ld(std::log(1.5), std::log(20.0));
  for (int trial = 0; trial < 10; ++trial) {
    const double a = lb(rng), b = ld(rng);
    const auto g = sir_loss(obs, cfg, a, b);
    const double h = 1e-6;
    const double fa = (sir_loss(obs, cfg, a + h, b).mse - sir_loss(obs, cfg, a - h, b).mse) / (2 * h);
    const double fb = (sir_loss(obs, cfg, a, b + h).mse - sir_loss(obs, cfg, a, b - h).mse) / (2 * h);
    EXPECT_NEAR(g.d_log_beta, fa, 1e-4 * std::max(1.0, std::abs(fa))) << trial;
    EXPECT_NEAR(g.d_log_dur, fb, 1e-4 * std::max(1.0, std::abs(fb))) << trial;
  }
}

TEST(Fit, RecoversTruthFromPastPeakWindow) {
  SirFitConfig cfg;
  cfg.t_obs = 90.0;
  cfg.beta_init = 0.6;
  cfg.d0_init = 3.0;
  const auto fit = fit_sir(truth_obs(cfg.t_obs), cfg);
  EXPECT_NEAR(growth_rate(fit.params) / 0.2, 1.0, 0.01);
  EXPECT_NEAR(fit.params.beta / 0.45, 1.0, 0.05);
  EXPECT_NEAR(fit.params.dur / 4.0, 1.0, 0.05);
}

TEST(Fit, EarlyWindowLeavesDurationUnidentified) {
  SirFitConfig cfg;
  cfg.t_obs = 15.0;
  const auto obs = truth_obs(cfg.t_obs, 1.0);
  cfg.d0_init = 1.0;
  const auto lo = fit_sir(obs, cfg);
  cfg.d0_init = 30.0;
  const auto hi = fit_sir(obs, cfg);
  EXPECT_NEAR(lo.final_mse / hi.final_mse, 1.0, 0.01);
  EXPECT_NEAR(growth_rate(lo.params) / growth_rate(hi.params), 1.0, 0.01);
  const auto peak = [&](const SirParams& p) {
    return peak_infections(simulate_sir(p, start(), 300.0, 0.05)).infections;
  };
  EXPECT_GE(peak(hi.params) / peak(lo.params), 10.0);
}

TEST(Fit, ZeroObservationsAreDegenerate) {
  SirObservations obs{{0.0, 1.0, 2.0}, {0.0, 0.0, 0.0}};
  EXPECT_THROW(fit_sir(obs, SirFitConfig{}), DegenerateInputError);
}

TEST(Fit, TooFewPointsIsUsageError) {
  SirObservations obs{{0.0, 1.0}, {10.0, 12.0}};
  EXPECT_THROW(fit_sir(obs, SirFitConfig{}), UsageError);
}

TEST(Fit, FixedStepDivergenceIsAStepSizeError) {
  SirFitConfig cfg;
  cfg.backtracking = false;
  cfg.step_size = 50.0;
  cfg.max_log_step = 50.0;
  EXPECT_THROW(fit_sir(truth_obs(cfg.t_obs), cfg), NumericalError);
}

TEST(Fit, SmallFixedStepGivesMonotoneLoss) {
  SirFitConfig cfg;
  cfg.backtracking = false;
  cfg.step_size = 0.01;
  cfg.max_iters = 300;
  const auto fit = fit_sir(truth_obs(cfg.t_obs, 1.0), cfg);
  ASSERT_GE(fit.loss_trace.size(), 2u);
  for (std::size_t k = 1; k < fit.loss_trace.size(); ++k)
    EXPECT_LE(fit.loss_trace[k], fit.loss_trace[k - 1]);
}

TEST(Fit, BudgetExhaustionReturnsNonConverged) {
  SirFitConfig cfg;
  cfg.max_iters = 3;
  cfg.tol = 0.0;
  const auto fit = fit_sir(truth_obs(cfg.t_obs, 1.0), cfg);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 3);
}

TEST(Ensemble, EqualSamplesGiveIdenticalForecasts) {
  SirFitConfig cfg;
  const auto members = forecast_ensemble(truth_obs(cfg.t_obs, 1.0), cfg, {5.0, 5.0, 5.0}, 100.0, 3);
  ASSERT_EQ(members.size(), 3u);
  for (const auto& m : members) {
    ASSERT_TRUE(m.fit.has_value());
    EXPECT_EQ(m.forecast.i, members[0].forecast.i);
  }
}

TEST(Ensemble, SingletonEqualsFitThenSimulate) {
  SirFitConfig cfg;
  const auto obs = truth_obs(cfg.t_obs, 1.0);
  const auto members = forecast_ensemble(obs, cfg, {7.0}, 100.0, 1);
  cfg.d0_init = 7.0;
  const auto fit = fit_sir(obs, cfg);
  const auto traj = simulate_sir(fit.params, start(), 100.0, cfg.dt);
  ASSERT_TRUE(members[0].fit.has_value());
  EXPECT_EQ(members[0].fit->params.beta, fit.params.beta);
  EXPECT_EQ(members[0].forecast.i, traj.i);
}

TEST(Ensemble, FailedMemberDoesNotAbortTheBatch) {
  SirFitConfig cfg;
  const auto members = forecast_ensemble(truth_obs(cfg.t_obs, 1.0), cfg, {4.0, -1.0}, 50.0, 2);
  EXPECT_TRUE(members[0].fit.has_value());
  EXPECT_FALSE(members[1].fit.has_value());
  EXPECT_FALSE(members[1].error.empty());
}

TEST(Ensemble, DistinctInitDistributionsShiftPeakTimes) {
  SirFitConfig cfg;
  const auto obs = truth_obs(cfg.t_obs, 1.0);
  const auto short_d = sample_d0_log_uniform(1.0, 2.0, 12, 4);
  const auto long_d = sample_d0_log_uniform(15.0, 30.0, 12, 5);
  auto peak_times = [&](const std::vector<double>& d0) {
    std::vector<double> out;
    for (const auto& m : forecast_ensemble(obs, cfg, d0, 400.0, 2)) {
      // Oracle: re-simulate the fitted parameters directly.
      const auto traj = simulate_sir(m.fit->params, start(), 400.0, cfg.dt);
      EXPECT_EQ(peak_infections(traj).time, peak_infections(m.forecast).time);
      out.push_back(peak_infections(traj).time);
    }
    return out;
  };
  const auto a = peak_times(short_d), b = peak_times(long_d);
  // Short durations fit a small reproduction number and peak earlier.
  EXPECT_LT(*std::max_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
}

TEST(Sampling, LogUniformDrawsAreSeededAndInRange) {
  const auto a = sample_d0_log_uniform(1.0, 30.0, 200, 11);
  EXPECT_EQ(a, sample_d0_log_uniform(1.0, 30.0, 200, 11));
  EXPECT_NE(a, sample_d0_log_uniform(1.0, 30.0, 200, 12));
  double mean_log = 0.0;
  for (double v : a) {
    EXPECT_GE(v, 1.0);
    EXPECT_LE(v, 30.0);
    mean_log += std::log(v) / a.size();
  }
  EXPECT_NEAR(mean_log, 0.5 * std::log(30.0), 0.15);
}

TEST(Observe, NoiseIsSeeded) {
  const auto traj = simulate_sir({0.45, 4.0, kPop}, start(), 10.0, 0.05);
  const auto a = observe(traj, 10.0, 2.0, 7), b = observe(traj, 10.0, 2.0, 7);
  EXPECT_EQ(a.infections, b.infections);
  EXPECT_NE(a.infections, observe(traj, 10.0, 2.0, 8).infections);
  EXPECT_EQ(observe(traj, 10.0).infections.size(), 201u);
}

}  // namespace
}  // namespace underspec::sir
