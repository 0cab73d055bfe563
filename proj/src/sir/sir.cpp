#include "underspec/sir/sir.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "underspec/common/error.hpp"
#include "underspec/common/parallel.hpp"
#include "underspec/common/random.hpp"

namespace underspec::sir {

namespace {

// Value plus derivatives with respect to (log beta, log D).
struct Dual {
  double v = 0.0, a = 0.0, b = 0.0;
};
inline Dual operator+(Dual x, Dual y) { return {x.v + y.v, x.a + y.a, x.b + y.b}; }
inline Dual operator-(Dual x, Dual y) { return {x.v - y.v, x.a - y.a, x.b - y.b}; }
inline Dual operator*(Dual x, Dual y) {
  return {x.v * y.v, x.a * y.v + x.v * y.a, x.b * y.v + x.v * y.b};
}
inline Dual operator*(double k, Dual x) { return {k * x.v, k * x.a, k * x.b}; }
inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }

template <class T>
struct State {
  T s, i, r;
};

// RK4 step; `inv_dur` is 1/D and `rate` is beta/N.
template <class T>
State<T> rk4_step(const State<T>& y, const T& rate, const T& inv_dur, double dt) {
  auto f = [&](const State<T>& u) {
    const T infection = rate * (u.i * u.s);
    const T recovery = inv_dur * u.i;
    return State<T>{-1.0 * infection, infection - recovery, recovery};
  };
  auto axpy = [](const State<T>& u, double h, const State<T>& k) {
    return State<T>{u.s + h * k.s, u.i + h * k.i, u.r + h * k.r};
  };
  const State<T> k1 = f(y);
  const State<T> k2 = f(axpy(y, 0.5 * dt, k1));
  const State<T> k3 = f(axpy(y, 0.5 * dt, k2));
  const State<T> k4 = f(axpy(y, dt, k3));
  const double w = dt / 6.0;
  return State<T>{y.s + w * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s),
                  y.i + w * (k1.i + 2.0 * k2.i + 2.0 * k3.i + k4.i),
                  y.r + w * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r)};
}

int grid_steps(double t_max, double dt) {
  return static_cast<int>(std::llround(t_max / dt));
}

// Grid index of each observation time; they must sit on the integrator grid.
std::vector<int> observation_steps(const SirObservations& obs, double dt) {
  std::vector<int> steps;
  steps.reserve(obs.times.size());
  for (double t : obs.times) {
    const double k = t / dt;
    const long long kr = std::llround(k);
    if (std::abs(k - kr) > 1e-6 || kr < 0)
      throw UsageError("observation time " + std::to_string(t) + " is not on the dt grid");
    steps.push_back(static_cast<int>(kr));
  }
  for (std::size_t j = 1; j < steps.size(); ++j)
    if (steps[j] <= steps[j - 1]) throw UsageError("observation times must increase");
  return steps;
}

void check_observations(const SirObservations& obs, const SirFitConfig& config) {
  if (obs.times.size() != obs.infections.size())
    throw UsageError("observation times and values differ in length");
  if (obs.times.size() < 3) throw UsageError("need at least 3 observation points");
  for (double t : obs.times)
    if (t > config.t_obs + 1e-9) throw UsageError("observation beyond t_obs");
  bool any = false;
  for (double v : obs.infections) {
    if (!std::isfinite(v)) throw UsageError("non-finite observation");
    any = any || v != 0.0;
  }
  if (!any) throw DegenerateInputError("observed infections are identically zero");
}

}  // namespace

void SirParams::validate() const {
  if (!(beta > 0.0)) throw UsageError("beta must be > 0");
  if (!(dur > 0.0)) throw UsageError("dur must be > 0");
  if (!(n_pop > 0.0)) throw UsageError("n_pop must be > 0");
}

void SirFitConfig::validate() const {
  if (!(t_obs > 0.0)) throw UsageError("t_obs must be > 0");
  if (max_iters < 1) throw UsageError("max_iters must be >= 1");
  if (!(step_size > 0.0)) throw UsageError("step_size must be > 0");
  if (!(max_log_step > 0.0)) throw UsageError("max_log_step must be > 0");
  if (!(d0_init > 0.0) || !(beta_init > 0.0)) throw UsageError("initial values must be > 0");
  if (!(dt > 0.0)) throw UsageError("dt must be > 0");
  if (!(n_pop > 0.0) || !(i0 > 0.0) || i0 > n_pop) throw UsageError("need 0 < i0 <= n_pop");
  if (!(tol >= 0.0)) throw UsageError("tol must be >= 0");
}

SirTrajectory simulate_sir(const SirParams& params, const SirState& initial, double t_max,
                           double dt) {
  // beta = 0 is allowed here (pure decay); fitting keeps it positive.
  if (!(params.beta >= 0.0) || !(params.dur > 0.0) || !(params.n_pop > 0.0))
    throw UsageError("need beta >= 0, dur > 0, n_pop > 0");
  if (!(dt > 0.0) || !(t_max >= dt)) throw UsageError("need dt > 0 and t_max >= dt");
  if (!(initial.i > 0.0) || initial.s < 0.0 || initial.r < 0.0)
    throw UsageError("need I0 > 0 and S0, R0 >= 0");
  const double total = initial.s + initial.i + initial.r;
  if (std::abs(total - params.n_pop) > 1e-9 * params.n_pop)
    throw UsageError("S0 + I0 + R0 must equal n_pop");

  const int steps = grid_steps(t_max, dt);
  SirTrajectory traj;
  traj.times.reserve(steps + 1);
  traj.s.reserve(steps + 1);
  traj.i.reserve(steps + 1);
  traj.r.reserve(steps + 1);
  State<double> y{initial.s, initial.i, initial.r};
  const double rate = params.beta / params.n_pop, inv_dur = 1.0 / params.dur;
  for (int k = 0; k <= steps; ++k) {
    if (k > 0) y = rk4_step(y, rate, inv_dur, dt);
    if (!std::isfinite(y.s) || !std::isfinite(y.i) || !std::isfinite(y.r)) {
      std::ostringstream msg;
      msg << "integration failure: non-finite state at step " << k << " (t = " << k * dt << ")";
      throw NumericalError(msg.str());
    }
    traj.times.push_back(k * dt);
    traj.s.push_back(y.s);
    traj.i.push_back(y.i);
    traj.r.push_back(y.r);
  }
  return traj;
}

double growth_rate(const SirParams& params) { return params.beta - 1.0 / params.dur; }

Peak peak_infections(const SirTrajectory& traj) {
  if (traj.i.empty()) throw UsageError("empty trajectory");
  const auto it = std::max_element(traj.i.begin(), traj.i.end());
  const auto k = static_cast<std::size_t>(it - traj.i.begin());
  return {traj.times[k], *it};
}

SirObservations observe(const SirTrajectory& traj, double t_obs, double noise_std,
                        std::uint64_t seed) {
  if (!(noise_std >= 0.0)) throw UsageError("noise_std must be >= 0");
  SirObservations obs;
  Rng rng = make_rng(seed, "sir.noise");
  std::normal_distribution<double> normal;
  for (std::size_t k = 0; k < traj.times.size() && traj.times[k] <= t_obs + 1e-9; ++k) {
    obs.times.push_back(traj.times[k]);
    obs.infections.push_back(traj.i[k] + (noise_std > 0.0 ? noise_std * normal(rng) : 0.0));
  }
  return obs;
}

LossGradient sir_loss(const SirObservations& obs, const SirFitConfig& config, double log_beta,
                      double log_dur) {
  const std::vector<int> steps = observation_steps(obs, config.dt);
  const double beta = std::exp(log_beta), dur = std::exp(log_dur);
  // d(beta/N)/d(log beta) = beta/N; d(1/D)/d(log D) = -1/D.
  const Dual rate{beta / config.n_pop, beta / config.n_pop, 0.0};
  const Dual inv_dur{1.0 / dur, 0.0, -1.0 / dur};
  State<Dual> y{{config.n_pop - config.i0, 0, 0}, {config.i0, 0, 0}, {0, 0, 0}};
  double sum = 0.0, ga = 0.0, gb = 0.0;
  int k = 0;
  for (std::size_t j = 0; j < steps.size(); ++j) {
    for (; k < steps[j]; ++k) y = rk4_step(y, rate, inv_dur, config.dt);
    const double e = y.i.v - obs.infections[j];
    sum += e * e;
    ga += 2.0 * e * y.i.a;
    gb += 2.0 * e * y.i.b;
  }
  const double m = static_cast<double>(steps.size());
  LossGradient out{sum / m, ga / m, gb / m};
  if (!std::isfinite(out.mse) || !std::isfinite(out.d_log_beta) || !std::isfinite(out.d_log_dur))
    out.mse = std::numeric_limits<double>::infinity();
  return out;
}

SirFitResult fit_sir(const SirObservations& obs, const SirFitConfig& config) {
  config.validate();
  check_observations(obs, config);
  double scale = 0.0;
  for (double v : obs.infections) scale += v * v;
  scale /= static_cast<double>(obs.infections.size());

  double lb = std::log(config.beta_init), ld = std::log(config.d0_init);
  LossGradient cur = sir_loss(obs, config, lb, ld);
  if (!std::isfinite(cur.mse)) throw NumericalError("loss is not finite at the initial point");

  SirFitResult res;
  res.loss_trace.push_back(cur.mse);
  double step = config.step_size;
  for (int it = 0; it < config.max_iters; ++it) {
    const double gl = cur.d_log_beta / scale, gd = cur.d_log_dur / scale;
    LossGradient next;
    double nlb = lb, nld = ld;
    int halvings = 0;
    for (;;) {
      double move = step;
      const double len = step * std::hypot(gl, gd);
      if (len > config.max_log_step) move *= config.max_log_step / len;
      nlb = lb - move * gl;
      nld = ld - move * gd;
      next = sir_loss(obs, config, nlb, nld);
      if (std::isfinite(next.mse) && next.mse <= cur.mse) break;
      if (!config.backtracking)
        throw NumericalError("loss diverged at iteration " + std::to_string(it) +
                             "; reduce the step size");
      step *= 0.5;
      if (++halvings > 60)
        throw NumericalError("step size underflow: no descent step found at iteration " +
                             std::to_string(it));
    }
    const double change = cur.mse - next.mse;
    lb = nlb;
    ld = nld;
    cur = next;
    res.loss_trace.push_back(cur.mse);
    res.iterations = it + 1;
    if (change / scale < config.tol) {
      res.converged = true;
      break;
    }
    // Let the step recover after backtracking; fixed-step runs keep it as is.
    if (config.backtracking && halvings == 0) step = std::min(step * 1.2, 1e6 * config.step_size);
  }
  res.params = {std::exp(lb), std::exp(ld), config.n_pop};
  res.final_mse = cur.mse;
  return res;
}

std::vector<EnsembleMember> forecast_ensemble(const SirObservations& obs,
                                              const SirFitConfig& config_template,
                                              const std::vector<double>& d0_samples,
                                              double horizon, unsigned threads) {
  if (d0_samples.empty()) throw UsageError("need at least one d0 sample");
  std::vector<EnsembleMember> members(d0_samples.size());
  parallel_for(members.size(), threads, [&](std::size_t k) {
    EnsembleMember& m = members[k];
    m.index = static_cast<int>(k);
    m.d0 = d0_samples[k];
    try {
      SirFitConfig cfg = config_template;
      cfg.d0_init = d0_samples[k];
      m.fit = fit_sir(obs, cfg);
      m.forecast = simulate_sir(m.fit->params, {cfg.n_pop - cfg.i0, cfg.i0, 0.0}, horizon, cfg.dt);
    } catch (const std::exception& e) {
      m.fit.reset();
      m.error = e.what();
    }
  });
  return members;
}

std::vector<double> sample_d0_log_uniform(double lo, double hi, int count, std::uint64_t seed) {
  if (!(lo > 0.0) || !(hi >= lo)) throw UsageError("need 0 < lo <= hi");
  if (count < 1) throw UsageError("count must be >= 1");
  std::vector<double> out(count);
  for (int k = 0; k < count; ++k) {
    Rng rng = make_rng(seed, "sir.d0", static_cast<std::uint64_t>(k));
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    out[k] = std::exp(u(rng));
  }
  return out;
}

}  // namespace underspec::sir
