#include <fstream>

#include "context.hpp"
#include "underspec/common/csv.hpp"
#include "underspec/common/error.hpp"
#include "underspec/sir/sir.hpp"

namespace underspec::cli {

namespace {

struct TruthOptions {
  std::string observations;  // CSV with columns t, I; empty means synthesize
  double beta = 0.45;
  double dur = 4.0;
  double noise_std = 0.0;
};

void add_truth_options(CLI::App* app, TruthOptions& t) {
  app->add_option("--observations", t.observations, "CSV with columns t,I (else synthesize)");
  app->add_option("--truth-beta", t.beta, "Beta of the synthetic epidemic")->capture_default_str();
  app->add_option("--truth-dur", t.dur, "D of the synthetic epidemic")->capture_default_str();
  app->add_option("--noise-std", t.noise_std, "Gaussian observation noise std")
      ->capture_default_str();
}

void add_fit_options(CLI::App* app, sir::SirFitConfig& c, bool& no_backtracking) {
  app->add_option("--t-obs", c.t_obs, "Observation cutoff")->capture_default_str();
  app->add_option("--step-size", c.step_size, "Gradient step")->capture_default_str();
  app->add_option("--max-log-step", c.max_log_step, "Longest move in log parameters per step")
      ->capture_default_str();
  app->add_option("--max-iters", c.max_iters, "Iteration budget")->capture_default_str();
  app->add_option("--d0-init", c.d0_init, "Initial D")->capture_default_str();
  app->add_option("--beta-init", c.beta_init, "Initial beta")->capture_default_str();
  app->add_option("--tol", c.tol, "Stop when the normalized loss change falls below this")
      ->capture_default_str();
  app->add_option("--dt", c.dt, "RK4 step")->capture_default_str();
  app->add_option("--n-pop", c.n_pop, "Population size")->capture_default_str();
  app->add_option("--i0", c.i0, "Initial infections")->capture_default_str();
  app->add_flag("--no-backtracking", no_backtracking, "Fixed step; a rising loss is an error");
}

sir::SirObservations load_observations(const TruthOptions& t, const sir::SirFitConfig& c,
                                       std::uint64_t seed, Outputs& outputs) {
  sir::SirObservations obs;
  if (!t.observations.empty()) {
    const csv::Table table = csv::read_file(t.observations);
    const std::size_t ct = table.column("t"), ci = table.column("I");
    for (const auto& row : table.rows) {
      const double time = csv::parse_double(row[ct]);
      if (time > c.t_obs + 1e-9) continue;
      obs.times.push_back(time);
      obs.infections.push_back(csv::parse_double(row[ci]));
    }
  } else {
    const sir::SirParams truth{t.beta, t.dur, c.n_pop};
    truth.validate();
    const auto traj = sir::simulate_sir(truth, {c.n_pop - c.i0, c.i0, 0.0}, c.t_obs, c.dt);
    obs = sir::observe(traj, c.t_obs, t.noise_std, seed);
  }
  std::ofstream f(outputs.file("observations.csv"));
  csv::Writer w(f);
  w.header({"t", "I"});
  for (std::size_t k = 0; k < obs.times.size(); ++k) {
    w.cell(obs.times[k]).cell(obs.infections[k]);
    w.end_row();
  }
  return obs;
}

void write_trajectory(csv::Writer& w, const sir::SirTrajectory& traj, int member = -1) {
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    w.cell(traj.times[k]).cell(traj.s[k]).cell(traj.i[k]).cell(traj.r[k]);
    if (member >= 0) w.cell(member);
    w.end_row();
  }
}

Json fit_json(const sir::SirFitResult& fit) {
  return Json{{"beta", fit.params.beta},
              {"dur", fit.params.dur},
              {"growth_rate", sir::growth_rate(fit.params)},
              {"final_mse", fit.final_mse},
              {"converged", fit.converged},
              {"iterations", fit.iterations}};
}

}  // namespace

void register_sir(CLI::App& root, Registry& reg) {
  CLI::App* sir_app = root.add_subcommand("sir", "SIR simulation and fitting");
  sir_app->require_subcommand(1);

  {
    struct Opts {
      sir::SirParams params{0.45, 4.0, 1e6};
      double i0 = 10.0, t_max = 200.0, dt = 0.05;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(sir_app, "simulate", "Integrate the SIR equations", {"sir", "simulate"});
    leaf.app->add_option("--beta", o->params.beta, "Transmission rate")->capture_default_str();
    leaf.app->add_option("--dur", o->params.dur, "Mean infectious duration D")
        ->capture_default_str();
    leaf.app->add_option("--n-pop", o->params.n_pop, "Population size")->capture_default_str();
    leaf.app->add_option("--i0", o->i0, "Initial infections")->capture_default_str();
    leaf.app->add_option("--t-max", o->t_max, "Horizon")->capture_default_str();
    leaf.app->add_option("--dt", o->dt, "RK4 step")->capture_default_str();
    leaf.action = [o](const CommonOptions&, Outputs& outputs, Json& report) {
      const auto traj =
          sir::simulate_sir(o->params, {o->params.n_pop - o->i0, o->i0, 0.0}, o->t_max, o->dt);
      std::ofstream f(outputs.file("sir_trajectory.csv"));
      csv::Writer w(f);
      w.header({"t", "S", "I", "R"});
      write_trajectory(w, traj);
      const auto peak = sir::peak_infections(traj);
      report["growth_rate"] = sir::growth_rate(o->params);
      report["peak_time"] = peak.time;
      report["peak_infections"] = peak.infections;
    };
  }

  {
    struct Opts {
      TruthOptions truth;
      sir::SirFitConfig fit;
      bool no_backtracking = false;
      double horizon = 200.0;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(sir_app, "fit", "Fit (beta, D) by gradient descent", {"sir", "fit"});
    add_truth_options(leaf.app, o->truth);
    add_fit_options(leaf.app, o->fit, o->no_backtracking);
    leaf.app->add_option("--horizon", o->horizon, "Forecast horizon")->capture_default_str();
    leaf.action = [o](const CommonOptions& common, Outputs& outputs, Json& report) {
      sir::SirFitConfig cfg = o->fit;
      cfg.backtracking = !o->no_backtracking;
      cfg.validate();
      const auto obs = load_observations(o->truth, cfg, common.seed, outputs);
      const auto fit = sir::fit_sir(obs, cfg);
      {
        std::ofstream f(outputs.file("fit_loss.csv"));
        csv::Writer w(f);
        w.header({"iteration", "mse"});
        for (std::size_t k = 0; k < fit.loss_trace.size(); ++k) {
          w.cell(k).cell(fit.loss_trace[k]);
          w.end_row();
        }
      }
      const auto traj =
          sir::simulate_sir(fit.params, {cfg.n_pop - cfg.i0, cfg.i0, 0.0}, o->horizon, cfg.dt);
      {
        std::ofstream f(outputs.file("fit_forecast.csv"));
        csv::Writer w(f);
        w.header({"t", "S", "I", "R"});
        write_trajectory(w, traj);
      }
      const Json fj = fit_json(fit);
      {
        std::ofstream f(outputs.file("fit_report.json"));
        f << fj.dump(2) << '\n';
      }
      report["fit"] = fj;
      report["peak_infections"] = sir::peak_infections(traj).infections;
    };
  }

  {
    struct Opts {
      TruthOptions truth;
      sir::SirFitConfig fit;
      bool no_backtracking = false;
      double horizon = 200.0;
      int members = 20;
      double d0_lo = 1.0, d0_hi = 30.0;
      std::vector<double> d0_samples;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(sir_app, "ensemble", "Fits from many D initializations, with forecasts",
                         {"sir", "ensemble"});
    add_truth_options(leaf.app, o->truth);
    add_fit_options(leaf.app, o->fit, o->no_backtracking);
    leaf.app->add_option("--horizon", o->horizon, "Forecast horizon")->capture_default_str();
    leaf.app->add_option("--members", o->members, "Number of log-uniform d0 draws")
        ->capture_default_str();
    leaf.app->add_option("--d0-lo", o->d0_lo, "Lower end of the d0 range")->capture_default_str();
    leaf.app->add_option("--d0-hi", o->d0_hi, "Upper end of the d0 range")->capture_default_str();
    leaf.app->add_option("--d0-samples", o->d0_samples, "Explicit d0 values (overrides draws)")
        ->delimiter(',');
    leaf.action = [o](const CommonOptions& common, Outputs& outputs, Json& report) {
      sir::SirFitConfig cfg = o->fit;
      cfg.backtracking = !o->no_backtracking;
      cfg.validate();
      const auto obs = load_observations(o->truth, cfg, common.seed, outputs);
      const std::vector<double> d0 =
          o->d0_samples.empty()
              ? sir::sample_d0_log_uniform(o->d0_lo, o->d0_hi, o->members, common.seed)
              : o->d0_samples;
      const auto members = sir::forecast_ensemble(obs, cfg, d0, o->horizon, common.threads);
      {
        std::ofstream f(outputs.file("ensemble.csv"));
        csv::Writer w(f);
        w.header({"t", "S", "I", "R", "member_id"});
        for (const auto& m : members)
          if (m.fit) write_trajectory(w, m.forecast, m.index);
      }
      Json list = Json::array();
      {
        std::ofstream f(outputs.file("ensemble_members.csv"));
        csv::Writer w(f);
        w.header({"member_id", "d0", "beta", "dur", "growth_rate", "final_mse", "converged",
                  "peak_time", "peak_infections", "error"});
        for (const auto& m : members) {
          w.cell(m.index).cell(m.d0);
          if (m.fit) {
            const auto peak = sir::peak_infections(m.forecast);
            w.cell(m.fit->params.beta).cell(m.fit->params.dur)
                .cell(sir::growth_rate(m.fit->params)).cell(m.fit->final_mse)
                .cell(m.fit->converged ? 1 : 0).cell(peak.time).cell(peak.infections).cell("");
            Json j = fit_json(*m.fit);
            j["member_id"] = m.index;
            j["d0"] = m.d0;
            j["peak_infections"] = peak.infections;
            list.push_back(j);
          } else {
            w.cell("").cell("").cell("").cell("").cell("").cell("").cell("").cell(m.error);
            list.push_back({{"member_id", m.index}, {"d0", m.d0}, {"error", m.error}});
          }
          w.end_row();
        }
      }
      report["members"] = list;
    };
  }
}

}  // namespace underspec::cli
