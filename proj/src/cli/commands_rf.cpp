#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <tuple>

#include "context.hpp"
#include "underspec/common/csv.hpp"
#include "underspec/common/error.hpp"
#include "underspec/common/random.hpp"
#include "underspec/rf/activation.hpp"
#include "underspec/rf/curves.hpp"
#include "underspec/rf/empirical.hpp"
#include "underspec/rf/theory.hpp"

namespace underspec::cli {

namespace {

using rf::CurveRow;

struct SweepOptions {
  rf::SweepConfig cfg;
  std::string activation = "relu";
};

void add_sweep_options(CLI::App* app, SweepOptions& o) {
  app->add_option("--d", o.cfg.d, "Input dimension")->capture_default_str();
  app->add_option("--n-over-d", o.cfg.n_over_d, "Sample ratios n/d")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--width-over-n-grid", o.cfg.width_over_n, "Width ratios N/n")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--width-over-d-grid", o.cfg.width_over_d,
                  "Width ratios N/d shared by every n/d (replaces --width-over-n-grid)")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--activation", o.activation, "relu, linear, quadratic or tanh")
      ->capture_default_str();
  app->add_option("--r", o.cfg.r, "Signal norm")->capture_default_str();
  app->add_option("--s", o.cfg.s, "Label noise std")->capture_default_str();
  app->add_option("--lambda", o.cfg.lambda, "Ridge penalty (0 = min-norm)")->capture_default_str();
  app->add_option("--replicates", o.cfg.replicates, "Realizations per grid point")
      ->capture_default_str();
  app->add_option("--n-test", o.cfg.n_test, "Monte Carlo test points")->capture_default_str();
}

rf::SweepConfig resolve(const SweepOptions& o, const CommonOptions& common) {
  rf::SweepConfig cfg = o.cfg;
  cfg.activation = rf::parse_activation(o.activation);
  cfg.seed = common.seed;
  cfg.threads = common.threads;
  cfg.validate();
  return cfg;
}

// Theory counterpart of an empirical sweep, rounded to the same integer sizes.
// Returns nullopt (with a note) when the activation has no nonlinear part.
std::optional<rf::TheoryCurveConfig> theory_for(const rf::SweepConfig& cfg,
                                                rf::TheoryMetric metric, Json& report) {
  rf::ActivationMoments m;
  try {
    m = rf::activation_moments(cfg.activation);
  } catch (const DegenerateInputError& e) {
    report["theory_notes"].push_back(std::string("no theory column: ") + e.what());
    return std::nullopt;
  }
  rf::TheoryCurveConfig tc;
  tc.metric = metric;
  tc.zeta = m.zeta;
  tc.mu1 = m.mu1;
  tc.d = cfg.d;
  tc.n_over_d = cfg.n_over_d;
  tc.width_over_n = cfg.width_over_n;
  tc.width_over_d = cfg.width_over_d;
  tc.lambda_bar = cfg.lambda / (m.mu_star * m.mu_star);
  tc.r = cfg.r;
  tc.s = cfg.s;
  tc.threads = cfg.threads;
  return tc;
}

using RowKey = std::tuple<double, double, std::string>;

void write_curve(const std::string& path, const std::vector<CurveRow>& rows,
                 const std::vector<CurveRow>* theory) {
  std::map<RowKey, double> th;
  if (theory)
    for (const auto& t : *theory) th[{t.n_over_d, t.width_over_n, t.metric}] = t.mean;
  std::ofstream f(path);
  csv::Writer w(f);
  std::vector<std::string> header{"n_over_d", "width_over_n", "metric", "mean", "mc_stderr",
                                  "replicates"};
  if (theory) header.push_back("theory");
  w.header(header);
  for (const auto& r : rows) {
    w.cell(r.n_over_d).cell(r.width_over_n).cell(r.metric).cell(r.mean).cell(r.mc_stderr)
        .cell(r.replicates);
    if (theory) {
      const auto it = th.find({r.n_over_d, r.width_over_n, r.metric});
      if (it == th.end())
        w.cell("");
      else
        w.cell(it->second);
    }
    w.end_row();
  }
}

void add_notes(Json& report, const std::vector<std::string>& notes) {
  for (const auto& n : notes) report["theory_notes"].push_back(n);
}

Json rows_json(const std::vector<CurveRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows)
    out.push_back({{"n_over_d", r.n_over_d},
                   {"width_over_n", r.width_over_n},
                   {"metric", r.metric},
                   {"mean", r.mean},
                   {"mc_stderr", r.mc_stderr}});
  return out;
}

}  // namespace

void register_rf(CLI::App& root, Registry& reg) {
  CLI::App* rf_app = root.add_subcommand("rf", "Random-features regression");
  rf_app->require_subcommand(1);

  {
    struct Opts {
      rf::RFConfig cfg;
      std::string activation = "relu";
      int n_test = 20000;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(rf_app, "train", "Train one predictor and estimate its risk",
                         {"rf", "train"});
    leaf.app->add_option("--d", o->cfg.d, "Input dimension")->capture_default_str();
    leaf.app->add_option("--n", o->cfg.n, "Training samples")->capture_default_str();
    leaf.app->add_option("--width", o->cfg.width, "Number of random features N")
        ->capture_default_str();
    leaf.app->add_option("--activation", o->activation, "relu, linear, quadratic or tanh")
        ->capture_default_str();
    leaf.app->add_option("--r", o->cfg.r, "Signal norm")->capture_default_str();
    leaf.app->add_option("--s", o->cfg.s, "Label noise std")->capture_default_str();
    leaf.app->add_option("--lambda", o->cfg.lambda, "Ridge penalty (0 = min-norm)")
        ->capture_default_str();
    leaf.app->add_option("--n-test", o->n_test, "Monte Carlo test points")->capture_default_str();
    leaf.action = [o](const CommonOptions& common, Outputs& outputs, Json& report) {
      rf::RFConfig cfg = o->cfg;
      cfg.activation = rf::parse_activation(o->activation);
      cfg.validate();
      const auto data = rf::sample_dataset(cfg, derive_seed(common.seed, "rf.train.data", 0));
      const auto p = rf::train(cfg, data, derive_seed(common.seed, "rf.train.w", 0));
      const auto risk = rf::estimate_risk(p, data.beta0, cfg.s, o->n_test,
                                          derive_seed(common.seed, "rf.train.test", 0));
      const double train_mse = (p.predict(data.x) - data.y).squaredNorm() / cfg.n;
      double theory = std::numeric_limits<double>::quiet_NaN();
      if (cfg.activation != rf::Activation::kLinear) {
        const auto m = rf::activation_moments(cfg.activation);
        rf::TheoryInputs in{m.zeta, cfg.psi1(), cfg.psi2(), cfg.lambda / (m.mu_star * m.mu_star),
                            cfg.r, cfg.s};
        try {
          theory = rf::risk_asymptotic(in);
        } catch (const NumericalError& e) {
          report["theory_notes"].push_back(std::string("no theory risk: ") + e.what());
        }
      }
      {
        std::ofstream f(outputs.file("rf_train.csv"));
        csv::Writer w(f);
        w.header({"metric", "value"});
        auto row = [&](const char* k, double v) {
          w.cell(k);
          if (std::isnan(v))
            w.cell("");
          else
            w.cell(v);
          w.end_row();
        };
        row("train_mse", train_mse);
        row("risk", risk.mean);
        row("risk_stderr", risk.std_error);
        row("theory_risk", theory);
        row("theta_norm", p.theta.norm());
      }
      {
        std::ofstream f(outputs.file("rf_theta.csv"));
        csv::Writer w(f);
        w.header({"index", "theta"});
        for (Eigen::Index k = 0; k < p.theta.size(); ++k) {
          w.cell(static_cast<long long>(k)).cell(p.theta[k]);
          w.end_row();
        }
      }
      report["train_mse"] = train_mse;
      report["risk"] = risk.mean;
      report["risk_stderr"] = risk.std_error;
      if (!std::isnan(theory)) report["theory_risk"] = theory;
    };
  }

  {
    auto o = std::make_shared<SweepOptions>();
    Leaf& leaf = reg.add(rf_app, "risk", "Test risk curve over the width grid", {"rf", "risk"});
    add_sweep_options(leaf.app, *o);
    leaf.action = [o](const CommonOptions& common, Outputs& outputs, Json& report) {
      const rf::SweepConfig cfg = resolve(*o, common);
      const auto rows = rf::risk_curve(cfg);
      std::optional<rf::TheoryCurveResult> th;
      if (auto tc = theory_for(cfg, rf::TheoryMetric::kRisk, report)) th = rf::theory_curve(*tc);
      if (th) add_notes(report, th->notes);
      write_curve(outputs.file("risk_curve.csv"), rows, th ? &th->rows : nullptr);
      report["rows"] = rows_json(rows);
    };
  }

  {
    struct Opts {
      SweepOptions sweep;
      std::vector<double> delta;
      double target_ratio = 2.4;
      double calibration_width_over_n = 2.0;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(rf_app, "shift-curve",
                         "Risk inflation under targeted and independent mean shifts",
                         {"rf", "shift-curve"});
    add_sweep_options(leaf.app, o->sweep);
    leaf.app->add_option("--delta", o->delta, "Shift size per n/d (else calibrated)")
        ->delimiter(',');
    leaf.app->add_option("--target-ratio", o->target_ratio,
                         "Theory targeted ratio that calibrates delta")
        ->capture_default_str();
    leaf.app->add_option("--calibration-width-over-n", o->calibration_width_over_n,
                         "N/n where delta is calibrated")
        ->capture_default_str();
    leaf.action = [o](const CommonOptions& common, Outputs& outputs, Json& report) {
      const rf::SweepConfig cfg = resolve(o->sweep, common);
      auto tc = theory_for(cfg, rf::TheoryMetric::kShift, report);
      std::vector<double> delta = o->delta;
      if (delta.empty()) {
        if (!tc) throw UsageError("--delta is required when the activation has no theory");
        delta = rf::calibrate_deltas(*tc, o->target_ratio, o->calibration_width_over_n);
      }
      if (delta.size() != cfg.n_over_d.size())
        throw UsageError("--delta needs one value per --n-over-d entry");
      for (double v : delta)
        if (!(v > 0.0)) throw UsageError("--delta values must be > 0");
      const auto rows = rf::shift_curve(cfg, delta);
      std::optional<rf::TheoryCurveResult> th;
      if (tc) {
        tc->delta = delta;
        th = rf::theory_curve(*tc);
        add_notes(report, th->notes);
      }
      write_curve(outputs.file("shift_curve.csv"), rows, th ? &th->rows : nullptr);
      report["delta"] = delta;
      report["rows"] = rows_json(rows);
    };
  }

  {
    auto o = std::make_shared<SweepOptions>();
    o->cfg.d = 40;
    o->cfg.width_over_n.clear();
    o->cfg.width_over_d = {0.1, 0.25, 0.5, 1.0, 1.5, 3.0, 4.0, 7.5, 10.0, 16.0, 24.0, 40.0};
    Leaf& leaf = reg.add(rf_app, "sensitivity-curve",
                         "Sensitivity between predictors differing only in their weights",
                         {"rf", "sensitivity-curve"});
    add_sweep_options(leaf.app, *o);
    leaf.action = [o](const CommonOptions& common, Outputs& outputs, Json& report) {
      rf::SweepConfig cfg = resolve(*o, common);
      const auto rows = rf::sensitivity_curve(cfg);
      std::optional<rf::TheoryCurveResult> th;
      if (auto tc = theory_for(cfg, rf::TheoryMetric::kSensitivity, report))
        th = rf::theory_curve(*tc);
      if (th) add_notes(report, th->notes);
      write_curve(outputs.file("sensitivity_curve.csv"), rows, th ? &th->rows : nullptr);
      report["rows"] = rows_json(rows);
    };
  }

  {
    struct Opts {
      std::string metric = "risk";
      std::string zeta = "auto";
      std::string mu1 = "auto";
      std::string activation = "relu";
      std::vector<double> psi2{2.0, 5.0};
      std::vector<double> psi1_grid;
      std::vector<double> width_over_n{0.25, 0.5, 0.75, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
      double lambda_bar = 0.0;
      double r = 1.0, s = 0.0;
      int d = 0;
      std::vector<double> delta;
      double target_ratio = 2.4;
      double calibration_width_over_n = 2.0;
      std::string g1_form = "closed";
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(rf_app, "theory-curve", "Asymptotic curves from the fixed-point solution",
                         {"rf", "theory-curve"});
    CLI::App* a = leaf.app;
    a->add_option("--metric", o->metric, "risk, sensitivity or shift")->capture_default_str();
    a->add_option("--zeta", o->zeta, "auto (from --activation) or a value")->capture_default_str();
    a->add_option("--mu1", o->mu1, "auto (from --activation) or a value; shift metric only")
        ->capture_default_str();
    a->add_option("--activation", o->activation, "Activation behind --zeta auto")
        ->capture_default_str();
    a->add_option("--psi2", o->psi2, "Sample ratios n/d")->delimiter(',')->capture_default_str();
    a->add_option("--psi1-grid", o->psi1_grid, "Width ratios N/d (replaces --width-over-n-grid)")
        ->delimiter(',');
    a->add_option("--width-over-n-grid", o->width_over_n, "Width ratios N/n")
        ->delimiter(',')
        ->capture_default_str();
    a->add_option("--lambda-bar", o->lambda_bar, "Normalized ridge penalty (0 = ridgeless)")
        ->capture_default_str();
    a->add_option("--r", o->r, "Signal norm")->capture_default_str();
    a->add_option("--s", o->s, "Label noise std")->capture_default_str();
    a->add_option("--d", o->d, "Round ratios to integer sizes at this d (0 = exact)")
        ->capture_default_str();
    a->add_option("--delta", o->delta, "Shift size per psi2 (else calibrated)")->delimiter(',');
    a->add_option("--target-ratio", o->target_ratio, "Targeted ratio that calibrates delta")
        ->capture_default_str();
    a->add_option("--calibration-width-over-n", o->calibration_width_over_n,
                  "N/n where delta is calibrated")
        ->capture_default_str();
    a->add_option("--g1-form", o->g1_form, "closed or open")->capture_default_str();
    leaf.action = [o](const CommonOptions& common, Outputs& outputs, Json& report) {
      rf::TheoryCurveConfig tc;
      tc.metric = rf::parse_theory_metric(o->metric);
      std::optional<rf::ActivationMoments> m;
      auto moments = [&] {
        if (!m) m = rf::activation_moments(rf::parse_activation(o->activation));
        return *m;
      };
      tc.zeta = o->zeta == "auto" ? moments().zeta : csv::parse_double(o->zeta);
      if (tc.metric == rf::TheoryMetric::kShift)
        tc.mu1 = o->mu1 == "auto" ? moments().mu1 : csv::parse_double(o->mu1);
      if (o->g1_form == "closed")
        tc.options.g1_form = rf::G1Form::kClosed;
      else if (o->g1_form == "open")
        tc.options.g1_form = rf::G1Form::kOpen;
      else
        throw UsageError("--g1-form must be closed or open");
      tc.d = o->d;
      tc.n_over_d = o->psi2;
      tc.width_over_n = o->width_over_n;
      tc.width_over_d = o->psi1_grid;
      tc.lambda_bar = o->lambda_bar;
      tc.r = o->r;
      tc.s = o->s;
      tc.threads = common.threads;
      if (tc.metric == rf::TheoryMetric::kShift) {
        tc.delta = o->delta.empty()
                       ? rf::calibrate_deltas(tc, o->target_ratio, o->calibration_width_over_n)
                       : o->delta;
        report["delta"] = tc.delta;
      }
      const auto res = rf::theory_curve(tc);
      write_curve(outputs.file("theory_curve.csv"), res.rows, nullptr);
      {
        std::ofstream f(outputs.file("theory_notes.txt"));
        for (const auto& n : res.notes) f << n << '\n';
      }
      report["zeta"] = tc.zeta;
      add_notes(report, res.notes);
      report["rows"] = rows_json(res.rows);
    };
  }
}

}  // namespace underspec::cli
