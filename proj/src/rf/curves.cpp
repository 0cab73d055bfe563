#include "underspec/rf/curves.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "underspec/common/error.hpp"
#include "underspec/common/parallel.hpp"
#include "underspec/common/random.hpp"
#include "underspec/rf/empirical.hpp"

namespace underspec::rf {

namespace {

constexpr std::uint64_t kRepStride = 1'000'000;

struct Cell {
  std::size_t point = 0;  // index into n_over_d
  std::size_t width = 0;  // index into width_over_n
  int rep = 0;
};

std::uint64_t data_index(const Cell& c) { return c.point * kRepStride + c.rep; }
std::uint64_t cell_index(const Cell& c, std::size_t n_widths) {
  return (c.point * n_widths + c.width) * kRepStride + c.rep;
}

std::size_t grid_count(const SweepConfig& cfg) {
  return cfg.width_over_d.empty() ? cfg.width_over_n.size() : cfg.width_over_d.size();
}

double width_at(const SweepConfig& cfg, std::size_t p, std::size_t w) {
  return grid_width_over_n(cfg.width_over_n, cfg.width_over_d, cfg.n_over_d[p], w);
}

std::vector<Cell> make_cells(const SweepConfig& cfg) {
  std::vector<Cell> cells;
  for (std::size_t p = 0; p < cfg.n_over_d.size(); ++p)
    for (std::size_t w = 0; w < grid_count(cfg); ++w)
      for (int k = 0; k < cfg.replicates; ++k) cells.push_back({p, w, k});
  return cells;
}

// Per-replicate metric values are averaged per grid point in a fixed order.
std::vector<CurveRow> aggregate(const SweepConfig& cfg, const std::vector<Cell>& cells,
                                const std::vector<std::vector<double>>& values,
                                const std::vector<std::string>& metrics) {
  std::vector<CurveRow> rows;
  const std::size_t nw = grid_count(cfg);
  for (std::size_t p = 0; p < cfg.n_over_d.size(); ++p) {
    for (std::size_t w = 0; w < nw; ++w) {
      for (std::size_t m = 0; m < metrics.size(); ++m) {
        double sum = 0.0, sum_sq = 0.0;
        int count = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (cells[i].point != p || cells[i].width != w) continue;
          const double v = values[i][m];
          sum += v;
          sum_sq += v * v;
          ++count;
        }
        CurveRow row;
        row.n_over_d = cfg.n_over_d[p];
        row.width_over_n = width_at(cfg, p, w);
        row.metric = metrics[m];
        row.replicates = count;
        row.mean = sum / count;
        if (count > 1) {
          const double var = std::max(0.0, (sum_sq - count * row.mean * row.mean) / (count - 1));
          row.mc_stderr = std::sqrt(var / count);
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

RFConfig cell_config(const SweepConfig& cfg, const Cell& c) {
  const GridSizes g = grid_sizes(cfg.d, cfg.n_over_d[c.point], width_at(cfg, c.point, c.width));
  RFConfig rc;
  rc.d = cfg.d;
  rc.n = g.n;
  rc.width = g.width;
  rc.r = cfg.r;
  rc.s = cfg.s;
  rc.lambda = cfg.lambda;
  rc.activation = cfg.activation;
  return rc;
}

std::vector<CurveRow> run_sweep(
    const SweepConfig& cfg, const std::vector<std::string>& metrics,
    const std::function<std::vector<double>(const Cell&, const RFConfig&, const RFDataset&)>& body) {
  cfg.validate();
  const auto cells = make_cells(cfg);
  std::vector<std::vector<double>> values(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    const RFConfig rc = cell_config(cfg, c);
    const RFDataset data = sample_dataset(rc, derive_seed(cfg.seed, "rf.sweep.data", data_index(c)));
    values[i] = body(c, rc, data);
  });
  return aggregate(cfg, cells, values, metrics);
}

}  // namespace

void SweepConfig::validate() const {
  if (d < 1) throw UsageError("d must be >= 1");
  if (n_over_d.empty() || (width_over_n.empty() && width_over_d.empty()))
    throw UsageError("empty ratio grid");
  for (double v : width_over_d)
    if (!(v > 0.0)) throw UsageError("width_over_d values must be > 0");
  for (double v : n_over_d)
    if (!(v > 0.0)) throw UsageError("n_over_d values must be > 0");
  for (double v : width_over_n)
    if (!(v > 0.0)) throw UsageError("width_over_n values must be > 0");
  if (replicates < 1) throw UsageError("replicates must be >= 1");
  if (n_test < 100) throw UsageError("n_test must be >= 100");
  if (!(r >= 0.0) || !(s >= 0.0) || !(lambda >= 0.0))
    throw UsageError("r, s and lambda must be >= 0");
}

double grid_width_over_n(const std::vector<double>& width_over_n,
                         const std::vector<double>& width_over_d, double n_over_d, std::size_t k) {
  return width_over_d.empty() ? width_over_n.at(k) : width_over_d.at(k) / n_over_d;
}

GridSizes grid_sizes(int d, double n_over_d, double width_over_n) {
  GridSizes g;
  g.n = std::max(1, static_cast<int>(std::lround(n_over_d * d)));
  g.width = std::max(1, static_cast<int>(std::lround(width_over_n * g.n)));
  return g;
}

std::vector<CurveRow> shift_curve(const SweepConfig& cfg, const std::vector<double>& delta) {
  if (delta.size() != cfg.n_over_d.size())
    throw UsageError("need one delta per n_over_d value");
  const std::size_t nw = grid_count(cfg);
  return run_sweep(
      cfg, {"risk", "targeted_ratio", "independent_ratio"},
      [&](const Cell& c, const RFConfig& rc, const RFDataset& data) {
        const std::uint64_t idx = cell_index(c, nw);
        const Predictor p = train(rc, data, derive_seed(cfg.seed, "rf.sweep.w", idx));
        const Predictor p0 = train(rc, data, derive_seed(cfg.seed, "rf.sweep.w0", idx));
        const ShiftSpec shift = adversarial_shift(p0, data.beta0, delta[c.point]);
        const std::uint64_t test = derive_seed(cfg.seed, "rf.sweep.test", idx);
        const double r = estimate_risk(p, data.beta0, cfg.s, cfg.n_test, test).mean;
        const double r0 = estimate_risk(p0, data.beta0, cfg.s, cfg.n_test, test).mean;
        const double rt = shifted_risk(p0, shift, data.beta0, cfg.n_test, test, cfg.s).mean;
        const double ri = shifted_risk(p, shift, data.beta0, cfg.n_test, test, cfg.s).mean;
        return std::vector<double>{r, rt / r0, ri / r};
      });
}

std::vector<CurveRow> sensitivity_curve(const SweepConfig& cfg) {
  const std::size_t nw = grid_count(cfg);
  return run_sweep(
      cfg, {"risk", "sensitivity", "s_over_r", "error_cross"},
      [&](const Cell& c, const RFConfig& rc, const RFDataset& data) {
        const std::uint64_t idx = cell_index(c, nw);
        const Predictor p1 = train(rc, data, derive_seed(cfg.seed, "rf.sweep.w", idx));
        const Predictor p2 = train(rc, data, derive_seed(cfg.seed, "rf.sweep.w0", idx));
        const std::uint64_t test = derive_seed(cfg.seed, "rf.sweep.test", idx);
        const double r1 = estimate_risk(p1, data.beta0, cfg.s, cfg.n_test, test).mean;
        const double r2 = estimate_risk(p2, data.beta0, cfg.s, cfg.n_test, test).mean;
        const double sens = sensitivity(p1, p2, cfg.n_test, test).mean;
        const double cross = error_cross_moment(p1, p2, data.beta0, cfg.n_test, test).mean;
        const double r = 0.5 * (r1 + r2);
        return std::vector<double>{r, sens, sens / r, cross};
      });
}

std::vector<CurveRow> risk_curve(const SweepConfig& cfg) {
  const std::size_t nw = grid_count(cfg);
  return run_sweep(cfg, {"risk"}, [&](const Cell& c, const RFConfig& rc, const RFDataset& data) {
    const std::uint64_t idx = cell_index(c, nw);
    const Predictor p = train(rc, data, derive_seed(cfg.seed, "rf.sweep.w", idx));
    const std::uint64_t test = derive_seed(cfg.seed, "rf.sweep.test", idx);
    return std::vector<double>{estimate_risk(p, data.beta0, cfg.s, cfg.n_test, test).mean};
  });
}

TheoryMetric parse_theory_metric(const std::string& name) {
  if (name == "risk") return TheoryMetric::kRisk;
  if (name == "sensitivity") return TheoryMetric::kSensitivity;
  if (name == "shift") return TheoryMetric::kShift;
  throw UsageError("unknown theory metric '" + name + "' (expected risk, sensitivity or shift)");
}

namespace {

TheoryInputs point_inputs(const TheoryCurveConfig& cfg, double n_over_d, double width_over_n) {
  TheoryInputs in;
  in.zeta = cfg.zeta;
  in.lambda_bar = cfg.lambda_bar;
  in.r = cfg.r;
  in.s = cfg.s;
  if (cfg.d > 0) {
    const GridSizes g = grid_sizes(cfg.d, n_over_d, width_over_n);
    in.psi2 = static_cast<double>(g.n) / cfg.d;
    in.psi1 = static_cast<double>(g.width) / cfg.d;
  } else {
    in.psi2 = n_over_d;
    in.psi1 = width_over_n * n_over_d;
  }
  return in;
}

}  // namespace

TheoryCurveResult theory_curve(const TheoryCurveConfig& cfg) {
  if (cfg.n_over_d.empty() || (cfg.width_over_n.empty() && cfg.width_over_d.empty()))
    throw UsageError("empty ratio grid");
  if (cfg.metric == TheoryMetric::kShift && cfg.delta.size() != cfg.n_over_d.size())
    throw UsageError("need one delta per n_over_d value");
  struct Slot {
    std::vector<CurveRow> rows;
    std::vector<std::string> notes;
  };
  const std::size_t nw = cfg.width_over_d.empty() ? cfg.width_over_n.size() : cfg.width_over_d.size();
  std::vector<Slot> slots(cfg.n_over_d.size() * nw);
  parallel_for(slots.size(), cfg.threads, [&](std::size_t i) {
    const std::size_t p = i / nw, w = i % nw;
    const double nd = cfg.n_over_d[p];
    const double wn = grid_width_over_n(cfg.width_over_n, cfg.width_over_d, nd, w);
    Slot& slot = slots[i];
    auto where = [&] {
      std::ostringstream os;
      os << "n_over_d=" << nd << " width_over_n=" << wn << ": ";
      return os.str();
    };
    auto add = [&](const char* metric, double v) {
      slot.rows.push_back(CurveRow{nd, wn, metric, v, 0.0, 0});
    };
    try {
      const TheoryCurves tc = evaluate_theory(point_inputs(cfg, nd, wn), cfg.options);
      if (tc.provisional) slot.notes.push_back(where() + "provisional (psi1 < psi2)");
      for (const auto& f : tc.flags) slot.notes.push_back(where() + f);
      add("risk", tc.risk);
      if (cfg.metric == TheoryMetric::kSensitivity) {
        add("sensitivity", tc.sensitivity_av);
        add("s_over_r", tc.sensitivity_av / tc.risk);
        add("error_cross", tc.risk - 0.5 * tc.sensitivity_av);
      } else if (cfg.metric == TheoryMetric::kShift) {
        const ShiftRatios sr = shift_inflation(tc, cfg.delta[p], cfg.mu1);
        add("targeted_ratio", sr.targeted);
        add("independent_ratio", sr.independent);
      }
    } catch (const NumericalError& e) {
      slot.rows.clear();
      slot.notes.push_back(where() + "skipped: " + e.what());
    }
  });
  TheoryCurveResult out;
  for (auto& s : slots) {
    out.rows.insert(out.rows.end(), s.rows.begin(), s.rows.end());
    out.notes.insert(out.notes.end(), s.notes.begin(), s.notes.end());
  }
  return out;
}

std::vector<double> calibrate_deltas(const TheoryCurveConfig& cfg, double targeted_ratio,
                                     double reference_width_over_n) {
  std::vector<double> out;
  for (double nd : cfg.n_over_d)
    out.push_back(calibrate_delta(point_inputs(cfg, nd, reference_width_over_n), cfg.mu1,
                                  targeted_ratio, cfg.options));
  return out;
}

}  // namespace underspec::rf
