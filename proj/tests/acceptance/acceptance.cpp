// Acceptance gates. Each criterion prints one PASS/FAIL line; supporting
// numbers follow on indented lines. Exit status is nonzero if any selected
// criterion fails.
//
//   underspec_acceptance [--criterion N]... [--threads T] [--work-dir DIR]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

#include "underspec/cli/app.hpp"
#include "underspec/common/csv.hpp"
#include "underspec/common/hash.hpp"
#include "underspec/common/random.hpp"
#include "underspec/rf/activation.hpp"
#include "underspec/rf/theory.hpp"
#include "underspec/stats/stats.hpp"

namespace fs = std::filesystem;
using namespace underspec;

namespace {

struct Outcome {
  bool pass = true;
  std::string summary;
  std::vector<std::string> details;

  void check(bool ok, const std::string& line) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok    " : "FAIL  ") + line);
  }
  void note(const std::string& line) { details.push_back("note  " + line); }
};

struct Env {
  fs::path work;
  fs::path configs;
  unsigned threads = 1;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

std::string pct(double v) { return fmt(100.0 * v, 3) + "%"; }

// Runs the CLI in-process; throws on a nonzero exit.
void run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != cli::kExitOk) {
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    throw std::runtime_error("underspec " + joined + "exited " + std::to_string(code) + ": " +
                             err.str());
  }
}

fs::path fresh_dir(const Env& env, const std::string& name) {
  const fs::path dir = env.work / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CurvePoint {
  double n_over_d = 0, width_over_n = 0, mean = 0, stderr_ = 0, theory = NAN;
  bool has_theory = false;
};

// metric -> points, from a curve CSV.
std::map<std::string, std::vector<CurvePoint>> load_curve(const fs::path& file) {
  const auto t = csv::read_file(file.string());
  const auto c_nod = t.column("n_over_d"), c_won = t.column("width_over_n"),
             c_metric = t.column("metric"), c_mean = t.column("mean"),
             c_se = t.column("mc_stderr");
  std::size_t c_theory = t.header.size();
  for (std::size_t k = 0; k < t.header.size(); ++k)
    if (t.header[k] == "theory") c_theory = k;
  std::map<std::string, std::vector<CurvePoint>> out;
  for (const auto& row : t.rows) {
    CurvePoint p;
    p.n_over_d = csv::parse_double(row[c_nod]);
    p.width_over_n = csv::parse_double(row[c_won]);
    p.mean = csv::parse_double(row[c_mean]);
    p.stderr_ = csv::parse_double(row[c_se]);
    if (c_theory < row.size() && !row[c_theory].empty()) {
      p.theory = csv::parse_double(row[c_theory]);
      p.has_theory = true;
    }
    out[row[c_metric]].push_back(p);
  }
  return out;
}

std::string where(const CurvePoint& p) {
  return "n/d=" + fmt(p.n_over_d) + " N/n=" + fmt(p.width_over_n);
}

bool near_threshold(const CurvePoint& p) { return std::abs(p.width_over_n - 1.0) < 0.1; }

// Worst relative gap |mean/theory - 1| over points away from the threshold.
void gate_relative(Outcome& o, const std::string& label, const std::vector<CurvePoint>& pts,
                   double tol) {
  double worst = 0.0;
  const CurvePoint* at = nullptr;
  int failing = 0, used = 0;
  for (const auto& p : pts) {
    if (near_threshold(p) || !p.has_theory) continue;
    ++used;
    const double gap = std::abs(p.mean / p.theory - 1.0);
    if (gap > tol) {
      ++failing;
      o.note(label + " outside tolerance at " + where(p) + ": empirical " + fmt(p.mean) +
             " theory " + fmt(p.theory) + " (" + pct(gap) + ")");
    }
    if (gap >= worst) {
      worst = gap;
      at = &p;
    }
  }
  o.check(used > 0 && failing == 0,
          label + ": worst gap " + pct(worst) + (at ? " at " + where(*at) : "") + " over " +
              std::to_string(used) + " points (gate " + pct(tol) + ")");
}

// 1. Shift inflation curves at d = 80.
Outcome criterion1(const Env& env) {
  Outcome o;
  o.summary = "shift inflation (d=80, ReLU, 50 realizations)";
  const fs::path dir = fresh_dir(env, "c1");
  run_cli({"--threads", std::to_string(env.threads), "--out-dir", dir.string(), "--config",
           (env.configs / "fig2_shift.json").string(), "rf", "shift-curve"});
  auto curve = load_curve(dir / "shift_curve.csv");
  gate_relative(o, "targeted ratio", curve["targeted_ratio"], 0.15);
  gate_relative(o, "independent ratio", curve["independent_ratio"], 0.15);
  // Plateau: 1 < N/n <= 2.
  double min_targeted = INFINITY, lo_indep = INFINITY, hi_indep = -INFINITY;
  for (const auto& p : curve["targeted_ratio"])
    if (p.width_over_n > 1.0 && p.width_over_n <= 2.0)
      min_targeted = std::min({min_targeted, p.mean, p.theory});
  for (const auto& p : curve["independent_ratio"])
    if (p.width_over_n > 1.0 && p.width_over_n <= 2.0) {
      lo_indep = std::min({lo_indep, p.mean, p.theory});
      hi_indep = std::max({hi_indep, p.mean, p.theory});
    }
  o.check(min_targeted > 2.0, "plateau targeted ratio min " + fmt(min_targeted) + " > 2");
  o.check(lo_indep >= 0.85 && hi_indep <= 1.15,
          "plateau independent ratio in [" + fmt(lo_indep) + ", " + fmt(hi_indep) +
              "] within [0.85, 1.15]");
  return o;
}

// 2. Sensitivity over risk at d = 40.
Outcome criterion2(const Env& env) {
  Outcome o;
  o.summary = "sensitivity S/R (d=40, 50 realizations)";
  const fs::path dir = fresh_dir(env, "c2");
  run_cli({"--threads", std::to_string(env.threads), "--out-dir", dir.string(), "--config",
           (env.configs / "sensitivity_d40.json").string(), "rf", "sensitivity-curve"});
  auto curve = load_curve(dir / "sensitivity_curve.csv");
  const auto& sr = curve["s_over_r"];
  gate_relative(o, "S/R", sr, 0.15);
  std::set<double> nods;
  for (const auto& p : sr) nods.insert(p.n_over_d);
  for (double nod : nods) {
    const CurvePoint* smallest = nullptr;
    double best_emp = 0.0, best_theory = 0.0;
    for (const auto& p : sr) {
      if (p.n_over_d != nod) continue;
      if (!smallest || p.width_over_n < smallest->width_over_n) smallest = &p;
      if (p.width_over_n > 1.0) {
        best_emp = std::max(best_emp, p.mean);
        best_theory = std::max(best_theory, p.theory);
      }
    }
    o.check(smallest && smallest->mean < 0.3 && smallest->theory < 0.3,
            "n/d=" + fmt(nod) + " smallest N/n=" + fmt(smallest->width_over_n) +
                ": S/R empirical " + fmt(smallest->mean) + ", theory " +
                fmt(smallest->theory) + " < 0.3");
    o.check(best_emp >= 1.5 && best_theory >= 1.5,
            "n/d=" + fmt(nod) + " overparametrized S/R max: empirical " + fmt(best_emp) +
                ", theory " + fmt(best_theory) + " >= 1.5");
  }
  // Where the theory S/R comes closest to 2 the two error functions should be
  // nearly orthogonal.
  for (double nod : nods) {
    const CurvePoint* peak = nullptr;
    for (const auto& p : sr)
      if (p.n_over_d == nod && (!peak || std::abs(p.theory - 2) < std::abs(peak->theory - 2)))
        peak = &p;
    for (const auto& p : curve["error_cross"])
      if (peak && p.n_over_d == nod && p.width_over_n == peak->width_over_n)
        o.note("n/d=" + fmt(nod) + " at N/n=" + fmt(p.width_over_n) + ": E[h1 h2] = " +
               fmt(p.mean) + " +- " + fmt(p.stderr_) + " (" +
               fmt(std::abs(p.mean) / p.stderr_, 3) + " standard errors)");
  }
  return o;
}

// 3. Ridge risk against the asymptotic formula.
Outcome criterion3(const Env& env) {
  Outcome o;
  o.summary = "ridge risk vs asymptotic formula (lambda_bar 0.1 and 0.01)";
  const double mu_star = rf::activation_moments(rf::Activation::kRelu).mu_star;
  for (double lambda_bar : {0.1, 0.01}) {
    const fs::path dir = fresh_dir(env, "c3_" + fmt(lambda_bar));
    std::ostringstream lambda;
    lambda << std::setprecision(17) << lambda_bar * mu_star * mu_star;
    run_cli({"--threads", std::to_string(env.threads), "--out-dir", dir.string(), "--config",
             (env.configs / "ridge_oracle.json").string(), "rf", "risk", "--lambda",
             lambda.str()});
    auto curve = load_curve(dir / "risk_curve.csv");
    double worst = 0.0;
    int used = 0;
    for (const auto& p : curve["risk"]) {
      if (!p.has_theory) continue;
      ++used;
      worst = std::max(worst, std::abs(p.mean / p.theory - 1.0));
    }
    o.check(used == 12 && worst <= 0.10, "lambda_bar=" + fmt(lambda_bar) + ": worst gap " +
                                             pct(worst) + " over " + std::to_string(used) +
                                             " points (gate 10%)");
  }
  return o;
}

// 4. Two SIR fits from the ends of the D0 range.
Outcome criterion4(const Env& env) {
  Outcome o;
  o.summary = "SIR fits from D0 = 1 and D0 = 30";
  const fs::path dir = fresh_dir(env, "c4");
  run_cli({"--threads", std::to_string(env.threads), "--out-dir", dir.string(), "--config",
           (env.configs / "sir_underspec.json").string(), "sir", "ensemble"});
  const auto t = csv::read_file((dir / "ensemble_members.csv").string());
  if (t.rows.size() != 2) throw std::runtime_error("expected two ensemble members");
  const auto c_mse = t.column("final_mse"), c_peak = t.column("peak_infections"),
             c_conv = t.column("converged");
  const double mse_a = csv::parse_double(t.rows[0][c_mse]);
  const double mse_b = csv::parse_double(t.rows[1][c_mse]);
  const double peak_a = csv::parse_double(t.rows[0][c_peak]);
  const double peak_b = csv::parse_double(t.rows[1][c_peak]);
  o.check(t.rows[0][c_conv] == "1" && t.rows[1][c_conv] == "1", "both fits converged");
  const double mse_gap = std::abs(mse_a - mse_b) / std::min(mse_a, mse_b);
  o.check(mse_gap <= 0.01, "training MSE " + fmt(mse_a) + " vs " + fmt(mse_b) + " (gap " +
                               pct(mse_gap) + ", gate 1%)");
  const double ratio = std::max(peak_a, peak_b) / std::min(peak_a, peak_b);
  o.check(ratio >= 10.0, "forecast peaks " + fmt(peak_a) + " vs " + fmt(peak_b) + " (ratio " +
                             fmt(ratio, 3) + ", gate 10x)");
  return o;
}

// 5. Fixed-point solver and Stieltjes transform.
Outcome criterion5(const Env&) {
  Outcome o;
  o.summary = "fixed-point solver and Stieltjes transform";
  std::mt19937_64 rng(derive_seed(2024, "acceptance.c5", 0));
  std::uniform_real_distribution<double> log_psi(std::log(0.2), std::log(10.0));
  std::uniform_real_distribution<double> log_lambda(std::log(1e-4), std::log(10.0));
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    rf::TheoryInputs in;
    in.psi1 = std::exp(log_psi(rng));
    in.psi2 = std::exp(log_psi(rng));
    in.lambda_bar = std::exp(log_lambda(rng));
    const auto sol = rf::solve_fixed_point(in);
    // nu1 = i a, nu2 = i b with a (y + b) = psi1 and b (y + a) = psi2.
    const double y = std::sqrt(in.psi1 * in.psi2 * in.lambda_bar);
    const double bq = y * y + in.psi2 - in.psi1;
    const double a = (-bq + std::sqrt(bq * bq + 4.0 * in.psi1 * y * y)) / (2.0 * y);
    const double b = in.psi1 / a - y;
    worst = std::max({worst, std::abs(sol.nu1 - std::complex<double>(0, a)),
                      std::abs(sol.nu2 - std::complex<double>(0, b))});
  }
  o.check(worst <= 1e-10, "zeta=0 against quadratic roots, 20 triples: max error " + fmt(worst, 3));

  const std::pair<double, double> points[] = {{1.0, -1.0}, {2.0, -3.0}, {0.5, -0.5},
                                              {5.0, -2.0}, {1.5, -10.0}};
  const int d = 500;
  int index = 0;
  for (auto [psi2, z] : points) {
    const int n = static_cast<int>(std::lround(psi2 * d));
    Rng r = make_rng(2024, "acceptance.wishart", index++);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(n, d);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < n; ++i) x(i, j) = normal(r);
    const Eigen::MatrixXd gram = x.transpose() * x / d;
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly)
            .eigenvalues();
    const double mc = (1.0 / (ev.array() - z)).mean();
    const double g = rf::stieltjes_g(z, psi2).g;
    const double gap = std::abs(g / mc - 1.0);
    o.check(gap <= 0.02, "psi2=" + fmt(psi2) + " z=" + fmt(z) + ": g " + fmt(g, 6) +
                             " vs Wishart d=500 " + fmt(mc, 6) + " (" + pct(gap) + ", gate 2%)");
  }
  return o;
}

// 6. Statistics oracles.
Outcome criterion6(const Env& env) {
  Outcome o;
  o.summary = "ensemble statistics oracles";
  const auto f = stats::f_statistic({1, 2, 3, 4, 5, 6}, {"a", "a", "a", "b", "b", "b"});
  o.check(f.f == 13.5, "hand ANOVA F = " + fmt(f.f, 17));

  // Every relabelling of the stratum vector, through all n! orderings.
  int compared = 0, mismatched = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng = make_rng(2024, "acceptance.c6.perm", trial);
    const int n = 2 + trial % 7;
    stats::StratifiedOutcomes out;
    std::uniform_int_distribution<int> members(1, n - 1);
    const int k = members(rng);
    for (int e = 0; e < n; ++e) {
      out.stratum.push_back(e < k ? "s" : "t");
      out.example_id.push_back(std::to_string(e));
    }
    std::shuffle(out.stratum.begin(), out.stratum.end(), rng);
    const int np = 2 + trial % 3;
    for (int p = 0; p < np; ++p) {
      out.predictor_id.push_back(std::to_string(p));
      std::vector<std::uint8_t> row(n);
      for (auto& c : row) c = static_cast<std::uint8_t>(rng() & 1u);
      out.correct.push_back(row);
    }
    std::vector<int> observed;
    for (int e = 0; e < n; ++e)
      if (out.stratum[e] == "s") observed.push_back(e);
    const double stat = stats::accuracy_variance(out, observed);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    long long hits = 0, total = 0;
    do {
      std::vector<int> member;
      for (int e = 0; e < n; ++e)
        if (out.stratum[order[e]] == "s") member.push_back(e);
      if (stats::accuracy_variance(out, member) >= stat - 1e-12) ++hits;
      ++total;
    } while (std::next_permutation(order.begin(), order.end()));
    const auto res = stats::permutation_variance_test(out, "s", 1000, trial, env.threads);
    ++compared;
    if (!res.exact || res.p != static_cast<double>(hits) / total) ++mismatched;
  }
  o.check(mismatched == 0, "permutation p equals enumeration over all shuffles: " +
                               std::to_string(compared - mismatched) + "/" +
                               std::to_string(compared) + " inputs with 2..8 examples");

  const double up = stats::spearman({1, 2, 3, 4}, {10, 20, 30, 40}).rho;
  const double down = stats::spearman({1, 2, 3, 4}, {40, 30, 20, 10}).rho;
  o.check(up == 1.0 && down == -1.0, "Spearman trivial cases " + fmt(up) + ", " + fmt(down));

  int weat_bad = 0;
  for (int k = 0; k < 50; ++k) {
    Rng rng = make_rng(2024, "acceptance.c6.weat", k);
    std::normal_distribution<double> normal;
    auto draw = [&](int count) {
      std::vector<stats::Vec> v(count, stats::Vec(8));
      for (auto& e : v)
        for (auto& c : e) c = normal(rng);
      return v;
    };
    const stats::EmbeddingSets s{draw(4), draw(4), draw(5), draw(3)};
    const double score = stats::weat(s, 1000, 1).score;
    if (stats::weat({s.target_y, s.target_x, s.attr_a, s.attr_b}, 1000, 1).score != -score)
      ++weat_bad;
    if (stats::weat({s.target_x, s.target_y, s.attr_b, s.attr_a}, 1000, 1).score != -score)
      ++weat_bad;
    if (stats::weat({s.target_x, s.target_y, s.attr_a, s.attr_a}, 1000, 1).score != 0.0)
      ++weat_bad;
    if (stats::weat({s.target_x, s.target_x, s.attr_a, s.attr_b}, 1000, 1).score != 0.0)
      ++weat_bad;
  }
  o.check(weat_bad == 0, "WEAT antisymmetry and zero cases exact on 50 random set families (" +
                             std::to_string(weat_bad) + " violations)");

  std::vector<double> ps;
  for (int run = 0; run < 1000; ++run) {
    Rng rng = make_rng(2024, "acceptance.c6.null", run);
    std::bernoulli_distribution coin(0.5);
    stats::StratifiedOutcomes out;
    const int n = 200;
    for (int e = 0; e < n; ++e) {
      out.stratum.push_back(coin(rng) ? "a" : "b");
      out.example_id.push_back(std::to_string(e));
    }
    if (std::count(out.stratum.begin(), out.stratum.end(), "a") == 0) out.stratum[0] = "a";
    for (int p = 0; p < 5; ++p) {
      out.predictor_id.push_back(std::to_string(p));
      std::vector<std::uint8_t> row(n);
      for (auto& c : row) c = static_cast<std::uint8_t>(coin(rng));
      out.correct.push_back(row);
    }
    ps.push_back(stats::permutation_variance_test(out, "a", 1000,
                                                  derive_seed(2024, "acceptance.c6.p", run),
                                                  env.threads)
                     .p);
  }
  const double ks = stats::ks_uniform_distance(ps);
  o.check(ks <= 0.05, "null p-values over 1000 seeded runs: KS distance " + fmt(ks, 3) +
                          " (gate 0.05)");
  return o;
}

// 7. Correlated cluster demo.
Outcome criterion7(const Env& env) {
  Outcome o;
  o.summary = "cluster representatives: iid-equivalent, shift-divergent";
  const fs::path dir = fresh_dir(env, "c7");
  run_cli({"--threads", std::to_string(env.threads), "--out-dir", dir.string(), "--config",
           (env.configs / "cluster.json").string(), "cluster", "demo"});
  nlohmann::json s;
  {
    std::ifstream in(dir / "cluster_summary.json");
    s = nlohmann::json::parse(in);
  }
  const double iid = s["iid_spread"], shift = s["shift_spread"], rho = s["spearman_rho"];
  const double h_iid = s["heuristic_iid"], median = s["median_random_iid"];
  o.check(5.0 * iid <= shift, "iid NMSE spread " + fmt(iid) + " vs shifted spread " +
                                  fmt(shift) + " (ratio " + fmt(shift / iid, 3) + ", gate 5x)");
  o.check(std::abs(rho) < 0.4, "iid vs shifted NMSE Spearman " + fmt(rho, 3) + " (gate |rho| < 0.4)");
  o.check(h_iid <= median, "heuristic iid NMSE " + fmt(h_iid) + " <= median random " + fmt(median));
  o.note("iid NMSE coefficient of variation " + pct(s["iid_cv"].get<double>()) +
         "; random sets with lower shifted NMSE than the heuristic: " +
         pct(s["heuristic_shift_percentile"].get<double>()));
  return o;
}

// Every leaf command, small sizes, at one and at several threads.
Outcome criterion8(const Env& env) {
  Outcome o;
  o.summary = "determinism across thread counts";
  const fs::path inputs = fresh_dir(env, "c8_inputs");
  {
    std::ofstream f(inputs / "ensemble.csv");
    f << "predictor_id,group,acc,auc\n";
    for (int i = 0; i < 12; ++i)
      f << 'p' << i << ",g" << i % 3 << ',' << 0.8 + 0.01 * (i % 5) << ','
        << 0.9 - 0.003 * (i * 7 % 11) << '\n';
  }
  {
    std::ofstream f(inputs / "outcomes.csv");
    f << "example_id,stratum,p1,p2,p3,p4\n";
    for (int e = 0; e < 40; ++e)
      f << e << ',' << (e % 4 == 0 ? "iv" : "other") << ',' << (e % 2) << ',' << (e % 3 == 0)
        << ',' << (e % 5 < 3) << ',' << ((e * 7) % 4 < 2) << '\n';
  }
  {
    std::ofstream f(inputs / "labels.csv");
    f << "example_id,m1,m2,m3\n";
    for (int e = 0; e < 20; ++e)
      f << e << ',' << e % 3 << ',' << (e + e / 7) % 3 << ',' << (e * 2) % 3 << '\n';
  }
  {
    std::ofstream f(inputs / "embeddings.csv");
    f << "token,x0,x1,x2\n";
    const char* tokens[] = {"x1", "x2", "x3", "y1", "y2", "y3", "a1", "a2", "b1", "b2"};
    for (int k = 0; k < 10; ++k)
      f << tokens[k] << ',' << std::sin(k + 1.0) << ',' << std::cos(2.0 * k) << ','
        << 0.1 * k - 0.4 << '\n';
  }
  const std::string in = inputs.string();
  const std::vector<std::vector<std::string>> commands = {
      {"sir", "simulate"},
      {"sir", "fit", "--noise-std", "1", "--max-iters", "300"},
      {"sir", "ensemble", "--noise-std", "1", "--members", "4", "--max-iters", "300"},
      {"rf", "train", "--d", "20", "--n", "40", "--width", "60", "--n-test", "2000"},
      {"rf", "risk", "--d", "20", "--n-over-d", "2", "--width-over-n-grid", "0.5,2",
       "--replicates", "4", "--n-test", "1000"},
      {"rf", "shift-curve", "--d", "20", "--n-over-d", "2", "--width-over-n-grid", "0.5,2",
       "--replicates", "4", "--n-test", "1000"},
      {"rf", "sensitivity-curve", "--d", "20", "--n-over-d", "2", "--width-over-d-grid",
       "0.5,4", "--replicates", "4", "--n-test", "1000"},
      {"rf", "theory-curve", "--metric", "shift"},
      {"stats", "f", "--input", in + "/ensemble.csv"},
      {"stats", "spearman", "--input", in + "/ensemble.csv", "--x", "acc", "--y", "auc"},
      {"stats", "permute", "--input", in + "/outcomes.csv", "--n-perm", "2000"},
      {"stats", "disagree", "--input", in + "/labels.csv"},
      {"stats", "weat", "--input", in + "/embeddings.csv", "--targets-x", "x1,x2,x3",
       "--targets-y", "y1,y2,y3", "--attributes-a", "a1,a2", "--attributes-b", "b1,b2"},
      {"cluster", "demo", "--n-sets", "10", "--k", "5", "--n-train", "2000", "--n-test",
       "1000", "--n-shift", "1000"},
  };
  const unsigned many = std::max(3u, env.threads);
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::string name = commands[c][0] + " " + commands[c][1];
    std::map<std::string, std::string> hashes[2];
    int files = 0;
    for (int variant = 0; variant < 2; ++variant) {
      const fs::path dir = fresh_dir(env, "c8_" + std::to_string(c) + "_" + std::to_string(variant));
      std::vector<std::string> args = {"--seed", "11", "--threads",
                                       std::to_string(variant == 0 ? 1u : many), "--out-dir",
                                       dir.string()};
      args.insert(args.end(), commands[c].begin(), commands[c].end());
      run_cli(args);
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".csv") continue;
        hashes[variant][entry.path().filename().string()] = sha256_file(entry.path().string());
      }
      files = static_cast<int>(hashes[variant].size());
    }
    o.check(files > 0 && hashes[0] == hashes[1],
            name + ": " + std::to_string(files) + " CSV file(s) identical at 1 and " +
                std::to_string(many) + " threads");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance gates"};
  std::vector<int> selected;
  Env env;
  env.threads = std::max(1u, std::thread::hardware_concurrency());
  std::string work = (fs::temp_directory_path() / "underspec-acceptance").string();
  std::string configs = UNDERSPEC_CONFIG_DIR;
  app.add_option("--criterion", selected, "Criteria to run (default: all)")
      ->check(CLI::Range(1, 8));
  app.add_option("--threads", env.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--work-dir", work, "Scratch directory for command outputs");
  app.add_option("--configs", configs, "Directory holding the JSON configs");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8};
  env.work = work;
  env.configs = configs;
  fs::create_directories(env.work);

  const std::function<Outcome(const Env&)> criteria[] = {criterion1, criterion2, criterion3,
                                                         criterion4, criterion5, criterion6,
                                                         criterion7, criterion8};
  bool all = true;
  for (int k : selected) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k - 1](env);
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = "error";
      o.details.push_back(std::string("error ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.summary
              << " [" << fmt(seconds, 3) << " s]\n";
    for (const auto& line : o.details) std::cout << "    " << line << '\n';
    std::cout.flush();
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
