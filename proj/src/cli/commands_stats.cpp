#include <cmath>
#include <fstream>
#include <set>

#include "context.hpp"
#include "underspec/common/csv.hpp"
#include "underspec/common/error.hpp"
#include "underspec/common/random.hpp"
#include "underspec/stats/stats.hpp"
#include "underspec/stats/tables.hpp"

namespace underspec::cli {

namespace {

void write_json(Outputs& outputs, const std::string& name, const Json& j) {
  std::ofstream f(outputs.file(name));
  f << j.dump(2) << '\n';
}

// JSON cannot hold infinity; write it as a string.
Json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

void register_stats(CLI::App& root, Registry& reg) {
  CLI::App* stats_app = root.add_subcommand("stats", "Ensemble statistics");
  stats_app->require_subcommand(1);

  {
    struct Opts {
      std::string input;
      std::vector<std::string> metrics;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(stats_app, "f", "One-way F statistic of metrics across seed groups",
                         {"stats", "f"});
    leaf.app->add_option("--input", o->input, "CSV: predictor_id, group, metric columns")
        ->required();
    leaf.app->add_option("--metric", o->metrics, "Metrics to test (default: all)")
        ->delimiter(',');
    leaf.action = [o](const CommonOptions&, Outputs& outputs, Json& report) {
      const auto table = stats::ensemble_table_from_csv(csv::read_file(o->input));
      std::vector<std::string> metrics = o->metrics;
      if (metrics.empty())
        for (const auto& [name, _] : table.metrics) metrics.push_back(name);
      std::vector<std::string> warnings;
      Json results = Json::array();
      std::ofstream f(outputs.file("f_stats.csv"));
      csv::Writer w(f);
      w.header({"metric", "f", "p", "msb", "msw", "df_between", "df_within", "rows_used"});
      for (const auto& m : metrics) {
        const auto r = stats::f_statistic(table, m, &warnings);
        w.cell(m).cell(r.f).cell(r.p).cell(r.msb).cell(r.msw).cell(r.df_between)
            .cell(r.df_within).cell(r.rows_used);
        w.end_row();
        results.push_back({{"metric", m},
                           {"f", number(r.f)},
                           {"p", r.p},
                           {"df_between", r.df_between},
                           {"df_within", r.df_within},
                           {"rows_used", r.rows_used}});
      }
      f.close();
      report["results"] = results;
      report["warnings"] = warnings;
      write_json(outputs, "f_stats.json", report);
    };
  }

  {
    struct Opts {
      std::string input, x, y;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(stats_app, "spearman", "Spearman correlation with a 95% interval",
                         {"stats", "spearman"});
    leaf.app->add_option("--input", o->input, "CSV with numeric columns")->required();
    leaf.app->add_option("--x", o->x, "First column")->required();
    leaf.app->add_option("--y", o->y, "Second column")->required();
    leaf.action = [o](const CommonOptions&, Outputs& outputs, Json& report) {
      const auto t = csv::read_file(o->input);
      const std::size_t cx = t.column(o->x), cy = t.column(o->y);
      std::vector<double> x, y;
      for (const auto& row : t.rows) {
        if (stats::is_missing(row[cx]) || stats::is_missing(row[cy])) {
          report["warnings"].push_back("dropped row with a missing value");
          continue;
        }
        x.push_back(csv::parse_double(row[cx]));
        y.push_back(csv::parse_double(row[cy]));
      }
      const auto r = stats::spearman(x, y);
      {
        std::ofstream f(outputs.file("spearman.csv"));
        csv::Writer w(f);
        w.header({"x", "y", "rho", "ci_low", "ci_high", "n"});
        w.cell(o->x).cell(o->y).cell(r.rho).cell(r.ci_low).cell(r.ci_high).cell(r.n);
        w.end_row();
      }
      report["rho"] = r.rho;
      report["ci_low"] = number(r.ci_low);
      report["ci_high"] = number(r.ci_high);
      report["n"] = r.n;
      write_json(outputs, "spearman.json", report);
    };
  }

  {
    struct Opts {
      std::string input;
      std::vector<std::string> strata;
      int n_perm = 10000;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(stats_app, "permute",
                         "Permutation test of across-predictor accuracy variance per stratum",
                         {"stats", "permute"});
    leaf.app->add_option("--input", o->input, "CSV: example_id, stratum, 0/1 predictor columns")
        ->required();
    leaf.app->add_option("--stratum", o->strata, "Strata to test (default: all)")->delimiter(',');
    leaf.app->add_option("--n-perm", o->n_perm, "Permutations (>= 1000)")->capture_default_str();
    leaf.action = [o](const CommonOptions& common, Outputs& outputs, Json& report) {
      const auto outcomes = stats::outcomes_from_csv(csv::read_file(o->input));
      std::vector<std::string> strata = o->strata;
      if (strata.empty()) {
        std::set<std::string> seen;
        for (const auto& s : outcomes.stratum)
          if (seen.insert(s).second) strata.push_back(s);
      }
      Json results = Json::array();
      std::ofstream f(outputs.file("permutation.csv"));
      csv::Writer w(f);
      w.header({"stratum", "observed_variance", "p", "n_perm", "exact"});
      for (std::size_t k = 0; k < strata.size(); ++k) {
        const auto r = stats::permutation_variance_test(
            outcomes, strata[k], o->n_perm, derive_seed(common.seed, "cli.permute", k),
            common.threads);
        w.cell(strata[k]).cell(r.observed).cell(r.p).cell(r.n_perm).cell(r.exact ? 1 : 0);
        w.end_row();
        results.push_back({{"stratum", strata[k]},
                           {"observed_variance", r.observed},
                           {"p", r.p},
                           {"n_perm", r.n_perm},
                           {"exact", r.exact}});
      }
      f.close();
      report["results"] = results;
      write_json(outputs, "permutation.json", report);
    };
  }

  {
    struct Opts {
      std::string input;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(stats_app, "disagree", "Pairwise prediction disagreement",
                         {"stats", "disagree"});
    leaf.app->add_option("--input", o->input, "CSV: example_id, one label column per predictor")
        ->required();
    leaf.action = [o](const CommonOptions&, Outputs& outputs, Json& report) {
      std::vector<std::string> names;
      const auto preds = stats::predictions_from_csv(csv::read_file(o->input), &names);
      {
        std::ofstream f(outputs.file("disagreement.csv"));
        csv::Writer w(f);
        w.header({"predictor_a", "predictor_b", "disagreement"});
        for (std::size_t a = 0; a < preds.size(); ++a)
          for (std::size_t b = a + 1; b < preds.size(); ++b) {
            w.cell(names[a]).cell(names[b]).cell(stats::disagreement(preds[a], preds[b]));
            w.end_row();
          }
      }
      report["mean_pairwise_disagreement"] = stats::mean_pairwise_disagreement(preds);
      write_json(outputs, "disagreement.json", report);
    };
  }

  {
    struct Opts {
      std::string input;
      std::vector<std::string> x, y, a, b;
      int n_perm = 10000;
    };
    auto o = std::make_shared<Opts>();
    Leaf& leaf = reg.add(stats_app, "weat", "Word embedding association test", {"stats", "weat"});
    leaf.app->add_option("--input", o->input, "CSV: token, then coordinates")->required();
    leaf.app->add_option("--targets-x", o->x, "Target set X tokens")->delimiter(',')->required();
    leaf.app->add_option("--targets-y", o->y, "Target set Y tokens")->delimiter(',')->required();
    leaf.app->add_option("--attributes-a", o->a, "Attribute set A tokens")
        ->delimiter(',')
        ->required();
    leaf.app->add_option("--attributes-b", o->b, "Attribute set B tokens")
        ->delimiter(',')
        ->required();
    leaf.app->add_option("--n-perm", o->n_perm, "Permutations when not enumerating")
        ->capture_default_str();
    leaf.action = [o](const CommonOptions& common, Outputs& outputs, Json& report) {
      const auto table = stats::embeddings_from_csv(csv::read_file(o->input));
      stats::EmbeddingSets sets{stats::select_embeddings(table, o->x),
                                stats::select_embeddings(table, o->y),
                                stats::select_embeddings(table, o->a),
                                stats::select_embeddings(table, o->b)};
      const auto r = stats::weat(sets, o->n_perm, common.seed);
      {
        std::ofstream f(outputs.file("weat.csv"));
        csv::Writer w(f);
        w.header({"score", "effect", "p", "n_perm", "exact"});
        w.cell(r.score).cell(r.effect).cell(r.p).cell(r.n_perm).cell(r.exact ? 1 : 0);
        w.end_row();
      }
      report["score"] = r.score;
      report["effect"] = number(r.effect);
      report["p"] = r.p;
      report["n_perm"] = r.n_perm;
      report["exact"] = r.exact;
      write_json(outputs, "weat.json", report);
    };
  }
}

}  // namespace underspec::cli
