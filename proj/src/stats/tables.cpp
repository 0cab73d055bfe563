#include "underspec/stats/tables.hpp"

#include <cmath>
#include <limits>

#include "underspec/common/error.hpp"

namespace underspec::stats {

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "nan" || cell == "NaN";
}

namespace {

void require_header(const csv::Table& t, std::size_t idx, const char* name) {
  if (t.header.size() <= idx || t.header[idx] != name)
    throw UsageError(std::string("expected column '") + name + "' at position " +
                     std::to_string(idx + 1));
}

}  // namespace

EnsembleTable ensemble_table_from_csv(const csv::Table& t) {
  require_header(t, 0, "predictor_id");
  require_header(t, 1, "group");
  if (t.header.size() < 3) throw UsageError("ensemble table has no metric columns");
  EnsembleTable out;
  for (const auto& row : t.rows) {
    out.predictor_id.push_back(row[0]);
    out.group.push_back(row[1]);
    for (std::size_t c = 2; c < t.header.size(); ++c)
      out.metrics[t.header[c]].push_back(is_missing(row[c])
                                             ? std::numeric_limits<double>::quiet_NaN()
                                             : csv::parse_double(row[c]));
  }
  return out;
}

StratifiedOutcomes outcomes_from_csv(const csv::Table& t) {
  require_header(t, 0, "example_id");
  require_header(t, 1, "stratum");
  if (t.header.size() < 3) throw UsageError("outcomes table has no predictor columns");
  StratifiedOutcomes out;
  out.predictor_id.assign(t.header.begin() + 2, t.header.end());
  out.correct.assign(out.predictor_id.size(), {});
  for (const auto& row : t.rows) {
    out.example_id.push_back(row[0]);
    out.stratum.push_back(row[1]);
    for (std::size_t c = 2; c < row.size(); ++c) {
      if (row[c] != "0" && row[c] != "1")
        throw UsageError("outcome cells must be 0 or 1, got '" + row[c] + "'");
      out.correct[c - 2].push_back(row[c] == "1" ? 1 : 0);
    }
  }
  return out;
}

std::map<std::string, Vec> embeddings_from_csv(const csv::Table& t) {
  require_header(t, 0, "token");
  if (t.header.size() < 2) throw UsageError("embedding table has no coordinates");
  std::map<std::string, Vec> out;
  for (const auto& row : t.rows) {
    Vec v;
    for (std::size_t c = 1; c < row.size(); ++c) v.push_back(csv::parse_double(row[c]));
    if (!out.emplace(row[0], std::move(v)).second)
      throw UsageError("duplicate token '" + row[0] + "'");
  }
  return out;
}

std::vector<Vec> select_embeddings(const std::map<std::string, Vec>& table,
                                   const std::vector<std::string>& tokens) {
  std::vector<Vec> out;
  for (const auto& tok : tokens) {
    const auto it = table.find(tok);
    if (it == table.end()) throw UsageError("unknown token '" + tok + "'");
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::vector<std::string>> predictions_from_csv(const csv::Table& t,
                                                           std::vector<std::string>* names) {
  require_header(t, 0, "example_id");
  if (t.header.size() < 3) throw UsageError("need at least two predictor columns");
  std::vector<std::vector<std::string>> out(t.header.size() - 1);
  for (const auto& row : t.rows)
    for (std::size_t c = 1; c < row.size(); ++c) out[c - 1].push_back(row[c]);
  if (names) names->assign(t.header.begin() + 1, t.header.end());
  return out;
}

}  // namespace underspec::stats
