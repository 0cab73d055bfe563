#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "underspec/common/csv.hpp"
#include "underspec/stats/stats.hpp"

namespace underspec::stats {

// Empty, "NA" and "nan" cells.
bool is_missing(std::string_view cell);

// Columns predictor_id, group, then one column per metric. Empty, "NA" and
// "nan" cells load as NaN.
EnsembleTable ensemble_table_from_csv(const csv::Table& t);

// Columns example_id, stratum, then one 0/1 column per predictor.
StratifiedOutcomes outcomes_from_csv(const csv::Table& t);

// Columns token, then the embedding coordinates.
std::map<std::string, Vec> embeddings_from_csv(const csv::Table& t);

// Looks up each token; unknown tokens throw UsageError.
std::vector<Vec> select_embeddings(const std::map<std::string, Vec>& table,
                                   const std::vector<std::string>& tokens);

// Columns example_id, then one label column per predictor. Returns one label
// vector per predictor, in header order.
std::vector<std::vector<std::string>> predictions_from_csv(const csv::Table& t,
                                                           std::vector<std::string>* names = nullptr);

}  // namespace underspec::stats
