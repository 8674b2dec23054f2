#pragma once

#include <map>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "usmae/metrics/metrics.hpp"

namespace usmae::metrics {

struct FoldRecord {
  int repetition = 0;
  int fold = 0;
  std::string task;  // e.g. "validation", "test"
  std::map<std::string, double> values;
};

struct Aggregate {
  double mean = 0;
  double std = 0;  // sample standard deviation
  std::size_t n_folds = 0;
};

// Per metric over the given records; needs at least two of them.
std::map<std::string, Aggregate> aggregate_folds(const std::vector<FoldRecord>& folds);

// repetition,fold,task,metric,value; 17 significant digits so values read
// back exactly.
void write_fold_csv(std::ostream& out, const std::vector<FoldRecord>& folds);

// Inverse of write_fold_csv; rows sharing (repetition, fold, task) merge.
// Throws ParseError naming the offending line.
std::vector<FoldRecord> read_fold_csv(std::istream& in, const std::string& source = "<fold csv>");

// metric -> {mean, std, n_folds}
nlohmann::json summary_json(const std::map<std::string, Aggregate>& summary);

// threshold,fpr,tpr
void write_roc_csv(std::ostream& out, const std::vector<CurvePoint>& roc);
// threshold,recall,precision
void write_pr_csv(std::ostream& out, const std::vector<CurvePoint>& pr);

}  // namespace usmae::metrics
