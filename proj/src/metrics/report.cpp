#include "usmae/metrics/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "usmae/errors.hpp"

namespace usmae::metrics {

namespace {

std::string fmt17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::map<std::string, Aggregate> aggregate_folds(const std::vector<FoldRecord>& folds) {
  if (folds.size() < 2) throw ContractError("aggregate_folds needs at least two folds");
  std::map<std::string, std::vector<double>> values;
  for (const auto& f : folds)
    for (const auto& [name, v] : f.values) values[name].push_back(v);
  std::map<std::string, Aggregate> out;
  for (auto& [name, vs] : values) {
    if (vs.size() != folds.size()) {
      throw ContractError("aggregate_folds: metric '" + name + "' missing from some folds");
    }
    // sort so the result does not depend on fold order
    std::sort(vs.begin(), vs.end());
    // shifted by the first value so identical folds give exactly zero spread
    double shift = 0;
    for (double v : vs) shift += v - vs.front();
    const double mean = vs.front() + shift / static_cast<double>(vs.size());
    double sq = 0;
    for (double v : vs) sq += (v - mean) * (v - mean);
    out[name] = {mean, std::sqrt(sq / static_cast<double>(vs.size() - 1)), vs.size()};
  }
  return out;
}

void write_fold_csv(std::ostream& out, const std::vector<FoldRecord>& folds) {
  out << "repetition,fold,task,metric,value\n";
  for (const auto& f : folds)
    for (const auto& [name, v] : f.values)
      out << f.repetition << ',' << f.fold << ',' << f.task << ',' << name << ',' << fmt17(v)
          << '\n';
}

std::vector<FoldRecord> read_fold_csv(std::istream& in, const std::string& source) {
  std::vector<FoldRecord> out;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw ParseError(source + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "repetition,fold,task,metric,value") fail("unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) fail("expected 5 fields");
    FoldRecord key;
    double value = 0;
    try {
      std::size_t used = 0;
      key.repetition = std::stoi(fields[0]);
      key.fold = std::stoi(fields[1]);
      value = std::stod(fields[4], &used);
      if (used != fields[4].size()) fail("bad number");
    } catch (const std::logic_error&) {
      fail("bad number");
    }
    key.task = fields[2];
    auto it = std::find_if(out.begin(), out.end(), [&](const FoldRecord& r) {
      return r.repetition == key.repetition && r.fold == key.fold && r.task == key.task;
    });
    if (it == out.end()) {
      out.push_back(key);
      it = std::prev(out.end());
    }
    it->values[fields[3]] = value;
  }
  if (lineno == 0) fail("empty file");
  return out;
}

nlohmann::json summary_json(const std::map<std::string, Aggregate>& summary) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, a] : summary) {
    j[name] = {{"mean", a.mean}, {"std", a.std}, {"n_folds", a.n_folds}};
  }
  return j;
}

void write_roc_csv(std::ostream& out, const std::vector<CurvePoint>& roc) {
  out << "threshold,fpr,tpr\n";
  for (const auto& p : roc) out << fmt17(p.threshold) << ',' << fmt17(p.x) << ',' << fmt17(p.y) << '\n';
}

void write_pr_csv(std::ostream& out, const std::vector<CurvePoint>& pr) {
  out << "threshold,recall,precision\n";
  for (const auto& p : pr) out << fmt17(p.threshold) << ',' << fmt17(p.x) << ',' << fmt17(p.y) << '\n';
}

}  // namespace usmae::metrics
