#include "usmae/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "usmae/errors.hpp"
#include "usmae/rng.hpp"

namespace usmae::data {

namespace {

constexpr int kNumLabels = 3;

// A unit of assignment: one record in image mode, one group in group mode.
struct Unit {
  std::vector<std::size_t> members;
  int label = 0;
};

// Units of each label (majority label of a group, lowest index on ties), in
// order of first appearance.
std::vector<std::vector<Unit>> make_units(const std::vector<SampleRecord>& records,
                                          std::span<const std::size_t> indices, SplitMode mode) {
  std::vector<Unit> units;
  if (mode == SplitMode::image) {
    for (auto i : indices) units.push_back({{i}, static_cast<int>(records[i].label)});
  } else {
    std::map<std::string, std::size_t> by_group;
    for (auto i : indices) {
      const auto& g = records[i].group;
      if (g.empty()) {
        units.push_back({{i}, 0});
        continue;
      }
      auto [it, fresh] = by_group.emplace(g, units.size());
      if (fresh) units.push_back({});
      units[it->second].members.push_back(i);
    }
    for (auto& u : units) {
      int counts[kNumLabels] = {0, 0, 0};
      for (auto i : u.members) ++counts[static_cast<int>(records[i].label)];
      u.label = static_cast<int>(std::max_element(counts, counts + kNumLabels) - counts);
    }
  }
  std::vector<std::vector<Unit>> out(kNumLabels);
  for (auto& u : units) out[u.label].push_back(std::move(u));
  return out;
}

std::size_t unit_size(const std::vector<Unit>& units) {
  std::size_t n = 0;
  for (const auto& u : units) n += u.members.size();
  return n;
}

// Largest-remainder apportionment of round(fraction * total) over classes.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, double fraction) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::vector<std::size_t> alloc(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double exact = fraction * static_cast<double>(sizes[c]);
    alloc[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += alloc[c];
    remainders.push_back({exact - std::floor(exact), c});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i) {
    if (remainders[i].first > 0) {
      ++alloc[remainders[i].second];
      ++assigned;
    }
  }
  return alloc;
}

Rng split_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, SeedLabel::split) + stream);
}

}  // namespace

HoldoutSplit holdout_split(const std::vector<SampleRecord>& records, double test_fraction,
                           std::uint64_t seed, SplitMode mode) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ContractError("test fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> all(records.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto units = make_units(records, all, mode);
  std::vector<std::size_t> sizes(kNumLabels);
  for (int c = 0; c < kNumLabels; ++c) {
    sizes[c] = unit_size(units[c]);
    if (sizes[c] == 1) {
      throw ContractError("class " + std::string(label_name(static_cast<Label>(c))) +
                          " has a single sample; a stratified holdout needs at least 2");
    }
  }
  const auto targets = apportion(sizes, test_fraction);
  Rng rng = split_rng(seed, 0);
  HoldoutSplit out;
  for (int c = 0; c < kNumLabels; ++c) {
    if (sizes[c] > 0 && targets[c] >= sizes[c]) {
      throw ContractError("test fraction leaves no cross-validation samples of class " +
                          std::string(label_name(static_cast<Label>(c))));
    }
    auto& us = units[c];
    rng.shuffle(std::span(us));
    std::size_t taken = 0;
    for (auto& u : us) {
      const bool to_test = taken + u.members.size() <= targets[c] && taken < targets[c];
      if (to_test) taken += u.members.size();
      auto& dst = to_test ? out.test : out.cv;
      dst.insert(dst.end(), u.members.begin(), u.members.end());
    }
  }
  std::sort(out.cv.begin(), out.cv.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<std::size_t> FoldPlan::train(std::size_t r, std::size_t f) const {
  const auto& val = validation.at(r).at(f);
  std::vector<std::size_t> out;
  std::set_difference(cv.begin(), cv.end(), val.begin(), val.end(), std::back_inserter(out));
  return out;
}

FoldPlan cv_plan(const std::vector<SampleRecord>& records, std::span<const std::size_t> cv,
                 std::size_t k, std::size_t repeats, std::uint64_t seed, SplitMode mode) {
  if (k < 2) throw ContractError("cross-validation needs k >= 2, got " + std::to_string(k));
  if (repeats < 1) throw ContractError("cross-validation needs at least one repetition");
  for (auto i : cv) {
    if (i >= records.size()) throw ContractError("cv index out of range");
  }
  FoldPlan plan;
  plan.seed = seed;
  plan.num_records = records.size();
  plan.k = k;
  plan.repeats = repeats;
  plan.mode = mode;
  plan.cv.assign(cv.begin(), cv.end());
  std::sort(plan.cv.begin(), plan.cv.end());

  const auto base_units = make_units(records, plan.cv, mode);
  for (int c = 0; c < kNumLabels; ++c) {
    const auto n = base_units[c].size();
    if (n > 0 && n < k) {
      throw ContractError("class " + std::string(label_name(static_cast<Label>(c))) + " has " +
                          std::to_string(n) + " samples, fewer than k = " + std::to_string(k));
    }
  }
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng = split_rng(seed, r + 1);
    auto units = base_units;
    std::vector<std::vector<std::size_t>> folds(k);
    if (mode == SplitMode::image) {
      std::size_t offset = 0;
      for (int c = 0; c < kNumLabels; ++c) {
        rng.shuffle(std::span(units[c]));
        for (std::size_t i = 0; i < units[c].size(); ++i) {
          folds[(offset + i) % k].push_back(units[c][i].members[0]);
        }
        offset = (offset + units[c].size()) % k;
      }
    } else {
      std::vector<std::vector<std::size_t>> per_class(k, std::vector<std::size_t>(kNumLabels, 0));
      for (int c = 0; c < kNumLabels; ++c) {
        rng.shuffle(std::span(units[c]));
        std::stable_sort(units[c].begin(), units[c].end(), [](const Unit& a, const Unit& b) {
          return a.members.size() > b.members.size();
        });
        for (const auto& u : units[c]) {
          std::size_t best = 0;
          for (std::size_t f = 1; f < k; ++f) {
            const auto key = [&](std::size_t x) {
              return std::pair(per_class[x][c], folds[x].size());
            };
            if (key(f) < key(best)) best = f;
          }
          per_class[best][c] += u.members.size();
          folds[best].insert(folds[best].end(), u.members.begin(), u.members.end());
        }
      }
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    plan.validation.push_back(std::move(folds));
  }
  return plan;
}

FoldPlan make_fold_plan(const std::vector<SampleRecord>& records, double test_fraction,
                        std::size_t k, std::size_t repeats, std::uint64_t seed, SplitMode mode) {
  const auto hold = holdout_split(records, test_fraction, seed, mode);
  auto plan = cv_plan(records, hold.cv, k, repeats, seed, mode);
  plan.test = hold.test;
  return plan;
}

std::string format_fold_plan(const FoldPlan& plan) {
  std::ostringstream out;
  out << "# usmae fold plan\n";
  out << "# seed=" << plan.seed << " records=" << plan.num_records << " test=" << plan.test.size()
      << " cv=" << plan.cv.size() << " folds=" << plan.k << " repeats=" << plan.repeats
      << " mode=" << (plan.mode == SplitMode::image ? "image" : "group") << "\n";
  out << "repetition\tfold\tsubset\tid\n";
  for (auto id : plan.test) out << "0\t0\ttest\t" << id << '\n';
  for (std::size_t r = 0; r < plan.validation.size(); ++r) {
    for (std::size_t f = 0; f < plan.validation[r].size(); ++f) {
      for (auto id : plan.train(r, f)) out << r + 1 << '\t' << f + 1 << "\ttrain\t" << id << '\n';
      for (auto id : plan.validation[r][f])
        out << r + 1 << '\t' << f + 1 << "\tvalidation\t" << id << '\n';
    }
  }
  return out.str();
}

void write_fold_plan(const std::filesystem::path& path, const FoldPlan& plan) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write fold plan " + path.string());
  f << format_fold_plan(plan);
  if (!f) throw IoError("failed writing fold plan " + path.string());
}

FoldPlan read_fold_plan(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open fold plan " + path.string());
  const std::string what = path.string();
  std::string line;
  FoldPlan plan;
  if (!std::getline(f, line) || line != "# usmae fold plan") {
    throw ParseError(what + ":1: not a fold plan");
  }
  if (!std::getline(f, line) || line.rfind("# ", 0) != 0) throw ParseError(what + ":2: missing summary");
  std::map<std::string, std::string> fields;
  {
    std::istringstream ss(line.substr(2));
    std::string tok;
    while (ss >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) throw ParseError(what + ":2: malformed field '" + tok + "'");
      fields[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  try {
    plan.seed = std::stoull(fields.at("seed"));
    plan.num_records = std::stoull(fields.at("records"));
    plan.k = std::stoull(fields.at("folds"));
    plan.repeats = std::stoull(fields.at("repeats"));
    const auto& mode = fields.at("mode");
    if (mode != "image" && mode != "group") throw ParseError(what + ":2: unknown mode " + mode);
    plan.mode = mode == "image" ? SplitMode::image : SplitMode::group;
  } catch (const std::out_of_range&) {
    throw ParseError(what + ":2: incomplete summary");
  } catch (const std::invalid_argument&) {
    throw ParseError(what + ":2: malformed number");
  }
  if (!std::getline(f, line) || line != "repetition\tfold\tsubset\tid") {
    throw ParseError(what + ":3: missing column header");
  }
  plan.validation.assign(plan.repeats, std::vector<std::vector<std::size_t>>(plan.k));
  std::vector<std::size_t> first_train;
  std::size_t line_no = 3;
  while (std::getline(f, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::size_t r, fold, id;
    std::string subset;
    if (!(ss >> r >> fold >> subset >> id)) {
      throw ParseError(what + ":" + std::to_string(line_no) + ": malformed line");
    }
    if (id >= plan.num_records) {
      throw ParseError(what + ":" + std::to_string(line_no) + ": id out of range");
    }
    if (subset == "test") {
      plan.test.push_back(id);
    } else if (r >= 1 && r <= plan.repeats && fold >= 1 && fold <= plan.k &&
               (subset == "train" || subset == "validation")) {
      if (subset == "validation") {
        plan.validation[r - 1][fold - 1].push_back(id);
        if (r == 1) plan.cv.push_back(id);
      }
    } else {
      throw ParseError(what + ":" + std::to_string(line_no) + ": bad repetition/fold/subset");
    }
  }
  std::sort(plan.test.begin(), plan.test.end());
  std::sort(plan.cv.begin(), plan.cv.end());
  for (auto& rep : plan.validation)
    for (auto& fold : rep) std::sort(fold.begin(), fold.end());
  return plan;
}

}  // namespace usmae::data
