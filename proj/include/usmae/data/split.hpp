#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "usmae/data/manifest.hpp"

namespace usmae::data {

// image: every record is placed independently (stratified per class).
// group: records sharing a group id always land in the same subset; the
// per-class balance then holds only approximately.
enum class SplitMode { image, group };

struct HoldoutSplit {
  std::vector<std::size_t> cv;    // record indices, ascending
  std::vector<std::size_t> test;  // record indices, ascending
};

// Per-class test counts are the largest-remainder apportionment of
// round(test_fraction * N) over the classes, so each is within one sample of
// test_fraction * n_class.
HoldoutSplit holdout_split(const std::vector<SampleRecord>& records, double test_fraction,
                           std::uint64_t seed, SplitMode mode = SplitMode::image);

struct FoldPlan {
  std::uint64_t seed = 0;
  std::size_t num_records = 0;
  std::size_t k = 4;
  std::size_t repeats = 5;
  SplitMode mode = SplitMode::image;
  std::vector<std::size_t> test;
  std::vector<std::size_t> cv;
  // validation[r][f]: ascending record indices of fold f in repetition r
  std::vector<std::vector<std::vector<std::size_t>>> validation;

  // cv minus validation[r][f], ascending.
  std::vector<std::size_t> train(std::size_t r, std::size_t f) const;
  bool operator==(const FoldPlan&) const = default;
};

// Repeated stratified k-fold over `cv` (record indices). Each repetition
// shuffles every class and deals its records round-robin onto the folds,
// continuing the deal position from one class to the next.
FoldPlan cv_plan(const std::vector<SampleRecord>& records, std::span<const std::size_t> cv,
                 std::size_t k, std::size_t repeats, std::uint64_t seed,
                 SplitMode mode = SplitMode::image);

// Holdout followed by cv_plan on the remainder.
FoldPlan make_fold_plan(const std::vector<SampleRecord>& records, double test_fraction,
                        std::size_t k, std::size_t repeats, std::uint64_t seed,
                        SplitMode mode = SplitMode::image);

// Tab-separated text: two comment lines with the seed and counts, a column
// header, then one `repetition fold subset id` line per membership. Test
// lines use repetition and fold 0; others are 1-based.
std::string format_fold_plan(const FoldPlan& plan);
void write_fold_plan(const std::filesystem::path& path, const FoldPlan& plan);
FoldPlan read_fold_plan(const std::filesystem::path& path);

}  // namespace usmae::data
