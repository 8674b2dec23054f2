#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "support/metric_oracles.hpp"
#include "usmae/errors.hpp"
#include "usmae/metrics/metrics.hpp"
#include "usmae/metrics/report.hpp"
#include "usmae/rng.hpp"

using namespace usmae;
using namespace usmae::metrics;

TEST_CASE("binary metrics examples") {
  auto m = binary_metrics({3, 5, 1, 1});
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.precision == doctest::Approx(0.75));
  CHECK(m.recall == doctest::Approx(0.75));
  CHECK(m.specificity == doctest::Approx(5.0 / 6.0));
  CHECK(m.f1 == doctest::Approx(0.75));
  CHECK(m.degenerate.empty());

  auto perfect = binary_metrics({4, 6, 0, 0});
  for (double v : {perfect.accuracy, perfect.precision, perfect.recall, perfect.specificity,
                   perfect.f1})
    CHECK(v == 1.0);

  auto none = binary_metrics({0, 5, 0, 3});
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(std::find(none.degenerate.begin(), none.degenerate.end(), "precision") !=
        none.degenerate.end());
}

TEST_CASE("binary confusion counts") {
  const int truth[] = {1, 1, 0, 0, 1};
  const int pred[] = {1, 0, 0, 1, 1};
  auto c = binary_confusion(truth, pred);
  CHECK(c == ConfusionCounts{2, 1, 1, 1});
  CHECK(c.total() == 5);
}

TEST_CASE("binary metrics match the naive formulas exactly") {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    ConfusionCounts c{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
    if (c.total() == 0) c.tn = 1;
    auto m = binary_metrics(c);
    auto n = testing::naive_binary(c.tp, c.tn, c.fp, c.fn);
    REQUIRE(m.accuracy == n.accuracy);
    REQUIRE(m.precision == n.precision);
    REQUIRE(m.recall == n.recall);
    REQUIRE(m.specificity == n.specificity);
    REQUIRE(m.f1 == n.f1);
  }
}

TEST_CASE("weighted metrics examples") {
  MultiConfusion diag(3);
  diag.at(0, 0) = 4;
  diag.at(1, 1) = 2;
  diag.at(2, 2) = 7;
  auto d = weighted_metrics(diag);
  for (double v : {d.accuracy, d.precision_w, d.recall_w, d.f1_w, d.specificity_w}) CHECK(v == 1.0);

  // equal supports: weighted equals macro average
  MultiConfusion two(2);
  two.at(0, 0) = 7;
  two.at(0, 1) = 3;
  two.at(1, 0) = 2;
  two.at(1, 1) = 8;
  auto w = weighted_metrics(two);
  CHECK(w.f1_w == doctest::Approx((w.per_class[0].f1 + w.per_class[1].f1) / 2));
  // per-class entries agree with the binary view of each class
  auto b = binary_metrics({8, 7, 3, 2});
  CHECK(w.per_class[1].precision == doctest::Approx(b.precision));
  CHECK(w.per_class[1].recall == doctest::Approx(b.recall));
  CHECK(w.per_class[1].specificity == doctest::Approx(b.specificity));

  std::vector<int> truth, pred;
  const int m[3][3] = {{5, 1, 0}, {1, 3, 1}, {0, 1, 2}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int r = 0; r < m[i][j]; ++r) {
        truth.push_back(i);
        pred.push_back(j);
      }
  auto got = weighted_metrics(multi_confusion(truth, pred, 3));
  auto oracle = testing::naive_weighted(truth, pred, 3);
  CHECK(got.f1_w == oracle.f1);
  CHECK(got.precision_w == oracle.precision);
  CHECK(got.recall_w == oracle.recall);
  CHECK(got.recall_w == doctest::Approx(got.accuracy));
}

TEST_CASE("weighted metrics match the naive formulas on random 3-class data") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(80);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(3));
      pred[i] = static_cast<int>(rng.below(3));
    }
    auto got = weighted_metrics(multi_confusion(truth, pred, 3));
    auto oracle = testing::naive_weighted(truth, pred, 3);
    REQUIRE(got.f1_w == oracle.f1);
    REQUIRE(got.precision_w == oracle.precision);
    REQUIRE(got.recall_w == oracle.recall);
  }
}

TEST_CASE("roc auc examples") {
  const double sep[] = {0.9, 0.8, 0.2, 0.1};
  const int sep_labels[] = {1, 1, 0, 0};
  CHECK(roc_auc(sep, sep_labels) == 1.0);
  const double same[] = {0.5, 0.5, 0.5, 0.5};
  CHECK(roc_auc(same, sep_labels) == 0.5);
  const double mixed[] = {0.9, 0.4, 0.6, 0.1};
  CHECK(roc_auc(mixed, sep_labels) == 0.75);
  const int one_class[] = {1, 1, 1, 1};
  CHECK_THROWS_AS(roc_auc(mixed, one_class), DegenerateError);
}

TEST_CASE("roc auc matches the pairwise count") {
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid so ties are common
      scores[i] = t % 2 ? static_cast<double>(rng.below(10)) / 10 : rng.uniform();
      labels[i] = static_cast<int>(rng.below(2));
    }
    labels[0] = 1;
    labels[1] = 0;
    REQUIRE(std::abs(roc_auc(scores, labels) - testing::brute_auc(scores, labels)) < 1e-12);

    // complement symmetry
    std::vector<double> flipped(n);
    std::vector<int> relabeled(n);
    for (std::size_t i = 0; i < n; ++i) {
      flipped[i] = 1 - scores[i];
      relabeled[i] = 1 - labels[i];
    }
    REQUIRE(std::abs(roc_auc(flipped, relabeled) - roc_auc(scores, labels)) < 1e-12);
  }
}

TEST_CASE("curve points") {
  const double s[] = {0.9, 0.1};
  const int l[] = {1, 0};
  auto c = curve_points(s, l);
  REQUIRE(c.roc.size() == 3);
  CHECK(c.roc[0].x == 0.0);
  CHECK(c.roc[0].y == 0.0);
  CHECK(c.roc[1].x == 0.0);
  CHECK(c.roc[1].y == 1.0);
  CHECK(c.roc[2].x == 1.0);
  CHECK(c.roc[2].y == 1.0);

  const double s2[] = {0.3, 0.8, 0.5, 0.1, 0.7};
  const int l2[] = {0, 1, 0, 0, 1};
  auto c2 = curve_points(s2, l2);
  CHECK(c2.pr.front().x == 1.0);
  CHECK(c2.pr.front().y == doctest::Approx(2.0 / 5.0));
  for (std::size_t i = 1; i < c2.pr.size(); ++i) CHECK(c2.pr[i].threshold > c2.pr[i - 1].threshold);

  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(100);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform();
      labels[i] = static_cast<int>(rng.below(2));
    }
    labels[0] = 1;
    labels[1] = 0;
    auto cv = curve_points(scores, labels);
    REQUIRE(std::abs(trapezoid(cv.roc) - roc_auc(scores, labels)) < 1e-9);
    for (std::size_t i = 1; i < cv.roc.size(); ++i) {
      REQUIRE(cv.roc[i].x >= cv.roc[i - 1].x);
      REQUIRE(cv.roc[i].y >= cv.roc[i - 1].y);
    }
    REQUIRE(cv.roc.back().x == 1.0);
    REQUIRE(cv.roc.back().y == 1.0);
  }
}

TEST_CASE("multiclass auc") {
  const double onehot[] = {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0};
  const int labels[] = {0, 1, 2, 0};
  auto perfect = multiclass_auc(onehot, labels, 3);
  for (double a : perfect.per_class) CHECK(a == 1.0);
  CHECK(perfect.weighted == 1.0);

  std::vector<double> flat(12, 1.0 / 3);
  auto chance = multiclass_auc(flat, labels, 3);
  for (double a : chance.per_class) CHECK(a == 0.5);

  const int missing[] = {0, 1, 1, 0};
  CHECK_THROWS_AS(multiclass_auc(onehot, missing, 3), DegenerateError);

  Rng rng(5);
  const std::size_t n = 60;
  std::vector<double> probs(n * 3);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 3);
    for (int c = 0; c < 3; ++c) probs[i * 3 + c] = rng.uniform();
  }
  auto got = multiclass_auc(probs, y, 3);
  double weighted = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> s(n);
    std::vector<int> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = probs[i * 3 + c];
      b[i] = y[i] == c;
    }
    CHECK(got.per_class[c] == roc_auc(s, b));
    weighted += got.per_class[c] / 3;
  }
  CHECK(got.weighted == doctest::Approx(weighted).epsilon(1e-12));
}

TEST_CASE("fold aggregation") {
  FoldRecord a{0, 0, "validation", {{"f1", 0.8}}};
  FoldRecord b{0, 1, "validation", {{"f1", 0.9}}};
  auto agg = aggregate_folds({a, b});
  CHECK(agg["f1"].mean == doctest::Approx(0.85));
  CHECK(agg["f1"].std == doctest::Approx(0.0707106781).epsilon(1e-8));
  CHECK(agg["f1"].n_folds == 2);
  CHECK(aggregate_folds({a, a, a})["f1"].std == 0.0);
  CHECK_THROWS_AS(aggregate_folds({a}), ContractError);

  Rng rng(6);
  std::vector<FoldRecord> folds;
  for (int i = 0; i < 10; ++i) folds.push_back({0, i, "test", {{"auc", rng.uniform()}}});
  auto forward = aggregate_folds(folds);
  std::reverse(folds.begin(), folds.end());
  auto backward = aggregate_folds(folds);
  CHECK(forward["auc"].mean == backward["auc"].mean);
  CHECK(forward["auc"].std == backward["auc"].std);
}

TEST_CASE("report serialization") {
  std::ostringstream csv;
  const std::vector<FoldRecord> folds = {{1, 2, "test", {{"auc", 1.0 / 3}, {"f1", 0.1}}},
                                         {1, 2, "validation", {{"auc", 2.0 / 3}}}};
  write_fold_csv(csv, folds);
  CHECK(csv.str() ==
        "repetition,fold,task,metric,value\n1,2,test,auc,0.33333333333333331\n"
        "1,2,test,f1,0.10000000000000001\n1,2,validation,auc,0.66666666666666663\n");
  std::istringstream back(csv.str());
  const auto read = read_fold_csv(back);
  REQUIRE(read.size() == 2);
  CHECK(read[0].values == folds[0].values);
  CHECK(read[1].task == "validation");
  CHECK(read[1].values.at("auc") == 2.0 / 3);
  std::istringstream bad("repetition,fold,task,metric,value\n1,x,test,auc,1\n");
  CHECK_THROWS_WITH_AS(read_fold_csv(bad, "m.csv"), doctest::Contains("m.csv:2"), usmae::ParseError);

  auto j = summary_json({{"f1", {0.85, 0.07, 2}}});
  CHECK(j["f1"]["mean"] == 0.85);
  CHECK(j["f1"]["n_folds"] == 2);

  std::ostringstream roc;
  write_roc_csv(roc, {{INFINITY, 0, 0}, {0.5, 0, 1}});
  CHECK(roc.str() == "threshold,fpr,tpr\ninf,0,0\n0.5,0,1\n");
}

TEST_CASE("evaluation report keys") {
  const double probs[] = {0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.3, 0.7};
  const int labels[] = {0, 1, 0, 1};
  auto r = evaluate_predictions(probs, labels, 2);
  CHECK(r.at("auc") == 1.0);
  CHECK(r.at("accuracy") == 1.0);
  CHECK(r.count("specificity") == 1);
}
