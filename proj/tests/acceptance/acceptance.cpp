// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; `--work DIR` keeps the artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "support/gradcheck.hpp"
#include "support/metric_oracles.hpp"
#include "support/random_network.hpp"
#include "usmae/data/phantom.hpp"
#include "usmae/data/preprocess.hpp"
#include "usmae/data/split.hpp"
#include "usmae/errors.hpp"
#include "usmae/metrics/metrics.hpp"
#include "usmae/optim/adamw.hpp"
#include "usmae/optim/checkpoint.hpp"
#include "usmae/optim/train.hpp"
#include "usmae/rng.hpp"
#include "usmae/scorecam/scorecam.hpp"
#include "usmae/vitmae/model.hpp"
#include "usmae/vitmae/patch.hpp"

using namespace usmae;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

fs::path g_work;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  double worst = 0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto net = testing::make_random_network<double>(1000 + seed);
    const auto r = testing::gradcheck<double>(net.params, net.loss, 1e-3);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  }
  return {worst < 1e-5, format("20 networks, %zu entries, max relative error %.3g", checked, worst)};
}

// ---------------------------------------------------------------- 2

Outcome metric_oracles() {
  using namespace metrics;
  Rng rng(2024);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    ConfusionCounts c{rng.below(60), rng.below(60), rng.below(60), rng.below(60)};
    if (c.total() == 0) c.tp = 1;
    const auto m = binary_metrics(c);
    const auto n = testing::naive_binary(c.tp, c.tn, c.fp, c.fn);
    mismatches += m.accuracy != n.accuracy || m.precision != n.precision || m.recall != n.recall ||
                  m.specificity != n.specificity || m.f1 != n.f1;
  }
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(120);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(3));
      pred[i] = static_cast<int>(rng.below(3));
    }
    const auto got = weighted_metrics(multi_confusion(truth, pred, 3));
    const auto oracle = testing::naive_weighted(truth, pred, 3);
    mismatches += got.f1_w != oracle.f1 || got.precision_w != oracle.precision ||
                  got.recall_w != oracle.recall;
  }
  double worst = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.below(3) == 0 ? static_cast<double>(rng.below(5)) : rng.uniform();
      labels[i] = static_cast<int>(rng.below(2));
    }
    labels[0] = 0;
    labels[1] = 1;
    worst = std::max(worst, std::abs(roc_auc(scores, labels) - testing::brute_auc(scores, labels)));
  }
  return {mismatches == 0 && worst <= 1e-12,
          format("%zu exact mismatches over 1200 matrices, max AUC deviation %.3g", mismatches,
                 worst)};
}

// ---------------------------------------------------------------- 3

Outcome split_invariants() {
  Rng rng(77);
  double worst = 0;
  std::size_t leaks = 0, irreproducible = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<data::SampleRecord> recs;
    const std::size_t counts[3] = {20 + rng.below(300), rng.below(3) == 0 ? 0 : 8 + rng.below(60),
                                   8 + rng.below(150)};
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < counts[c]; ++i) {
        data::SampleRecord r;
        r.path = "img" + std::to_string(recs.size());
        r.label = static_cast<data::Label>(c);
        recs.push_back(r);
      }
    rng.shuffle(std::span(recs));
    const double frac = rng.uniform(0.1, 0.3);
    const std::size_t k = 2 + rng.below(4), repeats = 1 + rng.below(3);
    const std::uint64_t seed = rng.next_u64();
    const auto plan = data::make_fold_plan(recs, frac, k, repeats, seed);
    if (data::format_fold_plan(plan) !=
        data::format_fold_plan(data::make_fold_plan(recs, frac, k, repeats, seed))) {
      ++irreproducible;
    }
    auto per_class = [&](std::span<const std::size_t> ids) {
      std::array<double, 3> c{0, 0, 0};
      for (auto i : ids) c[static_cast<int>(recs[i].label)] += 1;
      return c;
    };
    const auto test = per_class(plan.test), cv = per_class(plan.cv);
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(test[c] - frac * counts[c]));
    std::set<std::size_t> test_ids(plan.test.begin(), plan.test.end());
    for (std::size_t r = 0; r < repeats; ++r)
      for (std::size_t f = 0; f < k; ++f) {
        const auto& val = plan.validation[r][f];
        const auto train = plan.train(r, f);
        const auto vc = per_class(val), tc = per_class(train);
        for (int c = 0; c < 3; ++c) {
          worst = std::max(worst, std::abs(vc[c] - cv[c] / k));
          worst = std::max(worst, std::abs(tc[c] - cv[c] * (k - 1) / k));
        }
        std::set<std::size_t> val_ids(val.begin(), val.end());
        for (auto i : train) leaks += val_ids.contains(i) || test_ids.contains(i);
        for (auto i : val) leaks += test_ids.contains(i);
      }
  }
  return {worst <= 1.0 && leaks == 0 && irreproducible == 0,
          format("max stratification deviation %.3f samples, %zu leaks, %zu irreproducible plans",
                 worst, leaks, irreproducible)};
}

// ---------------------------------------------------------------- 4

Outcome masking_and_loss() {
  std::size_t count_errors = 0;
  for (std::size_t n : {1u, 4u, 16u, 49u, 64u, 196u, 256u, 1024u})
    for (double ratio : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9}) {
      const auto plan = vitmae::sample_mask(n, ratio, n * 13 + 1);
      const auto hidden = static_cast<std::size_t>(std::count(plan.masked.begin(), plan.masked.end(), 1));
      count_errors += hidden != static_cast<std::size_t>(std::llround(ratio * n)) ||
                      hidden != plan.num_masked;
    }

  vitmae::ModelConfig cfg;
  cfg.mask_ratio = 0.25;
  const auto model = vitmae::Model::pretraining(cfg, 9);
  Rng rng(4);
  double worst_loss = 0;
  std::size_t roundtrip_errors = 0;
  for (int t = 0; t < 5; ++t) {
    std::vector<float> px(64 * 64);
    for (auto& v : px) v = static_cast<float>(rng.normal());
    const auto img = ndgrad::Tensor::from({1, 64, 64}, px);
    const auto back = vitmae::unpatchify(vitmae::patchify(img, 8), 64, 8);
    for (std::size_t i = 0; i < px.size(); ++i) roundtrip_errors += back[i] != px[i];

    const ndgrad::Tensor images[] = {img};
    const vitmae::MaskPlan plans[] = {vitmae::sample_mask(64, 0.25, 100 + t)};
    const auto out = model.forward_mae_batch(images, plans);
    const auto pred = out.predicted_patches.data(), target = out.target_patches.data();
    double loop = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      loop += (double(pred[i]) - target[i]) * (double(pred[i]) - target[i]);
    }
    loop /= static_cast<double>(pred.size());
    worst_loss = std::max(worst_loss, std::abs(out.loss.item() - loop));
  }
  return {count_errors == 0 && worst_loss <= 1e-6 && roundtrip_errors == 0,
          format("%zu mask count errors, loss deviation %.3g, %zu round-trip mismatches",
                 count_errors, worst_loss, roundtrip_errors)};
}

// ---------------------------------------------------------------- 5

Outcome optimization_recipe() {
  optim::OptimConfig cfg;
  const std::size_t total = 1000;
  const auto warm = optim::warmup_steps(total, cfg);
  const double sched = std::max({std::abs(optim::lr_at(0, total, cfg)),
                                 std::abs(optim::lr_at(warm, total, cfg) - cfg.learning_rate),
                                 std::abs(optim::lr_at(total, total, cfg))});

  Rng rng(5);
  double worst_norm = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<ndgrad::Tensor64> params;
    for (int p = 0; p < 4; ++p) {
      auto x = ndgrad::Tensor64::zeros({1 + rng.below(20)}, true);
      for (auto& g : x.mutable_grad()) g = rng.normal() * std::pow(10.0, rng.uniform(-3, 3));
      params.push_back(x);
    }
    optim::clip_global_norm<double>(params, 1.0);
    worst_norm = std::max(worst_norm, optim::global_grad_norm<double>(params));
  }

  // one step from zero moments: m_hat = g, v_hat = g^2, so the update is
  // lr * g / (|g| + eps) plus decoupled decay lr * wd * w
  double worst_adam = 0;
  for (double g : {0.5, -2.0, 1e-3}) {
    optim::OptimConfig oc;
    oc.weight_decay = 0.05;
    auto w = ndgrad::Tensor64::from({1}, {0.8}, true);
    optim::AdamW<double> opt({{"w", w, true}}, oc);
    w.mutable_grad()[0] = g;
    const double lr = 0.01;
    opt.step(lr);
    const double expected = 0.8 - lr * 0.05 * 0.8 - lr * g / (std::abs(g) + oc.eps);
    worst_adam = std::max(worst_adam, std::abs(w[0] - expected));
  }

  vitmae::ModelConfig mc;
  mc.num_classes = 3;
  const auto model = vitmae::Model::finetuning(mc, 11);
  const auto path = g_work / "c5.usmk";
  optim::CheckpointMeta meta;
  meta.model = mc;
  meta.mode = vitmae::ModelMode::finetuning;
  optim::save_checkpoint(path, model, meta);
  const auto loaded = optim::load_checkpoint(path).to_model();
  std::size_t ck_mismatch = 0;
  for (int t = 0; t < 5; ++t) {
    std::vector<float> px(64 * 64);
    for (auto& v : px) v = static_cast<float>(rng.normal());
    const auto img = ndgrad::Tensor::from({1, 64, 64}, px);
    const auto a = model.forward_classify(img), b = loaded.forward_classify(img);
    for (std::size_t i = 0; i < 3; ++i) ck_mismatch += a.logits[i] != b.logits[i];
  }
  return {sched <= 1e-9 && worst_norm <= 1.0 + 1e-6 && worst_adam <= 1e-6 && ck_mismatch == 0,
          format("schedule %.2g, post-clip norm %.9f, AdamW %.2g, %zu checkpoint logit mismatches",
                 sched, worst_norm, worst_adam, ck_mismatch)};
}

// ---------------------------------------------------------------- phantoms

struct Split {
  optim::LabeledImages multi;     // labels 0..2
  std::vector<int> binary;        // 0 normal, 1 abnormal
  std::vector<data::GrayImage> masks;
  std::vector<data::Label> labels;
};

ndgrad::Tensor phantom_tensor(data::Label label, std::uint64_t seed, data::GrayImage* mask,
                              std::size_t size = 64) {
  const auto ph = data::render_phantom(data::random_phantom_spec(label, size, seed));
  if (mask) *mask = ph.anomaly;
  return data::resize_normalize(ph.image, size);
}

// normal:mcdk:utd in the 646:64:259 proportions of the clinical cohort
Split make_split(std::size_t n, std::uint64_t seed_base) {
  const std::size_t normal = n * 2 / 3, mcdk = n / 15, utd = n - normal - mcdk;
  std::vector<data::Label> labels;
  labels.insert(labels.end(), normal, data::Label::normal);
  labels.insert(labels.end(), mcdk, data::Label::mcdk);
  labels.insert(labels.end(), utd, data::Label::utd);
  Rng rng(seed_base);
  rng.shuffle(std::span(labels));
  Split s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    data::GrayImage mask;
    s.multi.images.push_back(phantom_tensor(labels[i], seed_base * 100000 + i, &mask));
    s.multi.labels.push_back(static_cast<int>(labels[i]));
    s.binary.push_back(labels[i] == data::Label::normal ? 0 : 1);
    s.masks.push_back(std::move(mask));
    s.labels.push_back(labels[i]);
  }
  return s;
}

optim::LabeledImages as_binary(const Split& s) {
  return {s.multi.images, s.binary};
}

optim::ClassWeights weights_for(const optim::LabeledImages& d, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (int l : d.labels) ++counts[static_cast<std::size_t>(l)];
  return optim::compute_class_weights(counts, 0);
}

optim::OptimConfig finetune_recipe(std::size_t epochs) {
  optim::OptimConfig oc;
  oc.learning_rate = 3e-4;
  oc.weight_decay = 0.01;
  oc.warmup_fraction = 0.1;
  oc.clip_norm = 1.0;
  oc.batch_size = 16;
  oc.epochs = epochs;
  return oc;
}

// ---------------------------------------------------------------- 6

struct Reached {
  std::size_t epoch;
};

Outcome overfit_fixture() {
  const auto t0 = std::chrono::steady_clock::now();
  auto data = make_split(32, 6).multi;
  vitmae::ModelConfig mc;
  mc.num_classes = 3;
  auto model = vitmae::Model::finetuning(mc, 6);
  std::size_t reached = 0;
  double last = 0;
  try {
    optim::train_finetune(model, data, data, weights_for(data, 3), finetune_recipe(200), 6,
                          [&](const optim::EpochLog& e) {
                            last = *e.val_accuracy;
                            if (last == 1.0) throw Reached{e.epoch};
                          });
  } catch (const Reached& r) {
    reached = r.epoch;
  }
  const double secs = seconds_since(t0);
  return {reached > 0 && secs < 180,
          reached ? format("train accuracy 1.0 at epoch %zu in %.1f s", reached, secs)
                  : format("train accuracy %.3f after 200 epochs (%.1f s)", last, secs)};
}

// ---------------------------------------------------------------- 7, 8, 9

struct Pipeline {
  Split train, val, test;
  std::vector<double> pretrain_losses;
  double binary_auc = 0;
  double multi_f1 = 0;
  std::optional<std::size_t> pretrained_epochs_to_f1, random_epochs_to_f1;
  std::optional<vitmae::Model> multi_model;
  double seconds = 0;
};

constexpr double kF1Threshold = 0.85;
constexpr std::size_t kPretrainEpochs = 20;
constexpr std::size_t kFinetuneEpochs = 30;

std::optional<Pipeline> g_pipeline;

std::optional<std::size_t> first_epoch_at(const std::vector<optim::EpochLog>& logs, double f1) {
  for (const auto& e : logs) {
    if (e.val_f1 && *e.val_f1 >= f1) return e.epoch;
  }
  return std::nullopt;
}

Pipeline& pipeline() {
  if (g_pipeline) return *g_pipeline;
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline p;
  p.train = make_split(600, 71);
  p.val = make_split(150, 72);
  p.test = make_split(150, 73);
  std::fprintf(stderr, "pipeline: data ready (%.0f s)\n", seconds_since(t0));

  const std::uint64_t seed = 7;
  vitmae::ModelConfig mc;
  auto pre = vitmae::Model::pretraining(mc, seed);
  auto pre_cfg = finetune_recipe(kPretrainEpochs);
  pre_cfg.learning_rate = 1e-3;
  pre_cfg.weight_decay = 0.05;
  const auto pre_result = optim::train_pretrain(
      pre, p.train.multi.images, pre_cfg, seed, [&](const optim::EpochLog& e) {
        std::fprintf(stderr, "pretrain epoch %zu loss %.4f (%.0f s)\n", e.epoch, e.loss,
                     seconds_since(t0));
      });
  for (const auto& e : pre_result.epochs) p.pretrain_losses.push_back(e.loss);
  optim::CheckpointMeta meta;
  meta.model = mc;
  meta.optim = pre_cfg;
  meta.seed = seed;
  const auto ck_path = g_work / "pretrain.usmk";
  optim::save_checkpoint(ck_path, pre, meta);
  const auto ck = optim::load_checkpoint(ck_path);

  auto finetune = [&](std::size_t k, bool pretrained, const char* tag) {
    auto model = pretrained ? ck.to_model() : vitmae::Model::pretraining(mc, seed);
    model.to_finetuning(seed, k);
    const auto train = k == 2 ? as_binary(p.train) : p.train.multi;
    const auto val = k == 2 ? as_binary(p.val) : p.val.multi;
    auto result = optim::train_finetune(
        model, train, val, weights_for(train, k), finetune_recipe(kFinetuneEpochs), seed,
        [&](const optim::EpochLog& e) {
          std::fprintf(stderr, "%s epoch %zu loss %.4f val acc %.3f f1 %.3f (%.0f s)\n", tag,
                       e.epoch, e.loss, *e.val_accuracy, *e.val_f1, seconds_since(t0));
        });
    return std::pair(std::move(model), std::move(result));
  };

  {
    auto [model, result] = finetune(2, true, "binary");
    const auto probs = optim::predict_probs(model, p.test.multi.images);
    std::vector<double> scores;
    for (std::size_t i = 0; i < p.test.binary.size(); ++i) scores.push_back(probs[2 * i + 1]);
    p.binary_auc = metrics::roc_auc(scores, p.test.binary);
  }
  {
    auto [model, result] = finetune(3, true, "multiclass");
    const auto probs = optim::predict_probs(model, p.test.multi.images);
    p.multi_f1 = metrics::evaluate_predictions(probs, p.test.multi.labels, 3).at("f1");
    p.pretrained_epochs_to_f1 = first_epoch_at(result.epochs, kF1Threshold);
    p.multi_model.emplace(std::move(model));
  }
  {
    auto [model, result] = finetune(3, false, "random-init");
    p.random_epochs_to_f1 = first_epoch_at(result.epochs, kF1Threshold);
  }
  p.seconds = seconds_since(t0);
  g_pipeline.emplace(std::move(p));
  return *g_pipeline;
}

Outcome end_to_end() {
  auto& p = pipeline();
  return {p.binary_auc >= 0.95 && p.multi_f1 >= kF1Threshold,
          format("binary test AUC %.4f, multi-class test weighted F1 %.4f (pipeline %.0f s)",
                 p.binary_auc, p.multi_f1, p.seconds)};
}

Outcome pretraining_effect() {
  auto& p = pipeline();
  const double first = p.pretrain_losses.front(), last = p.pretrain_losses.back();
  const auto pre = p.pretrained_epochs_to_f1, rnd = p.random_epochs_to_f1;
  const bool non_inferior = pre && (!rnd || *pre <= *rnd);
  auto epochs = [](std::optional<std::size_t> e) {
    return e ? std::to_string(*e) : std::string("never");
  };
  return {last <= 0.5 * first && non_inferior,
          format("loss %.4f -> %.4f (ratio %.3f); val F1 >= %.2f at epoch %s pretrained, %s random",
                 first, last, last / first, kF1Threshold, epochs(pre).c_str(), epochs(rnd).c_str())};
}

Outcome scorecam_localization() {
  auto& p = pipeline();
  const auto& model = *p.multi_model;
  std::size_t hits = 0, explained = 0;
  std::map<data::Label, std::size_t> taken;
  for (auto label : {data::Label::utd, data::Label::mcdk}) {
    for (std::uint64_t i = 0; i < 400 && taken[label] < 50; ++i) {
      data::GrayImage mask;
      const auto img = phantom_tensor(label, 9000000 + static_cast<std::uint64_t>(label) * 1000 + i, &mask);
      if (model.forward_classify(img).predicted != static_cast<int>(label)) continue;
      ++taken[label];
      const auto map = scorecam::scorecam(model, img, static_cast<int>(label));
      hits += scorecam::mass_fraction(map, data::bounding_box(mask)) >= 0.4;
      ++explained;
    }
  }

  auto constant = vitmae::Model::finetuning(model.config(), 3);
  for (auto& prm : constant.parameters()) {
    if (prm.name == "head.weight") {
      std::fill(prm.tensor.mutable_data().begin(), prm.tensor.mutable_data().end(), 0.0f);
    }
  }
  const auto flat = scorecam::scorecam(constant, p.test.multi.images[0], 1);
  const bool zero = std::all_of(flat.values.begin(), flat.values.end(), [](double v) { return v == 0.0; });
  const double share = explained ? static_cast<double>(hits) / explained : 0.0;
  return {taken[data::Label::utd] == 50 && taken[data::Label::mcdk] == 50 && share >= 0.7 && zero,
          format("%zu UTD + %zu MCDK explained, %.1f%% with >= 40%% mass in the box; constant model "
                 "map %s",
                 taken[data::Label::utd], taken[data::Label::mcdk], 100 * share,
                 zero ? "all zero" : "NOT zero")};
}

// ---------------------------------------------------------------- 10

Outcome deannotation() {
  double abs_sum = 0;
  std::size_t marked = 0, not_idempotent = 0, passthrough_errors = 0;
  const data::Label labels[] = {data::Label::normal, data::Label::mcdk, data::Label::utd};
  for (std::uint64_t s = 0; s < 60; ++s) {
    auto spec = data::random_phantom_spec(labels[s % 3], 64, 500 + s);
    spec.speckle_sigma = 0;
    spec.annotate = true;
    const auto ph = data::render_phantom(spec);
    const auto cleaned = data::deannotate(ph.annotated);
    for (std::size_t i = 0; i < ph.overlay.pixels.size(); ++i) {
      if (!ph.overlay.pixels[i]) continue;
      abs_sum += std::abs(int(cleaned.pixels[i]) - int(ph.image.pixels[i]));
      ++marked;
    }
    not_idempotent += data::deannotate(data::to_rgb(cleaned)) != cleaned;

    spec.annotate = false;
    spec.speckle_sigma = 0.25;
    const auto gray = data::render_phantom(spec).image;
    passthrough_errors += data::deannotate(data::to_rgb(gray)) != gray;
  }
  const double mad = marked ? abs_sum / marked : 0.0;
  return {marked > 0 && mad < 5.0 && not_idempotent == 0 && passthrough_errors == 0,
          format("MAD %.3f over %zu overlay pixels, %zu non-idempotent, %zu grayscale changed", mad,
                 marked, not_idempotent, passthrough_errors)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_work = fs::temp_directory_path() / "usmae_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      only.insert(std::stoi(a));
    }
  }
  fs::create_directories(g_work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"metric oracle equivalence", metric_oracles},
      {"split and plan invariants", split_invariants},
      {"masking and reconstruction loss", masking_and_loss},
      {"optimization recipe", optimization_recipe},
      {"overfit fixture", overfit_fixture},
      {"end-to-end synthetic pipeline", end_to_end},
      {"pretraining effect", pretraining_effect},
      {"Score-CAM localization", scorecam_localization},
      {"de-annotation", deannotation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
