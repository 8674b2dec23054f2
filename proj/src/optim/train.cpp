#include "usmae/optim/train.hpp"

#include <cmath>
#include <numeric>

#include "usmae/errors.hpp"
#include "usmae/metrics/metrics.hpp"
#include "usmae/rng.hpp"

namespace usmae::optim {

using ndgrad::Tensor;

namespace {

std::size_t steps_per_epoch(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

std::vector<Tensor> param_tensors(const std::vector<vitmae::NamedParameter<float>>& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

}  // namespace

PretrainResult train_pretrain(vitmae::Model& model, std::span<const Tensor> corpus,
                              const OptimConfig& cfg, std::uint64_t seed,
                              const EpochCallback& on_epoch) {
  cfg.validate();
  if (corpus.empty()) throw ContractError("train_pretrain: empty corpus");
  if (model.mode() != vitmae::ModelMode::pretraining) {
    throw StateError("train_pretrain requires a model in pretraining mode");
  }
  const auto& mcfg = model.config();
  AdamW<float> opt(model.parameters(), cfg);
  auto tensors = param_tensors(opt.params());
  Rng order_rng(derive_seed(seed, SeedLabel::shuffle));
  Rng mask_rng(derive_seed(seed, SeedLabel::mask));
  const std::size_t per_epoch = steps_per_epoch(corpus.size(), cfg.batch_size);
  const std::size_t total = per_epoch * cfg.epochs;

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  PretrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    double loss_sum = 0, lr = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> images;
      std::vector<vitmae::MaskPlan> plans;
      for (std::size_t i = start; i < end; ++i) {
        images.push_back(corpus[order[i]]);
        plans.push_back(vitmae::sample_mask(mcfg.num_patches(), mcfg.mask_ratio, mask_rng));
      }
      auto out = model.forward_mae_batch(images, plans);
      const double loss = out.loss.item();
      out.loss.backward();
      clip_global_norm<float>(tensors, cfg.clip_norm);
      lr = lr_at(opt.step_count(), total, cfg);
      opt.step(lr);
      opt.zero_grad();
      result.step_losses.push_back(loss);
      loss_sum += loss * static_cast<double>(end - start);
    }
    EpochLog log{epoch, opt.step_count(), lr, loss_sum / static_cast<double>(corpus.size()), {}, {}};
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

std::vector<double> predict_probs(const vitmae::Model& model, std::span<const Tensor> images) {
  ndgrad::NoGradGuard no_grad;
  std::vector<double> out;
  out.reserve(images.size() * model.config().num_classes);
  for (const auto& img : images) {
    const auto probs = model.forward_classify(img).probs;
    out.insert(out.end(), probs.begin(), probs.end());
  }
  return out;
}

double accuracy(std::span<const double> probs, std::span<const int> labels, std::size_t k) {
  if (probs.size() != labels.size() * k) throw ShapeError("accuracy: probabilities do not match labels");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += metrics::predicted_class(probs.subspan(i * k, k)) == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

double f1_of(std::span<const double> probs, std::span<const int> labels, std::size_t k) {
  std::vector<int> predicted(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    predicted[i] = metrics::predicted_class(probs.subspan(i * k, k));
  }
  if (k == 2) return metrics::binary_metrics(metrics::binary_confusion(labels, predicted)).f1;
  return metrics::weighted_metrics(metrics::multi_confusion(labels, predicted, k)).f1_w;
}

void check_labels(const LabeledImages& set, std::size_t k, const char* what) {
  if (set.images.size() != set.labels.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(set.images.size()) + " images, " +
                     std::to_string(set.labels.size()) + " labels");
  }
  for (int l : set.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= k) {
      throw ConfigError(std::string(what) + ": label " + std::to_string(l) +
                        " outside a " + std::to_string(k) + "-class head");
    }
  }
}

}  // namespace

FinetuneResult train_finetune(vitmae::Model& model, const LabeledImages& train,
                              const LabeledImages& val, const ClassWeights& weights,
                              const OptimConfig& cfg, std::uint64_t seed,
                              const EpochCallback& on_epoch) {
  cfg.validate();
  if (model.mode() != vitmae::ModelMode::finetuning) {
    throw StateError("train_finetune requires a model in fine-tuning mode");
  }
  const std::size_t k = model.config().num_classes;
  if (train.size() == 0) throw ContractError("train_finetune: empty training set");
  if (val.size() == 0) throw ContractError("train_finetune: empty validation set");
  check_labels(train, k, "training set");
  check_labels(val, k, "validation set");
  std::vector<std::size_t> counts(k, 0);
  for (int l : train.labels) ++counts[l];
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      throw ConfigError("class " + std::to_string(c) + " is missing from the training fold" +
                        (weights.fold >= 0 ? " " + std::to_string(weights.fold) : std::string()));
    }
  }
  if (weights.weights.size() != k) {
    throw ConfigError("class weights cover " + std::to_string(weights.weights.size()) +
                      " classes, model has " + std::to_string(k));
  }
  std::vector<float> w(weights.weights.begin(), weights.weights.end());

  AdamW<float> opt(model.parameters(), cfg);
  auto tensors = param_tensors(opt.params());
  Rng order_rng(derive_seed(seed, SeedLabel::shuffle));
  const std::size_t per_epoch = steps_per_epoch(train.size(), cfg.batch_size);
  const std::size_t total = per_epoch * cfg.epochs;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  FinetuneResult result;
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    double loss_sum = 0, lr = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> images;
      std::vector<int> targets;
      for (std::size_t i = start; i < end; ++i) {
        images.push_back(train.images[order[i]]);
        targets.push_back(train.labels[order[i]]);
      }
      auto loss = ndgrad::weighted_cross_entropy(model.classify_logits(images),
                                                 std::span<const int>(targets),
                                                 std::span<const float>(w));
      const double value = loss.item();
      loss.backward();
      clip_global_norm<float>(tensors, cfg.clip_norm);
      lr = lr_at(opt.step_count(), total, cfg);
      opt.step(lr);
      opt.zero_grad();
      loss_sum += value * static_cast<double>(end - start);
    }
    const auto probs = predict_probs(model, val.images);
    const double acc = accuracy(probs, val.labels, k);
    EpochLog log{epoch, opt.step_count(), lr, loss_sum / static_cast<double>(train.size()), acc,
                 f1_of(probs, val.labels, k)};
    result.epochs.push_back(log);
    if (!have_best || acc > result.best_val_accuracy) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_val_accuracy = acc;
      result.best_state = model.state_dict();
      result.best_val_probs = probs;
    }
    if (on_epoch) on_epoch(log);
    if (cfg.early_stop_patience > 0 && epoch - result.best_epoch >= cfg.early_stop_patience) break;
  }
  model.load_state_dict(result.best_state);
  return result;
}

GridResult grid_search(std::span<const double> lr_grid, std::span<const double> wd_grid,
                       const std::function<double(double, double)>& evaluate) {
  if (lr_grid.empty() || wd_grid.empty()) throw ContractError("grid_search: empty grid");
  GridResult result;
  bool have = false;
  for (double lr : lr_grid) {
    for (double wd : wd_grid) {
      const double score = evaluate(lr, wd);
      result.cells.push_back({lr, wd, score});
      const bool better =
          !have || score > result.score ||
          (score == result.score &&
           (lr < result.learning_rate || (lr == result.learning_rate && wd < result.weight_decay)));
      if (better) {
        have = true;
        result.learning_rate = lr;
        result.weight_decay = wd;
        result.score = score;
      }
    }
  }
  return result;
}

}  // namespace usmae::optim
