#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "usmae/optim/adamw.hpp"
#include "usmae/optim/config.hpp"
#include "usmae/vitmae/model.hpp"

namespace usmae::optim {

struct LabeledImages {
  std::vector<ndgrad::Tensor> images;  // [1,S,S] each
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
};

// One row of a training log: epoch,step,lr,loss,val_accuracy.
struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // optimizer steps taken so far
  double lr = 0;          // rate used by the epoch's last step
  double loss = 0;        // mean training loss over the epoch's samples
  std::optional<double> val_accuracy;
  std::optional<double> val_f1;  // binary F1 or weighted F1
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct PretrainResult {
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;
};

// Masked-reconstruction training. Batch order and masks come from streams
// derived from `seed`.
PretrainResult train_pretrain(vitmae::Model& model, std::span<const ndgrad::Tensor> corpus,
                              const OptimConfig& cfg, std::uint64_t seed,
                              const EpochCallback& on_epoch = {});

struct FinetuneResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0;
  vitmae::Model::StateDict best_state;
  std::vector<double> best_val_probs;  // row-major [val size, num_classes]
};

// Supervised fine-tuning with class-weighted cross-entropy. After each epoch
// the validation accuracy is measured and the best epoch (earliest on ties)
// is kept; the model ends holding that state.
FinetuneResult train_finetune(vitmae::Model& model, const LabeledImages& train,
                              const LabeledImages& val, const ClassWeights& weights,
                              const OptimConfig& cfg, std::uint64_t seed,
                              const EpochCallback& on_epoch = {});

// Softmax outputs, row-major [n, num_classes]. Results for an image do not
// depend on the other images passed.
std::vector<double> predict_probs(const vitmae::Model& model,
                                  std::span<const ndgrad::Tensor> images);

double accuracy(std::span<const double> probs, std::span<const int> labels,
                std::size_t num_classes);

struct GridCell {
  double learning_rate;
  double weight_decay;
  double score;
};

struct GridResult {
  double learning_rate = 0;
  double weight_decay = 0;
  double score = 0;
  std::vector<GridCell> cells;  // in evaluation order
};

// Scores every (lr, wd) pair and returns the best; ties go to the lower
// learning rate, then the lower weight decay.
GridResult grid_search(std::span<const double> lr_grid, std::span<const double> wd_grid,
                       const std::function<double(double lr, double wd)>& evaluate);

}  // namespace usmae::optim
