#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "usmae/optim/config.hpp"
#include "usmae/vitmae/model.hpp"

namespace usmae::optim {

// Inverse-frequency class weights rescaled to mean 1.
struct ClassWeights {
  std::vector<double> weights;
  int fold = -1;
};

// Throws ConfigError naming the class and fold when a count is zero.
ClassWeights compute_class_weights(std::span<const std::size_t> counts, int fold = -1);

// round(warmup_fraction * total_steps)
std::size_t warmup_steps(std::size_t total_steps, const OptimConfig& cfg);

// Linear warm-up from 0, then cosine decay to 0 at total_steps.
double lr_at(std::size_t step, std::size_t total_steps, const OptimConfig& cfg);

// Scales gradients in place when their joint L2 norm exceeds max_norm and
// returns the factor applied (1 when untouched). Parameters without a
// gradient are skipped.
template <class T>
double clip_global_norm(std::span<ndgrad::BasicTensor<T>> params, double max_norm);

template <class T>
double global_grad_norm(std::span<const ndgrad::BasicTensor<T>> params);

// AdamW with decoupled weight decay applied only to parameters flagged for it.
template <class T>
class AdamW {
 public:
  AdamW(std::vector<vitmae::NamedParameter<T>> params, const OptimConfig& cfg);

  // One update at learning rate `lr`. Parameters without a gradient are
  // treated as having a zero gradient.
  void step(double lr);
  void zero_grad();

  std::size_t step_count() const { return step_; }
  const std::vector<vitmae::NamedParameter<T>>& params() const { return params_; }
  std::vector<ndgrad::BasicTensor<T>> tensors() const;

 private:
  std::vector<vitmae::NamedParameter<T>> params_;
  OptimConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t step_ = 0;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace usmae::optim
