#include "usmae/optim/adamw.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "usmae/errors.hpp"

namespace usmae::optim {

ClassWeights compute_class_weights(std::span<const std::size_t> counts, int fold) {
  if (counts.empty()) throw ConfigError("class weights need at least one class");
  ClassWeights out;
  out.fold = fold;
  double total = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) {
      throw ConfigError("class " + std::to_string(k) + " has no training samples" +
                        (fold >= 0 ? " in fold " + std::to_string(fold) : std::string()));
    }
    out.weights.push_back(1.0 / static_cast<double>(counts[k]));
    total += out.weights.back();
  }
  const double mean = total / static_cast<double>(counts.size());
  for (auto& w : out.weights) w /= mean;
  return out;
}

std::size_t warmup_steps(std::size_t total_steps, const OptimConfig& cfg) {
  return static_cast<std::size_t>(std::llround(cfg.warmup_fraction * total_steps));
}

double lr_at(std::size_t step, std::size_t total_steps, const OptimConfig& cfg) {
  if (step > total_steps) throw ContractError("lr_at: step beyond the schedule");
  if (total_steps == 0) return 0.0;
  const std::size_t warm = warmup_steps(total_steps, cfg);
  if (step < warm) return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warm);
  const double t = static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

template <class T>
double global_grad_norm(std::span<const ndgrad::BasicTensor<T>> params) {
  double sq = 0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (T g : p.grad()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

template <class T>
double clip_global_norm(std::span<ndgrad::BasicTensor<T>> params, double max_norm) {
  const double norm = global_grad_norm<T>(params);
  if (!(norm > max_norm)) return 1.0;
  const double factor = max_norm / norm;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (T& g : p.mutable_grad()) g = static_cast<T>(g * factor);
  }
  return factor;
}

template <class T>
AdamW<T>::AdamW(std::vector<vitmae::NamedParameter<T>> params, const OptimConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

template <class T>
void AdamW<T>::step(double lr) {
  ++step_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto values = p.tensor.mutable_data();
    const auto grad = p.tensor.grad();
    if (p.tensor.has_grad() && grad.size() != values.size()) {
      throw ShapeError("adamw: gradient of '" + p.name + "' does not match its parameter");
    }
    const double wd = p.decay ? cfg_.weight_decay : 0.0;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = p.tensor.has_grad() ? static_cast<double>(grad[j]) : 0.0;
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
      const double x = values[j];
      values[j] = static_cast<T>(x - lr * (update + wd * x));
    }
  }
}

template <class T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <class T>
std::vector<ndgrad::BasicTensor<T>> AdamW<T>::tensors() const {
  std::vector<ndgrad::BasicTensor<T>> out;
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

template class AdamW<float>;
template class AdamW<double>;
template double clip_global_norm(std::span<ndgrad::BasicTensor<float>>, double);
template double clip_global_norm(std::span<ndgrad::BasicTensor<double>>, double);
template double global_grad_norm(std::span<const ndgrad::BasicTensor<float>>);
template double global_grad_norm(std::span<const ndgrad::BasicTensor<double>>);

}  // namespace usmae::optim
