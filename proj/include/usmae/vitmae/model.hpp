#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "usmae/ndgrad/ops.hpp"
#include "usmae/vitmae/config.hpp"
#include "usmae/vitmae/mask.hpp"

namespace usmae::vitmae {

enum class ModelMode { pretraining, finetuning };

template <class T>
struct Linear {
  ndgrad::BasicTensor<T> weight;  // [in, out]
  ndgrad::BasicTensor<T> bias;    // [out]

  ndgrad::BasicTensor<T> operator()(const ndgrad::BasicTensor<T>& x) const {
    return ndgrad::add_bias(ndgrad::matmul(x, weight), bias);
  }
};

template <class T>
struct LayerNorm {
  ndgrad::BasicTensor<T> gain;
  ndgrad::BasicTensor<T> bias;

  ndgrad::BasicTensor<T> operator()(const ndgrad::BasicTensor<T>& x) const {
    return ndgrad::layernorm(x, gain, bias);
  }
};

// Pre-norm transformer block.
template <class T>
struct Block {
  LayerNorm<T> norm1;
  Linear<T> query, key, value, proj;
  LayerNorm<T> norm2;
  Linear<T> fc1, fc2;
  std::size_t heads = 1;

  // x: [batch*seq, dim]. When `norm1_out` is set it receives the detached
  // output of norm1.
  ndgrad::BasicTensor<T> forward(const ndgrad::BasicTensor<T>& x, std::size_t batch,
                                 std::size_t seq,
                                 ndgrad::BasicTensor<T>* norm1_out = nullptr) const;
};

template <class T>
struct NamedParameter {
  std::string name;
  ndgrad::BasicTensor<T> tensor;
  bool decay;  // AdamW weight decay applies
};

// Token activations captured at the final encoder block's first layer norm.
template <class T>
struct TokenCapture {
  ndgrad::BasicTensor<T> tokens;  // [batch*(num_patches+1), embed_dim]
  std::size_t batch = 0;
  std::size_t seq = 0;
};

template <class T>
struct MaeOutput {
  ndgrad::BasicTensor<T> predicted_patches;  // [batch*num_patches, patch_dim]
  ndgrad::BasicTensor<T> target_patches;
  ndgrad::BasicTensor<T> loss;
  std::size_t encoder_tokens = 0;  // per image, class token included
};

template <class T>
struct Classification {
  ndgrad::BasicTensor<T> logits;  // [num_classes]
  std::vector<double> probs;
  int predicted = 0;
};

// Index of the largest value, lowest index on ties.
int argmax(std::span<const double> values);

template <class T>
class VitMae {
 public:
  using Tensor = ndgrad::BasicTensor<T>;
  using StateDict = std::map<std::string, Tensor>;

  // `seed` is the master seed; initialization draws from its derived streams.
  static VitMae pretraining(const ModelConfig& cfg, std::uint64_t seed);
  static VitMae finetuning(const ModelConfig& cfg, std::uint64_t seed);

  // Drops the decoder and attaches a freshly initialized classification head
  // with `num_classes` outputs (0 keeps the configured count).
  void to_finetuning(std::uint64_t seed, std::size_t num_classes = 0);

  ModelMode mode() const { return mode_; }
  const ModelConfig& config() const { return cfg_; }

  std::vector<NamedParameter<T>> parameters() const;
  std::size_t parameter_count() const;

  // Detached copies of every parameter, keyed by name.
  StateDict state_dict() const;
  // Copies values into same-named parameters. Strict mode requires the key
  // sets to match exactly; otherwise returns the names that were loaded.
  std::vector<std::string> load_state_dict(const StateDict& state, bool strict = true);

  // Masked reconstruction of a batch; images are [1,S,S] and all plans hide
  // the same number of patches.
  MaeOutput<T> forward_mae_batch(std::span<const Tensor> images,
                                 std::span<const MaskPlan> plans) const;

  // Reconstruction x-hat as a [1,S,S] image, differentiable.
  Tensor forward_mae(const Tensor& image, const MaskPlan& plan) const;

  // [batch, num_classes] logits from the class token after the final norm.
  Tensor classify_logits(std::span<const Tensor> images,
                         TokenCapture<T>* capture = nullptr) const;

  Classification<T> forward_classify(const Tensor& image) const;

 private:
  VitMae(const ModelConfig& cfg, ModelMode mode, std::uint64_t seed);

  void require_mode(ModelMode wanted, const char* op) const;
  std::vector<T> stack_patches(std::span<const Tensor> images) const;

  // patch_rows: [batch*tokens, patch_dim]; positions: patch index of each row.
  Tensor encode(const Tensor& patch_rows, std::span<const std::size_t> positions,
                std::size_t batch, std::size_t tokens, TokenCapture<T>* capture) const;

  ModelConfig cfg_;
  ModelMode mode_;

  Linear<T> patch_embed_;
  Tensor cls_token_;
  std::vector<Block<T>> encoder_;
  LayerNorm<T> encoder_norm_;

  Linear<T> decoder_embed_;
  Tensor mask_token_;
  std::vector<Block<T>> decoder_;
  LayerNorm<T> decoder_norm_;
  Linear<T> decoder_pred_;

  Linear<T> head_;

  // fixed sin-cos tables with a zero class-token row: [num_patches+1, dim]
  std::vector<T> encoder_pos_;
  std::vector<T> decoder_pos_;
};

// Mean squared error over all pixels of a reconstruction and its target.
template <class T>
ndgrad::BasicTensor<T> mae_loss(const ndgrad::BasicTensor<T>& reconstruction,
                                const ndgrad::BasicTensor<T>& image);

// 2-D sin-cos position table for a grid x grid layout, [grid*grid, dim].
std::vector<double> sincos_position_table(std::size_t grid, std::size_t dim);

using Model = VitMae<float>;

extern template class VitMae<float>;
extern template class VitMae<double>;

}  // namespace usmae::vitmae
