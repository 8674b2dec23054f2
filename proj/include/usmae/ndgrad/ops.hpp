#pragma once

#include <cstddef>
#include <span>

#include "usmae/ndgrad/tensor.hpp"

// Differentiable operations. Every op is instantiated for float and double;
// the double path exists for finite-difference gradient verification.
namespace usmae::ndgrad {

inline constexpr double kLayerNormEps = 1e-6;

// [m,k] x [k,n] -> [m,n]
template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

// Batched [g,m,k] x [g,k,n] -> [g,m,n]; with transpose_b the second operand is [g,n,k].
template <class T>
BasicTensor<T> bmm(const BasicTensor<T>& a, const BasicTensor<T>& b, bool transpose_b = false);

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);

// x[..., n] + bias[n]
template <class T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias);

template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis);

// Natural log; inputs must be positive.
template <class T>
BasicTensor<T> log(const BasicTensor<T>& x);

// Normalizes over the last axis, then applies gain and bias (both [n]).
template <class T>
BasicTensor<T> layernorm(const BasicTensor<T>& x, const BasicTensor<T>& gain,
                         const BasicTensor<T>& bias, double eps = kLayerNormEps);

// Exact form x * Phi(x).
template <class T>
BasicTensor<T> gelu(const BasicTensor<T>& x);

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <class T>
BasicTensor<T> mean(const BasicTensor<T>& x);

// mean((a - b)^2) over all elements.
template <class T>
BasicTensor<T> mse_loss(const BasicTensor<T>& a, const BasicTensor<T>& b);

// (1/B) * sum_b -weights[t_b] * log softmax(logits_b)[t_b] for logits [B,K].
template <class T>
BasicTensor<T> weighted_cross_entropy(const BasicTensor<T>& logits, std::span<const int> targets,
                                      std::span<const T> weights);

// Rows of a 2-D tensor picked by index (repeats allowed).
template <class T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows);

template <class T>
BasicTensor<T> concat_rows(const BasicTensor<T>& a, const BasicTensor<T>& b);

// out.flat[i] = x.flat[index[i]], shaped as `dims`.
template <class T>
BasicTensor<T> take(const BasicTensor<T>& x, std::span<const std::size_t> index, Shape dims);

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape dims);

// [batch*seq, heads*head_dim] -> [batch*heads, seq, head_dim]
template <class T>
BasicTensor<T> split_heads(const BasicTensor<T>& x, std::size_t batch, std::size_t seq,
                           std::size_t heads);

// Inverse of split_heads.
template <class T>
BasicTensor<T> merge_heads(const BasicTensor<T>& x, std::size_t batch, std::size_t seq,
                           std::size_t heads);

}  // namespace usmae::ndgrad
