#pragma once

// Randomly sized small networks that exercise every differentiable op.

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "usmae/ndgrad/ops.hpp"
#include "usmae/rng.hpp"

namespace usmae::testing {

template <class T>
struct RandomNetwork {
  std::vector<ndgrad::BasicTensor<T>> params;
  std::function<ndgrad::BasicTensor<T>()> loss;
};

template <class T>
RandomNetwork<T> make_random_network(std::uint64_t seed) {
  using namespace ndgrad;
  using Tn = BasicTensor<T>;
  Rng rng(seed);
  const std::size_t batch = 1 + rng.below(2), seq = 2 + rng.below(3), heads = 1 + rng.below(2);
  const std::size_t hd = 2 + rng.below(2), dim = heads * hd, classes = 2 + rng.below(2);
  auto param = [&](Shape dims, double s = 0.5) {
    std::vector<T> v(numel(dims));
    for (auto& x : v) x = static_cast<T>(rng.normal() * s);
    return Tn::from(std::move(dims), std::move(v), true);
  };
  RandomNetwork<T> net;
  auto x = param({batch * seq, dim}, 1.0);
  auto gain = param({dim}), bias = param({dim});
  auto wq = param({dim, dim}), bq = param({dim}), wk = param({dim, dim}), wv = param({dim, dim});
  auto w2 = param({dim, 2 * dim}), w3 = param({2 * dim, dim}), gate = param({batch * seq, dim});
  auto tok = param({1, dim}), wh = param({dim, classes});
  net.params = {x, gain, bias, wq, bq, wk, wv, w2, w3, gate, tok, wh};

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 4; ++i) rows.push_back(rng.below(batch * seq + 1));
  rows.push_back(batch * seq);  // always include the appended token, and a repeat
  rows.push_back(rows.front());
  std::vector<int> targets;
  for (std::size_t i = 0; i < rows.size(); ++i) targets.push_back(static_cast<int>(rng.below(classes)));
  std::vector<T> weights;
  for (std::size_t k = 0; k < classes; ++k) weights.push_back(static_cast<T>(0.5 + rng.uniform()));
  std::vector<std::size_t> perm(batch * seq * dim);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(std::span(perm));
  std::vector<T> target_values(perm.size());
  for (auto& v : target_values) v = static_cast<T>(rng.normal());
  const auto target = Tn::from({dim, batch * seq}, target_values);
  const std::size_t sm_axis = rng.below(2);
  const T inv_sqrt_hd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

  net.loss = [=]() {
    auto h = layernorm(x, gain, bias);
    auto q = split_heads(add_bias(matmul(h, wq), bq), batch, seq, heads);
    auto k = split_heads(matmul(h, wk), batch, seq, heads);
    auto v = split_heads(matmul(h, wv), batch, seq, heads);
    auto att = softmax(scale(bmm(q, k, true), inv_sqrt_hd), 2);
    auto r = add(x, merge_heads(bmm(att, v), batch, seq, heads));
    auto m2 = matmul(gelu(matmul(r, w2)), w3);
    auto r2 = sub(r, mul(m2, gate));
    auto picked = gather_rows(concat_rows(r2, tok), rows);
    auto ce = weighted_cross_entropy(matmul(picked, wh), targets, std::span<const T>(weights));
    auto rec = mse_loss(take(r2, perm, {dim, batch * seq}), target);
    auto lsm = mean(log(softmax(reshape(m2, {seq * batch, dim}), sm_axis)));
    return sum(add(add(ce, rec), scale(lsm, static_cast<T>(-0.1))));
  };
  return net;
}

}  // namespace usmae::testing
