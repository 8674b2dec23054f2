#include "usmae/ndgrad/ops.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "kernels.hpp"
#include "usmae/errors.hpp"

namespace usmae::ndgrad {

namespace {

// Reductions accumulate in double regardless of T, in fixed index order.
using Acc = double;

template <class T>
using BackwardFn = std::function<void(Node<T>&)>;

template <class T>
BasicTensor<T> make_result(const char* op, Shape dims, std::vector<T> data,
                           std::initializer_list<const BasicTensor<T>*> inputs, BackwardFn<T> fn) {
  check_finite<T>(data, op);
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->dims = std::move(dims);
  node->data = std::move(data);
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto* in : inputs) needs_grad = needs_grad || in->requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const auto* in : inputs) node->inputs.push_back(in->shared());
    node->backward_fn = std::move(fn);
  }
  return BasicTensor<T>(std::move(node));
}

template <class T>
void require_defined(const BasicTensor<T>& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor argument");
}

template <class T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
  }
}

template <class T>
void require_rank(const BasicTensor<T>& a, std::size_t rank, const char* op) {
  require_defined(a, op);
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.dims()));
  }
}

template <class T>
bool wants_grad(const std::shared_ptr<Node<T>>& n) {
  return n->requires_grad;
}

}  // namespace

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_string(a.dims()) + " x " +
                     shape_string(b.dims()));
  }
  std::vector<T> out(m * n);
  kernels::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data(), false);
  return make_result<T>("matmul", {m, n}, std::move(out), {&a, &b}, [m, n, k](Node<T>& self) {
    auto& A = self.inputs[0];
    auto& B = self.inputs[1];
    if (wants_grad(A)) {
      std::vector<T> bt(n * k);
      kernels::transpose(k, n, B->data.data(), bt.data());
      kernels::gemm_nn(m, k, n, self.grad.data(), bt.data(), A->ensure_grad().data(), true);
    }
    if (wants_grad(B)) {
      std::vector<T> at(k * m);
      kernels::transpose(m, k, A->data.data(), at.data());
      kernels::gemm_nn(k, n, m, at.data(), self.grad.data(), B->ensure_grad().data(), true);
    }
  });
}

template <class T>
BasicTensor<T> bmm(const BasicTensor<T>& a, const BasicTensor<T>& b, bool transpose_b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const std::size_t g = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != g || bk != k) {
    throw ShapeError("bmm: incompatible shapes " + shape_string(a.dims()) + " x " +
                     shape_string(b.dims()) + (transpose_b ? " (transposed)" : ""));
  }
  std::vector<T> out(g * m * n);
  {
    std::vector<T> bt(transpose_b ? k * n : 0);
    for (std::size_t i = 0; i < g; ++i) {
      const T* bi = b.data().data() + i * k * n;
      if (transpose_b) {
        kernels::transpose(n, k, bi, bt.data());
        bi = bt.data();
      }
      kernels::gemm_nn(m, n, k, a.data().data() + i * m * k, bi, out.data() + i * m * n, false);
    }
  }
  return make_result<T>(
      "bmm", {g, m, n}, std::move(out), {&a, &b}, [g, m, n, k, transpose_b](Node<T>& self) {
        auto& A = self.inputs[0];
        auto& B = self.inputs[1];
        const T* dc = self.grad.data();
        std::vector<T> tmp;
        if (wants_grad(A)) {
          T* da = A->ensure_grad().data();
          if (!transpose_b) tmp.resize(n * k);
          for (std::size_t i = 0; i < g; ++i) {
            const T* bi = B->data.data() + i * k * n;
            if (!transpose_b) {
              kernels::transpose(k, n, bi, tmp.data());
              bi = tmp.data();
            }
            // dA = dC * B^T, where stored [n,k] is already B^T when transposed.
            kernels::gemm_nn(m, k, n, dc + i * m * n, bi, da + i * m * k, true);
          }
        }
        if (wants_grad(B)) {
          T* db = B->ensure_grad().data();
          for (std::size_t i = 0; i < g; ++i) {
            const T* ai = A->data.data() + i * m * k;
            const T* dci = dc + i * m * n;
            if (!transpose_b) {
              tmp.resize(k * m);
              kernels::transpose(m, k, ai, tmp.data());
              kernels::gemm_nn(k, n, m, tmp.data(), dci, db + i * k * n, true);
            } else {
              tmp.resize(n * m);
              kernels::transpose(m, n, dci, tmp.data());
              kernels::gemm_nn(n, k, m, tmp.data(), ai, db + i * k * n, true);
            }
          }
        }
      });
}

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result<T>("add", a.dims(), std::move(out), {&a, &b}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!wants_grad(in)) continue;
      auto& g = in->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result<T>("sub", a.dims(), std::move(out), {&a, &b}, [](Node<T>& self) {
    if (wants_grad(self.inputs[0])) {
      auto& g = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(self.inputs[1])) {
      auto& g = self.inputs[1]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result<T>("mul", a.dims(), std::move(out), {&a, &b}, [](Node<T>& self) {
    auto& A = self.inputs[0];
    auto& B = self.inputs[1];
    if (wants_grad(A)) {
      auto& g = A->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * B->data[i];
    }
    if (wants_grad(B)) {
      auto& g = B->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * A->data[i];
    }
  });
}

template <class T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  require_defined(a, "scale");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return make_result<T>("scale", a.dims(), std::move(out), {&a}, [factor](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <class T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias) {
  require_defined(x, "add_bias");
  require_rank(bias, 1, "add_bias");
  const std::size_t n = bias.dim(0);
  if (x.dims().back() != n) {
    throw ShapeError("add_bias: last axis of " + shape_string(x.dims()) + " does not match bias " +
                     shape_string(bias.dims()));
  }
  const std::size_t rows = x.numel() / n;
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = x[r * n + j] + bias[j];
  }
  return make_result<T>("add_bias", x.dims(), std::move(out), {&x, &bias},
                        [rows, n](Node<T>& self) {
                          if (wants_grad(self.inputs[0])) {
                            auto& g = self.inputs[0]->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                          }
                          if (wants_grad(self.inputs[1])) {
                            auto& g = self.inputs[1]->ensure_grad();
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[r * n + j];
                            }
                          }
                        });
}

template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis) {
  require_defined(x, "softmax");
  if (axis >= x.rank()) {
    throw ContractError("softmax: axis " + std::to_string(axis) + " out of range for " +
                        shape_string(x.dims()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t len = x.dim(axis);
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = x[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, x[base + j * inner]);
      Acc total = 0;
      for (std::size_t j = 0; j < len; ++j) {
        const Acc e = std::exp(static_cast<Acc>(x[base + j * inner]) - static_cast<Acc>(mx));
        out[base + j * inner] = static_cast<T>(e);
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) {
        out[base + j * inner] = static_cast<T>(static_cast<Acc>(out[base + j * inner]) / total);
      }
    }
  }
  return make_result<T>(
      "softmax", x.dims(), std::move(out), {&x}, [outer, inner, len](Node<T>& self) {
        auto& g = self.inputs[0]->ensure_grad();
        const auto& y = self.data;
        const auto& dy = self.grad;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            Acc dot = 0;
            for (std::size_t j = 0; j < len; ++j) {
              dot += static_cast<Acc>(dy[base + j * inner]) * y[base + j * inner];
            }
            for (std::size_t j = 0; j < len; ++j) {
              const std::size_t idx = base + j * inner;
              g[idx] += static_cast<T>(y[idx] * (dy[idx] - dot));
            }
          }
        }
      });
}

template <class T>
BasicTensor<T> log(const BasicTensor<T>& x) {
  require_defined(x, "log");
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(x[i] > T(0))) throw ContractError("log: non-positive input " + std::to_string(x[i]));
    out[i] = std::log(x[i]);
  }
  return make_result<T>("log", x.dims(), std::move(out), {&x}, [](Node<T>& self) {
    auto& in = self.inputs[0];
    auto& g = in->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / in->data[i];
  });
}

template <class T>
BasicTensor<T> layernorm(const BasicTensor<T>& x, const BasicTensor<T>& gain,
                         const BasicTensor<T>& bias, double eps) {
  require_defined(x, "layernorm");
  require_rank(gain, 1, "layernorm");
  require_rank(bias, 1, "layernorm");
  const std::size_t n = x.dims().back();
  if (gain.dim(0) != n || bias.dim(0) != n) {
    throw ShapeError("layernorm: gain/bias " + shape_string(gain.dims()) + "/" +
                     shape_string(bias.dims()) + " do not match last axis of " +
                     shape_string(x.dims()));
  }
  const std::size_t rows = x.numel() / n;
  std::vector<T> out(x.numel());
  // normalized values and inverse std are saved for backward
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto rstd = std::make_shared<std::vector<Acc>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + r * n;
    Acc mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += xr[j];
    mu /= static_cast<Acc>(n);
    Acc var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const Acc d = xr[j] - mu;
      var += d * d;
    }
    var /= static_cast<Acc>(n);
    const Acc rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < n; ++j) {
      const T h = static_cast<T>((xr[j] - mu) * rs);
      (*xhat)[r * n + j] = h;
      out[r * n + j] = h * gain[j] + bias[j];
    }
  }
  return make_result<T>(
      "layernorm", x.dims(), std::move(out), {&x, &gain, &bias},
      [rows, n, xhat, rstd](Node<T>& self) {
        auto& X = self.inputs[0];
        auto& G = self.inputs[1];
        auto& B = self.inputs[2];
        const auto& dy = self.grad;
        if (wants_grad(G)) {
          auto& gg = G->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < n; ++j) gg[j] += dy[r * n + j] * (*xhat)[r * n + j];
          }
        }
        if (wants_grad(B)) {
          auto& gb = B->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < n; ++j) gb[j] += dy[r * n + j];
          }
        }
        if (wants_grad(X)) {
          auto& gx = X->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            Acc mean_d = 0, mean_dh = 0;
            for (std::size_t j = 0; j < n; ++j) {
              const Acc d = static_cast<Acc>(dy[r * n + j]) * G->data[j];
              mean_d += d;
              mean_dh += d * (*xhat)[r * n + j];
            }
            mean_d /= static_cast<Acc>(n);
            mean_dh /= static_cast<Acc>(n);
            for (std::size_t j = 0; j < n; ++j) {
              const Acc d = static_cast<Acc>(dy[r * n + j]) * G->data[j];
              gx[r * n + j] +=
                  static_cast<T>((*rstd)[r] * (d - mean_d - (*xhat)[r * n + j] * mean_dh));
            }
          }
        }
      });
}

template <class T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
  require_defined(x, "gelu");
  std::vector<T> out(x.numel());
  const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
  }
  return make_result<T>("gelu", x.dims(), std::move(out), {&x}, [inv_sqrt2](Node<T>& self) {
    auto& in = self.inputs[0];
    auto& g = in->ensure_grad();
    const T inv_sqrt_2pi = static_cast<T>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T v = in->data[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  require_defined(x, "sum");
  Acc total = 0;
  for (T v : x.data()) total += v;
  return make_result<T>("sum", {1}, {static_cast<T>(total)}, {&x}, [](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

template <class T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  require_defined(x, "mean");
  Acc total = 0;
  for (T v : x.data()) total += v;
  const Acc count = static_cast<Acc>(x.numel());
  return make_result<T>("mean", {1}, {static_cast<T>(total / count)}, {&x},
                        [count](Node<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          const T d = static_cast<T>(self.grad[0] / count);
                          for (auto& v : g) v += d;
                        });
}

template <class T>
BasicTensor<T> mse_loss(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mse_loss");
  Acc total = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const Acc d = static_cast<Acc>(a[i]) - b[i];
    total += d * d;
  }
  const Acc count = static_cast<Acc>(a.numel());
  return make_result<T>(
      "mse_loss", {1}, {static_cast<T>(total / count)}, {&a, &b}, [count](Node<T>& self) {
        auto& A = self.inputs[0];
        auto& B = self.inputs[1];
        const Acc coef = 2.0 * self.grad[0] / count;
        if (wants_grad(A)) {
          auto& g = A->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += static_cast<T>(coef * (static_cast<Acc>(A->data[i]) - B->data[i]));
          }
        }
        if (wants_grad(B)) {
          auto& g = B->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] -= static_cast<T>(coef * (static_cast<Acc>(A->data[i]) - B->data[i]));
          }
        }
      });
}

template <class T>
BasicTensor<T> weighted_cross_entropy(const BasicTensor<T>& logits, std::span<const int> targets,
                                      std::span<const T> weights) {
  require_rank(logits, 2, "weighted_cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != batch) {
    throw ShapeError("weighted_cross_entropy: " + std::to_string(targets.size()) +
                     " targets for logits " + shape_string(logits.dims()));
  }
  if (weights.size() != classes) {
    throw ShapeError("weighted_cross_entropy: " + std::to_string(weights.size()) +
                     " weights for " + std::to_string(classes) + " classes");
  }
  auto probs = std::make_shared<std::vector<Acc>>(batch * classes);
  std::vector<T> w(weights.begin(), weights.end());
  std::vector<int> t(targets.begin(), targets.end());
  Acc total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (t[b] < 0 || static_cast<std::size_t>(t[b]) >= classes) {
      throw ContractError("weighted_cross_entropy: target " + std::to_string(t[b]) +
                          " out of range for " + std::to_string(classes) + " classes");
    }
    const T* z = logits.data().data() + b * classes;
    Acc mx = z[0];
    for (std::size_t k = 1; k < classes; ++k) mx = std::max<Acc>(mx, z[k]);
    Acc s = 0;
    for (std::size_t k = 0; k < classes; ++k) s += std::exp(z[k] - mx);
    const Acc log_norm = mx + std::log(s);
    for (std::size_t k = 0; k < classes; ++k) (*probs)[b * classes + k] = std::exp(z[k] - log_norm);
    total += -static_cast<Acc>(w[t[b]]) * (z[t[b]] - log_norm);
  }
  const Acc value = total / static_cast<Acc>(batch);
  return make_result<T>(
      "weighted_cross_entropy", {1}, {static_cast<T>(value)}, {&logits},
      [batch, classes, probs, w = std::move(w), t = std::move(t)](Node<T>& self) {
        auto& g = self.inputs[0]->ensure_grad();
        const Acc upstream = static_cast<Acc>(self.grad[0]) / static_cast<Acc>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
          const Acc wt = w[t[b]];
          for (std::size_t k = 0; k < classes; ++k) {
            const Acc y = static_cast<int>(k) == t[b] ? 1.0 : 0.0;
            g[b * classes + k] += static_cast<T>(upstream * wt * ((*probs)[b * classes + k] - y));
          }
        }
      });
}

template <class T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "gather_rows");
  if (rows.empty()) throw ShapeError("gather_rows: empty row index");
  const std::size_t nrows = x.dim(0), cols = x.dim(1);
  std::vector<T> out(rows.size() * cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= nrows) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                       shape_string(x.dims()));
    }
    std::copy_n(x.data().data() + rows[i] * cols, cols, out.data() + i * cols);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result<T>("gather_rows", {rows.size(), cols}, std::move(out), {&x},
                        [cols, idx = std::move(idx)](Node<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          for (std::size_t i = 0; i < idx.size(); ++i) {
                            T* dst = g.data() + idx[i] * cols;
                            const T* src = self.grad.data() + i * cols;
                            for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
                          }
                        });
}

template <class T>
BasicTensor<T> concat_rows(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a, 2, "concat_rows");
  require_rank(b, 2, "concat_rows");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("concat_rows: column mismatch " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
  }
  std::vector<T> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const std::size_t split = a.numel();
  return make_result<T>("concat_rows", {a.dim(0) + b.dim(0), a.dim(1)}, std::move(out), {&a, &b},
                        [split](Node<T>& self) {
                          if (wants_grad(self.inputs[0])) {
                            auto& g = self.inputs[0]->ensure_grad();
                            for (std::size_t i = 0; i < split; ++i) g[i] += self.grad[i];
                          }
                          if (wants_grad(self.inputs[1])) {
                            auto& g = self.inputs[1]->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[split + i];
                          }
                        });
}

template <class T>
BasicTensor<T> take(const BasicTensor<T>& x, std::span<const std::size_t> index, Shape dims) {
  require_defined(x, "take");
  if (numel(dims) != index.size()) {
    throw ShapeError("take: " + std::to_string(index.size()) + " indices for output " +
                     shape_string(dims));
  }
  std::vector<T> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.numel()) throw ShapeError("take: index out of range");
    out[i] = x[index[i]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result<T>("take", std::move(dims), std::move(out), {&x},
                        [idx = std::move(idx)](Node<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += self.grad[i];
                        });
}

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape dims) {
  require_defined(x, "reshape");
  if (numel(dims) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.dims()) + " as " + shape_string(dims));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>("reshape", std::move(dims), std::move(out), {&x}, [](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

namespace {

// Flat offset pairs between [batch*seq, heads*hd] and [batch*heads, seq, hd].
inline std::size_t head_offset(std::size_t b, std::size_t t, std::size_t h, std::size_t d,
                               std::size_t seq, std::size_t heads, std::size_t hd) {
  return ((b * heads + h) * seq + t) * hd + d;
}

}  // namespace

template <class T>
BasicTensor<T> split_heads(const BasicTensor<T>& x, std::size_t batch, std::size_t seq,
                           std::size_t heads) {
  require_rank(x, 2, "split_heads");
  if (x.dim(0) != batch * seq || heads == 0 || x.dim(1) % heads != 0) {
    throw ShapeError("split_heads: " + shape_string(x.dims()) + " is not [" +
                     std::to_string(batch) + "*" + std::to_string(seq) + ", heads*hd] with " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t hd = x.dim(1) / heads, width = x.dim(1);
  std::vector<T> out(x.numel());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < seq; ++t)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t d = 0; d < hd; ++d)
          out[head_offset(b, t, h, d, seq, heads, hd)] = x[(b * seq + t) * width + h * hd + d];
  return make_result<T>(
      "split_heads", {batch * heads, seq, hd}, std::move(out), {&x},
      [batch, seq, heads, hd, width](Node<T>& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t t = 0; t < seq; ++t)
            for (std::size_t h = 0; h < heads; ++h)
              for (std::size_t d = 0; d < hd; ++d)
                g[(b * seq + t) * width + h * hd + d] +=
                    self.grad[head_offset(b, t, h, d, seq, heads, hd)];
      });
}

template <class T>
BasicTensor<T> merge_heads(const BasicTensor<T>& x, std::size_t batch, std::size_t seq,
                           std::size_t heads) {
  require_rank(x, 3, "merge_heads");
  if (x.dim(0) != batch * heads || x.dim(1) != seq) {
    throw ShapeError("merge_heads: " + shape_string(x.dims()) + " is not [" +
                     std::to_string(batch) + "*" + std::to_string(heads) + ", " +
                     std::to_string(seq) + ", hd]");
  }
  const std::size_t hd = x.dim(2), width = heads * hd;
  std::vector<T> out(x.numel());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < seq; ++t)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t d = 0; d < hd; ++d)
          out[(b * seq + t) * width + h * hd + d] = x[head_offset(b, t, h, d, seq, heads, hd)];
  return make_result<T>(
      "merge_heads", {batch * seq, width}, std::move(out), {&x},
      [batch, seq, heads, hd, width](Node<T>& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t t = 0; t < seq; ++t)
            for (std::size_t h = 0; h < heads; ++h)
              for (std::size_t d = 0; d < hd; ++d)
                g[head_offset(b, t, h, d, seq, heads, hd)] +=
                    self.grad[(b * seq + t) * width + h * hd + d];
      });
}

#define USMAE_INSTANTIATE_OPS(T)                                                                  \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> bmm(const BasicTensor<T>&, const BasicTensor<T>&, bool);                \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                        \
  template BasicTensor<T> add_bias(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> softmax(const BasicTensor<T>&, std::size_t);                            \
  template BasicTensor<T> log(const BasicTensor<T>&);                                             \
  template BasicTensor<T> layernorm(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                    const BasicTensor<T>&, double);                               \
  template BasicTensor<T> gelu(const BasicTensor<T>&);                                            \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                             \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                            \
  template BasicTensor<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> weighted_cross_entropy(const BasicTensor<T>&, std::span<const int>,     \
                                                 std::span<const T>);                             \
  template BasicTensor<T> gather_rows(const BasicTensor<T>&, std::span<const std::size_t>);       \
  template BasicTensor<T> concat_rows(const BasicTensor<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> take(const BasicTensor<T>&, std::span<const std::size_t>, Shape);       \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                  \
  template BasicTensor<T> split_heads(const BasicTensor<T>&, std::size_t, std::size_t,            \
                                      std::size_t);                                               \
  template BasicTensor<T> merge_heads(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t);

USMAE_INSTANTIATE_OPS(float)
USMAE_INSTANTIATE_OPS(double)

#undef USMAE_INSTANTIATE_OPS

}  // namespace usmae::ndgrad
