#pragma once

#include <algorithm>
#include <cstddef>

namespace usmae::ndgrad::kernels {

// C[m,n] (+)= A[m,k] * B[k,n], all row-major and contiguous.
//
// Every C element is accumulated over l = 0..k-1 in increasing order by exactly
// one thread, so the result does not depend on the thread count.
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a,
             const T* __restrict b, T* __restrict c, bool accumulate) {
  const std::size_t blocks = (m + 3) / 4;
  const bool parallel = blocks > 1 && m * n * k > (std::size_t{1} << 18);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(blocks); ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * 4;
    const std::size_t rows = std::min<std::size_t>(4, m - i0);
    if (!accumulate) std::fill(c + i0 * n, c + (i0 + rows) * n, T(0));
    if (rows == 4) {
      T* __restrict c0 = c + i0 * n;
      T* __restrict c1 = c0 + n;
      T* __restrict c2 = c1 + n;
      T* __restrict c3 = c2 + n;
      const T* a0 = a + i0 * k;
      for (std::size_t l = 0; l < k; ++l) {
        const T v0 = a0[l], v1 = a0[k + l], v2 = a0[2 * k + l], v3 = a0[3 * k + l];
        const T* __restrict bl = b + l * n;
        for (std::size_t j = 0; j < n; ++j) {
          const T bv = bl[j];
          c0[j] += v0 * bv;
          c1[j] += v1 * bv;
          c2[j] += v2 * bv;
          c3[j] += v3 * bv;
        }
      }
    } else {
      for (std::size_t r = 0; r < rows; ++r) {
        T* __restrict ci = c + (i0 + r) * n;
        const T* ai = a + (i0 + r) * k;
        for (std::size_t l = 0; l < k; ++l) {
          const T v = ai[l];
          const T* __restrict bl = b + l * n;
          for (std::size_t j = 0; j < n; ++j) ci[j] += v * bl[j];
        }
      }
    }
  }
}

// out[cols, rows] = in[rows, cols]^T
template <class T>
void transpose(std::size_t rows, std::size_t cols, const T* __restrict in, T* __restrict out) {
  constexpr std::size_t tile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += tile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += tile) {
      const std::size_t r1 = std::min(rows, r0 + tile), c1 = std::min(cols, c0 + tile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t cc = c0; cc < c1; ++cc) out[cc * rows + r] = in[r * cols + cc];
      }
    }
  }
}

}  // namespace usmae::ndgrad::kernels
