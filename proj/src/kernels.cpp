// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace csdn::kernels {

namespace {

constexpr std::size_t kRowBlock = 6;
constexpr std::size_t kColBlock = 16;
constexpr std::size_t kDepthBlock = 256;

// Fused multiply-add for scalar tails. Vector paths below rely on the
// compiler contracting a * b + c, which it does exactly when FMA is available,
// so the scalar tail must round the same way.
template <typename T>
inline T madd(T a, T b, T c) {
#if defined(__FMA__)
  return std::fma(a, b, c);
#else
  return a * b + c;
#endif
}

template <typename T>
struct Lane {
  typedef T type __attribute__((vector_size(kColBlock * sizeof(T))));
};
template <typename T>
using Vec = typename Lane<T>::type;

template <typename T>
inline Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <typename T>
inline void store(T* p, const Vec<T>& v) {
  std::memcpy(p, &v, sizeof(v));
}

// kRowBlock rows x W vectors of output, accumulated over p = 0..k-1 in order.
template <typename T, std::size_t W>
void block_full(const T* a, const T* b, T* c, std::size_t k, std::size_t rs, std::size_t ps,
                std::size_t n, bool accumulate) {
  Vec<T> acc[kRowBlock][W];
  for (std::size_t r = 0; r < kRowBlock; ++r)
    for (std::size_t w = 0; w < W; ++w) acc[r][w] = accumulate ? load(c + r * n + w * kColBlock) : Vec<T>{};
  for (std::size_t p = 0; p < k; ++p) {
    Vec<T> bv[W];
    for (std::size_t w = 0; w < W; ++w) bv[w] = load(b + p * n + w * kColBlock);
    for (std::size_t r = 0; r < kRowBlock; ++r) {
      const T av = a[r * rs + p * ps];
      for (std::size_t w = 0; w < W; ++w) acc[r][w] = av * bv[w] + acc[r][w];
    }
  }
  for (std::size_t r = 0; r < kRowBlock; ++r)
    for (std::size_t w = 0; w < W; ++w) store(c + r * n + w * kColBlock, acc[r][w]);
}

template <typename T>
void row_block(const T* a, const T* b, T* c, std::size_t k, std::size_t ps, std::size_t n,
               bool accumulate) {
  Vec<T> acc{};
  if (accumulate) acc = load(c);
  for (std::size_t p = 0; p < k; ++p) acc = a[p * ps] * load(b + p * n) + acc;
  store(c, acc);
}

template <typename T>
T dot_strided(const T* a, const T* b, std::size_t k, std::size_t ps, std::size_t n, T init) {
  T acc = init;
  for (std::size_t p = 0; p < k; ++p) acc = madd(a[p * ps], b[p * n], acc);
  return acc;
}

// Element (r, p) of the left operand lives at a[r * rs + p * ps].
template <typename T>
void gemm_panel(const T* ap, std::size_t rs, std::size_t ps, const T* bp, T* cp, std::size_t m,
                std::size_t k, std::size_t n, bool accumulate) {
  const std::size_t n_full = n - n % kColBlock;
  const std::size_t m_full = m - m % kRowBlock;
  for (std::size_t i = 0; i < m_full; i += kRowBlock) {
    const T* ai = ap + i * rs;
    T* ci = cp + i * n;
    std::size_t j = 0;
    for (; j + 2 * kColBlock <= n_full; j += 2 * kColBlock)
      block_full<T, 2>(ai, bp + j, ci + j, k, rs, ps, n, accumulate);
    for (; j < n_full; j += kColBlock) block_full<T, 1>(ai, bp + j, ci + j, k, rs, ps, n, accumulate);
  }
  for (std::size_t i = m_full; i < m; ++i) {
    for (std::size_t j = 0; j < n_full; j += kColBlock) {
      row_block(ap + i * rs, bp + j, cp + i * n + j, k, ps, n, accumulate);
    }
  }
  if (n_full < n) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = n_full; j < n; ++j) {
        T* out = cp + i * n + j;
        *out = dot_strided(ap + i * rs, bp + j, k, ps, n, accumulate ? *out : T{0});
      }
    }
  }
}

// Panels over k keep a slab of b cache-resident; c carries the running sum
// between panels, so each element still sees p = 0..k-1 in order.
template <typename T>
void gemm_strided(const T* a, std::size_t rs, std::size_t ps, const T* b, T* c, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
    const std::size_t kc = std::min(kDepthBlock, k - p0);
    gemm_panel(a + p0 * ps, rs, ps, b + p0 * n, c, m, kc, n, accumulate || p0 > 0);
  }
  if (k == 0 && !accumulate) std::fill(c, c + m * n, T{0});
}

}  // namespace

template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate) {
  gemm_strided(a.data(), k, 1, b.data(), c.data(), m, k, n, accumulate);
}

template <typename T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  gemm_strided(a.data(), 1, m, b.data(), c.data(), m, k, n, accumulate);
}

template <typename T>
void transpose(std::span<const T> in, std::span<T> out, std::size_t rows, std::size_t cols) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    const std::size_t r1 = std::min(rows, r0 + kTile);
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t cc = c0; cc < c1; ++cc) out[cc * rows + r] = in[r * cols + cc];
    }
  }
}

template void gemm<float>(std::span<const float>, std::span<const float>, std::span<float>,
                          std::size_t, std::size_t, std::size_t, bool);
template void gemm<double>(std::span<const double>, std::span<const double>, std::span<double>,
                           std::size_t, std::size_t, std::size_t, bool);
template void gemm_tn<float>(std::span<const float>, std::span<const float>, std::span<float>,
                             std::size_t, std::size_t, std::size_t, bool);
template void gemm_tn<double>(std::span<const double>, std::span<const double>, std::span<double>,
                              std::size_t, std::size_t, std::size_t, bool);
template void transpose<float>(std::span<const float>, std::span<float>, std::size_t,
                               std::size_t);
template void transpose<double>(std::span<const double>, std::span<double>, std::size_t,
                                std::size_t);

}  // namespace csdn::kernels
