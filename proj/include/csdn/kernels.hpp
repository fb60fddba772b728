// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

namespace csdn::kernels {

// Row-major dense kernels shared by the autodiff primitives.
//
// Every output element of gemm is accumulated over the inner dimension in
// ascending order with fused multiply-adds, starting from zero (or from the
// existing value when accumulating). The result for a given row therefore does
// not depend on how many rows the call processes or where the row sits, which
// is what makes set-pooling encoders bitwise permutation invariant.

/// C[m x n] (+)= A[m x k] * B[k x n]
template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate);

/// C[m x n] (+)= A^T * B with A stored [k x m]; same accumulation order as gemm.
template <typename T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);

/// out[cols x rows] = in[rows x cols]^T
template <typename T>
void transpose(std::span<const T> in, std::span<T> out, std::size_t rows, std::size_t cols);

}  // namespace csdn::kernels
