// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csdn/autodiff.hpp"

namespace csdn::ad {

// Elementwise binary ops require identical shapes; use broadcast_to first.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> div(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);

/// [m x k] * [k x n]
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);

template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
template <typename T> Var<T> slice(Var<T> a, std::size_t axis, std::size_t begin, std::size_t end);
/// Right-aligned broadcasting: size-1 or missing leading axes expand.
template <typename T> Var<T> broadcast_to(Var<T> a, Shape shape);
template <typename T> Var<T> reshape(Var<T> a, Shape shape);

template <typename T> Var<T> relu(Var<T> a);
template <typename T> Var<T> tanh(Var<T> a);

/// Sum of all elements, shape [1].
template <typename T> Var<T> sum(Var<T> a);

/// x: [H x W x Cin], weight: [K x K x Cin x Cout]; zero padding K/2.
/// Output spatial size floor((in + 2*pad - K) / stride) + 1.
template <typename T> Var<T> conv2d(Var<T> x, Var<T> weight, std::size_t stride);
/// Non-overlapping average pool with a (window_h x window_w) window over
/// [H x W x C]; trailing pixels that do not fill a window are dropped.
template <typename T>
Var<T> avg_pool2d(Var<T> x, std::size_t window_h, std::size_t window_w);

/// Per-channel statistics over the rows of an [N x C] instance, shape [1 x C].
template <typename T> Var<T> instance_mean(Var<T> a);
/// Population standard deviation (biased estimator).
template <typename T> Var<T> instance_std(Var<T> a);

/// Channel-wise max over consecutive row groups: [(N*K) x C] -> [N x C].
/// Ties resolve to the lowest row inside the group.
template <typename T> Var<T> group_max(Var<T> a, std::size_t group);

/// Row gather: out[i] = a[indices[i]].
template <typename T> Var<T> gather_rows(Var<T> a, std::vector<std::uint32_t> indices);

/// Bilinear sampling of an [H x W x C] map at constant pixel coordinates
/// (pixel (x, y) has its center at integer (x, y)). Coordinates are clamped to
/// the border centers; rows with valid == 0 produce zeros. Output [N x C].
template <typename T>
Var<T> bilinear_sample(Var<T> map, std::vector<T> uv, std::vector<std::uint8_t> valid);

template <typename T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

}  // namespace csdn::ad
