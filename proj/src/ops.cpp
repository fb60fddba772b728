// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csdn/kernels.hpp"

namespace csdn::ad {

namespace {

template <typename T>
using In = std::span<const Tensor<T>* const>;
template <typename T>
using GradIn = std::span<Tensor<T>* const>;

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, std::string_view op) {
  if (!(a.shape() == b.shape()))
    throw ShapeError(std::string(op) + ": expected equal shapes, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, std::string_view op) {
  if (!(a.rank() == rank))
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_str(a.shape()));
}

template <typename T>
Var<T> record(std::unique_ptr<Op<T>> op, std::vector<Var<T>> inputs) {
  Graph<T>& g = inputs.front().graph();
  return g.apply(std::move(op), std::move(inputs));
}

// ---------------------------------------------------------------------------
// Elementwise

enum class Binary { kAdd, kSub, kMul, kDiv };

template <typename T>
class BinaryOp final : public Op<T> {
 public:
  explicit BinaryOp(Binary kind) : kind_(kind) {}
  std::string_view name() const override {
    switch (kind_) {
      case Binary::kAdd: return "add";
      case Binary::kSub: return "sub";
      case Binary::kMul: return "mul";
      case Binary::kDiv: return "div";
    }
    return "binary";
  }
  Tensor<T> forward(In<T> in) override {
    const auto& a = *in[0];
    const auto& b = *in[1];
    require_same(a, b, name());
    Tensor<T> out(a.shape());
    const std::size_t n = a.numel();
    switch (kind_) {
      case Binary::kAdd: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i]; break;
      case Binary::kSub: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i]; break;
      case Binary::kMul: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i]; break;
      case Binary::kDiv: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i]; break;
    }
    return out;
  }
  void backward(In<T> in, const Tensor<T>& out, const Tensor<T>& g,
                GradIn<T> gin) const override {
    const auto& a = *in[0];
    const auto& b = *in[1];
    const std::size_t n = g.numel();
    Tensor<T>* ga = gin[0];
    Tensor<T>* gb = gin[1];
    switch (kind_) {
      case Binary::kAdd:
        if (ga) for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i];
        if (gb) for (std::size_t i = 0; i < n; ++i) (*gb)[i] += g[i];
        break;
      case Binary::kSub:
        if (ga) for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i];
        if (gb) for (std::size_t i = 0; i < n; ++i) (*gb)[i] -= g[i];
        break;
      case Binary::kMul:
        if (ga) for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] * b[i];
        if (gb) for (std::size_t i = 0; i < n; ++i) (*gb)[i] += g[i] * a[i];
        break;
      case Binary::kDiv:
        if (ga) for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] / b[i];
        if (gb) for (std::size_t i = 0; i < n; ++i) (*gb)[i] -= g[i] * out[i] / b[i];
        break;
    }
  }

 private:
  Binary kind_;
};

template <typename T>
class ScaleOp final : public Op<T> {
 public:
  explicit ScaleOp(T factor) : factor_(factor) {}
  std::string_view name() const override { return "scale"; }
  Tensor<T> forward(In<T> in) override {
    Tensor<T> out(in[0]->shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (*in[0])[i] * factor_;
    return out;
  }
  void backward(In<T>, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] * factor_;
  }

 private:
  T factor_;
};

template <typename T>
class ReluOp final : public Op<T> {
 public:
  std::string_view name() const override { return "relu"; }
  Tensor<T> forward(In<T> in) override {
    Tensor<T> out(in[0]->shape());
    const T* __restrict x = in[0]->data().data();
    T* __restrict y = out.data().data();
    for (std::size_t i = 0; i < out.numel(); ++i) y[i] = std::max(x[i], T{0});
    return out;
  }
  void backward(In<T> in, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    const T* __restrict x = in[0]->data().data();
    const T* __restrict gp = g.data().data();
    T* __restrict dx = gin[0]->data().data();
    for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += x[i] > T{0} ? gp[i] : T{0};
  }
};

template <typename T>
class TanhOp final : public Op<T> {
 public:
  std::string_view name() const override { return "tanh"; }
  Tensor<T> forward(In<T> in) override {
    Tensor<T> out(in[0]->shape());
    // Saturates strictly inside (-1, 1) even where tanh rounds to +-1.
    const T bound = std::nextafter(T{1}, T{0});
    for (std::size_t i = 0; i < out.numel(); ++i) {
      out[i] = std::clamp(std::tanh((*in[0])[i]), -bound, bound);
    }
    return out;
  }
  void backward(In<T>, const Tensor<T>& out, const Tensor<T>& g, GradIn<T> gin) const override {
    for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] * (T{1} - out[i] * out[i]);
  }
};

template <typename T>
class SumOp final : public Op<T> {
 public:
  std::string_view name() const override { return "sum"; }
  Tensor<T> forward(In<T> in) override {
    T acc{0};
    for (T v : in[0]->data()) acc += v;
    return Tensor<T>::scalar(acc);
  }
  void backward(In<T>, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    for (auto& v : gin[0]->data()) v += g[0];
  }
};

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
class MatmulOp final : public Op<T> {
 public:
  std::string_view name() const override { return "matmul"; }
  Tensor<T> forward(In<T> in) override {
    const auto& a = *in[0];
    const auto& b = *in[1];
    if (!(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0)))
      throw ShapeError("matmul: expected [m x k] * [k x n], got " + shape_str(a.shape()) + " * " +
                       shape_str(b.shape()));
    Tensor<T> out({a.dim(0), b.dim(1)});
    kernels::gemm<T>(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1), false);
    return out;
  }
  void backward(In<T> in, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    const auto& a = *in[0];
    const auto& b = *in[1];
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (gin[0]) {
      std::vector<T> bt(k * n);
      kernels::transpose<T>(b.data(), bt, k, n);
      kernels::gemm<T>(g.data(), bt, gin[0]->data(), m, n, k, true);
    }
    if (gin[1]) {
      kernels::gemm_tn<T>(a.data(), g.data(), gin[1]->data(), k, m, n, true);
    }
  }
};

// ---------------------------------------------------------------------------
// Layout

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <typename T>
class ConcatOp final : public Op<T> {
 public:
  explicit ConcatOp(std::size_t axis) : axis_(axis) {}
  std::string_view name() const override { return "concat"; }
  Tensor<T> forward(In<T> in) override {
    const Shape& first = in[0]->shape();
    if (!(axis_ < first.size()))
      throw ShapeError("concat: axis " + std::to_string(axis_) + " out of range for shape " +
                       shape_str(first));
    Shape out_shape = first;
    out_shape[axis_] = 0;
    for (auto* t : in) {
      Shape s = t->shape();
      if (!(s.size() == first.size()))
        throw ShapeError("concat: rank mismatch, " + shape_str(first) + " vs " + shape_str(s));
      for (std::size_t d = 0; d < s.size(); ++d) {
        if (!(d == axis_ || s[d] == first[d]))
          throw ShapeError("concat: off-axis extent mismatch, " + shape_str(first) + " vs " +
                           shape_str(s));
      }
      out_shape[axis_] += s[axis_];
    }
    Tensor<T> out(out_shape);
    const AxisSplit sp = split_at(out_shape, axis_);
    const std::size_t out_row = out_shape[axis_] * sp.inner;
    std::size_t offset = 0;
    for (auto* t : in) {
      const std::size_t chunk = t->dim(axis_) * sp.inner;
      for (std::size_t o = 0; o < sp.outer; ++o) {
        std::copy_n(t->data().data() + o * chunk, chunk, out.data().data() + o * out_row + offset);
      }
      offset += chunk;
    }
    return out;
  }
  void backward(In<T> in, const Tensor<T>& out, const Tensor<T>& g,
                GradIn<T> gin) const override {
    const AxisSplit sp = split_at(out.shape(), axis_);
    const std::size_t out_row = out.dim(axis_) * sp.inner;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      const std::size_t chunk = in[k]->dim(axis_) * sp.inner;
      if (gin[k]) {
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t e = 0; e < chunk; ++e)
            (*gin[k])[o * chunk + e] += g[o * out_row + offset + e];
      }
      offset += chunk;
    }
  }

 private:
  std::size_t axis_;
};

template <typename T>
class SliceOp final : public Op<T> {
 public:
  SliceOp(std::size_t axis, std::size_t begin, std::size_t end)
      : axis_(axis), begin_(begin), end_(end) {}
  std::string_view name() const override { return "slice"; }
  Tensor<T> forward(In<T> in) override {
    const Shape& s = in[0]->shape();
    if (!(axis_ < s.size() && begin_ < end_ && end_ <= s[axis_]))
      throw ShapeError("slice: range [" + std::to_string(begin_) + "," + std::to_string(end_) +
                       ") on axis " + std::to_string(axis_) + " invalid for shape " + shape_str(s));
    Shape out_shape = s;
    out_shape[axis_] = end_ - begin_;
    Tensor<T> out(out_shape);
    const AxisSplit sp = split_at(s, axis_);
    const std::size_t in_row = s[axis_] * sp.inner;
    const std::size_t chunk = (end_ - begin_) * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(in[0]->data().data() + o * in_row + begin_ * sp.inner, chunk,
                  out.data().data() + o * chunk);
    }
    return out;
  }
  void backward(In<T> in, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    const Shape& s = in[0]->shape();
    const AxisSplit sp = split_at(s, axis_);
    const std::size_t in_row = s[axis_] * sp.inner;
    const std::size_t chunk = (end_ - begin_) * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t e = 0; e < chunk; ++e)
        (*gin[0])[o * in_row + begin_ * sp.inner + e] += g[o * chunk + e];
  }

 private:
  std::size_t axis_, begin_, end_;
};

template <typename T>
class BroadcastOp final : public Op<T> {
 public:
  explicit BroadcastOp(Shape target) : target_(std::move(target)) {}
  std::string_view name() const override { return "broadcast"; }
  Tensor<T> forward(In<T> in) override {
    const auto& a = *in[0];
    Tensor<T> out(target_);
    tile_ = is_tile(a.shape());
    if (tile_) {
      const std::size_t s = a.numel();
      for (std::size_t o = 0; o < out.numel(); o += s) std::copy_n(a.data().begin(), s, out.data().begin() + o);
      return out;
    }
    build_map(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[source_[i]];
    return out;
  }
  void backward(In<T> in, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    if (tile_) {
      const std::size_t s = in[0]->numel();
      for (std::size_t o = 0; o < g.numel(); o += s)
        for (std::size_t e = 0; e < s; ++e) (*gin[0])[e] += g[o + e];
      return;
    }
    for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[source_[i]] += g[i];
  }

 private:
  // Source equal to a trailing block of the target (after dropping leading
  // unit axes): the output is the source repeated.
  bool is_tile(const Shape& src) const {
    std::size_t first = 0;
    while (first < src.size() && src[first] == 1) ++first;
    const std::size_t rest = src.size() - first;
    if (rest > target_.size()) return false;
    for (std::size_t d = 0; d < rest; ++d)
      if (src[first + d] != target_[target_.size() - rest + d]) return false;
    return src.size() <= target_.size();
  }

  void build_map(const Shape& src) {
    if (!(src.size() <= target_.size()))
      throw ShapeError("broadcast: cannot broadcast " + shape_str(src) + " to " +
                       shape_str(target_));
    const std::size_t lead = target_.size() - src.size();
    std::vector<std::size_t> stride(target_.size(), 0);
    std::size_t s = 1;
    for (std::size_t d = src.size(); d-- > 0;) {
      const std::size_t td = d + lead;
      if (!(src[d] == target_[td] || src[d] == 1))
        throw ShapeError("broadcast: cannot broadcast " + shape_str(src) + " to " +
                         shape_str(target_));
      stride[td] = src[d] == 1 ? 0 : s;
      s *= src[d];
    }
    const std::size_t n = shape_numel(target_);
    source_.assign(n, 0);
    std::vector<std::size_t> idx(target_.size(), 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < n; ++i) {
      source_[i] = off;
      for (std::size_t d = target_.size(); d-- > 0;) {
        ++idx[d];
        off += stride[d];
        if (idx[d] < target_[d]) break;
        off -= stride[d] * idx[d];
        idx[d] = 0;
      }
    }
  }

  Shape target_;
  std::vector<std::size_t> source_;
  bool tile_ = false;
};

template <typename T>
class ReshapeOp final : public Op<T> {
 public:
  explicit ReshapeOp(Shape target) : target_(std::move(target)) {}
  std::string_view name() const override { return "reshape"; }
  Tensor<T> forward(In<T> in) override {
    if (!(shape_numel(target_) == in[0]->numel()))
      throw ShapeError("reshape: " + shape_str(in[0]->shape()) + " to " + shape_str(target_));
    return in[0]->reshaped(target_);
  }
  void backward(In<T>, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i];
  }

 private:
  Shape target_;
};

// ---------------------------------------------------------------------------
// Convolution and pooling

struct ConvGeometry {
  std::size_t h, w, cin, k, cout, stride, pad, ho, wo;
};

template <typename T>
void im2col(const Tensor<T>& x, const ConvGeometry& c, std::vector<T>& col) {
  const std::size_t cols = c.k * c.k * c.cin;
  col.assign(c.ho * c.wo * cols, T{0});
  for (std::size_t oy = 0; oy < c.ho; ++oy) {
    for (std::size_t ox = 0; ox < c.wo; ++ox) {
      T* row = col.data() + (oy * c.wo + ox) * cols;
      for (std::size_t ky = 0; ky < c.k; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                                  static_cast<std::ptrdiff_t>(c.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(c.h)) continue;
        for (std::size_t kx = 0; kx < c.k; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                                    static_cast<std::ptrdiff_t>(c.pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(c.w)) continue;
          std::copy_n(x.data().data() + (static_cast<std::size_t>(iy) * c.w + ix) * c.cin, c.cin,
                      row + (ky * c.k + kx) * c.cin);
        }
      }
    }
  }
}

template <typename T>
class Conv2dOp final : public Op<T> {
 public:
  explicit Conv2dOp(std::size_t stride) : stride_(stride) {}
  std::string_view name() const override { return "conv2d"; }
  Tensor<T> forward(In<T> in) override {
    const auto& x = *in[0];
    const auto& w = *in[1];
    require_rank(x, 3, "conv2d input");
    if (!(w.rank() == 4 && w.dim(0) == w.dim(1) && w.dim(2) == x.dim(2)))
      throw ShapeError("conv2d: weight " + shape_str(w.shape()) + " incompatible with input " +
                       shape_str(x.shape()));
    if (!(stride_ >= 1))
      throw ShapeError("conv2d: stride must be positive");
    geo_ = geometry(x, w);
    std::vector<T> col;
    im2col(x, geo_, col);
    Tensor<T> out({geo_.ho, geo_.wo, geo_.cout});
    kernels::gemm<T>(col, w.data(), out.data(), geo_.ho * geo_.wo, geo_.k * geo_.k * geo_.cin,
                     geo_.cout, false);
    return out;
  }
  void backward(In<T> in, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    const auto& x = *in[0];
    const auto& w = *in[1];
    const ConvGeometry& c = geo_;
    const std::size_t rows = c.ho * c.wo;
    const std::size_t cols = c.k * c.k * c.cin;
    if (gin[1]) {
      std::vector<T> col;
      im2col(x, c, col);
      kernels::gemm_tn<T>(col, g.data(), gin[1]->data(), cols, rows, c.cout, true);
    }
    if (gin[0]) {
      std::vector<T> wt(cols * c.cout);
      kernels::transpose<T>(w.data(), wt, cols, c.cout);
      std::vector<T> dcol(rows * cols, T{0});
      kernels::gemm<T>(g.data(), wt, dcol, rows, c.cout, cols, false);
      auto& gx = *gin[0];
      for (std::size_t oy = 0; oy < c.ho; ++oy) {
        for (std::size_t ox = 0; ox < c.wo; ++ox) {
          const T* row = dcol.data() + (oy * c.wo + ox) * cols;
          for (std::size_t ky = 0; ky < c.k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                                      static_cast<std::ptrdiff_t>(c.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(c.h)) continue;
            for (std::size_t kx = 0; kx < c.k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                                        static_cast<std::ptrdiff_t>(c.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(c.w)) continue;
              T* dst = gx.data().data() + (static_cast<std::size_t>(iy) * c.w + ix) * c.cin;
              const T* src = row + (ky * c.k + kx) * c.cin;
              for (std::size_t ci = 0; ci < c.cin; ++ci) dst[ci] += src[ci];
            }
          }
        }
      }
    }
  }

 private:
  ConvGeometry geometry(const Tensor<T>& x, const Tensor<T>& w) const {
    ConvGeometry c{};
    c.h = x.dim(0);
    c.w = x.dim(1);
    c.cin = x.dim(2);
    c.k = w.dim(0);
    c.cout = w.dim(3);
    c.stride = stride_;
    c.pad = c.k / 2;
    if (!(c.h + 2 * c.pad >= c.k && c.w + 2 * c.pad >= c.k))
      throw ShapeError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel");
    c.ho = (c.h + 2 * c.pad - c.k) / c.stride + 1;
    c.wo = (c.w + 2 * c.pad - c.k) / c.stride + 1;
    return c;
  }

  std::size_t stride_;
  ConvGeometry geo_{};
};

template <typename T>
class AvgPoolOp final : public Op<T> {
 public:
  AvgPoolOp(std::size_t wh, std::size_t ww) : wh_(wh), ww_(ww) {}
  std::string_view name() const override { return "avg_pool2d"; }
  Tensor<T> forward(In<T> in) override {
    const auto& x = *in[0];
    require_rank(x, 3, "avg_pool2d");
    if (!(wh_ >= 1 && ww_ >= 1 && wh_ <= x.dim(0) && ww_ <= x.dim(1)))
      throw ShapeError("avg_pool2d: window larger than input " + shape_str(x.shape()));
    const std::size_t ho = x.dim(0) / wh_, wo = x.dim(1) / ww_, c = x.dim(2);
    Tensor<T> out({ho, wo, c});
    const T inv = T{1} / static_cast<T>(wh_ * ww_);
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox)
        for (std::size_t ch = 0; ch < c; ++ch) {
          T acc{0};
          for (std::size_t dy = 0; dy < wh_; ++dy)
            for (std::size_t dx = 0; dx < ww_; ++dx)
              acc += x[((oy * wh_ + dy) * x.dim(1) + ox * ww_ + dx) * c + ch];
          out[(oy * wo + ox) * c + ch] = acc * inv;
        }
    return out;
  }
  void backward(In<T> in, const Tensor<T>& out, const Tensor<T>& g,
                GradIn<T> gin) const override {
    const auto& x = *in[0];
    const std::size_t ho = out.dim(0), wo = out.dim(1), c = out.dim(2);
    const T inv = T{1} / static_cast<T>(wh_ * ww_);
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T v = g[(oy * wo + ox) * c + ch] * inv;
          for (std::size_t dy = 0; dy < wh_; ++dy)
            for (std::size_t dx = 0; dx < ww_; ++dx)
              (*gin[0])[((oy * wh_ + dy) * x.dim(1) + ox * ww_ + dx) * c + ch] += v;
        }
  }

 private:
  std::size_t wh_, ww_;
};

// ---------------------------------------------------------------------------
// Statistics and pooling over rows

template <typename T>
class InstanceMeanOp final : public Op<T> {
 public:
  std::string_view name() const override { return "instance_mean"; }
  Tensor<T> forward(In<T> in) override {
    const auto& a = *in[0];
    if (!(a.rank() == 2 && a.dim(0) >= 1))
      throw ShapeError("instance_mean: expected [N x C], got " + shape_str(a.shape()));
    const std::size_t n = a.dim(0), c = a.dim(1);
    std::vector<double> acc(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) acc[j] += a(i, j);
    Tensor<T> out({1, c});
    for (std::size_t j = 0; j < c; ++j) out[j] = static_cast<T>(acc[j] / static_cast<double>(n));
    return out;
  }
  void backward(In<T> in, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    const std::size_t n = in[0]->dim(0), c = in[0]->dim(1);
    const T inv = T{1} / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) (*gin[0])(i, j) += g[j] * inv;
  }
};

template <typename T>
class InstanceStdOp final : public Op<T> {
 public:
  std::string_view name() const override { return "instance_std"; }
  Tensor<T> forward(In<T> in) override {
    const auto& a = *in[0];
    if (!(a.rank() == 2 && a.dim(0) >= 1))
      throw ShapeError("instance_std: expected [N x C], got " + shape_str(a.shape()));
    const std::size_t n = a.dim(0), c = a.dim(1);
    // Sums in double; mean_ is reused by backward.
    std::vector<double> acc(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) acc[j] += a(i, j);
    mean_.resize(c);
    for (std::size_t j = 0; j < c; ++j) mean_[j] = static_cast<T>(acc[j] / static_cast<double>(n));
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = static_cast<double>(a(i, j)) - static_cast<double>(mean_[j]);
        acc[j] += d * d;
      }
    Tensor<T> out({1, c});
    for (std::size_t j = 0; j < c; ++j) out[j] = static_cast<T>(std::sqrt(acc[j] / static_cast<double>(n)));
    return out;
  }
  void backward(In<T> in, const Tensor<T>& out, const Tensor<T>& g,
                GradIn<T> gin) const override {
    const auto& a = *in[0];
    const std::size_t n = a.dim(0), c = a.dim(1);
    for (std::size_t j = 0; j < c; ++j) {
      if (out[j] == T{0}) continue;
      const T s = g[j] / (static_cast<T>(n) * out[j]);
      for (std::size_t i = 0; i < n; ++i) (*gin[0])(i, j) += s * (a(i, j) - mean_[j]);
    }
  }

 private:
  std::vector<T> mean_;
};

template <typename T>
class GroupMaxOp final : public Op<T> {
 public:
  explicit GroupMaxOp(std::size_t group) : group_(group) {}
  std::string_view name() const override { return "group_max"; }
  Tensor<T> forward(In<T> in) override {
    const auto& a = *in[0];
    if (!(a.rank() == 2 && group_ >= 1 && a.dim(0) % group_ == 0 && a.dim(0) > 0))
      throw ShapeError("group_max: rows of " + shape_str(a.shape()) +
                       " not divisible into groups of " + std::to_string(group_));
    const std::size_t n = a.dim(0) / group_, c = a.dim(1);
    Tensor<T> out({n, c});
    argmax_.assign(n * c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = i * group_;
      T* o = out.data().data() + i * c;
      std::uint32_t* am = argmax_.data() + i * c;
      std::copy_n(a.data().data() + base * c, c, o);
      for (std::size_t r = 1; r < group_; ++r) {
        const T* row = a.data().data() + (base + r) * c;
        for (std::size_t j = 0; j < c; ++j) {
          if (row[j] > o[j]) {
            o[j] = row[j];
            am[j] = static_cast<std::uint32_t>(r);
          }
        }
      }
    }
    return out;
  }
  void backward(In<T>, const Tensor<T>& out, const Tensor<T>& g, GradIn<T> gin) const override {
    const std::size_t n = out.dim(0), c = out.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j)
        (*gin[0])((i * group_ + argmax_[i * c + j]), j) += g[i * c + j];
  }

 private:
  std::size_t group_;
  std::vector<std::uint32_t> argmax_;
};

template <typename T>
class GatherRowsOp final : public Op<T> {
 public:
  explicit GatherRowsOp(std::vector<std::uint32_t> idx) : idx_(std::move(idx)) {}
  std::string_view name() const override { return "gather_rows"; }
  Tensor<T> forward(In<T> in) override {
    const auto& a = *in[0];
    if (!(a.rank() == 2))
      throw ShapeError("gather_rows: expected [M x C], got " + shape_str(a.shape()));
    const std::size_t c = a.dim(1);
    Tensor<T> out({idx_.size(), c});
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      if (!(idx_[i] < a.dim(0)))
        throw ShapeError("gather_rows: index " + std::to_string(idx_[i]) + " out of range for " +
                         shape_str(a.shape()));
      std::copy_n(a.data().data() + idx_[i] * c, c, out.data().data() + i * c);
    }
    return out;
  }
  void backward(In<T> in, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    const std::size_t c = in[0]->dim(1);
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      T* dst = gin[0]->data().data() + idx_[i] * c;
      const T* src = g.data().data() + i * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  }

 private:
  std::vector<std::uint32_t> idx_;
};

template <typename T>
class BilinearOp final : public Op<T> {
 public:
  BilinearOp(std::vector<T> uv, std::vector<std::uint8_t> valid)
      : uv_(std::move(uv)), valid_(std::move(valid)) {}
  std::string_view name() const override { return "bilinear_sample"; }

  struct Taps {
    std::size_t idx[4];
    T w[4];
  };

  Tensor<T> forward(In<T> in) override {
    const auto& m = *in[0];
    require_rank(m, 3, "bilinear_sample map");
    if (!(uv_.size() == 2 * valid_.size()))
      throw ShapeError("bilinear_sample: " + std::to_string(uv_.size()) + " coordinates for " +
                       std::to_string(valid_.size()) + " points");
    const std::size_t n = valid_.size(), c = m.dim(2);
    Tensor<T> out({n, c});
    for (std::size_t i = 0; i < n; ++i) {
      if (!valid_[i]) continue;
      const Taps t = taps(m, i);
      T* o = out.data().data() + i * c;
      for (int q = 0; q < 4; ++q) {
        const T* src = m.data().data() + t.idx[q] * c;
        for (std::size_t j = 0; j < c; ++j) o[j] += t.w[q] * src[j];
      }
    }
    return out;
  }
  void backward(In<T> in, const Tensor<T>&, const Tensor<T>& g, GradIn<T> gin) const override {
    const auto& m = *in[0];
    const std::size_t c = m.dim(2);
    for (std::size_t i = 0; i < valid_.size(); ++i) {
      if (!valid_[i]) continue;
      const Taps t = taps(m, i);
      const T* src = g.data().data() + i * c;
      for (int q = 0; q < 4; ++q) {
        T* dst = gin[0]->data().data() + t.idx[q] * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += t.w[q] * src[j];
      }
    }
  }

 private:
  Taps taps(const Tensor<T>& m, std::size_t i) const {
    const std::size_t h = m.dim(0), w = m.dim(1);
    const T x = std::clamp(uv_[2 * i], T{0}, static_cast<T>(w - 1));
    const T y = std::clamp(uv_[2 * i + 1], T{0}, static_cast<T>(h - 1));
    const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
    const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t x1 = std::min(x0 + 1, w - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const T fx = x - static_cast<T>(x0);
    const T fy = y - static_cast<T>(y0);
    Taps t{};
    t.idx[0] = y0 * w + x0;
    t.idx[1] = y0 * w + x1;
    t.idx[2] = y1 * w + x0;
    t.idx[3] = y1 * w + x1;
    t.w[0] = (T{1} - fx) * (T{1} - fy);
    t.w[1] = fx * (T{1} - fy);
    t.w[2] = (T{1} - fx) * fy;
    t.w[3] = fx * fy;
    return t;
  }

  std::vector<T> uv_;
  std::vector<std::uint8_t> valid_;
};

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  return record<T>(std::make_unique<BinaryOp<T>>(Binary::kAdd), {a, b});
}
template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  return record<T>(std::make_unique<BinaryOp<T>>(Binary::kSub), {a, b});
}
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  return record<T>(std::make_unique<BinaryOp<T>>(Binary::kMul), {a, b});
}
template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
  return record<T>(std::make_unique<BinaryOp<T>>(Binary::kDiv), {a, b});
}
template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return record<T>(std::make_unique<ScaleOp<T>>(factor), {a});
}
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  return record<T>(std::make_unique<MatmulOp<T>>(), {a, b});
}
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  return record<T>(std::make_unique<ConcatOp<T>>(axis), parts);
}
template <typename T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t begin, std::size_t end) {
  return record<T>(std::make_unique<SliceOp<T>>(axis, begin, end), {a});
}
template <typename T>
Var<T> broadcast_to(Var<T> a, Shape shape) {
  return record<T>(std::make_unique<BroadcastOp<T>>(std::move(shape)), {a});
}
template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  return record<T>(std::make_unique<ReshapeOp<T>>(std::move(shape)), {a});
}
template <typename T>
Var<T> relu(Var<T> a) {
  return record<T>(std::make_unique<ReluOp<T>>(), {a});
}
template <typename T>
Var<T> tanh(Var<T> a) {
  return record<T>(std::make_unique<TanhOp<T>>(), {a});
}
template <typename T>
Var<T> sum(Var<T> a) {
  return record<T>(std::make_unique<SumOp<T>>(), {a});
}
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, std::size_t stride) {
  return record<T>(std::make_unique<Conv2dOp<T>>(stride), {x, weight});
}
template <typename T>
Var<T> avg_pool2d(Var<T> x, std::size_t window_h, std::size_t window_w) {
  return record<T>(std::make_unique<AvgPoolOp<T>>(window_h, window_w), {x});
}
template <typename T>
Var<T> instance_mean(Var<T> a) {
  return record<T>(std::make_unique<InstanceMeanOp<T>>(), {a});
}
template <typename T>
Var<T> instance_std(Var<T> a) {
  return record<T>(std::make_unique<InstanceStdOp<T>>(), {a});
}
template <typename T>
Var<T> group_max(Var<T> a, std::size_t group) {
  return record<T>(std::make_unique<GroupMaxOp<T>>(group), {a});
}
template <typename T>
Var<T> gather_rows(Var<T> a, std::vector<std::uint32_t> indices) {
  return record<T>(std::make_unique<GatherRowsOp<T>>(std::move(indices)), {a});
}
template <typename T>
Var<T> bilinear_sample(Var<T> map, std::vector<T> uv, std::vector<std::uint8_t> valid) {
  return record<T>(std::make_unique<BilinearOp<T>>(std::move(uv), std::move(valid)), {map});
}

#define CSDN_INSTANTIATE_OPS(T)                                                        \
  template Var<T> add(Var<T>, Var<T>);                                                 \
  template Var<T> sub(Var<T>, Var<T>);                                                 \
  template Var<T> mul(Var<T>, Var<T>);                                                 \
  template Var<T> div(Var<T>, Var<T>);                                                 \
  template Var<T> scale(Var<T>, T);                                                    \
  template Var<T> matmul(Var<T>, Var<T>);                                              \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                     \
  template Var<T> slice(Var<T>, std::size_t, std::size_t, std::size_t);                \
  template Var<T> broadcast_to(Var<T>, Shape);                                         \
  template Var<T> reshape(Var<T>, Shape);                                              \
  template Var<T> relu(Var<T>);                                                        \
  template Var<T> tanh(Var<T>);                                                        \
  template Var<T> sum(Var<T>);                                                         \
  template Var<T> conv2d(Var<T>, Var<T>, std::size_t);                                 \
  template Var<T> avg_pool2d(Var<T>, std::size_t, std::size_t);                        \
  template Var<T> instance_mean(Var<T>);                                               \
  template Var<T> instance_std(Var<T>);                                                \
  template Var<T> group_max(Var<T>, std::size_t);                                      \
  template Var<T> gather_rows(Var<T>, std::vector<std::uint32_t>);                     \
  template Var<T> bilinear_sample(Var<T>, std::vector<T>, std::vector<std::uint8_t>);

CSDN_INSTANTIATE_OPS(float)
CSDN_INSTANTIATE_OPS(double)

#undef CSDN_INSTANTIATE_OPS

}  // namespace csdn::ad
