// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Geometry>

namespace csdn {

PointCloud::PointCloud(std::vector<float> xyz) : xyz_(std::move(xyz)) {
  if (xyz_.size() % 3 != 0) {
    throw std::invalid_argument("point cloud: coordinate count " + std::to_string(xyz_.size()) +
                                " is not a multiple of 3");
  }
}

template <typename T>
PointCloud PointCloud::from_tensor(const Tensor<T>& points) {
  if (points.rank() != 2 || points.dim(1) != 3) {
    throw ShapeError("point cloud: expected [N x 3], got " + shape_str(points.shape()));
  }
  return PointCloud(std::vector<float>(points.data().begin(), points.data().end()));
}

template <typename T>
Tensor<T> PointCloud::to_tensor() const {
  return Tensor<T>({size(), 3}, std::vector<T>(xyz_.begin(), xyz_.end()));
}

template PointCloud PointCloud::from_tensor<float>(const Tensor<float>&);
template PointCloud PointCloud::from_tensor<double>(const Tensor<double>&);
template Tensor<float> PointCloud::to_tensor<float>() const;
template Tensor<double> PointCloud::to_tensor<double>() const;

void PointCloud::validate(std::string_view what) const {
  if (empty()) throw std::invalid_argument(std::string(what) + ": point cloud is empty");
  for (float v : xyz_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": point cloud has non-finite coordinates");
    }
  }
}

std::string_view to_string(ChamferVariant v) {
  return v == ChamferVariant::kL2 ? "l2" : "squared_l2";
}

ChamferVariant parse_chamfer_variant(std::string_view s) {
  if (s == "l2") return ChamferVariant::kL2;
  if (s == "squared_l2") return ChamferVariant::kSquaredL2;
  throw std::invalid_argument("unknown chamfer variant '" + std::string(s) + "'");
}

namespace {

template <typename T>
double sq_dist(const T* a, const T* b) {
  const double dx = static_cast<double>(a[0]) - static_cast<double>(b[0]);
  const double dy = static_cast<double>(a[1]) - static_cast<double>(b[1]);
  const double dz = static_cast<double>(a[2]) - static_cast<double>(b[2]);
  return dx * dx + dy * dy + dz * dz;
}

template <typename T>
std::size_t count_points(std::span<const T> xyz, std::string_view what) {
  if (xyz.size() % 3 != 0) throw std::invalid_argument(std::string(what) + ": not packed xyz");
  return xyz.size() / 3;
}

// Nearest neighbor of each point of `from` in `to`: index and squared distance.
template <typename T>
void nearest(std::span<const T> from, std::span<const T> to, std::vector<std::uint32_t>& idx,
             std::vector<double>& d2) {
  const std::size_t n = from.size() / 3, m = to.size() / 3;
  idx.assign(n, 0);
  d2.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = sq_dist(from.data() + 3 * i, to.data() + 3 * j);
      if (d < best) {
        best = d;
        arg = static_cast<std::uint32_t>(j);
      }
    }
    idx[i] = arg;
    d2[i] = best;
  }
}

}  // namespace

template <typename T>
KnnTable knn(std::span<const T> query, std::span<const T> reference, std::size_t k) {
  const std::size_t nq = count_points(query, "knn query");
  const std::size_t nr = count_points(reference, "knn reference");
  if (k == 0 || k > nr) {
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " but reference has " +
                                std::to_string(nr) + " points");
  }
  KnnTable table;
  table.k = k;
  table.indices.resize(nq * k);
  std::vector<std::pair<double, std::uint32_t>> cand(nr);
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      cand[j] = {sq_dist(query.data() + 3 * i, reference.data() + 3 * j),
                 static_cast<std::uint32_t>(j)};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t j = 0; j < k; ++j) table.indices[i * k + j] = cand[j].second;
  }
  return table;
}

template <typename T>
double chamfer(std::span<const T> x, std::span<const T> y, ChamferVariant variant) {
  const std::size_t nx = count_points(x, "chamfer");
  const std::size_t ny = count_points(y, "chamfer");
  if (nx == 0 || ny == 0) throw std::invalid_argument("chamfer: empty point cloud");
  std::vector<std::uint32_t> idx;
  std::vector<double> d2;
  auto side = [&](std::span<const T> a, std::span<const T> b) {
    nearest(a, b, idx, d2);
    double acc = 0.0;
    for (double d : d2) acc += variant == ChamferVariant::kL2 ? std::sqrt(d) : d;
    return acc / static_cast<double>(d2.size());
  };
  return side(x, y) + side(y, x);
}

template <typename T>
double f_score(std::span<const T> pred, std::span<const T> gt, double tau) {
  const std::size_t np = count_points(pred, "f_score");
  const std::size_t ng = count_points(gt, "f_score");
  if (np == 0 || ng == 0) throw std::invalid_argument("f_score: empty point cloud");
  if (!(tau > 0.0)) throw std::invalid_argument("f_score: tau must be positive");
  std::vector<std::uint32_t> idx;
  std::vector<double> d2;
  auto fraction = [&](std::span<const T> a, std::span<const T> b) {
    nearest(a, b, idx, d2);
    std::size_t hits = 0;
    for (double d : d2) hits += std::sqrt(d) <= tau ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(d2.size());
  };
  const double precision = fraction(pred, gt);
  const double recall = fraction(gt, pred);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double focal, std::size_t height,
                       std::size_t width) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Camera c;
  c.rotation.row(0) = right.transpose();
  c.rotation.row(1) = down.transpose();
  c.rotation.row(2) = forward.transpose();
  c.translation = -(c.rotation * eye);
  c.fx = c.fy = focal;
  c.cx = (static_cast<double>(width) - 1.0) / 2.0;
  c.cy = (static_cast<double>(height) - 1.0) / 2.0;
  c.height = height;
  c.width = width;
  return c;
}

void Camera::validate() const {
  const double err = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= 1e-6)) {
    throw std::invalid_argument("camera: rotation is not orthonormal (deviation " +
                                std::to_string(err) + ")");
  }
  if (height == 0 || width == 0) throw std::invalid_argument("camera: empty image size");
  if (!std::isfinite(fx) || !std::isfinite(fy) || fx == 0.0 || fy == 0.0) {
    throw std::invalid_argument("camera: invalid focal length");
  }
}

template <typename T>
Projection project(std::span<const T> points, const Camera& camera) {
  const std::size_t n = count_points(points, "project");
  Projection p;
  p.uv.assign(2 * n, 0.0);
  p.valid.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d w(points[3 * i], points[3 * i + 1], points[3 * i + 2]);
    const Eigen::Vector3d c = camera.to_camera(w);
    if (c.z() <= kMinDepth) continue;
    p.uv[2 * i] = camera.fx * c.x() / c.z() + camera.cx;
    p.uv[2 * i + 1] = camera.fy * c.y() / c.z() + camera.cy;
    p.valid[i] = 1;
  }
  return p;
}

template KnnTable knn<float>(std::span<const float>, std::span<const float>, std::size_t);
template KnnTable knn<double>(std::span<const double>, std::span<const double>, std::size_t);
template double chamfer<float>(std::span<const float>, std::span<const float>, ChamferVariant);
template double chamfer<double>(std::span<const double>, std::span<const double>,
                                ChamferVariant);
template double f_score<float>(std::span<const float>, std::span<const float>, double);
template double f_score<double>(std::span<const double>, std::span<const double>, double);
template Projection project<float>(std::span<const float>, const Camera&);
template Projection project<double>(std::span<const double>, const Camera&);

namespace ad {

namespace {

template <typename T>
class ChamferOp final : public Op<T> {
 public:
  explicit ChamferOp(ChamferVariant v) : variant_(v) {}
  std::string_view name() const override { return "chamfer"; }

  Tensor<T> forward(std::span<const Tensor<T>* const> in) override {
    const auto& x = *in[0];
    const auto& y = *in[1];
    for (const auto* t : {&x, &y}) {
      if (t->rank() != 2 || t->dim(1) != 3) {
        throw ShapeError("chamfer: expected [N x 3] clouds, got " + shape_str(t->shape()));
      }
      if (t->dim(0) == 0) throw std::invalid_argument("chamfer: empty point cloud");
    }
    std::vector<double> dxy, dyx;
    nearest<T>(x.data(), y.data(), match_xy_, dxy);
    nearest<T>(y.data(), x.data(), match_yx_, dyx);
    auto mean = [this](const std::vector<double>& d2) {
      double acc = 0.0;
      for (double d : d2) acc += variant_ == ChamferVariant::kL2 ? std::sqrt(d) : d;
      return acc / static_cast<double>(d2.size());
    };
    return Tensor<T>::scalar(static_cast<T>(mean(dxy) + mean(dyx)));
  }

  void backward(std::span<const Tensor<T>* const> in, const Tensor<T>&, const Tensor<T>& g,
                std::span<Tensor<T>* const> gin) const override {
    side(*in[0], *in[1], match_xy_, g[0], gin[0], gin[1]);
    side(*in[1], *in[0], match_yx_, g[0], gin[1], gin[0]);
  }

 private:
  void side(const Tensor<T>& from, const Tensor<T>& to, const std::vector<std::uint32_t>& match,
            T g, Tensor<T>* g_from, Tensor<T>* g_to) const {
    const std::size_t n = from.dim(0);
    const double w = static_cast<double>(g) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = match[i];
      double d[3];
      double norm2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        d[c] = static_cast<double>(from(i, c)) - static_cast<double>(to(j, c));
        norm2 += d[c] * d[c];
      }
      double coeff;
      if (variant_ == ChamferVariant::kL2) {
        if (norm2 == 0.0) continue;
        coeff = w / std::sqrt(norm2);
      } else {
        coeff = 2.0 * w;
      }
      for (int c = 0; c < 3; ++c) {
        const T v = static_cast<T>(coeff * d[c]);
        if (g_from) (*g_from)(i, c) += v;
        if (g_to) (*g_to)(j, c) -= v;
      }
    }
  }

  ChamferVariant variant_;
  std::vector<std::uint32_t> match_xy_, match_yx_;
};

}  // namespace

template <typename T>
Var<T> chamfer(Var<T> x, Var<T> y, ChamferVariant variant) {
  return x.graph().apply(std::make_unique<ChamferOp<T>>(variant), {x, y});
}

template Var<float> chamfer(Var<float>, Var<float>, ChamferVariant);
template Var<double> chamfer(Var<double>, Var<double>, ChamferVariant);

}  // namespace ad
}  // namespace csdn
