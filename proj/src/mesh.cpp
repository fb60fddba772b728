// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

#include "csdn/random.hpp"

namespace csdn {

using Eigen::Vector2d;
using Eigen::Vector3d;

double Mesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

Vector3d Mesh::face_normal(std::size_t f) const {
  const auto& t = faces[f];
  const Vector3d n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  const double len = n.norm();
  return len > 0.0 ? Vector3d(n / len) : Vector3d::Zero();
}

void Mesh::append(const Mesh& other) {
  const auto base = static_cast<std::uint32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (auto f : other.faces) faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

void Mesh::drop_degenerate(double tol) {
  std::vector<std::array<std::uint32_t, 3>> kept;
  for (std::size_t f = 0; f < faces.size(); ++f)
    if (face_area(f) > tol) kept.push_back(faces[f]);
  faces = std::move(kept);
}

void Mesh::normalize(double extent) {
  if (vertices.empty()) return;
  Vector3d lo = vertices.front(), hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vector3d center = 0.5 * (lo + hi);
  const double longest = (hi - lo).maxCoeff();
  const double s = longest > 0.0 ? extent / longest : 1.0;
  for (auto& v : vertices) v = (v - center) * s;
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kTable: return "table";
    case Category::kChair: return "chair";
    case Category::kLamp: return "lamp";
    case Category::kCar: return "car";
  }
  return "?";
}

Category parse_category(std::string_view s) {
  if (s == "table" || s == "box-composite") return Category::kTable;
  if (s == "chair" || s == "extrusion") return Category::kChair;
  if (s == "lamp" || s == "lathe") return Category::kLamp;
  if (s == "car" || s == "hull-blend") return Category::kCar;
  throw std::invalid_argument("unknown category '" + std::string(s) +
                              "' (table, chair, lamp, car)");
}

const std::vector<Category>& all_categories() {
  static const std::vector<Category> c{Category::kTable, Category::kChair, Category::kLamp,
                                       Category::kCar};
  return c;
}

Mesh make_box(const Vector3d& lo, const Vector3d& hi) {
  Mesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  }
  // Outward winding.
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

namespace {

// Surface of revolution about y: rings of (radius, y), fans closing the ends
// whose radius is positive.
Mesh lathe(const std::vector<Vector2d>& profile, std::size_t segments) {
  Mesh m;
  const std::size_t rings = profile.size();
  for (const auto& p : profile) {
    for (std::size_t s = 0; s < segments; ++s) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(s) / static_cast<double>(segments);
      m.vertices.emplace_back(p.x() * std::cos(a), p.y(), p.x() * std::sin(a));
    }
  }
  auto idx = [&](std::size_t r, std::size_t s) {
    return static_cast<std::uint32_t>(r * segments + s % segments);
  };
  for (std::size_t r = 0; r + 1 < rings; ++r) {
    for (std::size_t s = 0; s < segments; ++s) {
      m.faces.push_back({idx(r, s), idx(r + 1, s), idx(r, s + 1)});
      m.faces.push_back({idx(r, s + 1), idx(r + 1, s), idx(r + 1, s + 1)});
    }
  }
  auto cap = [&](std::size_t r, bool flip) {
    if (profile[r].x() <= 0.0) return;
    const auto center = static_cast<std::uint32_t>(m.vertices.size());
    m.vertices.emplace_back(0.0, profile[r].y(), 0.0);
    for (std::size_t s = 0; s < segments; ++s) {
      if (flip) m.faces.push_back({center, idx(r, s + 1), idx(r, s)});
      else m.faces.push_back({center, idx(r, s), idx(r, s + 1)});
    }
  };
  cap(0, false);
  cap(rings - 1, true);
  return m;
}

double signed_power(double v, double e) {
  return std::copysign(std::pow(std::abs(v), e), v);
}

// Superellipsoid with semi-axes `r`, exponents e1 (latitude) and e2
// (longitude); poles are single vertices joined by fans.
Mesh superellipsoid(const Vector3d& center, const Vector3d& r, double e1, double e2,
                    std::size_t slices, std::size_t stacks) {
  Mesh m;
  m.vertices.push_back(center + Vector3d(0, r.y(), 0));
  for (std::size_t i = 1; i < stacks; ++i) {
    const double phi = std::numbers::pi / 2 - std::numbers::pi * static_cast<double>(i) / static_cast<double>(stacks);
    for (std::size_t j = 0; j < slices; ++j) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(slices);
      const double cp = signed_power(std::cos(phi), e1);
      m.vertices.push_back(center + Vector3d(r.x() * cp * signed_power(std::cos(th), e2),
                                             r.y() * signed_power(std::sin(phi), e1),
                                             r.z() * cp * signed_power(std::sin(th), e2)));
    }
  }
  const auto bottom = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.push_back(center - Vector3d(0, r.y(), 0));
  auto ring = [&](std::size_t i, std::size_t j) {
    return static_cast<std::uint32_t>(1 + (i - 1) * slices + j % slices);
  };
  for (std::size_t j = 0; j < slices; ++j) m.faces.push_back({0, ring(1, j + 1), ring(1, j)});
  for (std::size_t i = 1; i + 1 < stacks; ++i) {
    for (std::size_t j = 0; j < slices; ++j) {
      m.faces.push_back({ring(i, j), ring(i, j + 1), ring(i + 1, j)});
      m.faces.push_back({ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j)});
    }
  }
  for (std::size_t j = 0; j < slices; ++j) m.faces.push_back({bottom, ring(stacks - 1, j), ring(stacks - 1, j + 1)});
  return m;
}

// Cylinder along z (a wheel): axis center, radius, half width.
Mesh wheel(const Vector3d& center, double radius, double half_width, std::size_t segments) {
  Mesh m = lathe({{radius, -half_width}, {radius, half_width}}, segments);
  // lathe revolves about y; rotate y -> z.
  for (auto& v : m.vertices) v = center + Vector3d(v.x(), v.z(), v.y());
  for (auto& f : m.faces) std::swap(f[1], f[2]);
  return m;
}

// Polygon in the (z, y) plane extruded along x over [x0, x1].
Mesh extrude(const std::vector<Vector2d>& poly, double x0, double x1) {
  Mesh m;
  const auto n = static_cast<std::uint32_t>(poly.size());
  for (const auto& p : poly) m.vertices.emplace_back(x0, p.y(), p.x());
  for (const auto& p : poly) m.vertices.emplace_back(x1, p.y(), p.x());
  const auto tris = triangulate_polygon(poly);
  for (const auto& t : tris) {
    m.faces.push_back({t[0], t[2], t[1]});
    m.faces.push_back({t[0] + n, t[1] + n, t[2] + n});
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    m.faces.push_back({i, j, i + n});
    m.faces.push_back({j, j + n, i + n});
  }
  return m;
}

Mesh gen_table(Rng& rng) {
  const double w = rng.uniform(0.8, 1.2), d = rng.uniform(0.5, 0.9);
  const double h = rng.uniform(0.5, 0.9), top = rng.uniform(0.04, 0.09);
  const double leg = rng.uniform(0.04, 0.09), inset = rng.uniform(0.0, 0.1);
  Mesh m = make_box({-w / 2, h - top, -d / 2}, {w / 2, h, d / 2});
  for (int sx : {-1, 1}) {
    for (int sz : {-1, 1}) {
      const double cx = sx * (w / 2 - inset - leg / 2), cz = sz * (d / 2 - inset - leg / 2);
      m.append(make_box({cx - leg / 2, 0, cz - leg / 2}, {cx + leg / 2, h - top, cz + leg / 2}));
    }
  }
  if (rng.uniform() < 0.5) {  // lower shelf
    const double y = rng.uniform(0.15, 0.3) * h;
    m.append(make_box({-w / 2 + inset, y, -d / 2 + inset}, {w / 2 - inset, y + top * 0.6, d / 2 - inset}));
  }
  return m;
}

Mesh gen_chair(Rng& rng) {
  const double seat_h = rng.uniform(0.4, 0.55), seat_d = rng.uniform(0.45, 0.6);
  const double seat_t = rng.uniform(0.05, 0.09), leg = rng.uniform(0.05, 0.08);
  const double back_h = rng.uniform(0.4, 0.7), back_t = rng.uniform(0.05, 0.09);
  const double lean = rng.uniform(0.0, 0.12), width = rng.uniform(0.45, 0.6);
  // Side profile, counter-clockwise in (z, y): front leg, seat, back leg rising into the backrest.
  const double z0 = -seat_d / 2, z1 = seat_d / 2;
  const std::vector<Vector2d> profile = {
      {z1 - leg, 0.0},
      {z1, 0.0},
      {z1, seat_h + seat_t},
      {z0 + back_t, seat_h + seat_t},
      {z0 + back_t - lean, seat_h + seat_t + back_h},
      {z0 - lean, seat_h + seat_t + back_h},
      {z0, seat_h},
      {z0, 0.0},
      {z0 + leg, 0.0},
      {z0 + leg, seat_h},
      {z1 - leg, seat_h},
  };
  return extrude(profile, -width / 2, width / 2);
}

Mesh gen_lamp(Rng& rng) {
  const double base_r = rng.uniform(0.18, 0.3), base_h = rng.uniform(0.03, 0.07);
  const double stem_r = rng.uniform(0.02, 0.04), stem_h = rng.uniform(0.4, 0.7);
  const double shade_lo = rng.uniform(0.2, 0.35), shade_hi = rng.uniform(0.08, 0.2);
  const double shade_h = rng.uniform(0.2, 0.35);
  const double y1 = base_h, y2 = y1 + stem_h, y3 = y2 + shade_h;
  const std::vector<Vector2d> profile = {
      {base_r, 0.0}, {base_r, y1}, {stem_r, y1}, {stem_r, y2 - 0.02},
      {shade_lo, y2}, {shade_hi, y3},
  };
  return lathe(profile, 32);
}

Mesh gen_car(Rng& rng) {
  const double len = rng.uniform(0.9, 1.2), wid = rng.uniform(0.4, 0.55);
  const double body_h = rng.uniform(0.14, 0.22), clearance = rng.uniform(0.08, 0.14);
  const double cabin_len = rng.uniform(0.4, 0.6) * len, cabin_h = rng.uniform(0.1, 0.16);
  const double wheel_r = rng.uniform(0.09, 0.13);
  const double e_body = rng.uniform(0.25, 0.5), e_cabin = rng.uniform(0.4, 0.8);
  const double cabin_shift = rng.uniform(-0.1, 0.05) * len;
  Mesh m = superellipsoid({0, clearance + body_h, 0}, {len / 2, body_h, wid / 2}, e_body, e_body, 32, 16);
  m.append(superellipsoid({cabin_shift, clearance + 2 * body_h, 0},
                          {cabin_len / 2, cabin_h, wid * 0.45}, e_cabin, e_cabin, 24, 12));
  for (int sx : {-1, 1}) {
    for (int sz : {-1, 1}) {
      m.append(wheel({sx * len * 0.32, wheel_r, sz * (wid / 2)}, wheel_r, 0.05, 20));
    }
  }
  return m;
}

}  // namespace

Mesh make_uv_sphere(double radius, std::size_t slices, std::size_t stacks) {
  return superellipsoid(Vector3d::Zero(), Vector3d::Constant(radius), 1.0, 1.0, slices, stacks);
}

std::vector<std::array<std::uint32_t, 3>> triangulate_polygon(const std::vector<Vector2d>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) throw std::invalid_argument("triangulate: polygon needs at least 3 vertices");
  double area2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % n];
    area2 += a.x() * b.y() - b.x() * a.y();
  }
  const double orient = area2 >= 0.0 ? 1.0 : -1.0;
  auto cross = [](const Vector2d& o, const Vector2d& a, const Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
  std::vector<std::array<std::uint32_t, 3>> tris;
  std::size_t guard = 0;
  while (idx.size() > 3) {
    bool clipped = false;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto ia = idx[(i + idx.size() - 1) % idx.size()], ib = idx[i], ic = idx[(i + 1) % idx.size()];
      const Vector2d &a = poly[ia], &b = poly[ib], &c = poly[ic];
      if (orient * cross(a, b, c) <= 0.0) continue;  // reflex or flat
      bool contains = false;
      for (auto j : idx) {
        if (j == ia || j == ib || j == ic) continue;
        const Vector2d& p = poly[j];
        if (orient * cross(a, b, p) >= 0.0 && orient * cross(b, c, p) >= 0.0 &&
            orient * cross(c, a, p) >= 0.0) {
          contains = true;
          break;
        }
      }
      if (contains) continue;
      tris.push_back({ia, ib, ic});
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(i));
      clipped = true;
      break;
    }
    if (!clipped || ++guard > 4 * n) throw std::invalid_argument("triangulate: polygon is not simple");
  }
  tris.push_back({idx[0], idx[1], idx[2]});
  if (orient < 0.0) {
    for (auto& t : tris) std::swap(t[1], t[2]);
  }
  return tris;
}

Mesh gen_shape(Category category, std::uint64_t seed) {
  Rng rng(seed);
  Mesh m;
  switch (category) {
    case Category::kTable: m = gen_table(rng); break;
    case Category::kChair: m = gen_chair(rng); break;
    case Category::kLamp: m = gen_lamp(rng); break;
    case Category::kCar: m = gen_car(rng); break;
  }
  m.normalize(kShapeExtent);
  m.drop_degenerate(kDegenerateArea);
  return m;
}

PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.faces.empty()) throw std::invalid_argument("sample_surface: mesh has no faces");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("sample_surface: mesh has zero area");
  Rng rng(seed);
  std::vector<float> xyz;
  xyz.reserve(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    const std::size_t f = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    const auto& t = mesh.faces[f];
    const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    const Vector3d p = (1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                       r1 * r2 * mesh.vertices[t[2]];
    for (int c = 0; c < 3; ++c) xyz.push_back(static_cast<float>(p[c]));
  }
  return PointCloud(std::move(xyz));
}

}  // namespace csdn
