// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csdn/text.hpp"

namespace csdn {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  if (is.bad()) throw std::runtime_error(path.string() + ": read failed");
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

namespace {

// Iterates lines with 1-based numbers, skipping blanks and '#' comments.
template <typename F>
void for_each_line(const std::string& text, F&& f) {
  std::size_t pos = 0, line = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    ++line;
    const std::string_view raw(text.data() + pos, nl - pos);
    pos = nl + 1;
    const auto t = trim(raw);
    if (t.empty() || t.front() == '#') continue;
    f(t, line);
  }
}

std::size_t column_of(std::string_view line, std::string_view field) {
  return static_cast<std::size_t>(field.data() - line.data()) + 1;
}

}  // namespace

std::string format_xyz(const PointCloud& cloud, const std::string& header) {
  std::string out;
  if (!header.empty()) out += header + "\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    out += format_number(p[0]) + " " + format_number(p[1]) + " " + format_number(p[2]) + "\n";
  }
  return out;
}

PointCloud parse_xyz(const std::string& text, const std::string& source) {
  std::vector<float> xyz;
  for_each_line(text, [&](std::string_view line, std::size_t n) {
    const auto f = split_ws(line);
    if (f.size() != 3) {
      throw ParseError(source, n, 1, "expected 3 coordinates, found " + std::to_string(f.size()));
    }
    for (auto v : f) {
      float x;
      if (!parse_float(v, x) || !std::isfinite(x)) {
        throw ParseError(source, n, column_of(line, v), "invalid coordinate '" + std::string(v) + "'");
      }
      xyz.push_back(x);
    }
  });
  return PointCloud(std::move(xyz));
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud, const std::string& header) {
  write_file(path, format_xyz(cloud, header));
}

PointCloud read_xyz(const std::filesystem::path& path) {
  return parse_xyz(read_file(path), path.string());
}

void quantize(Image& image) {
  for (auto& v : image.rgb) v = static_cast<float>(std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0);
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.rgb.size());
  for (float v : image.rgb) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
  }
  return out;
}

Image decode_ppm(const std::string& bytes, const std::string& source) {
  std::size_t pos = 0;
  // Header tokens are separated by whitespace; '#' starts a comment.
  auto token = [&](const char* what) {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError(source, 1, start + 1, std::string("missing ") + what);
    return std::string_view(bytes).substr(start, pos - start);
  };
  if (token("magic") != "P6") throw ParseError(source, 1, 1, "not a binary PPM (P6) image");
  auto number = [&](const char* what) {
    const std::size_t at = pos;
    std::uint64_t v;
    if (!parse_uint(token(what), v)) throw ParseError(source, 1, at + 1, std::string("invalid ") + what);
    return static_cast<std::size_t>(v);
  };
  Image img;
  img.width = number("width");
  img.height = number("height");
  if (number("maxval") != 255) throw ParseError(source, 1, pos, "only maxval 255 is supported");
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = img.width * img.height * 3;
  if (bytes.size() < pos + need) {
    throw ParseError(source, 1, bytes.size() + 1,
                     "raster truncated: " + std::to_string(bytes.size() - std::min(bytes.size(), pos)) +
                         " of " + std::to_string(need) + " bytes");
  }
  img.rgb.resize(need);
  for (std::size_t i = 0; i < need; ++i) {
    img.rgb[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i]) / 255.0);
  }
  return img;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_ppm(image));
}

Image read_image(const std::filesystem::path& path) {
  return decode_ppm(read_file(path), path.string());
}

std::string format_camera(const Camera& c) {
  std::string out = "rotation";
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out += " " + format_number(c.rotation(i, j));
  out += "\ntranslation";
  for (int i = 0; i < 3; ++i) out += " " + format_number(c.translation[i]);
  out += "\nfocal " + format_number(c.fx) + " " + format_number(c.fy);
  out += "\nprincipal " + format_number(c.cx) + " " + format_number(c.cy);
  out += "\nimage_size " + std::to_string(c.height) + " " + std::to_string(c.width) + "\n";
  return out;
}

Camera parse_camera(const std::string& text, const std::string& source) {
  Camera c;
  int seen = 0;
  for_each_line(text, [&](std::string_view line, std::size_t n) {
    const auto f = split_ws(line);
    const std::string key(f.front());
    auto numbers = [&](std::size_t count) {
      if (f.size() != count + 1) {
        throw ParseError(source, n, 1, key + ": expected " + std::to_string(count) + " values");
      }
      std::vector<double> v;
      for (std::size_t i = 1; i < f.size(); ++i) {
        double x;
        if (!parse_double(f[i], x) || !std::isfinite(x)) {
          throw ParseError(source, n, column_of(line, f[i]), key + ": invalid number '" + std::string(f[i]) + "'");
        }
        v.push_back(x);
      }
      return v;
    };
    if (key == "rotation") {
      const auto v = numbers(9);
      for (int i = 0; i < 9; ++i) c.rotation(i / 3, i % 3) = v[i];
      seen |= 1;
    } else if (key == "translation") {
      const auto v = numbers(3);
      c.translation = Eigen::Vector3d(v[0], v[1], v[2]);
      seen |= 2;
    } else if (key == "focal") {
      const auto v = numbers(2);
      c.fx = v[0];
      c.fy = v[1];
      seen |= 4;
    } else if (key == "principal") {
      const auto v = numbers(2);
      c.cx = v[0];
      c.cy = v[1];
      seen |= 8;
    } else if (key == "image_size") {
      const auto v = numbers(2);
      if (v[0] < 1 || v[1] < 1 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1])) {
        throw ParseError(source, n, 1, "image_size: expected positive integers");
      }
      c.height = static_cast<std::size_t>(v[0]);
      c.width = static_cast<std::size_t>(v[1]);
      seen |= 16;
    } else {
      throw ParseError(source, n, 1, "unknown camera field '" + key + "'");
    }
  });
  if (seen != 31) throw ParseError(source, 0, 0, "camera file is missing fields");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, 0, e.what());
  }
  return c;
}

void write_camera(const std::filesystem::path& path, const Camera& camera) {
  write_file(path, format_camera(camera));
}

Camera read_camera(const std::filesystem::path& path) {
  return parse_camera(read_file(path), path.string());
}

}  // namespace csdn
