// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace csdn {

/// Malformed text input; carries the source name and 1-based line/column.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, std::size_t column, const std::string& what);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::string source_;
  std::size_t line_;
  std::size_t column_;
};

/// Shortest decimal text that parses back to the identical value.
std::string format_number(double v);
std::string format_number(float v);

bool parse_double(std::string_view s, double& out);
bool parse_float(std::string_view s, float& out);
bool parse_uint(std::string_view s, std::uint64_t& out);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
/// Fields separated by runs of spaces or tabs.
std::vector<std::string_view> split_ws(std::string_view s);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

/// Flat view of "[section]" / "key = value" text. Keys are stored as
/// "section.key"; lines starting with '#' are comments.
class KeyValueText {
 public:
  static KeyValueText parse(std::string_view text, const std::string& source);

  void set(const std::string& key, std::string value);
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  /// Line where a key was defined (0 when set programmatically).
  std::size_t line_of(const std::string& key) const;

  /// Emits sections in the order their first key was set.
  std::string str() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
  std::vector<std::string> order_;
};

}  // namespace csdn
