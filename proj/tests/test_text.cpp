// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "csdn/text.hpp"

using namespace csdn;

TEST(Text, ParsesNumbersFully) {
  double d;
  EXPECT_TRUE(parse_double("5e-5", d));
  EXPECT_EQ(d, 5e-5);
  EXPECT_FALSE(parse_double("5e-5x", d));
  std::uint64_t u;
  EXPECT_TRUE(parse_uint("+12", u));
  EXPECT_EQ(u, 12u);
  EXPECT_FALSE(parse_uint("-1", u));
}

TEST(Text, FormattedNumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3, 5e-5, -2.5e300, 0.0}) {
    double back;
    ASSERT_TRUE(parse_double(format_number(v), back));
    EXPECT_EQ(back, v);
  }
}

TEST(Text, KeyValueSectionsAndLines) {
  const auto kv = KeyValueText::parse("# c\n[model]\nfeature_dim = 8\n\n[train]\nseed=3\n", "cfg");
  EXPECT_EQ(kv.get("model.feature_dim"), "8");
  EXPECT_EQ(kv.get("train.seed"), "3");
  EXPECT_EQ(kv.line_of("train.seed"), 6u);
  EXPECT_EQ(KeyValueText::parse(kv.str(), "again").values(), kv.values());
}

TEST(Text, KeyValueErrorsAreLocated) {
  try {
    KeyValueText::parse("[model]\nfeature_dim 8\n", "cfg");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.source(), "cfg");
  }
}
