#include <gtest/gtest.h>

#include "support/generators.hpp"

using namespace collage;
using namespace collage::testing;

TEST(PatternParse, NestedWithConstraints) {
  auto p = parse_pattern(R"(relu(add(conv2d(*, *){data_layout="NCHW"}, *)))");
  EXPECT_EQ(p.root_op(), "relu");
  EXPECT_EQ(p.op_count(), 3u);
  const auto& conv = p.root().args[0].args[0];
  EXPECT_EQ(conv.op, "conv2d");
  ASSERT_EQ(conv.constraints.size(), 1u);
  EXPECT_EQ(conv.constraints[0].key, "data_layout");
  EXPECT_EQ(p.text(), R"(relu(add(conv2d(*, *){data_layout="NCHW"}, *)))");
}

TEST(PatternParse, PredicateForms) {
  auto p = parse_pattern(R"(dense(*, *){units in 8..32, act in ["relu", "gelu"], alpha=0.5, groups=1})");
  ASSERT_EQ(p.root().constraints.size(), 4u);
  AttrMap attrs{{"units", std::int64_t{16}}, {"act", std::string("gelu")}, {"alpha", 0.5}, {"groups", std::int64_t{1}}};
  for (const auto& c : p.root().constraints) EXPECT_TRUE(satisfies(c, attrs)) << c.key;
  attrs["units"] = std::int64_t{64};
  EXPECT_FALSE(satisfies(p.root().constraints[0], attrs));
  EXPECT_FALSE(satisfies(p.root().constraints[0], AttrMap{}));
}

TEST(PatternParse, SharedReference) {
  auto p = parse_pattern("add(mul($0:conv2d(*, *), *), add($0, *))");
  EXPECT_EQ(p.op_count(), 4u);
  EXPECT_EQ(p.text(), "add(mul($0:conv2d(*, *), *), add($0, *))");
}

TEST(PatternParse, SyntaxErrorsCarryPosition) {
  try {
    parse_pattern("relu(add(*, *)");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_EQ(e.line(), 1);
    EXPECT_EQ(e.column(), 15);
  }
  try {
    parse_pattern("relu(*){k ~ 3}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("'k'"), std::string::npos);
  }
}

TEST(PatternParse, ValidationErrors) {
  auto code = [](const char* text) {
    try {
      parse_pattern(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvariant;
  };
  EXPECT_EQ(code("*"), ErrorCode::kValidation);
  EXPECT_EQ(code("add($a, *)"), ErrorCode::kValidation);
  EXPECT_EQ(code("add($a:relu(*), $a:relu(*))"), ErrorCode::kValidation);
  EXPECT_EQ(code("dense(*, *){units in 9..3}"), ErrorCode::kValidation);
}

TEST(PatternParse, BareOperatorMatchesAnyInputs) {
  auto p = parse_pattern("relu()");
  EXPECT_TRUE(p.root().args.empty());
  EXPECT_EQ(p.text(), "relu()");
}

TEST(PatternFile, CommentsAndBlankLines) {
  auto ps = parse_pattern_file(
      "# header\n"
      "relu(*)\n"
      "\n"
      "conv2d(*, *){data_layout=\"N#CHW\"}  # trailing\n");
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[1].text(), "conv2d(*, *){data_layout=\"N#CHW\"}");
}

TEST(PatternFile, ErrorReportsFileLine) {
  try {
    parse_pattern_file("relu(*)\nadd(*,\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(PatternFormat, RoundTripRandomPatterns) {
  Rng rng(11);
  for (int t = 0; t < 300; ++t) {
    auto g = random_graph(rng);
    auto p = random_pattern_for(rng, g);
    auto back = parse_pattern(p.text());
    EXPECT_EQ(back, p) << p.text();
    EXPECT_EQ(back.text(), p.text());
  }
}

TEST(PatternFormat, FloatAndStringLiterals) {
  auto p = parse_pattern(R"(mul(*, *){scale=2.0, name="a\"b", neg=-3})");
  EXPECT_EQ(parse_pattern(p.text()), p);
}
