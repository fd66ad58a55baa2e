#include <gtest/gtest.h>

#include <set>

#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace collage;
using namespace collage::testing;

namespace {

PatternRule listing_rule() { return load_rule(read_file(fixture("rules/listing1.json"))); }

std::set<NodeSet> generated_groups(const PatternRule& rule, const ComputationGraph& g) {
  std::set<NodeSet> out;
  for (const auto& gp : generate_patterns(rule, g))
    for (const auto& o : gp.origins) out.insert(o);
  return out;
}

}  // namespace

TEST(OpValid, ListingRule) {
  auto rule = listing_rule();
  OperatorNode dense{1, "dense", {}, {InputRef::graph_input("x")}, {1}};
  OperatorNode nhwc{2, "conv2d", {{"data_layout", std::string("NHWC")}}, {InputRef::graph_input("x")}, {1}};
  OperatorNode nchw{3, "conv2d", {{"data_layout", std::string("NCHW")}}, {InputRef::graph_input("x")}, {1}};
  OperatorNode softmax{4, "softmax", {}, {InputRef::graph_input("x")}, {1}};
  EXPECT_TRUE(op_valid(rule, dense));
  EXPECT_FALSE(op_valid(rule, nhwc));
  EXPECT_TRUE(op_valid(rule, nchw));
  EXPECT_FALSE(op_valid(rule, softmax));
}

TEST(FusionValid, ElemwiseInteriorFuses) {
  auto rule = listing_rule();
  auto g = fixture_graph("chain3");
  // group {conv2d}, sink relu reached through add
  auto g2 = GraphBuilder()
                .input("x")
                .input("w")
                .node(1, "conv2d", {in("x"), in("w")}, {{"data_layout", std::string("NCHW")}})
                .node(2, "add", {1, in("x")})
                .node(3, "relu", {2})
                .build({3});
  auto r = fusion_valid(rule, g2, {1}, OpClass{"kFusable"}, 1, 2);
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.result_class, OpClass{"kFusable"});
  EXPECT_TRUE(fusion_valid(rule, g, {1, 2}, OpClass{"kFusable"}, 2, 3).valid);
}

TEST(FusionValid, OpaqueInteriorBlocks) {
  auto rule = listing_rule();
  rule.ops.push_back({"sigmoid", {}, OpClass{"kOpaque"}});
  auto g = GraphBuilder()
               .input("x")
               .node(1, "dense", {in("x"), in("x")})
               .node(2, "sigmoid", {1})
               .node(3, "relu", {2})
               .build({3});
  EXPECT_FALSE(fusion_valid(rule, g, {1}, OpClass{"kFusable"}, 1, 2).valid);
}

TEST(FusionValid, NoTransitionForGroupClass) {
  auto rule = listing_rule();
  auto g = fixture_graph("chain3");
  EXPECT_FALSE(fusion_valid(rule, g, {2}, OpClass{"kElemwise"}, 2, 3).valid);
  EXPECT_THROW(fusion_valid(rule, g, {2}, OpClass{"kElemwise"}, 1, 3), Error);
}

TEST(Generate, ChainGrowthSequence) {
  auto rule = listing_rule();
  auto g = fixture_graph("chain3");
  auto groups = grow_fusion_groups(rule, g);
  // The conv2d seed grows one post-dominator step at a time.
  ASSERT_GE(groups.size(), 3u);
  EXPECT_EQ(groups[0], (NodeSet{1}));
  EXPECT_EQ(groups[1], (NodeSet{1, 2}));
  EXPECT_EQ(groups[2], (NodeSet{1, 2, 3}));

  std::vector<std::string> texts;
  for (const auto& gp : generate_patterns(rule, g)) texts.push_back(gp.pattern.text());
  EXPECT_EQ(texts, (std::vector<std::string>{
                       R"(conv2d(*, *){data_layout="NCHW"})",
                       R"(add(conv2d(*, *){data_layout="NCHW"}, *))",
                       R"(relu(add(conv2d(*, *){data_layout="NCHW"}, *)))",
                       "add(*, *)",
                       "relu(*)",
                   }));
}

TEST(Generate, UnsupportedGraphIsEmpty) {
  auto rule = listing_rule();
  auto g = GraphBuilder().input("x").node(1, "softmax", {in("x")}).build({1});
  EXPECT_TRUE(generate_patterns(rule, g).empty());
  auto empty = load_rule(read_file(fixture("rules/empty.json")));
  EXPECT_TRUE(generate_patterns(empty, fixture_graph("chain3")).empty());
}

TEST(Generate, DiamondInOneStep) {
  auto rule = listing_rule();
  auto g = fixture_graph("diamond");
  auto groups = grow_fusion_groups(rule, g);
  ASSERT_GE(groups.size(), 2u);
  EXPECT_EQ(groups[1], (NodeSet{1, 2, 3, 4}));
  // Hand enumeration of rule-satisfying groups on the 4-node diamond:
  // every singleton, plus conv2d grown straight to the joining add.
  std::set<NodeSet> expected{{1}, {2}, {3}, {4}, {1, 2, 3, 4}};
  EXPECT_EQ(generated_groups(rule, g), expected);
  EXPECT_EQ(oracle::enumerate_fusion_groups(rule, g), expected);
}

TEST(Generate, MaxFusionSizeCaps) {
  auto rule = listing_rule();
  rule.max_fusion_size = 2;
  auto groups = generated_groups(rule, fixture_graph("chain3"));
  EXPECT_TRUE(groups.count({1, 2}));
  EXPECT_FALSE(groups.count({1, 2, 3}));
}

TEST(Generate, ResultClassCarriesAcrossSteps) {
  // kFusable + kElemwise path -> kInjective; kInjective has no transition, so
  // growth stops after one step.
  auto rule = listing_rule();
  rule.transitions = {{{"kFusable"}, {"kElemwise"}, {"kInjective"}}};
  auto groups = generated_groups(rule, fixture_graph("chain3"));
  EXPECT_TRUE(groups.count({1, 2}));
  EXPECT_FALSE(groups.count({1, 2, 3}));
}

TEST(Generate, HostHooks) {
  auto rule = listing_rule();
  rule.op_hook = [](const OperatorNode& n) { return n.op != "relu"; };
  auto groups = generated_groups(rule, fixture_graph("chain3"));
  EXPECT_FALSE(groups.count({3}));
  EXPECT_FALSE(groups.count({1, 2, 3}));

  auto hooked = listing_rule();
  hooked.fusion_hook = [](const OpClass&, const ComputationGraph&, NodeId, NodeId sink, const NodeSet&) {
    return sink == 2 ? std::optional<OpClass>(OpClass{"kFusable"}) : std::nullopt;
  };
  auto g2 = generated_groups(hooked, fixture_graph("chain3"));
  EXPECT_TRUE(g2.count({1, 2}));
  EXPECT_FALSE(g2.count({1, 2, 3}));
}

TEST(Generate, SoundDedupedAndLive) {
  Rng rng(55);
  for (int t = 0; t < 100; ++t) {
    auto g = random_graph(rng);
    auto rule = random_rule(rng);
    auto gen = generate_patterns(rule, g);
    std::set<std::string> texts;
    for (const auto& gp : gen) {
      EXPECT_TRUE(texts.insert(gp.pattern.text()).second) << gp.pattern.text();
      EXPECT_FALSE(match_all(g, gp.pattern).empty());
      for (const auto& o : gp.origins)
        for (auto v : o) EXPECT_TRUE(op_valid(rule, g.node(v)));
    }
  }
}

TEST(Generate, EqualsOracleEnumeration) {
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    auto g = random_graph(rng);
    auto rule = random_rule(rng);
    auto grown = grow_fusion_groups(rule, g);
    ASSERT_EQ(std::set<NodeSet>(grown.begin(), grown.end()), oracle::enumerate_fusion_groups(rule, g))
        << save_rule(rule) << save_graph(g);
  }
}

TEST(RuleFile, RoundTrip) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    auto rule = random_rule(rng);
    auto text = save_rule(rule);
    EXPECT_EQ(save_rule(load_rule(text)), text);
  }
}

TEST(RuleFile, Errors) {
  auto code = [](const char* text) {
    try {
      load_rule(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvariant;
  };
  EXPECT_EQ(code(R"({"version":"collage-rules/1","backend":"b","ops":[{"op":"relu","class":"kNope"}]})"),
            ErrorCode::kValidation);
  EXPECT_EQ(code(R"({"version":"collage-rules/1","backend":"b","ops":[],"max_fusion_size":0})"), ErrorCode::kValidation);
  EXPECT_EQ(code(R"({"version":"collage-rules/1","backend":"b","ops":[{"op":"relu","class":"kElemwise"},
                   {"op":"relu","class":"kOpaque"}]})"),
            ErrorCode::kValidation);
  EXPECT_EQ(code(R"({"version":"collage-rules/1","ops":[]})"), ErrorCode::kParse);
  EXPECT_EQ(code(R"({"version":"collage-rules/1","backend":"b","ops":[],"bogus":true})"), ErrorCode::kParse);
  // custom classes are accepted once declared
  EXPECT_EQ(code(R"({"version":"collage-rules/1","backend":"b","classes":["kMine"],
                   "ops":[{"op":"relu","class":"kMine"}]})"),
            ErrorCode::kInvariant);
}
