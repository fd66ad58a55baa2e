#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace collage;
using namespace collage::testing;

TEST(Oracle, ChainHasTwoPlacements) {
  auto s = fixture_setup("chain3", "chain_two");
  auto g = fixture_graph("chain3");
  auto all = oracle::enumerate_placements(g, s.registry);
  EXPECT_EQ(all.size(), 2u);
  auto best = oracle::optimal_placement(g, s.registry, s.measurer, s.epsilon);
  ASSERT_TRUE(best);
  EXPECT_EQ(best->placements, 2u);
  EXPECT_EQ(best->cost, Cost::from_ms(2.51));
}

TEST(Oracle, SingleNodeTwoBackends) {
  auto g = fixture_graph("single_relu");
  PatternRegistry reg;
  reg.add_backend({"a", BackendKind::kOpKernelLibrary, "a"});
  reg.add_backend({"b", BackendKind::kOpKernelLibrary, "b"});
  reg.add_pattern("a", parse_pattern("relu(*)"));
  reg.add_pattern("b", parse_pattern("relu(*)"));
  EXPECT_EQ(oracle::enumerate_placements(g, reg).size(), 2u);
}

TEST(Oracle, UncoverableHasNone) {
  auto s = build_setup(load_config(fixture("configs/unsupported.json")), fixture_graph("unsupported"));
  auto g = fixture_graph("unsupported");
  EXPECT_TRUE(oracle::enumerate_placements(g, s.registry).empty());
  EXPECT_FALSE(oracle::optimal_placement(g, s.registry, s.measurer, s.epsilon));
}

TEST(Oracle, SizeCap) {
  auto s = fixture_setup("chain13", "chain_two");
  try {
    oracle::enumerate_placements(fixture_graph("chain13"), s.registry);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCapacity);
  }
}

TEST(Oracle, CountsMatchProductOnIndependentNodes) {
  // Three unrelated relus, two backends each: 2^3 placements.
  auto g = GraphBuilder()
               .input("x")
               .node(1, "relu", {in("x")})
               .node(2, "relu", {in("x")})
               .node(3, "relu", {in("x")})
               .build({1, 2, 3});
  PatternRegistry reg;
  reg.add_backend({"a", BackendKind::kOpKernelLibrary, "a"});
  reg.add_backend({"b", BackendKind::kOpKernelLibrary, "b"});
  reg.add_pattern("a", parse_pattern("relu(*)"));
  reg.add_pattern("b", parse_pattern("relu(*)"));
  EXPECT_EQ(oracle::enumerate_placements(g, reg).size(), 8u);
}

TEST(Oracle, BrutePostDominator) {
  auto g = fixture_graph("diamond");
  for (auto v : g.topo_order()) EXPECT_EQ(oracle::detail::brute_post_dominator(g, v), g.post_dominator(v)) << v;
}

TEST(Oracle, BestGenomeCap) {
  auto s = fixture_setup("six", "six_es");
  auto g = fixture_graph("six");
  auto dp = optimize(g, s.registry, s.measurer, s.epsilon);
  auto enc = OffloadEncoding::build(s.registry, dp.placement, "trt");
  oracle::Limits lim;
  lim.max_genome_bits = 5;
  EXPECT_THROW(oracle::best_genome(g, s.registry, s.measurer, dp.placement, enc, s.epsilon, lim), Error);
  auto best = oracle::best_genome(g, s.registry, s.measurer, dp.placement, enc, s.epsilon);
  EXPECT_EQ(best.evaluated, 64u);
  EXPECT_EQ(best.cost, Cost::from_ms(5.875));
}
