#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "collage/cost.hpp"
#include "collage/evo.hpp"
#include "collage/graph.hpp"
#include "collage/pattern_gen.hpp"
#include "collage/placement.hpp"
#include "collage/placement_cost.hpp"
#include "collage/registry.hpp"

// Exhaustive reference implementations for verification. None of this is on
// the optimizer path; every entry point enforces a size cap.
namespace collage::oracle {

struct Limits {
  std::size_t max_nodes = 12;
  std::size_t max_genome_bits = 16;
};

inline void check_size(const ComputationGraph& g, const Limits& limits) {
  if (g.size() > limits.max_nodes)
    throw Error(ErrorCode::kCapacity, "oracle size cap exceeded: graph has " + std::to_string(g.size()) +
                                          " nodes, cap is " + std::to_string(limits.max_nodes));
}

/// Calls `visit` for every disjoint cover of `scope` (all nodes when empty)
/// by registry matches lying inside `scope` whose kernel graph is acyclic.
/// Each cover is produced once: the kernel covering the smallest uncovered id
/// is chosen at each step.
inline void for_each_placement(const ComputationGraph& g, const PatternRegistry& reg,
                               const std::function<void(const PlacementStrategy&)>& visit, const Limits& limits = {},
                               std::optional<NodeSet> scope = std::nullopt) {
  check_size(g, limits);
  NodeSet target = scope ? *scope : [&] {
    NodeSet all;
    for (const auto& n : g.nodes()) all.push_back(n.id);
    return all;
  }();

  std::vector<Assignment> all;
  for (const auto& node : g.nodes())
    for (const auto& c : reg.candidates_at(g, node.id)) {
      bool inside = std::all_of(c.match.nodes.begin(), c.match.nodes.end(), [&](NodeId v) { return contains(target, v); });
      if (inside) all.push_back(make_assignment(reg, c));
    }

  std::set<NodeId> covered;
  PlacementStrategy current;
  std::function<void()> recurse = [&] {
    std::optional<NodeId> next;
    for (auto v : target)
      if (!covered.count(v)) {
        next = v;
        break;
      }
    if (!next) {
      if (!quotient_acyclic(g, current)) return;
      PlacementStrategy p = current;
      canonicalize(g, p);
      visit(p);
      return;
    }
    for (const auto& a : all) {
      if (!contains(a.nodes, *next)) continue;
      bool clash = std::any_of(a.nodes.begin(), a.nodes.end(), [&](NodeId v) { return covered.count(v) != 0; });
      if (clash) continue;
      covered.insert(a.nodes.begin(), a.nodes.end());
      current.kernels.push_back(a);
      recurse();
      current.kernels.pop_back();
      for (auto v : a.nodes) covered.erase(v);
    }
  };
  recurse();
}

inline std::vector<PlacementStrategy> enumerate_placements(const ComputationGraph& g, const PatternRegistry& reg,
                                                           const Limits& limits = {}) {
  std::vector<PlacementStrategy> out;
  for_each_placement(
      g, reg,
      [&](const PlacementStrategy& p) {
        validate(g, p);  // by construction; throws if the oracle itself is wrong
        out.push_back(p);
      },
      limits);
  return out;
}

struct OracleResult {
  PlacementStrategy placement;
  Cost cost;
  std::size_t placements = 0;
};

/// argmin of the additive cost over all placements of `scope` (whole graph
/// when empty); ties broken by the smaller placement signature.
inline std::optional<OracleResult> optimal_placement(const ComputationGraph& g, const PatternRegistry& reg, Measurer& m,
                                                     Epsilon eps, const Limits& limits = {},
                                                     std::optional<NodeSet> scope = std::nullopt) {
  std::optional<OracleResult> best;
  std::size_t count = 0;
  for_each_placement(
      g, reg,
      [&](const PlacementStrategy& p) {
        ++count;
        Cost c;
        for (const auto& a : p.kernels) c += Cost::from_ms(m.measure_kernel(g, a.backend, a.nodes)) + eps.cost();
        if (!best || c < best->cost || (c == best->cost && signature(reg, p) < signature(reg, best->placement)))
          best = OracleResult{p, c, 0};
      },
      limits, std::move(scope));
  if (best) best->placements = count;
  return best;
}

namespace detail {

// All directed paths from `from` until `stop` returns true (inclusive), or to a
// node with no successors. Exponential; small graphs only.
inline void all_paths(const ComputationGraph& g, NodeId from, const std::function<bool(NodeId)>& stop,
                      std::vector<NodeId>& path, std::vector<std::vector<NodeId>>& out) {
  path.push_back(from);
  if (stop(from)) {
    out.push_back(path);
  } else {
    auto next = g.consumers(from);
    if (g.is_output(from)) out.push_back(path);  // path ends at the virtual sink
    for (auto w : next) all_paths(g, w, stop, path, out);
  }
  path.pop_back();
}

// Immediate post-dominator by definition: the first node after `src` on a
// src-to-exit path that lies on every such path.
inline std::optional<NodeId> brute_post_dominator(const ComputationGraph& g, NodeId src) {
  std::vector<NodeId> path;
  std::vector<std::vector<NodeId>> paths;
  all_paths(g, src, [](NodeId) { return false; }, path, paths);
  std::optional<std::set<NodeId>> common;
  for (const auto& p : paths) {
    std::set<NodeId> s(p.begin() + 1, p.end());
    if (!common) {
      common = std::move(s);
    } else {
      std::set<NodeId> both;
      for (auto v : *common)
        if (s.count(v)) both.insert(v);
      common = std::move(both);
    }
  }
  if (!common || common->empty()) return std::nullopt;
  for (std::size_t i = 1; i < paths.front().size(); ++i)
    if (common->count(paths.front()[i])) return paths.front()[i];
  return std::nullopt;
}

}  // namespace detail

/// Every node group obtainable by growing a supported seed to successive
/// post-dominators under `rule`, computed directly from the definitions
/// (path enumeration for post-dominators and interiors).
inline std::set<NodeSet> enumerate_fusion_groups(const PatternRule& rule, const ComputationGraph& g,
                                                 const Limits& limits = {}) {
  check_size(g, limits);
  std::set<NodeSet> out;
  for (const auto& seed : g.nodes()) {
    if (!op_valid(rule, seed)) continue;
    std::set<NodeId> group{seed.id};
    OpClass cls = *rule.class_of(seed.op);
    NodeId src = seed.id;
    out.insert(NodeSet(group.begin(), group.end()));
    while (true) {
      auto sink = detail::brute_post_dominator(g, src);
      if (!sink) break;
      std::vector<NodeId> path;
      std::vector<std::vector<NodeId>> paths;
      detail::all_paths(g, src, [&](NodeId v) { return v == *sink; }, path, paths);
      std::set<NodeId> step;
      for (const auto& p : paths)
        if (p.back() == *sink) step.insert(p.begin() + 1, p.end());

      bool ok = false;
      OpClass next_cls;
      if (std::all_of(step.begin(), step.end(), [&](NodeId v) { return op_valid(rule, g.node(v)); })) {
        for (const auto& t : rule.transitions) {
          if (t.group_class != cls) continue;
          bool all_path = std::all_of(step.begin(), step.end(),
                                      [&](NodeId v) { return rule.class_of(g.node(v).op) == t.path_class; });
          if (all_path) {
            ok = true;
            next_cls = t.result_class;
            break;
          }
        }
      }
      if (!ok) break;
      std::set<NodeId> grown = group;
      grown.insert(step.begin(), step.end());
      if (grown.size() > rule.max_fusion_size) break;
      group = std::move(grown);
      cls = next_cls;
      src = *sink;
      out.insert(NodeSet(group.begin(), group.end()));
    }
  }
  return out;
}

struct GenomeOptimum {
  Genome genome;
  Cost cost = Cost::infinity();
  std::size_t evaluated = 0;
};

/// Exhaustive 2^k search over offload genomes; ties keep the first genome in
/// counting order.
inline GenomeOptimum best_genome(const ComputationGraph& g, const PatternRegistry& reg, Measurer& m,
                                 const PlacementStrategy& op_level, const OffloadEncoding& enc, Epsilon eps,
                                 const Limits& limits = {}) {
  const auto k = enc.size();
  if (k > limits.max_genome_bits)
    throw Error(ErrorCode::kCapacity, "genome enumeration cap exceeded: " + std::to_string(k) + " bits");
  GenomeOptimum best;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    Genome gnm(k);
    for (std::size_t b = 0; b < k; ++b) gnm[b] = (mask >> b) & 1U;
    auto c = genome_fitness(g, reg, m, op_level, enc, gnm, eps);
    ++best.evaluated;
    if (c < best.cost) best = {gnm, c, best.evaluated};
  }
  return best;
}

}  // namespace collage::oracle
