#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "collage/graph.hpp"
#include "collage/graph_io.hpp"
#include "collage/matcher.hpp"
#include "collage/registry.hpp"

namespace collage {

inline constexpr std::size_t kNoPatternIndex = std::numeric_limits<std::size_t>::max();

/// One kernel of a placement: the matched node set and the backend pattern
/// that lowers it. `pattern_index` is the registry position when known.
struct Assignment {
  NodeSet nodes;
  NodeId root = 0;
  std::string backend;
  Pattern pattern;
  std::size_t pattern_index = kNoPatternIndex;

  bool operator==(const Assignment&) const = default;
};

/// Disjoint cover of a graph by kernels.
struct PlacementStrategy {
  std::vector<Assignment> kernels;

  bool operator==(const PlacementStrategy&) const = default;
};

enum class PlacementViolation { kUnknownNode, kOverlap, kUncovered, kPatternMismatch, kCyclic };

inline const char* to_string(PlacementViolation v) {
  switch (v) {
    case PlacementViolation::kUnknownNode: return "unknown_node";
    case PlacementViolation::kOverlap: return "overlap";
    case PlacementViolation::kUncovered: return "uncovered";
    case PlacementViolation::kPatternMismatch: return "pattern_mismatch";
    case PlacementViolation::kCyclic: return "cyclic";
  }
  return "unknown";
}

class PlacementError : public Error {
 public:
  PlacementError(PlacementViolation violation, const std::string& message, std::vector<NodeId> nodes)
      : Error(ErrorCode::kValidation, message, std::move(nodes)), violation_(violation) {}
  PlacementViolation violation() const { return violation_; }

 private:
  PlacementViolation violation_;
};

/// Index of the kernel containing each node (dense node index -> kernel), or
/// npos when uncovered. Does not validate.
inline std::vector<std::size_t> kernel_of_nodes(const ComputationGraph& g, const PlacementStrategy& p) {
  std::vector<std::size_t> owner(g.size(), kNoPatternIndex);
  for (std::size_t k = 0; k < p.kernels.size(); ++k)
    for (auto v : p.kernels[k].nodes)
      if (g.contains(v)) owner[g.index_of(v)] = k;
  return owner;
}

/// Whether the kernel-level quotient graph is acyclic (kernels can be scheduled).
inline bool quotient_acyclic(const ComputationGraph& g, const PlacementStrategy& p) {
  const auto owner = kernel_of_nodes(g, p);
  const std::size_t k = p.kernels.size();
  std::vector<std::set<std::size_t>> out(k);
  for (std::size_t v = 0; v < g.size(); ++v)
    for (auto w : g.successors_at(v))
      if (owner[v] != owner[w] && owner[v] != kNoPatternIndex && owner[w] != kNoPatternIndex)
        out[owner[v]].insert(owner[w]);
  std::vector<std::size_t> indeg(k, 0);
  for (const auto& s : out)
    for (auto t : s) ++indeg[t];
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < k; ++i)
    if (indeg[i] == 0) ready.push_back(i);
  std::size_t seen = 0;
  while (!ready.empty()) {
    auto i = ready.back();
    ready.pop_back();
    ++seen;
    for (auto t : out[i])
      if (--indeg[t] == 0) ready.push_back(t);
  }
  return seen == k;
}

/// Checks, in order: known nodes, disjointness, full cover, that each kernel
/// is exactly a match of its pattern at its root, and that kernels form an
/// acyclic quotient graph. Throws PlacementError naming the offending nodes.
inline void validate(const ComputationGraph& g, const PlacementStrategy& p) {
  std::map<NodeId, std::size_t> seen;
  for (std::size_t k = 0; k < p.kernels.size(); ++k) {
    const auto& a = p.kernels[k];
    if (a.nodes.empty())
      throw PlacementError(PlacementViolation::kUnknownNode, "kernel " + std::to_string(k) + " is empty", {});
    for (auto v : a.nodes) {
      if (!g.contains(v))
        throw PlacementError(PlacementViolation::kUnknownNode, "kernel references unknown node " + std::to_string(v), {v});
      if (!seen.emplace(v, k).second)
        throw PlacementError(PlacementViolation::kOverlap, "node " + std::to_string(v) + " (" + g.node(v).op +
                                                               ") is assigned to more than one kernel", {v});
    }
  }
  std::vector<NodeId> missing;
  for (const auto& node : g.nodes())
    if (!seen.count(node.id)) missing.push_back(node.id);
  if (!missing.empty()) {
    std::string names;
    for (auto v : missing) names += (names.empty() ? "" : ", ") + std::to_string(v) + " (" + g.node(v).op + ")";
    throw PlacementError(PlacementViolation::kUncovered, "placement does not cover node(s) " + names, missing);
  }
  for (const auto& a : p.kernels) {
    auto m = g.contains(a.root) ? match_at(g, a.root, a.pattern) : std::nullopt;
    if (!m || m->nodes != a.nodes)
      throw PlacementError(PlacementViolation::kPatternMismatch,
                           "kernel " + to_string(a.nodes) + " is not a match of " + a.pattern.text() + " rooted at " +
                               std::to_string(a.root),
                           a.nodes);
  }
  if (!quotient_acyclic(g, p)) {
    std::vector<NodeId> roots;
    for (const auto& a : p.kernels) roots.push_back(a.root);
    throw PlacementError(PlacementViolation::kCyclic, "kernels form a cycle and cannot be scheduled", roots);
  }
}

/// Orders kernels by (depth of root, root id): a topological order of the
/// kernel graph for any valid placement.
inline void canonicalize(const ComputationGraph& g, PlacementStrategy& p) {
  std::sort(p.kernels.begin(), p.kernels.end(), [&](const Assignment& a, const Assignment& b) {
    return std::make_pair(g.depth(a.root), a.root) < std::make_pair(g.depth(b.root), b.root);
  });
}

/// Tie-break key shared by the DP and the exhaustive oracle: sorted list of
/// (backend registration index, kernel node set, pattern index).
using PlacementSignature = std::vector<std::tuple<std::size_t, NodeSet, std::size_t>>;

inline PlacementSignature signature(const PatternRegistry& reg, const std::vector<const Assignment*>& kernels) {
  PlacementSignature sig;
  for (const auto* a : kernels) sig.emplace_back(reg.backend_index(a->backend), a->nodes, a->pattern_index);
  std::sort(sig.begin(), sig.end());
  return sig;
}

inline PlacementSignature signature(const PatternRegistry& reg, const PlacementStrategy& p) {
  std::vector<const Assignment*> ptrs;
  for (const auto& a : p.kernels) ptrs.push_back(&a);
  return signature(reg, ptrs);
}

inline Assignment make_assignment(const PatternRegistry& reg, const Candidate& c) {
  const auto& bp = reg.pattern(c.pattern_index);
  return {c.match.nodes, c.match.root, bp.backend, bp.pattern, c.pattern_index};
}

// ---------------------------------------------------------------------------
// Placement files ("collage-placement/1")

inline constexpr std::string_view kPlacementFormat = "collage-placement/1";

inline Json placement_to_json(const PlacementStrategy& p) {
  Json doc;
  doc["version"] = kPlacementFormat;
  doc["kernels"] = Json::array();
  for (const auto& a : p.kernels) {
    Json k;
    k["root"] = a.root;
    k["nodes"] = a.nodes;
    k["backend"] = a.backend;
    k["pattern"] = a.pattern.text();
    if (a.pattern_index != kNoPatternIndex) k["pattern_index"] = a.pattern_index;
    doc["kernels"].push_back(std::move(k));
  }
  return doc;
}

inline std::string save_placement(const PlacementStrategy& p) { return placement_to_json(p).dump(2) + "\n"; }

inline PlacementStrategy placement_from_json(const Json& doc) {
  using detail::require;
  detail::reject_unknown_fields(doc, {"version", "kernels"}, "placement");
  detail::require_version(doc, kPlacementFormat);
  PlacementStrategy p;
  for (const auto& k : require(doc, "kernels", "placement")) {
    detail::reject_unknown_fields(k, {"root", "nodes", "backend", "pattern", "pattern_index"}, "placement kernel");
    auto root = require(k, "root", "placement kernel").get<NodeId>();
    auto nodes = make_node_set(require(k, "nodes", "placement kernel").get<std::vector<NodeId>>());
    auto backend = require(k, "backend", "placement kernel").get<std::string>();
    auto pattern = parse_pattern(require(k, "pattern", "placement kernel").get<std::string>());
    std::size_t index = k.contains("pattern_index") ? k.at("pattern_index").get<std::size_t>() : kNoPatternIndex;
    Assignment a{std::move(nodes), root, std::move(backend), std::move(pattern), index};
    p.kernels.push_back(std::move(a));
  }
  return p;
}

inline PlacementStrategy load_placement(std::string_view text) { return placement_from_json(detail::parse_json(text)); }

}  // namespace collage
