#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "collage/graph.hpp"
#include "collage/pattern.hpp"

namespace collage {

/// A successful pattern match. `binding[i]` is the graph node bound to the
/// i-th operator pattern node in pre-order; references reuse earlier entries.
struct Match {
  NodeId root = 0;
  NodeSet nodes;
  std::vector<NodeId> binding;

  bool operator==(const Match&) const = default;
};

namespace detail {

class Matcher {
 public:
  explicit Matcher(const ComputationGraph& g) : g_(g) {}

  std::optional<Match> run(NodeId root, const Pattern& p) {
    if (!bind(p.root(), root)) return std::nullopt;

    for (auto v : bound_) {
      const auto& node = g_.node(v);
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const auto& in = node.inputs[i];
        // Inputs not described by a pattern edge must come from outside the match.
        if (in.is_node() && bound_.count(in.node()) && !pattern_edges_.count({v, i})) return std::nullopt;
      }
      if (v == root) continue;
      // Only the root may expose its value outside the match.
      if (g_.is_output(v)) return std::nullopt;
      for (auto c : g_.consumers(v))
        if (!bound_.count(c)) return std::nullopt;
    }

    Match m;
    m.root = root;
    m.nodes.assign(bound_.begin(), bound_.end());
    m.binding = std::move(binding_);
    return m;
  }

 private:
  bool bind(const PatternNode& p, NodeId v) {
    const auto& node = g_.node(v);
    if (node.op != p.op) return false;
    for (const auto& c : p.constraints)
      if (!satisfies(c, node.attrs)) return false;
    if (!bound_.insert(v).second) return false;
    binding_.push_back(v);
    if (!p.label.empty()) labels_[p.label] = v;
    if (p.args.empty()) return true;
    if (p.args.size() != node.inputs.size()) return false;
    for (std::size_t i = 0; i < p.args.size(); ++i) {
      const auto& arg = p.args[i];
      const auto& in = node.inputs[i];
      switch (arg.kind) {
        case PatternNode::Kind::kWildcard:
          break;
        case PatternNode::Kind::kRef:
          if (!in.is_node() || in.node() != labels_.at(arg.label)) return false;
          pattern_edges_.insert({v, i});
          break;
        case PatternNode::Kind::kOp:
          if (!in.is_node() || !bind(arg, in.node())) return false;
          pattern_edges_.insert({v, i});
          break;
      }
    }
    return true;
  }

  const ComputationGraph& g_;
  std::set<NodeId> bound_;
  std::vector<NodeId> binding_;
  std::unordered_map<std::string, NodeId> labels_;
  std::set<std::pair<NodeId, std::size_t>> pattern_edges_;
};

}  // namespace detail

/// Matches `p` with its root operator bound to `root`. Pattern child i is
/// matched against the producer of the node's i-th input; wildcards consume a
/// single input edge from outside the match. Interior nodes may not be
/// consumed outside the match, and may not be graph outputs.
inline std::optional<Match> match_at(const ComputationGraph& g, NodeId root, const Pattern& p) {
  if (!g.contains(root)) throw Error(ErrorCode::kNotFound, "unknown node id " + std::to_string(root), {root});
  return detail::Matcher(g).run(root, p);
}

/// All matches of `p`, ordered by root id.
inline std::vector<Match> match_all(const ComputationGraph& g, const Pattern& p) {
  std::vector<Match> out;
  for (const auto& node : g.nodes())
    if (auto m = match_at(g, node.id, p)) out.push_back(std::move(*m));
  return out;
}

}  // namespace collage
