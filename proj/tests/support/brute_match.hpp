#pragma once

// Matching by exhaustive injective assignment of pattern operators to graph
// nodes, checked directly against the match conditions. Independent of the
// recursive matcher in the library.

#include <functional>
#include <map>
#include <set>
#include <vector>

#include "collage/collage.hpp"

namespace collage::testing {

struct FlatOp {
  const PatternNode* node;
  // For each arg: index of the bound FlatOp (op child or reference), or -1 for a wildcard.
  std::vector<int> arg_ops;
};

inline std::vector<FlatOp> flatten(const Pattern& p) {
  std::vector<FlatOp> out;
  std::map<std::string, int> labels;
  std::function<int(const PatternNode&)> visit = [&](const PatternNode& n) {
    const int me = static_cast<int>(out.size());
    out.push_back({&n, {}});
    if (!n.label.empty()) labels[n.label] = me;
    std::vector<int> args;
    for (const auto& a : n.args) {
      if (a.kind == PatternNode::Kind::kWildcard) args.push_back(-1);
      else if (a.kind == PatternNode::Kind::kRef) args.push_back(labels.at(a.label));
      else args.push_back(visit(a));
    }
    out[static_cast<std::size_t>(me)].arg_ops = std::move(args);
    return me;
  };
  visit(p.root());
  return out;
}

inline bool assignment_matches(const ComputationGraph& g, const std::vector<FlatOp>& ops, const std::vector<NodeId>& a) {
  std::set<NodeId> image(a.begin(), a.end());
  if (image.size() != a.size()) return false;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& node = g.node(a[i]);
    const auto& pn = *ops[i].node;
    if (node.op != pn.op) return false;
    for (const auto& c : pn.constraints)
      if (!satisfies(c, node.attrs)) return false;
    if (!pn.args.empty() && pn.args.size() != node.inputs.size()) return false;
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      const auto& in = node.inputs[j];
      const int want = pn.args.empty() ? -1 : ops[i].arg_ops[j];
      if (want >= 0) {
        if (!in.is_node() || in.node() != a[static_cast<std::size_t>(want)]) return false;
      } else if (in.is_node() && image.count(in.node())) {
        return false;
      }
    }
  }
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (g.is_output(a[i])) return false;
    for (auto c : g.consumers(a[i]))
      if (!image.count(c)) return false;
  }
  return true;
}

inline std::vector<Match> brute_match_all(const ComputationGraph& g, const Pattern& p) {
  const auto ops = flatten(p);
  std::vector<NodeId> ids;
  for (const auto& n : g.nodes()) ids.push_back(n.id);
  std::vector<Match> out;
  std::vector<NodeId> a(ops.size());
  std::function<void(std::size_t)> assign = [&](std::size_t i) {
    if (i == ops.size()) {
      if (assignment_matches(g, ops, a)) {
        Match m;
        m.root = a[0];
        m.nodes = make_node_set(a);
        m.binding = a;
        out.push_back(std::move(m));
      }
      return;
    }
    for (auto v : ids) {
      if (g.node(v).op != ops[i].node->op) continue;  // prune; rechecked below
      a[i] = v;
      assign(i + 1);
    }
  };
  assign(0);
  std::sort(out.begin(), out.end(), [](const Match& x, const Match& y) { return x.root < y.root; });
  return out;
}

}  // namespace collage::testing
