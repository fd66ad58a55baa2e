#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "collage/error.hpp"
#include "collage/node_set.hpp"

namespace collage {

using Shape = std::vector<std::int64_t>;
using AttrValue = std::variant<std::int64_t, double, std::string, std::vector<std::int64_t>>;
using AttrMap = std::map<std::string, AttrValue>;

/// An operator input: either the output of another node or a named graph input.
class InputRef {
 public:
  InputRef(NodeId node) : source_(node) {}  // NOLINT(google-explicit-constructor)
  static InputRef graph_input(std::string name) {
    InputRef ref(NodeId{0});
    ref.source_ = std::move(name);
    return ref;
  }

  bool is_node() const { return std::holds_alternative<NodeId>(source_); }
  NodeId node() const { return std::get<NodeId>(source_); }
  const std::string& input_name() const { return std::get<std::string>(source_); }

  bool operator==(const InputRef&) const = default;

 private:
  std::variant<NodeId, std::string> source_;
};

struct OperatorNode {
  NodeId id = 0;
  std::string op;
  AttrMap attrs;
  std::vector<InputRef> inputs;
  Shape shape;

  bool operator==(const OperatorNode&) const = default;
};

struct GraphInput {
  std::string name;
  Shape shape;

  bool operator==(const GraphInput&) const = default;
};

inline std::int64_t volume(const Shape& shape) {
  std::int64_t v = 1;
  for (auto d : shape) v *= d;
  return v;
}

/// Immutable operator DAG. Construction validates every structural invariant
/// and precomputes topological order, longest-path depths and the immediate
/// post-dominator tree (with a virtual sink joining all graph outputs).
///
/// Internally nodes are kept in ascending-id order; "index" refers to the
/// position in that order.
class ComputationGraph {
 public:
  ComputationGraph() = default;

  ComputationGraph(std::vector<GraphInput> inputs, std::vector<OperatorNode> nodes,
                   std::vector<NodeId> outputs)
      : inputs_(std::move(inputs)), nodes_(std::move(nodes)), outputs_(std::move(outputs)) {
    std::sort(nodes_.begin(), nodes_.end(),
              [](const OperatorNode& a, const OperatorNode& b) { return a.id < b.id; });
    validate_and_index();
  }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  const std::vector<GraphInput>& inputs() const { return inputs_; }
  const std::vector<OperatorNode>& nodes() const { return nodes_; }
  const std::vector<NodeId>& outputs() const { return outputs_; }

  bool contains(NodeId id) const { return index_.count(id) != 0; }

  std::size_t index_of(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw Error(ErrorCode::kNotFound, "unknown node id " + std::to_string(id), {id});
    return it->second;
  }
  NodeId id_at(std::size_t index) const { return nodes_[index].id; }

  const OperatorNode& node(NodeId id) const { return nodes_[index_of(id)]; }
  const OperatorNode& node_at(std::size_t index) const { return nodes_[index]; }

  /// Distinct producer nodes of `index` (dense indices, ascending).
  const std::vector<std::size_t>& predecessors_at(std::size_t index) const { return preds_[index]; }
  /// Distinct consumer nodes of `index` (dense indices, ascending).
  const std::vector<std::size_t>& successors_at(std::size_t index) const { return succs_[index]; }

  std::vector<NodeId> consumers(NodeId id) const { return ids_of(succs_[index_of(id)]); }
  std::vector<NodeId> producers(NodeId id) const { return ids_of(preds_[index_of(id)]); }

  bool is_output(NodeId id) const { return is_output_[index_of(id)]; }
  bool is_output_at(std::size_t index) const { return is_output_[index]; }

  /// Longest path length from any graph input; nodes fed only by graph inputs have depth 0.
  std::size_t depth(NodeId id) const { return depth_[index_of(id)]; }
  std::size_t depth_at(std::size_t index) const { return depth_[index]; }

  /// Deterministic topological order; ties broken by ascending node id.
  std::vector<NodeId> topo_order() const { return ids_of(topo_); }
  const std::vector<std::size_t>& topo_indices() const { return topo_; }

  /// Immediate post-dominator with respect to a virtual sink joining all
  /// outputs; nullopt when that is the virtual sink itself.
  std::optional<NodeId> post_dominator(NodeId src) const {
    const auto i = index_of(src);
    if (ipdom_[i] == kVirtualSink) return std::nullopt;
    return nodes_[ipdom_[i]].id;
  }

  bool post_dominates(NodeId sink, NodeId src) const {
    const auto target = index_of(sink);
    auto cur = index_of(src);
    while (ipdom_[cur] != kVirtualSink) {
      cur = ipdom_[cur];
      if (cur == target) return true;
    }
    return false;
  }

  /// Nodes lying strictly between `src` and `sink` on some directed path.
  /// Requires `sink` to post-dominate `src`.
  NodeSet paths_between(NodeId src, NodeId sink) const {
    if (!post_dominates(sink, src))
      throw Error(ErrorCode::kValidation,
                  "node " + std::to_string(sink) + " does not post-dominate node " + std::to_string(src),
                  {src, sink});
    const auto s = index_of(src);
    const auto t = index_of(sink);
    std::vector<char> fwd(size(), 0), bwd(size(), 0);
    std::vector<std::size_t> stack{s};
    fwd[s] = 1;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (v == t) continue;
      for (auto w : succs_[v])
        if (!fwd[w]) fwd[w] = 1, stack.push_back(w);
    }
    stack = {t};
    bwd[t] = 1;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (v == s) continue;
      for (auto w : preds_[v])
        if (!bwd[w]) bwd[w] = 1, stack.push_back(w);
    }
    NodeSet out;
    for (std::size_t v = 0; v < size(); ++v)
      if (v != s && v != t && fwd[v] && bwd[v]) out.push_back(nodes_[v].id);
    return out;
  }

  NodeSet ids_of(const std::vector<std::size_t>& indices) const {
    NodeSet out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(nodes_[i].id);
    return out;
  }

  DenseSet dense(const NodeSet& ids) const {
    DenseSet out(size());
    for (auto id : ids) out.insert(index_of(id));
    return out;
  }

  NodeSet ids_of(const DenseSet& set) const {
    NodeSet out;
    set.for_each([&](std::size_t i) { out.push_back(nodes_[i].id); });
    return out;
  }

  bool operator==(const ComputationGraph& other) const {
    return inputs_ == other.inputs_ && nodes_ == other.nodes_ && outputs_ == other.outputs_;
  }

 private:
  static constexpr std::size_t kVirtualSink = static_cast<std::size_t>(-1);

  [[noreturn]] static void fail(const std::string& msg, std::vector<NodeId> ids) {
    throw Error(ErrorCode::kValidation, msg, std::move(ids));
  }

  void validate_and_index() {
    const std::size_t n = nodes_.size();
    std::unordered_map<std::string, std::size_t> input_names;
    for (std::size_t i = 0; i < inputs_.size(); ++i) {
      const auto& in = inputs_[i];
      if (in.name.empty()) fail("graph input with empty name", {});
      if (!input_names.emplace(in.name, i).second) fail("duplicate graph input '" + in.name + "'", {});
      if (in.shape.empty()) fail("graph input '" + in.name + "' has an empty shape", {});
      for (auto d : in.shape)
        if (d < 1) fail("graph input '" + in.name + "' has a non-positive dimension", {});
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& node = nodes_[i];
      if (!index_.emplace(node.id, i).second)
        fail("duplicate node id " + std::to_string(node.id), {node.id});
    }

    preds_.assign(n, {});
    succs_.assign(n, {});
    is_output_.assign(n, false);
    std::vector<char> fed_by_input(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& node = nodes_[i];
      const auto tag = "node " + std::to_string(node.id);
      if (node.op.empty()) fail(tag + " has an empty op kind", {node.id});
      if (node.shape.empty()) fail(tag + " has an empty output shape", {node.id});
      for (auto d : node.shape)
        if (d < 1) fail(tag + " has a non-positive dimension", {node.id});
      if (node.inputs.empty()) fail(tag + " has no inputs", {node.id});
      for (const auto& in : node.inputs) {
        if (in.is_node()) {
          auto it = index_.find(in.node());
          if (it == index_.end())
            fail(tag + " references missing node " + std::to_string(in.node()), {in.node(), node.id});
          preds_[i].push_back(it->second);
        } else {
          if (!input_names.count(in.input_name()))
            fail(tag + " references unknown graph input '" + in.input_name() + "'", {node.id});
          fed_by_input[i] = 1;
        }
      }
      auto& p = preds_[i];
      std::sort(p.begin(), p.end());
      p.erase(std::unique(p.begin(), p.end()), p.end());
      for (auto j : p) succs_[j].push_back(i);
    }
    for (auto& s : succs_) std::sort(s.begin(), s.end());
    for (auto id : outputs_) {
      auto it = index_.find(id);
      if (it == index_.end()) fail("graph output references missing node " + std::to_string(id), {id});
      is_output_[it->second] = true;
    }

    // Kahn's algorithm; min-heap on index == min-heap on id.
    std::vector<std::size_t> indeg(n);
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i) {
      indeg[i] = preds_[i].size();
      if (indeg[i] == 0) ready.push(i);
    }
    topo_.clear();
    while (!ready.empty()) {
      auto v = ready.top();
      ready.pop();
      topo_.push_back(v);
      for (auto w : succs_[v])
        if (--indeg[w] == 0) ready.push(w);
    }
    if (topo_.size() != n) {
      std::vector<NodeId> cyclic;
      for (std::size_t i = 0; i < n; ++i)
        if (indeg[i] > 0) cyclic.push_back(nodes_[i].id);
      fail("cycle through node " + std::to_string(cyclic.front()), cyclic);
    }

    depth_.assign(n, 0);
    for (auto v : topo_)
      for (auto w : succs_[v]) depth_[w] = std::max(depth_[w], depth_[v] + 1);

    // Reachability: every node must be reachable from a graph input and reach an output.
    std::vector<char> from_input(n, 0), to_output(n, 0);
    for (auto v : topo_) {
      if (fed_by_input[v]) from_input[v] = 1;
      for (auto p : preds_[v])
        if (from_input[p]) from_input[v] = 1;
    }
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
      if (is_output_[*it]) to_output[*it] = 1;
      for (auto s : succs_[*it])
        if (to_output[s]) to_output[*it] = 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!from_input[i]) fail("node " + std::to_string(nodes_[i].id) + " is not reachable from any graph input", {nodes_[i].id});
      if (!to_output[i]) fail("node " + std::to_string(nodes_[i].id) + " does not reach any graph output", {nodes_[i].id});
    }

    compute_post_dominators();
  }

  // Post-dominator tree on the reversed DAG. Processing in reverse topological
  // order guarantees every successor already has its ipdom and tree depth.
  void compute_post_dominators() {
    const std::size_t n = nodes_.size();
    ipdom_.assign(n, kVirtualSink);
    std::vector<std::size_t> tree_depth(n, 0);
    auto depth_of = [&](std::size_t v) { return v == kVirtualSink ? std::size_t{0} : tree_depth[v]; };
    auto parent_of = [&](std::size_t v) { return ipdom_[v]; };
    auto lca = [&](std::size_t a, std::size_t b) {
      while (a != b) {
        if (depth_of(a) >= depth_of(b))
          a = parent_of(a);
        else
          b = parent_of(b);
      }
      return a;
    };
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
      const auto v = *it;
      std::optional<std::size_t> acc;
      if (is_output_[v]) acc = kVirtualSink;
      for (auto s : succs_[v]) acc = acc ? lca(*acc, s) : s;
      ipdom_[v] = acc.value_or(kVirtualSink);
      tree_depth[v] = depth_of(ipdom_[v]) + 1;
    }
  }

  std::vector<GraphInput> inputs_;
  std::vector<OperatorNode> nodes_;
  std::vector<NodeId> outputs_;

  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<std::vector<std::size_t>> preds_;
  std::vector<std::vector<std::size_t>> succs_;
  std::vector<bool> is_output_;
  std::vector<std::size_t> topo_;
  std::vector<std::size_t> depth_;
  std::vector<std::size_t> ipdom_;
};

}  // namespace collage
