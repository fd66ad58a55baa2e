#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "collage/graph.hpp"
#include "collage/matcher.hpp"
#include "collage/pattern.hpp"
#include "collage/pattern_gen.hpp"

namespace collage {

enum class BackendKind { kOpKernelLibrary, kGraphInferenceLibrary };

inline std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::kOpKernelLibrary ? "op_kernel_library" : "graph_inference_library";
}

inline BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "op_kernel_library") return BackendKind::kOpKernelLibrary;
  if (s == "graph_inference_library") return BackendKind::kGraphInferenceLibrary;
  throw Error(ErrorCode::kParse, "unknown backend kind '" + std::string(s) + "'");
}

struct BackendDescriptor {
  std::string id;
  BackendKind kind = BackendKind::kOpKernelLibrary;
  std::string cost_profile;  // name or path of the cost profile backing this backend
};

enum class PatternSource { kExplicit, kGenerated };

/// b = (p, d): a pattern the backend can lower to one kernel.
struct BackendPattern {
  std::string backend;
  Pattern pattern;
  PatternSource source = PatternSource::kExplicit;
};

struct Candidate {
  std::size_t pattern_index = 0;
  Match match;
};

/// Backends and the backend-pattern universe. Built during setup, then
/// treated as read-only by the optimizers.
class PatternRegistry {
 public:
  void add_backend(BackendDescriptor desc) {
    if (desc.id.empty()) throw Error(ErrorCode::kValidation, "backend id must not be empty");
    if (has_backend(desc.id)) throw Error(ErrorCode::kValidation, "backend '" + desc.id + "' is already registered");
    backends_.push_back(std::move(desc));
  }

  bool has_backend(std::string_view id) const {
    return std::any_of(backends_.begin(), backends_.end(), [&](const auto& b) { return b.id == id; });
  }

  std::size_t backend_index(std::string_view id) const {
    for (std::size_t i = 0; i < backends_.size(); ++i)
      if (backends_[i].id == id) return i;
    throw Error(ErrorCode::kNotFound, "unknown backend '" + std::string(id) + "'");
  }

  const BackendDescriptor& backend(std::string_view id) const { return backends_[backend_index(id)]; }
  const std::vector<BackendDescriptor>& backends() const { return backends_; }

  bool is_graph_backend(std::string_view id) const {
    return backend(id).kind == BackendKind::kGraphInferenceLibrary;
  }

  /// Appends (p, backend). Returns false (and changes nothing) when the same
  /// pattern is already registered for that backend.
  bool add_pattern(const std::string& backend, Pattern p, PatternSource source = PatternSource::kExplicit) {
    if (!has_backend(backend)) throw Error(ErrorCode::kNotFound, "unknown backend '" + backend + "'");
    auto key = backend + "\x1f" + p.text();
    if (!texts_.insert(key).second) return false;
    by_root_op_[p.root_op()].push_back(patterns_.size());
    patterns_.push_back({backend, std::move(p), source});
    return true;
  }

  /// Generates the rule's patterns on `g` and registers them. Returns how
  /// many were new.
  std::size_t add_pattern_rule(const std::string& backend, const PatternRule& rule, const ComputationGraph& g) {
    if (!has_backend(backend)) throw Error(ErrorCode::kNotFound, "unknown backend '" + backend + "'");
    if (rule.backend != backend)
      throw Error(ErrorCode::kValidation, "rule for backend '" + rule.backend + "' registered under '" + backend + "'");
    std::size_t added = 0;
    for (auto& gp : generate_patterns(rule, g)) added += add_pattern(backend, std::move(gp.pattern), PatternSource::kGenerated);
    return added;
  }

  const std::vector<BackendPattern>& patterns() const { return patterns_; }
  const BackendPattern& pattern(std::size_t index) const { return patterns_.at(index); }

  /// Every registered pattern whose root op is `v`'s op and which matches at
  /// `v`, in registration order.
  std::vector<Candidate> candidates_at(const ComputationGraph& g, NodeId v) const {
    std::vector<Candidate> out;
    auto it = by_root_op_.find(g.node(v).op);
    if (it == by_root_op_.end()) return out;
    for (auto idx : it->second)
      if (auto m = match_at(g, v, patterns_[idx].pattern)) out.push_back({idx, std::move(*m)});
    return out;
  }

  /// Op kinds of `g` that no registered pattern can cover anywhere.
  std::vector<std::string> uncovered_op_kinds(const ComputationGraph& g) const {
    std::set<NodeId> covered;
    for (const auto& node : g.nodes())
      for (const auto& c : candidates_at(g, node.id)) covered.insert(c.match.nodes.begin(), c.match.nodes.end());
    std::set<std::string> ops;
    for (const auto& node : g.nodes())
      if (!covered.count(node.id)) ops.insert(node.op);
    return {ops.begin(), ops.end()};
  }

  /// Registry restricted to the given backends (kept in this registry's order).
  PatternRegistry restricted_to(const std::vector<std::string>& ids) const {
    PatternRegistry out;
    for (const auto& b : backends_)
      if (std::find(ids.begin(), ids.end(), b.id) != ids.end()) out.add_backend(b);
    for (const auto& p : patterns_)
      if (out.has_backend(p.backend)) out.add_pattern(p.backend, p.pattern, p.source);
    return out;
  }

 private:
  std::vector<BackendDescriptor> backends_;
  std::vector<BackendPattern> patterns_;
  std::set<std::string> texts_;
  std::map<std::string, std::vector<std::size_t>> by_root_op_;
};

}  // namespace collage
