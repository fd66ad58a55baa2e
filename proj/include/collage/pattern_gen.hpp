#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "collage/graph.hpp"
#include "collage/graph_io.hpp"
#include "collage/matcher.hpp"
#include "collage/pattern.hpp"

namespace collage {

inline constexpr std::string_view kRulesFormat = "collage-rules/1";

/// Operator class used by fusion transitions. Built-in names are the TVM-like
/// kFusable/kElemwise/kBroadcast/kInjective/kOpaque; a rule file may declare more.
struct OpClass {
  std::string name;
  auto operator<=>(const OpClass&) const = default;
};

inline const std::vector<std::string>& builtin_op_classes() {
  static const std::vector<std::string> names{"kFusable", "kElemwise", "kBroadcast", "kInjective", "kOpaque"};
  return names;
}

struct OpValidity {
  std::string op;
  std::vector<AttrConstraint> constraints;
  OpClass op_class;
};

struct FusionTransition {
  OpClass group_class;
  OpClass path_class;
  OpClass result_class;
};

/// Generative description of what a backend can run and fuse.
///
/// `op_hook` and `fusion_hook` are optional host-code predicates layered on
/// top of the declarative entries; they are not serialized. When set,
/// `fusion_hook` replaces the transition table.
struct PatternRule {
  std::string backend;
  std::vector<std::string> extra_classes;
  std::vector<OpValidity> ops;
  std::vector<FusionTransition> transitions;
  std::size_t max_fusion_size = 16;

  std::function<bool(const OperatorNode&)> op_hook;
  std::function<std::optional<OpClass>(const OpClass& group_class, const ComputationGraph& g, NodeId src,
                                       NodeId sink, const NodeSet& path_nodes)>
      fusion_hook;

  const OpValidity* entry(const std::string& op) const {
    for (const auto& e : ops)
      if (e.op == op) return &e;
    return nullptr;
  }

  std::optional<OpClass> class_of(const std::string& op) const {
    if (const auto* e = entry(op)) return e->op_class;
    return std::nullopt;
  }

  bool known_class(const OpClass& c) const {
    const auto& b = builtin_op_classes();
    return std::find(b.begin(), b.end(), c.name) != b.end() ||
           std::find(extra_classes.begin(), extra_classes.end(), c.name) != extra_classes.end();
  }

  void validate() const {
    if (backend.empty()) throw Error(ErrorCode::kValidation, "pattern rule without backend id");
    if (max_fusion_size < 1) throw Error(ErrorCode::kValidation, "max_fusion_size must be >= 1");
    std::set<std::string> seen;
    for (const auto& e : ops) {
      if (e.op.empty()) throw Error(ErrorCode::kValidation, "rule entry with empty op");
      if (!seen.insert(e.op).second)
        throw Error(ErrorCode::kValidation, "op '" + e.op + "' listed twice; each op maps to exactly one class");
      if (!known_class(e.op_class)) throw Error(ErrorCode::kValidation, "unknown op class '" + e.op_class.name + "'");
    }
    for (const auto& t : transitions)
      for (const auto* c : {&t.group_class, &t.path_class, &t.result_class})
        if (!known_class(*c)) throw Error(ErrorCode::kValidation, "transition uses unknown class '" + c->name + "'");
  }
};

inline bool op_valid(const PatternRule& rule, const OperatorNode& node) {
  const auto* e = rule.entry(node.op);
  if (!e) return false;
  for (const auto& c : e->constraints)
    if (!satisfies(c, node.attrs)) return false;
  return !rule.op_hook || rule.op_hook(node);
}

struct FusionCheck {
  bool valid = false;
  OpClass result_class;
};

/// Can `group` (of class `group_class`) grow from `src` to its post-dominator
/// `sink`? Every node strictly between them, and the sink itself, must be
/// supported and belong to the transition's path class.
inline FusionCheck fusion_valid(const PatternRule& rule, const ComputationGraph& g, const NodeSet& group,
                                const OpClass& group_class, NodeId src, NodeId sink) {
  if (!contains(group, src))
    throw Error(ErrorCode::kValidation, "fusion source " + std::to_string(src) + " is not in the group", {src});
  NodeSet path = g.paths_between(src, sink);
  path.push_back(sink);
  path = make_node_set(std::move(path));

  for (auto v : path)
    if (!op_valid(rule, g.node(v))) return {};

  if (rule.fusion_hook) {
    if (auto cls = rule.fusion_hook(group_class, g, src, sink, path)) return {true, *cls};
    return {};
  }
  for (const auto& t : rule.transitions) {
    if (t.group_class != group_class) continue;
    const bool all_on_path = std::all_of(path.begin(), path.end(), [&](NodeId v) {
      return rule.class_of(g.node(v).op) == t.path_class;
    });
    if (all_on_path) return {true, t.result_class};
  }
  return {};
}

struct GeneratedPattern {
  Pattern pattern;
  std::string backend;
  /// Node sets (in the source graph) whose growth produced this pattern.
  std::vector<NodeSet> origins;

  std::string provenance() const {
    std::string s = "backend=" + backend + " origins=";
    for (std::size_t i = 0; i < origins.size(); ++i) s += (i ? ";" : "") + to_string(origins[i]);
    return s;
  }
};

/// Converts a single-exit node group into a pattern rooted at its exit. Inputs
/// produced inside the group become nested operator patterns (labelled and
/// referenced when shared); all other inputs become wildcards. Attribute
/// constraints come from the rule's op entries.
inline Pattern pattern_from_group(const PatternRule& rule, const ComputationGraph& g, const NodeSet& group) {
  std::optional<NodeId> root;
  std::map<NodeId, int> uses;
  for (auto v : group) {
    bool consumed_inside = false;
    for (auto c : g.consumers(v)) consumed_inside = consumed_inside || contains(group, c);
    if (!consumed_inside) {
      if (root) throw Error(ErrorCode::kInvariant, "fusion group " + to_string(group) + " has several exits", group);
      root = v;
    }
    for (const auto& in : g.node(v).inputs)
      if (in.is_node() && contains(group, in.node())) ++uses[in.node()];
  }
  if (!root) throw Error(ErrorCode::kInvariant, "empty fusion group");

  std::map<NodeId, std::string> labels;
  int next_label = 0;
  std::function<PatternNode(NodeId)> build = [&](NodeId v) -> PatternNode {
    if (auto it = labels.find(v); it != labels.end()) return PatternNode::ref(it->second);
    const auto& node = g.node(v);
    std::vector<AttrConstraint> constraints;
    if (const auto* e = rule.entry(node.op)) constraints = e->constraints;
    PatternNode pn = PatternNode::op_node(node.op, {}, std::move(constraints));
    if (uses[v] > 1) {
      pn.label = std::to_string(next_label++);
      labels[v] = pn.label;
    }
    for (const auto& in : node.inputs) {
      if (in.is_node() && contains(group, in.node()))
        pn.args.push_back(build(in.node()));
      else
        pn.args.push_back(PatternNode::wildcard());
    }
    return pn;
  };
  return Pattern(build(*root));
}

/// The fusion groups grown by the generator, in emission order (one per seed
/// and growth step, duplicates across seeds possible).
inline std::vector<NodeSet> grow_fusion_groups(const PatternRule& rule, const ComputationGraph& g) {
  std::vector<NodeSet> out;
  for (auto seed : g.topo_order()) {
    const auto& node = g.node(seed);
    if (!op_valid(rule, node)) continue;
    NodeSet group{seed};
    OpClass cls = *rule.class_of(node.op);
    out.push_back(group);
    NodeId src = seed;
    while (true) {
      const auto sink = g.post_dominator(src);
      if (!sink) break;
      const auto check = fusion_valid(rule, g, group, cls, src, *sink);
      if (!check.valid) break;
      NodeSet grown = group;
      for (auto v : g.paths_between(src, *sink)) grown.push_back(v);
      grown.push_back(*sink);
      grown = make_node_set(std::move(grown));
      if (grown.size() > rule.max_fusion_size) break;
      group = std::move(grown);
      cls = check.result_class;
      src = *sink;
      out.push_back(group);
    }
  }
  return out;
}

/// Enumerates every pattern the rule admits on `g`: each supported node as a
/// singleton, then each enlargement to the running post-dominator that the
/// fusion rule accepts. Results are structurally deduplicated and each is
/// checked to match its originating group.
inline std::vector<GeneratedPattern> generate_patterns(const PatternRule& rule, const ComputationGraph& g) {
  rule.validate();
  std::vector<GeneratedPattern> out;
  std::map<std::string, std::size_t> by_text;
  for (auto& group : grow_fusion_groups(rule, g)) {
    Pattern p = pattern_from_group(rule, g, group);
    const auto root = [&] {
      for (auto v : group) {
        bool inner = false;
        for (auto c : g.consumers(v)) inner = inner || contains(group, c);
        if (!inner) return v;
      }
      return group.back();
    }();
    auto m = match_at(g, root, p);
    if (!m || m->nodes != group)
      throw Error(ErrorCode::kInvariant, "generated pattern " + p.text() + " does not match its group " + to_string(group), group);

    auto text = p.text();
    auto it = by_text.find(text);
    if (it == by_text.end()) {
      by_text.emplace(text, out.size());
      out.push_back({std::move(p), rule.backend, {std::move(group)}});
    } else {
      auto& origins = out[it->second].origins;
      if (std::find(origins.begin(), origins.end(), group) == origins.end()) origins.push_back(std::move(group));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rule file I/O

namespace detail {

inline Literal literal_from_json(const Json& j, const std::string& where) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorCode::kParse, "constraint literal in " + where + " must be a number or string");
}

inline Json literal_to_json(const Literal& lit) {
  return std::visit([](const auto& x) { return Json(x); }, lit);
}

}  // namespace detail

/// JSON constraint object: `{"k": literal}` (equals), `{"k": {"in": [...]}}`,
/// `{"k": {"range": [lo, hi]}}`.
inline std::vector<AttrConstraint> constraints_from_json(const Json& obj, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::kParse, "constraints in " + where + " must be an object");
  std::vector<AttrConstraint> out;
  for (const auto& [key, v] : obj.items()) {
    AttrConstraint c;
    c.key = key;
    if (v.is_object()) {
      if (v.size() != 1) throw Error(ErrorCode::kParse, "constraint '" + key + "' in " + where + " must have one predicate");
      if (v.contains("in")) {
        OneOf one;
        if (!v.at("in").is_array() || v.at("in").empty())
          throw Error(ErrorCode::kParse, "'in' constraint '" + key + "' needs a non-empty array");
        for (const auto& x : v.at("in")) one.values.push_back(detail::literal_from_json(x, where));
        c.predicate = std::move(one);
      } else if (v.contains("range")) {
        const auto& r = v.at("range");
        if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer())
          throw Error(ErrorCode::kParse, "'range' constraint '" + key + "' needs [lo, hi] integers");
        c.predicate = IntRange{r[0].get<std::int64_t>(), r[1].get<std::int64_t>()};
        if (r[0].get<std::int64_t>() > r[1].get<std::int64_t>())
          throw Error(ErrorCode::kValidation, "empty integer range for attribute '" + key + "'");
      } else {
        throw Error(ErrorCode::kParse, "unknown constraint predicate for '" + key + "' in " + where);
      }
    } else {
      c.predicate = Equals{detail::literal_from_json(v, where)};
    }
    out.push_back(std::move(c));
  }
  return out;
}

inline Json constraints_to_json(const std::vector<AttrConstraint>& cs) {
  Json obj = Json::object();
  for (const auto& c : cs) {
    std::visit(
        [&](const auto& pred) {
          using P = std::decay_t<decltype(pred)>;
          if constexpr (std::is_same_v<P, Equals>) {
            obj[c.key] = detail::literal_to_json(pred.value);
          } else if constexpr (std::is_same_v<P, OneOf>) {
            Json arr = Json::array();
            for (const auto& v : pred.values) arr.push_back(detail::literal_to_json(v));
            obj[c.key] = {{"in", arr}};
          } else {
            obj[c.key] = {{"range", {pred.lo, pred.hi}}};
          }
        },
        c.predicate);
  }
  return obj;
}

inline PatternRule rule_from_json(const Json& doc) {
  using detail::require;
  detail::reject_unknown_fields(doc, {"version", "backend", "classes", "ops", "transitions", "max_fusion_size"}, "rule file");
  detail::require_version(doc, kRulesFormat);
  PatternRule rule;
  const auto& backend = require(doc, "backend", "rule file");
  if (!backend.is_string()) throw Error(ErrorCode::kParse, "rule backend must be a string");
  rule.backend = backend.get<std::string>();
  if (doc.contains("classes"))
    for (const auto& c : doc.at("classes")) rule.extra_classes.push_back(c.get<std::string>());
  for (const auto& e : require(doc, "ops", "rule file")) {
    detail::reject_unknown_fields(e, {"op", "constraints", "class"}, "rule op entry");
    OpValidity v;
    v.op = require(e, "op", "rule op entry").get<std::string>();
    if (e.contains("constraints")) v.constraints = constraints_from_json(e.at("constraints"), "op '" + v.op + "'");
    v.op_class = {require(e, "class", "rule op entry").get<std::string>()};
    rule.ops.push_back(std::move(v));
  }
  if (doc.contains("transitions")) {
    for (const auto& t : doc.at("transitions")) {
      detail::reject_unknown_fields(t, {"group", "path", "result"}, "transition");
      rule.transitions.push_back({{require(t, "group", "transition").get<std::string>()},
                                  {require(t, "path", "transition").get<std::string>()},
                                  {require(t, "result", "transition").get<std::string>()}});
    }
  }
  if (doc.contains("max_fusion_size")) {
    const auto& m = doc.at("max_fusion_size");
    if (!m.is_number_integer() || m.get<std::int64_t>() < 1)
      throw Error(ErrorCode::kValidation, "max_fusion_size must be a positive integer");
    rule.max_fusion_size = m.get<std::size_t>();
  }
  rule.validate();
  return rule;
}

inline PatternRule load_rule(std::string_view text) { return rule_from_json(detail::parse_json(text)); }

inline Json rule_to_json(const PatternRule& rule) {
  Json doc;
  doc["version"] = kRulesFormat;
  doc["backend"] = rule.backend;
  if (!rule.extra_classes.empty()) doc["classes"] = rule.extra_classes;
  doc["ops"] = Json::array();
  for (const auto& e : rule.ops) {
    Json je;
    je["op"] = e.op;
    if (!e.constraints.empty()) je["constraints"] = constraints_to_json(e.constraints);
    je["class"] = e.op_class.name;
    doc["ops"].push_back(std::move(je));
  }
  doc["transitions"] = Json::array();
  for (const auto& t : rule.transitions)
    doc["transitions"].push_back({{"group", t.group_class.name}, {"path", t.path_class.name}, {"result", t.result_class.name}});
  doc["max_fusion_size"] = rule.max_fusion_size;
  return doc;
}

inline std::string save_rule(const PatternRule& rule) { return rule_to_json(rule).dump(2) + "\n"; }

}  // namespace collage
