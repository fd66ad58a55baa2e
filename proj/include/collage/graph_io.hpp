#pragma once

#include <initializer_list>
#include <istream>
#include <iterator>
#include <string>
#include <string_view>

#include "collage/graph.hpp"
#include "json.hpp"

namespace collage {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kGraphFormat = "collage-graph/1";

namespace detail {

inline void reject_unknown_fields(const Json& obj, std::initializer_list<std::string_view> allowed,
                                  const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorCode::kParse, "unknown field '" + key + "' in " + where);
  }
}

inline const Json& require(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw Error(ErrorCode::kParse, std::string("missing field '") + key + "' in " + where);
  return obj.at(key);
}

inline void require_version(const Json& doc, std::string_view expected) {
  const auto& v = require(doc, "version", "document");
  if (!v.is_string() || v.get<std::string>() != expected)
    throw Error(ErrorCode::kParse, "expected version \"" + std::string(expected) + "\"");
}

inline Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("malformed JSON: ") + e.what());
  }
}

inline Shape parse_shape(const Json& j, const std::string& where) {
  if (!j.is_array()) throw Error(ErrorCode::kParse, "shape of " + where + " must be an array");
  Shape s;
  for (const auto& d : j) {
    if (!d.is_number_integer()) throw Error(ErrorCode::kParse, "shape of " + where + " must hold integers");
    s.push_back(d.get<std::int64_t>());
  }
  return s;
}

inline AttrValue parse_attr(const Json& j, const std::string& where) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::vector<std::int64_t> list;
    for (const auto& x : j) {
      if (!x.is_number_integer()) throw Error(ErrorCode::kParse, "list attribute in " + where + " must hold integers");
      list.push_back(x.get<std::int64_t>());
    }
    return list;
  }
  throw Error(ErrorCode::kParse, "unsupported attribute value in " + where);
}

inline Json attr_to_json(const AttrValue& v) {
  return std::visit([](const auto& x) { return Json(x); }, v);
}

}  // namespace detail

inline ComputationGraph graph_from_json(const Json& doc) {
  using detail::require;
  detail::reject_unknown_fields(doc, {"version", "inputs", "nodes", "outputs"}, "graph");
  detail::require_version(doc, kGraphFormat);

  std::vector<GraphInput> inputs;
  for (const auto& in : require(doc, "inputs", "graph")) {
    detail::reject_unknown_fields(in, {"name", "shape"}, "graph input");
    const auto& name = require(in, "name", "graph input");
    if (!name.is_string()) throw Error(ErrorCode::kParse, "graph input name must be a string");
    inputs.push_back({name.get<std::string>(), detail::parse_shape(require(in, "shape", "graph input"), name.get<std::string>())});
  }

  std::vector<OperatorNode> nodes;
  for (const auto& jn : require(doc, "nodes", "graph")) {
    detail::reject_unknown_fields(jn, {"id", "op", "attrs", "inputs", "shape"}, "node");
    OperatorNode node;
    const auto& id = require(jn, "id", "node");
    if (!id.is_number_integer()) throw Error(ErrorCode::kParse, "node id must be an integer");
    node.id = id.get<NodeId>();
    const auto where = "node " + std::to_string(node.id);
    const auto& op = require(jn, "op", where);
    if (!op.is_string()) throw Error(ErrorCode::kParse, "op of " + where + " must be a string", {node.id});
    node.op = op.get<std::string>();
    if (jn.contains("attrs")) {
      if (!jn.at("attrs").is_object()) throw Error(ErrorCode::kParse, "attrs of " + where + " must be an object", {node.id});
      for (const auto& [k, v] : jn.at("attrs").items()) node.attrs.emplace(k, detail::parse_attr(v, where));
    }
    for (const auto& in : require(jn, "inputs", where)) {
      if (in.is_number_integer()) {
        node.inputs.emplace_back(in.get<NodeId>());
      } else if (in.is_object()) {
        detail::reject_unknown_fields(in, {"input"}, where + " input");
        const auto& name = require(in, "input", where + " input");
        if (!name.is_string()) throw Error(ErrorCode::kParse, "input name of " + where + " must be a string", {node.id});
        node.inputs.push_back(InputRef::graph_input(name.get<std::string>()));
      } else {
        throw Error(ErrorCode::kParse, "bad input reference in " + where, {node.id});
      }
    }
    node.shape = detail::parse_shape(require(jn, "shape", where), where);
    nodes.push_back(std::move(node));
  }

  std::vector<NodeId> outputs;
  for (const auto& o : require(doc, "outputs", "graph")) {
    if (!o.is_number_integer()) throw Error(ErrorCode::kParse, "graph outputs must be node ids");
    outputs.push_back(o.get<NodeId>());
  }
  return ComputationGraph(std::move(inputs), std::move(nodes), std::move(outputs));
}

inline ComputationGraph load_graph(std::string_view text) { return graph_from_json(detail::parse_json(text)); }

inline ComputationGraph load_graph(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return load_graph(text);
}

inline Json graph_to_json(const ComputationGraph& g) {
  Json doc;
  doc["version"] = kGraphFormat;
  doc["inputs"] = Json::array();
  for (const auto& in : g.inputs()) doc["inputs"].push_back({{"name", in.name}, {"shape", in.shape}});
  doc["nodes"] = Json::array();
  for (const auto& node : g.nodes()) {
    Json jn;
    jn["id"] = node.id;
    jn["op"] = node.op;
    Json attrs = Json::object();
    for (const auto& [k, v] : node.attrs) attrs[k] = detail::attr_to_json(v);
    jn["attrs"] = std::move(attrs);
    Json ins = Json::array();
    for (const auto& in : node.inputs) {
      if (in.is_node())
        ins.push_back(in.node());
      else
        ins.push_back({{"input", in.input_name()}});
    }
    jn["inputs"] = std::move(ins);
    jn["shape"] = node.shape;
    doc["nodes"].push_back(std::move(jn));
  }
  doc["outputs"] = g.outputs();
  return doc;
}

inline std::string save_graph(const ComputationGraph& g) { return graph_to_json(g).dump(2) + "\n"; }

}  // namespace collage
