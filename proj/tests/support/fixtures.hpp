#pragma once

#include <filesystem>
#include <string>

#include "collage/collage.hpp"

namespace collage::testing {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(COLLAGE_FIXTURES) / rel; }

inline ComputationGraph fixture_graph(const std::string& name) {
  return load_graph(read_file(fixture("graphs/" + name + ".json")));
}

inline Setup fixture_setup(const std::string& graph, const std::string& config) {
  return build_setup(load_config(fixture("configs/" + config + ".json")), fixture_graph(graph));
}

// Small graph builder: node(id, op, inputs), inputs given as ids or graph
// input names; every node gets the same shape.
class GraphBuilder {
 public:
  explicit GraphBuilder(Shape shape = {1, 64, 56, 56}) : shape_(std::move(shape)) {}

  GraphBuilder& input(std::string name) {
    inputs_.push_back({std::move(name), shape_});
    return *this;
  }

  GraphBuilder& node(NodeId id, std::string op, std::vector<InputRef> ins, AttrMap attrs = {}) {
    nodes_.push_back({id, std::move(op), std::move(attrs), std::move(ins), shape_});
    return *this;
  }

  ComputationGraph build(std::vector<NodeId> outputs) const { return ComputationGraph(inputs_, nodes_, std::move(outputs)); }

 private:
  Shape shape_;
  std::vector<GraphInput> inputs_;
  std::vector<OperatorNode> nodes_;
};

inline InputRef in(const std::string& name) { return InputRef::graph_input(name); }

inline SimProfile flat_profile(const std::string& backend, std::map<std::string, double> overhead, double discount = 1.0,
                               RegionModel region = {0.0, 0.7}) {
  SimProfile p;
  p.backend = backend;
  for (auto& [op, o] : overhead) p.ops[op] = {0.0, o};
  p.fusion_discount = discount;
  p.region = region;
  return p;
}

}  // namespace collage::testing
