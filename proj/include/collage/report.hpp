#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "collage/cost.hpp"
#include "collage/graph_io.hpp"
#include "collage/placement.hpp"
#include "collage/placement_cost.hpp"
#include "collage/registry.hpp"

namespace collage {

struct ReportRow {
  std::string backend;
  std::string ops;  // op kinds in node-id order, '+'-joined
  NodeSet nodes;
  std::string pattern;
  Cost cost;
};

struct Report {
  std::vector<ReportRow> rows;
  Cost kernel_total;
  Cost epsilon_total;
  Cost additive;
  std::optional<Cost> graphlevel;
};

inline Report make_report(Measurer& m, const ComputationGraph& g, const PatternRegistry& reg,
                          const PlacementStrategy& p, Epsilon eps, bool with_graphlevel) {
  validate(g, p);
  Report r;
  const auto costs = kernel_costs(m, g, p);
  for (std::size_t k = 0; k < p.kernels.size(); ++k) {
    const auto& a = p.kernels[k];
    std::string ops;
    for (auto v : a.nodes) ops += (ops.empty() ? "" : "+") + g.node(v).op;
    r.rows.push_back({a.backend, ops, a.nodes, a.pattern.text(), costs[k]});
    r.kernel_total += costs[k];
    r.epsilon_total += eps.cost();
  }
  r.additive = r.kernel_total + r.epsilon_total;
  if (with_graphlevel) r.graphlevel = graphlevel_from_kernel_costs(g, reg, m, p, costs, eps);
  return r;
}

inline std::string format_ms(Cost c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", c.ms());
  return buf;
}

inline Json report_to_json(const Report& r) {
  Json doc;
  doc["kernels"] = Json::array();
  for (const auto& row : r.rows)
    doc["kernels"].push_back(
        {{"backend", row.backend}, {"ops", row.ops}, {"nodes", row.nodes}, {"pattern", row.pattern}, {"cost_ms", row.cost.ms()}});
  doc["kernel_count"] = r.rows.size();
  doc["kernel_cost_ms"] = r.kernel_total.ms();
  doc["epsilon_cost_ms"] = r.epsilon_total.ms();
  doc["additive_cost_ms"] = r.additive.ms();
  if (r.graphlevel) doc["graphlevel_cost_ms"] = r.graphlevel->ms();
  return doc;
}

inline std::string report_to_text(const Report& r) {
  const std::vector<std::string> head{"#", "backend", "ops", "nodes", "cost_ms", "pattern"};
  std::vector<std::vector<std::string>> cells{head};
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    cells.push_back({std::to_string(i), row.backend, row.ops, to_string(row.nodes), format_ms(row.cost), row.pattern});
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

  std::string out;
  for (const auto& line : cells) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      text += line[c];
      if (c + 1 < line.size()) text += std::string(width[c] - line[c].size() + 2, ' ');
    }
    out += text + "\n";
  }
  out += "\n";
  out += "kernels:        " + std::to_string(r.rows.size()) + "\n";
  out += "kernel cost:    " + format_ms(r.kernel_total) + " ms\n";
  out += "epsilon:        " + format_ms(r.epsilon_total) + " ms\n";
  out += "additive cost:  " + format_ms(r.additive) + " ms\n";
  if (r.graphlevel) out += "graph-level:    " + format_ms(*r.graphlevel) + " ms\n";
  return out;
}

}  // namespace collage
