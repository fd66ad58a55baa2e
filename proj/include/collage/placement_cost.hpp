#pragma once

#include <map>
#include <numeric>
#include <vector>

#include "collage/cost.hpp"
#include "collage/placement.hpp"
#include "collage/registry.hpp"

namespace collage {

/// Measured cost of every kernel, in placement order.
inline std::vector<Cost> kernel_costs(Measurer& m, const ComputationGraph& g, const PlacementStrategy& p) {
  std::vector<Cost> out;
  out.reserve(p.kernels.size());
  for (const auto& a : p.kernels) out.push_back(Cost::from_ms(m.measure_kernel(g, a.backend, a.nodes)));
  return out;
}

/// Additive model: sum of kernel costs plus one epsilon per kernel.
inline Cost placement_cost_additive(Measurer& m, const ComputationGraph& g, const PlacementStrategy& p, Epsilon eps) {
  validate(g, p);
  Cost total;
  for (auto c : kernel_costs(m, g, p)) total += c + eps.cost();
  return total;
}

/// Maximal groups of kernels on the same graph inference backend that are
/// connected through graph edges. Returns kernel indices per region.
inline std::vector<std::vector<std::size_t>> graph_backend_regions(const ComputationGraph& g, const PatternRegistry& reg,
                                                                   const PlacementStrategy& p) {
  const std::size_t k = p.kernels.size();
  std::vector<std::size_t> parent(k);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<bool> eligible(k);
  for (std::size_t i = 0; i < k; ++i) eligible[i] = reg.is_graph_backend(p.kernels[i].backend);

  const auto owner = kernel_of_nodes(g, p);
  for (std::size_t v = 0; v < g.size(); ++v) {
    for (auto w : g.successors_at(v)) {
      const auto a = owner[v], b = owner[w];
      if (a == b || a == kNoPatternIndex || b == kNoPatternIndex) continue;
      if (eligible[a] && eligible[b] && p.kernels[a].backend == p.kernels[b].backend) parent[find(a)] = find(b);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < k; ++i)
    if (eligible[i]) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [_, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end());
  return out;
}

/// Graph-level cost from pre-measured kernel costs. Kernels outside graph
/// inference regions cost c + eps; a region of n kernels costs
/// r(n) * sum(c) + eps when the backend's region model is enabled.
inline Cost graphlevel_from_kernel_costs(const ComputationGraph& g, const PatternRegistry& reg, const Measurer& m,
                                         const PlacementStrategy& p, const std::vector<Cost>& costs, Epsilon eps) {
  std::vector<bool> in_region(p.kernels.size(), false);
  Cost total;
  for (const auto& region : graph_backend_regions(g, reg, p)) {
    const auto model = m.region_model(p.kernels[region.front()].backend);
    if (!model.enabled()) continue;
    Cost sum;
    for (auto i : region) {
      sum += costs[i];
      in_region[i] = true;
    }
    total += sum.scaled(model.factor(region.size())) + eps.cost();
  }
  for (std::size_t i = 0; i < p.kernels.size(); ++i)
    if (!in_region[i]) total += costs[i] + eps.cost();
  return total;
}

inline Cost placement_cost_graphlevel(Measurer& m, const ComputationGraph& g, const PatternRegistry& reg,
                                      const PlacementStrategy& p, Epsilon eps) {
  validate(g, p);
  return graphlevel_from_kernel_costs(g, reg, m, p, kernel_costs(m, g, p), eps);
}

}  // namespace collage
