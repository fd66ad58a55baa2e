#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "collage/cost.hpp"
#include "collage/graph.hpp"
#include "collage/placement.hpp"
#include "collage/registry.hpp"

namespace collage {

/// Counters gathered during one DP run. N, P, F and S are the quantities of
/// the O(N * P * (F + S)) bound.
struct DpStats {
  std::size_t nodes = 0;                  // N
  std::size_t frontiers = 0;              // frontier nodes dequeued
  std::size_t matches = 0;                // candidate matches examined
  double avg_matches_per_frontier = 0.0;  // P
  std::size_t max_new_frontiers = 0;      // F
  std::size_t max_compatible_states = 0;  // S
  std::size_t relaxations = 0;            // (state, match) pairs relaxed
  std::size_t improvements = 0;
  std::size_t states = 0;
  std::size_t measurer_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t profile_computations = 0;
};

struct DpStateView {
  NodeSet covered;
  Cost cost;
};

struct DpResult {
  PlacementStrategy placement;
  Cost cost;
  DpStats stats;
  std::vector<DpStateView> states;  // only when DpOptions::keep_states
};

struct DpOptions {
  std::size_t max_states = 50000;
  bool keep_states = false;
};

namespace detail {

class DpSolver {
 public:
  DpSolver(const ComputationGraph& g, const PatternRegistry& reg, Measurer& m, Epsilon eps, DpOptions opts)
      : g_(g), reg_(reg), m_(m), eps_(eps.cost()), opts_(opts) {}

  DpResult run() {
    DpResult result;
    const auto before = m_.counters();
    result.stats.nodes = g_.size();
    if (g_.empty()) return result;

    collect_candidates();
    states_.push_back({DenseSet(g_.size()), Cost{}, kNone, kNone});
    index_.emplace(states_.front().covered, 0);

    // Frontier queue keyed by (depth, id); a node is enqueued at most once.
    using Key = std::pair<std::size_t, NodeId>;
    std::priority_queue<Key, std::vector<Key>, std::greater<>> queue;
    std::vector<char> enqueued(g_.size(), 0);
    for (std::size_t i = 0; i < g_.size(); ++i) {
      if (g_.depth_at(i) == 0) {
        queue.push({0, g_.id_at(i)});
        enqueued[i] = 1;
      }
    }

    auto& st = result.stats;
    while (!queue.empty()) {
      const auto v = g_.index_of(queue.top().second);
      queue.pop();
      ++st.frontiers;

      std::size_t fresh = 0;
      for (auto w : g_.successors_at(v)) {
        if (enqueued[w]) continue;
        enqueued[w] = 1;
        queue.push({g_.depth_at(w), g_.id_at(w)});
        ++fresh;
      }
      st.max_new_frontiers = std::max(st.max_new_frontiers, fresh);

      // States created while processing v all contain v, so they can never
      // be extended by another match rooted at v.
      const std::size_t known = states_.size();
      for (auto k : kernels_at_[v]) {
        ++st.matches;
        std::size_t compatible = 0;
        for (std::size_t j = 0; j < known; ++j) {
          if (!compatible_with(states_[j].covered, kernels_[k])) continue;
          ++compatible;
          ++st.relaxations;
          relax(j, k, st);
        }
        st.max_compatible_states = std::max(st.max_compatible_states, compatible);
      }
    }

    st.states = states_.size();
    st.avg_matches_per_frontier = st.frontiers ? static_cast<double>(st.matches) / static_cast<double>(st.frontiers) : 0.0;
    const auto after = m_.counters();
    st.cache_hits = after.cache_hits - before.cache_hits;
    st.profile_computations = after.computations - before.computations;

    DenseSet all(g_.size());
    for (std::size_t i = 0; i < g_.size(); ++i) all.insert(i);
    auto it = index_.find(all);
    if (it == index_.end()) throw infeasible();

    result.cost = states_[it->second].cost;
    for (auto k : path(it->second)) result.placement.kernels.push_back(kernels_[k].assignment);
    canonicalize(g_, result.placement);
    if (opts_.keep_states)
      for (const auto& s : states_) result.states.push_back({g_.ids_of(s.covered), s.cost});
    return result;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Kernel {
    Assignment assignment;
    DenseSet nodes;
    DenseSet required;  // producers outside the kernel
    std::optional<Cost> cost;
  };

  struct State {
    DenseSet covered;
    Cost cost;
    std::size_t prev;
    std::size_t kernel;
  };

  void collect_candidates() {
    kernels_at_.assign(g_.size(), {});
    DenseSet coverable(g_.size());
    for (std::size_t v = 0; v < g_.size(); ++v) {
      for (auto& c : reg_.candidates_at(g_, g_.id_at(v))) {
        Kernel k{make_assignment(reg_, c), g_.dense(c.match.nodes), DenseSet(g_.size()), std::nullopt};
        k.nodes.for_each([&](std::size_t i) {
          for (auto p : g_.predecessors_at(i))
            if (!k.nodes.test(p)) k.required.insert(p);
        });
        coverable |= k.nodes;
        kernels_at_[v].push_back(kernels_.size());
        kernels_.push_back(std::move(k));
      }
    }
    if (!coverable.all()) {
      std::vector<NodeId> missing;
      std::string names;
      for (auto v : g_.topo_indices()) {
        if (coverable.test(v)) continue;
        missing.push_back(g_.id_at(v));
        names += (names.empty() ? "" : ", ") + std::to_string(g_.id_at(v)) + " (" + g_.node_at(v).op + ")";
      }
      throw Error(ErrorCode::kInfeasible, "no registered pattern covers node(s) " + names, missing);
    }
  }

  static bool compatible_with(const DenseSet& covered, const Kernel& k) {
    return !covered.intersects(k.nodes) && k.required.is_subset_of(covered);
  }

  Cost kernel_cost(std::size_t k, DpStats& st) {
    auto& kernel = kernels_[k];
    if (!kernel.cost) {
      ++st.measurer_calls;
      kernel.cost = Cost::from_ms(m_.measure_kernel(g_, kernel.assignment.backend, kernel.assignment.nodes)) + eps_;
    }
    return *kernel.cost;
  }

  void relax(std::size_t j, std::size_t k, DpStats& st) {
    const Cost candidate = states_[j].cost + kernel_cost(k, st);
    DenseSet target = states_[j].covered | kernels_[k].nodes;
    auto it = index_.find(target);
    if (it == index_.end()) {
      if (states_.size() >= opts_.max_states)
        throw Error(ErrorCode::kCapacity, "DP exceeded " + std::to_string(opts_.max_states) + " live states");
      index_.emplace(target, states_.size());
      states_.push_back({std::move(target), candidate, j, k});
      ++st.improvements;
      return;
    }
    auto& existing = states_[it->second];
    bool better = candidate < existing.cost;
    if (!better && candidate == existing.cost) better = tie_break(j, k, it->second);
    if (better) {
      existing.cost = candidate;
      existing.prev = j;
      existing.kernel = k;
      ++st.improvements;
    }
  }

  std::vector<std::size_t> path(std::size_t state) const {
    std::vector<std::size_t> ks;
    for (auto s = state; states_[s].prev != kNone; s = states_[s].prev) ks.push_back(states_[s].kernel);
    return ks;
  }

  PlacementSignature signature_of(std::vector<std::size_t> ks) const {
    std::vector<const Assignment*> ptrs;
    for (auto k : ks) ptrs.push_back(&kernels_[k].assignment);
    return signature(reg_, ptrs);
  }

  // True when (state j + kernel k) has a smaller signature than the stored path.
  bool tie_break(std::size_t j, std::size_t k, std::size_t existing) const {
    auto cand = path(j);
    cand.push_back(k);
    return signature_of(cand) < signature_of(path(existing));
  }

  Error infeasible() const {
    DenseSet reached(g_.size());
    for (const auto& s : states_) reached |= s.covered;
    std::vector<NodeId> stuck;
    for (auto v : g_.topo_indices())
      if (!reached.test(v)) stuck.push_back(g_.id_at(v));
    if (stuck.empty())
      return Error(ErrorCode::kInfeasible, "matched kernels cannot be combined into a disjoint, schedulable cover");
    return Error(ErrorCode::kInfeasible,
                 "no complete placement: frontier node " + std::to_string(stuck.front()) + " (" +
                     g_.node(stuck.front()).op + ") has no usable candidate",
                 stuck);
  }

  const ComputationGraph& g_;
  const PatternRegistry& reg_;
  Measurer& m_;
  Cost eps_;
  DpOptions opts_;

  std::vector<Kernel> kernels_;
  std::vector<std::vector<std::size_t>> kernels_at_;
  std::vector<State> states_;
  std::unordered_map<DenseSet, std::size_t, DenseSetHash> index_;
};

}  // namespace detail

/// Op-level placement: frontier-driven dynamic programming over downward-closed
/// covered-node sets under the additive cost model. Frontier nodes are visited
/// in (depth, id) order; each match rooted at the frontier extends every
/// stored state that is disjoint from it and already holds all of its external
/// producers. Exact ties prefer the smaller placement signature.
inline DpResult optimize(const ComputationGraph& g, const PatternRegistry& reg, Measurer& m, Epsilon eps,
                         DpOptions opts = {}) {
  return detail::DpSolver(g, reg, m, eps, opts).run();
}

}  // namespace collage
