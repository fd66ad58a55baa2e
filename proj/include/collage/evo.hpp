#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "collage/cost.hpp"
#include "collage/placement.hpp"
#include "collage/placement_cost.hpp"
#include "collage/registry.hpp"

namespace collage {

struct EsConfig {
  std::size_t population = 32;
  std::size_t generations = 200;
  std::optional<double> mutation_rate;  // per bit; defaults to 1 / genome length
  std::size_t tournament = 4;
  std::size_t elitism = 1;
  std::uint64_t seed = 42;
  double time_budget_s = 60.0;

  void validate() const {
    if (population < 1 || generations < 1 || tournament < 1 || elitism < 1)
      throw Error(ErrorCode::kValidation, "ES population, generations, tournament and elitism must be positive");
    if (elitism > population) throw Error(ErrorCode::kValidation, "ES elitism exceeds population size");
    if (mutation_rate && !(*mutation_rate >= 0 && *mutation_rate <= 1))
      throw Error(ErrorCode::kValidation, "ES mutation rate must be in [0, 1]");
    if (!(time_budget_s > 0)) throw Error(ErrorCode::kValidation, "ES time budget must be positive");
  }
};

/// One bit per op-level kernel not already on a graph inference library:
/// 0 keeps the op-level decision, 1 offloads the kernel to `graph_backend`.
using Genome = std::vector<std::uint8_t>;

struct OffloadEncoding {
  std::string graph_backend;
  std::vector<std::size_t> slot_map;  // bit index -> kernel index in the op-level placement

  std::size_t size() const { return slot_map.size(); }

  static OffloadEncoding build(const PatternRegistry& reg, const PlacementStrategy& op_level,
                               const std::string& graph_backend) {
    if (!reg.is_graph_backend(graph_backend))
      throw Error(ErrorCode::kValidation, "backend '" + graph_backend + "' is not a graph inference library");
    OffloadEncoding enc{graph_backend, {}};
    for (std::size_t k = 0; k < op_level.kernels.size(); ++k)
      if (!reg.is_graph_backend(op_level.kernels[k].backend)) enc.slot_map.push_back(k);
    return enc;
  }
};

/// Applies `genome` to the op-level placement. A flipped kernel moves to the
/// graph backend as one kernel when the backend has a pattern matching the
/// same node set, else as singleton kernels. Returns nullopt when the backend
/// cannot take some flipped node or the result is not a valid placement.
inline std::optional<PlacementStrategy> decode(const ComputationGraph& g, const PatternRegistry& reg,
                                               const PlacementStrategy& op_level, const OffloadEncoding& enc,
                                               const Genome& genome) {
  if (genome.size() != enc.size())
    throw Error(ErrorCode::kValidation, "genome length " + std::to_string(genome.size()) + " does not match encoding length " +
                                            std::to_string(enc.size()));
  auto exact_candidate = [&](NodeId root, const NodeSet& nodes) -> std::optional<Assignment> {
    for (const auto& c : reg.candidates_at(g, root))
      if (reg.pattern(c.pattern_index).backend == enc.graph_backend && c.match.nodes == nodes)
        return make_assignment(reg, c);
    return std::nullopt;
  };

  std::vector<bool> flipped(op_level.kernels.size(), false);
  for (std::size_t b = 0; b < genome.size(); ++b) flipped[enc.slot_map[b]] = genome[b] != 0;

  PlacementStrategy out;
  for (std::size_t k = 0; k < op_level.kernels.size(); ++k) {
    const auto& a = op_level.kernels[k];
    if (!flipped[k]) {
      out.kernels.push_back(a);
      continue;
    }
    if (auto whole = exact_candidate(a.root, a.nodes)) {
      out.kernels.push_back(std::move(*whole));
      continue;
    }
    for (auto v : a.nodes) {
      auto single = exact_candidate(v, NodeSet{v});
      if (!single) return std::nullopt;
      out.kernels.push_back(std::move(*single));
    }
  }
  canonicalize(g, out);
  try {
    validate(g, out);
  } catch (const PlacementError&) {
    return std::nullopt;
  }
  return out;
}

/// Graph-level fitness of a genome; infinity when it does not decode.
inline Cost genome_fitness(const ComputationGraph& g, const PatternRegistry& reg, Measurer& m,
                           const PlacementStrategy& op_level, const OffloadEncoding& enc, const Genome& genome,
                           Epsilon eps) {
  auto p = decode(g, reg, op_level, enc, genome);
  if (!p) return Cost::infinity();
  return graphlevel_from_kernel_costs(g, reg, m, *p, kernel_costs(m, g, *p), eps);
}

struct EsResult {
  PlacementStrategy placement;
  Cost cost;
  std::vector<Cost> history;  // best cost after each generation (index 0: initial population)
  Genome best;
  std::size_t evaluations = 0;
  bool budget_exhausted = false;
};

namespace detail {

class EvolutionarySearch {
 public:
  EvolutionarySearch(const ComputationGraph& g, const PatternRegistry& reg, Measurer& m,
                     const PlacementStrategy& op_level, const OffloadEncoding& enc, Epsilon eps, const EsConfig& cfg)
      : g_(g), reg_(reg), m_(m), op_level_(op_level), enc_(enc), eps_(eps), cfg_(cfg), rng_(cfg.seed) {}

  EsResult run() {
    EsResult result;
    const std::size_t len = enc_.size();
    if (len == 0) {
      result.placement = op_level_;
      result.cost = placement_cost_graphlevel(m_, g_, reg_, op_level_, eps_);
      return result;
    }
    const auto start = std::chrono::steady_clock::now();
    const double mutation = cfg_.mutation_rate.value_or(1.0 / static_cast<double>(len));
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution flip(mutation);

    std::vector<Genome> pop;
    pop.push_back(Genome(len, 0));  // op-level placement as seed
    while (pop.size() < cfg_.population) {
      Genome gnm(len);
      for (auto& bit : gnm) bit = coin(rng_) ? 1 : 0;
      pop.push_back(std::move(gnm));
    }
    std::vector<Cost> fit = evaluate(pop);
    Genome best = pop.front();
    Cost best_cost = fit.front();
    auto track = [&] {
      for (std::size_t i = 0; i < pop.size(); ++i)
        if (fit[i] < best_cost) best_cost = fit[i], best = pop[i];
    };
    track();
    result.history.push_back(best_cost);

    for (std::size_t gen = 1; gen <= cfg_.generations; ++gen) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (elapsed.count() > cfg_.time_budget_s) {
        result.budget_exhausted = true;
        break;
      }
      std::vector<std::size_t> order(pop.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fit[a] < fit[b]; });

      std::vector<Genome> next;
      for (std::size_t e = 0; e < cfg_.elitism; ++e) next.push_back(pop[order[e]]);
      while (next.size() < cfg_.population) {
        Genome a = pop[select(fit)];
        Genome b = pop[select(fit)];
        crossover(a, b);
        for (auto* child : {&a, &b}) {
          for (auto& bit : *child)
            if (flip(rng_)) bit ^= 1;
        }
        next.push_back(std::move(a));
        if (next.size() < cfg_.population) next.push_back(std::move(b));
      }
      pop = std::move(next);
      fit = evaluate(pop);
      track();
      result.history.push_back(best_cost);
    }

    result.best = best;
    result.cost = best_cost;
    result.evaluations = memo_.size();
    auto decoded = decode(g_, reg_, op_level_, enc_, best);
    if (!decoded) throw Error(ErrorCode::kInvariant, "best genome does not decode");
    result.placement = std::move(*decoded);
    return result;
  }

 private:
  std::vector<Cost> evaluate(const std::vector<Genome>& pop) {
    std::vector<Cost> out;
    out.reserve(pop.size());
    for (const auto& gnm : pop) {
      auto it = memo_.find(gnm);
      if (it == memo_.end())
        it = memo_.emplace(gnm, genome_fitness(g_, reg_, m_, op_level_, enc_, gnm, eps_)).first;
      out.push_back(it->second);
    }
    return out;
  }

  std::size_t select(const std::vector<Cost>& fit) {
    std::uniform_int_distribution<std::size_t> pick(0, fit.size() - 1);
    std::size_t winner = pick(rng_);
    for (std::size_t t = 1; t < cfg_.tournament; ++t) {
      auto c = pick(rng_);
      if (fit[c] < fit[winner] || (fit[c] == fit[winner] && c < winner)) winner = c;
    }
    return winner;
  }

  // Two-point crossover: swap the segment [lo, hi).
  void crossover(Genome& a, Genome& b) {
    if (a.size() < 2) return;
    std::uniform_int_distribution<std::size_t> cut(0, a.size());
    auto lo = cut(rng_), hi = cut(rng_);
    if (lo > hi) std::swap(lo, hi);
    for (auto i = lo; i < hi; ++i) std::swap(a[i], b[i]);
  }

  const ComputationGraph& g_;
  const PatternRegistry& reg_;
  Measurer& m_;
  const PlacementStrategy& op_level_;
  const OffloadEncoding& enc_;
  Epsilon eps_;
  const EsConfig& cfg_;
  std::mt19937_64 rng_;
  std::map<Genome, Cost> memo_;
};

}  // namespace detail

/// Graph-level fine-tuning of an op-level placement by evolutionary search
/// over offload genomes (tournament selection, two-point crossover, per-bit
/// mutation, elitism). Fitness is the graph-level cost; the all-zero genome
/// seeds the population, so the result is never worse than the input.
inline EsResult search(const ComputationGraph& g, const PatternRegistry& reg, Measurer& m,
                       const PlacementStrategy& op_level, const std::string& graph_backend, Epsilon eps,
                       const EsConfig& cfg = {}) {
  cfg.validate();
  validate(g, op_level);
  const auto enc = OffloadEncoding::build(reg, op_level, graph_backend);
  return detail::EvolutionarySearch(g, reg, m, op_level, enc, eps, cfg).run();
}

}  // namespace collage
