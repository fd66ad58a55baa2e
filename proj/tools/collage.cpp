// collage: backend placement for tensor computation graphs.
//
//   collage optimize <graph> <backends> [--level op|graph] [--out dir] ...
//   collage ablate <graph> <backends> [--out file.csv]
//   collage gen-patterns <graph> <rules> [--out file]
//   collage verify <graph> <backends> [--max-nodes n]
//
// Errors are printed to stdout as one JSON object. Exit codes: 0 ok,
// 1 infeasible, 2 usage or configuration error, 3 invariant violation.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "collage/collage.hpp"

namespace fs = std::filesystem;
using namespace collage;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInvariant = 3;

struct CliFailure {
  int exit_code;
  Json body;
};

[[noreturn]] void fail(int code, const std::string& error, const std::string& message, Json extra = Json::object()) {
  Json body;
  body["error"] = error;
  body["message"] = message;
  for (auto& [k, v] : extra.items()) body[k] = v;
  throw CliFailure{code, std::move(body)};
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInfeasible: return kExitInfeasible;
    case ErrorCode::kInvariant: return kExitInvariant;
    default: return kExitUsage;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(kExitUsage, "io_error", "cannot write '" + path.string() + "'");
  out << text;
}

ComputationGraph read_graph(const std::string& path) {
  if (!fs::exists(path)) fail(kExitUsage, "graph_not_found", "graph file '" + path + "' does not exist", {{"path", path}});
  return load_graph(read_file(path));
}

BackendsConfig read_config(const std::string& path) {
  if (!fs::exists(path))
    fail(kExitUsage, "config_not_found", "backend config '" + path + "' does not exist", {{"path", path}});
  return load_config(path);
}

void print_warnings(const std::vector<std::string>& warnings, const std::string& prefix) {
  for (const auto& w : warnings) std::cerr << "warning: " << prefix << w << "\n";
}

std::string pick_graph_backend(const PatternRegistry& reg, const std::string& requested) {
  if (!requested.empty()) {
    if (!reg.has_backend(requested)) fail(kExitUsage, "not_found", "unknown backend '" + requested + "'");
    if (!reg.is_graph_backend(requested))
      fail(kExitUsage, "validation_error", "backend '" + requested + "' is not a graph inference library");
    return requested;
  }
  for (const auto& b : reg.backends())
    if (b.kind == BackendKind::kGraphInferenceLibrary) return b.id;
  return {};
}

Json stats_to_json(const DpStats& s) {
  return {{"nodes", s.nodes},
          {"frontiers", s.frontiers},
          {"matches", s.matches},
          {"avg_matches_per_frontier", s.avg_matches_per_frontier},
          {"max_new_frontiers", s.max_new_frontiers},
          {"max_compatible_states", s.max_compatible_states},
          {"relaxations", s.relaxations},
          {"improvements", s.improvements},
          {"states", s.states},
          {"measurer_calls", s.measurer_calls},
          {"cache_hits", s.cache_hits},
          {"profile_computations", s.profile_computations}};
}

std::string ms_text(Cost c) { return c.is_infinite() ? "inf" : format_ms(c); }

// ---------------------------------------------------------------------------

struct OptimizeArgs {
  std::string graph, config, level = "op", cache, out = ".", graph_backend;
  std::optional<double> epsilon;
  std::uint64_t seed = 42;
  std::size_t es_pop = 32, es_gens = 200, max_states = 50000;
  double es_budget_s = 60.0;
};

int cmd_optimize(const OptimizeArgs& a) {
  const auto started = std::chrono::steady_clock::now();
  auto g = read_graph(a.graph);
  auto cfg = read_config(a.config);
  auto setup = build_setup(cfg, g, a.epsilon);
  print_warnings(setup.warnings, "");
  if (!a.cache.empty()) print_warnings(setup.measurer.cache().load_file(a.cache), a.cache + ": ");

  std::string graph_backend;
  if (a.level == "graph") {
    graph_backend = pick_graph_backend(setup.registry, a.graph_backend);
    if (graph_backend.empty())
      fail(kExitUsage, "validation_error", "--level graph needs a graph_inference_library backend");
  }

  auto dp = optimize(g, setup.registry, setup.measurer, setup.epsilon, DpOptions{a.max_states, false});
  PlacementStrategy placement = dp.placement;
  std::optional<EsResult> es;
  if (a.level == "graph") {
    EsConfig es_cfg;
    es_cfg.population = a.es_pop;
    es_cfg.generations = a.es_gens;
    es_cfg.seed = a.seed;
    es_cfg.time_budget_s = a.es_budget_s;
    es = search(g, setup.registry, setup.measurer, dp.placement, graph_backend, setup.epsilon, es_cfg);
    placement = es->placement;
  }
  validate(g, placement);
  const auto counters = setup.measurer.counters();
  const auto report = make_report(setup.measurer, g, setup.registry, placement, setup.epsilon, a.level == "graph");

  fs::create_directories(a.out);
  const fs::path out = a.out;
  write_text(out / "placement.json", save_placement(placement));
  write_text(out / "report.txt", report_to_text(report));
  write_text(out / "report.json", report_to_json(report).dump(2) + "\n");

  Json stats;
  stats["level"] = a.level;
  stats["epsilon_ms"] = setup.epsilon.ms();
  stats["dp"] = stats_to_json(dp.stats);
  stats["dp"]["cost_ms"] = dp.cost.ms();
  if (es) {
    stats["es"] = {{"graph_backend", graph_backend},
                   {"seed", a.seed},
                   {"population", a.es_pop},
                   {"generations", es->history.empty() ? 0 : es->history.size() - 1},
                   {"evaluations", es->evaluations},
                   {"budget_exhausted", es->budget_exhausted},
                   {"cost_ms", es->cost.ms()}};
    std::string csv = "generation,best_cost_ms\n";
    for (std::size_t i = 0; i < es->history.size(); ++i) csv += std::to_string(i) + "," + ms_text(es->history[i]) + "\n";
    write_text(out / "es_history.csv", csv);
  }
  stats["measurer"] = {{"calls", counters.calls}, {"cache_hits", counters.cache_hits}, {"computations", counters.computations}};
  stats["warnings"] = setup.warnings;
  stats["elapsed_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  write_text(out / "stats.json", stats.dump(2) + "\n");

  if (!a.cache.empty()) setup.measurer.cache().save_file(a.cache);

  std::cout << "kernels: " << placement.kernels.size() << "\n";
  std::cout << "additive cost: " << format_ms(report.additive) << " ms\n";
  if (report.graphlevel) std::cout << "graph-level cost: " << format_ms(*report.graphlevel) << " ms\n";
  std::cout << "profile computations: " << counters.computations << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string graph, config, out;
  std::optional<double> epsilon;
};

int cmd_ablate(const AblateArgs& a) {
  auto g = read_graph(a.graph);
  auto cfg = read_config(a.config);
  auto setup = build_setup(cfg, g, a.epsilon);
  print_warnings(setup.warnings, "");

  std::string csv = "backends,cost_ms,status\n";
  std::vector<std::string> ids;
  std::optional<Cost> previous;
  int violations = 0;
  for (const auto& b : setup.registry.backends()) {
    ids.push_back(b.id);
    std::string name;
    for (const auto& id : ids) name += (name.empty() ? "" : "+") + id;
    const auto reg = setup.registry.restricted_to(ids);
    std::string cost = "", status = "ok";
    try {
      auto r = optimize(g, reg, setup.measurer, setup.epsilon);
      cost = format_ms(r.cost);
      if (previous && *previous < r.cost) status = "violation";
      previous = r.cost;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInfeasible) throw;
      status = previous ? "violation" : "infeasible";
    }
    if (status == "violation") ++violations;
    csv += name + "," + cost + "," + status + "\n";
  }
  if (a.out.empty())
    std::cout << csv;
  else
    write_text(a.out, csv);
  if (violations) fail(kExitInvariant, "invariant_violation", "ablation cost increased when adding a backend",
                       {{"violations", violations}});
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string graph, rules, out;
};

int cmd_gen_patterns(const GenArgs& a) {
  auto g = read_graph(a.graph);
  if (!fs::exists(a.rules)) fail(kExitUsage, "rules_not_found", "rule file '" + a.rules + "' does not exist", {{"path", a.rules}});
  auto rule = load_rule(read_file(a.rules));
  std::string text;
  for (const auto& gp : generate_patterns(rule, g)) text += gp.pattern.text() + "  # " + gp.provenance() + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text(a.out, text);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string graph, config, cache, graph_backend;
  std::optional<double> epsilon;
  std::size_t max_nodes = 12;
  std::uint64_t seed = 42;
  std::size_t es_pop = 32, es_gens = 200;
};

int cmd_verify(const VerifyArgs& a) {
  auto g = read_graph(a.graph);
  auto cfg = read_config(a.config);
  oracle::Limits limits;
  limits.max_nodes = a.max_nodes;
  oracle::check_size(g, limits);
  auto setup = build_setup(cfg, g, a.epsilon);
  if (!a.cache.empty()) print_warnings(setup.measurer.cache().load_file(a.cache), a.cache + ": ");

  // The oracle side always recomputes from profiles.
  SimMeasurer fresh;
  for (const auto& b : cfg.backends) fresh.add_profile(b.profile);

  std::vector<std::string> failures;
  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    if (!ok) failures.push_back(name);
  };

  auto dp = optimize(g, setup.registry, setup.measurer, setup.epsilon);
  auto best = oracle::optimal_placement(g, setup.registry, fresh, setup.epsilon, limits);
  const auto dp_fresh = placement_cost_additive(fresh, g, dp.placement, setup.epsilon);
  check("dp-vs-oracle", best && dp.cost == best->cost && dp_fresh == best->cost,
        "dp " + ms_text(dp.cost) + " ms (re-measured " + ms_text(dp_fresh) + " ms), oracle " +
            (best ? ms_text(best->cost) : std::string("none")) + " ms over " +
            std::to_string(best ? best->placements : 0) + " placements");

  const auto graph_backend = pick_graph_backend(setup.registry, a.graph_backend);
  if (graph_backend.empty()) {
    std::cout << "SKIP es-vs-enumeration: no graph inference backend\n";
  } else {
    const auto enc = OffloadEncoding::build(setup.registry, best->placement, graph_backend);
    if (enc.size() > limits.max_genome_bits) {
      std::cout << "SKIP es-vs-enumeration: " << enc.size() << " eligible kernels exceed the enumeration cap\n";
    } else {
      EsConfig es_cfg;
      es_cfg.population = a.es_pop;
      es_cfg.generations = a.es_gens;
      es_cfg.seed = a.seed;
      auto es = search(g, setup.registry, fresh, best->placement, graph_backend, setup.epsilon, es_cfg);
      auto opt = oracle::best_genome(g, setup.registry, fresh, best->placement, enc, setup.epsilon, limits);
      const auto seed_cost = placement_cost_graphlevel(fresh, g, setup.registry, best->placement, setup.epsilon);
      check("es-vs-enumeration", es.cost == opt.cost && es.cost <= seed_cost,
            "es " + ms_text(es.cost) + " ms, exhaustive " + ms_text(opt.cost) + " ms over " +
                std::to_string(opt.evaluated) + " genomes, seed " + ms_text(seed_cost) + " ms");
    }
  }

  for (const auto& b : cfg.backends) {
    for (const auto& rule : b.rules) {
      const auto grown = grow_fusion_groups(rule, g);
      const std::set<NodeSet> generated(grown.begin(), grown.end());
      const auto expected = oracle::enumerate_fusion_groups(rule, g, limits);
      std::string diff;
      for (const auto& s : generated)
        if (!expected.count(s)) diff += " extra " + to_string(s);
      for (const auto& s : expected)
        if (!generated.count(s)) diff += " missing " + to_string(s);
      check("pattern-gen[" + b.descriptor.id + "]", diff.empty(),
            std::to_string(generated.size()) + " groups" + (diff.empty() ? "" : ";" + diff));
    }
  }

  if (!failures.empty()) {
    Json names = failures;
    fail(kExitInvariant, "verification_failed", std::to_string(failures.size()) + " check(s) failed", {{"failed", names}});
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backend placement optimizer for tensor computation graphs"};
  app.require_subcommand(1);

  OptimizeArgs opt;
  auto* optimize_cmd = app.add_subcommand("optimize", "Place every operator on a backend and write the result");
  optimize_cmd->add_option("graph", opt.graph, "Graph file (collage-graph/1)")->required();
  optimize_cmd->add_option("backends", opt.config, "Backend config (collage-backends/1)")->required();
  optimize_cmd->add_option("--level", opt.level, "op: DP only; graph: DP then evolutionary search")
      ->check(CLI::IsMember({"op", "graph"}));
  optimize_cmd->add_option("--epsilon", opt.epsilon, "Per-kernel context switch cost in ms (overrides config)");
  optimize_cmd->add_option("--cache", opt.cache, "Cost cache (JSONL); loaded if present, new records appended");
  optimize_cmd->add_option("--seed", opt.seed, "Search seed");
  optimize_cmd->add_option("--es-pop", opt.es_pop, "Search population size");
  optimize_cmd->add_option("--es-gens", opt.es_gens, "Search generations");
  optimize_cmd->add_option("--es-budget-s", opt.es_budget_s, "Search time budget in seconds");
  optimize_cmd->add_option("--graph-backend", opt.graph_backend, "Graph inference backend used by the search");
  optimize_cmd->add_option("--max-states", opt.max_states, "DP state cap");
  optimize_cmd->add_option("--out", opt.out,
                           "Output directory: placement.json, report.txt, report.json, stats.json, es_history.csv");

  AblateArgs abl;
  auto* ablate_cmd = app.add_subcommand("ablate", "Optimize with each prefix of the backend list; CSV output");
  ablate_cmd->add_option("graph", abl.graph, "Graph file")->required();
  ablate_cmd->add_option("backends", abl.config, "Backend config")->required();
  ablate_cmd->add_option("--epsilon", abl.epsilon, "Per-kernel context switch cost in ms");
  ablate_cmd->add_option("--out", abl.out, "CSV file (default: stdout)");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-patterns", "Generate the fusion patterns a rule admits on a graph");
  gen_cmd->add_option("graph", gen.graph, "Graph file")->required();
  gen_cmd->add_option("rules", gen.rules, "Rule file (collage-rules/1)")->required();
  gen_cmd->add_option("--out", gen.out, "Pattern file (default: stdout)");

  VerifyArgs ver;
  auto* verify_cmd = app.add_subcommand("verify", "Check DP, search and pattern generation against brute force");
  verify_cmd->add_option("graph", ver.graph, "Graph file")->required();
  verify_cmd->add_option("backends", ver.config, "Backend config")->required();
  verify_cmd->add_option("--max-nodes", ver.max_nodes, "Oracle size cap");
  verify_cmd->add_option("--epsilon", ver.epsilon, "Per-kernel context switch cost in ms");
  verify_cmd->add_option("--cache", ver.cache, "Cost cache used by the DP side only");
  verify_cmd->add_option("--graph-backend", ver.graph_backend, "Graph inference backend used by the search");
  verify_cmd->add_option("--seed", ver.seed, "Search seed");
  verify_cmd->add_option("--es-pop", ver.es_pop, "Search population size");
  verify_cmd->add_option("--es-gens", ver.es_gens, "Search generations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    Json body{{"error", "usage_error"}, {"message", e.what()}};
    std::cout << body.dump() << "\n";
    return kExitUsage;
  }

  try {
    if (*optimize_cmd) return cmd_optimize(opt);
    if (*ablate_cmd) return cmd_ablate(abl);
    if (*gen_cmd) return cmd_gen_patterns(gen);
    if (*verify_cmd) return cmd_verify(ver);
  } catch (const CliFailure& f) {
    std::cout << f.body.dump() << "\n";
    return f.exit_code;
  } catch (const Error& e) {
    Json body{{"error", to_string(e.code())}, {"message", e.what()}};
    if (!e.nodes().empty()) body["nodes"] = e.nodes();
    if (const auto* pe = dynamic_cast<const PlacementError*>(&e)) body["violation"] = to_string(pe->violation());
    std::cout << body.dump() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    Json body{{"error", "invariant_violation"}, {"message", e.what()}};
    std::cout << body.dump() << "\n";
    return kExitInvariant;
  }
  return kExitUsage;
}
