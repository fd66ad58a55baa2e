// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/brute_match.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace collage;
using namespace collage::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome dp_optimality() {
  constexpr int kCases = 200;
  constexpr double kMaxSeconds = 60.0;
  Rng rng(20240601);
  const auto t0 = Clock::now();
  int equal = 0;
  std::string first_bad;
  for (int t = 0; t < kCases; ++t) {
    auto inst = random_instance(rng);
    auto best = oracle::optimal_placement(inst.graph, inst.registry, inst.measurer, Epsilon());
    auto r = optimize(inst.graph, inst.registry, inst.measurer, Epsilon());
    if (best && r.cost == best->cost) {
      ++equal;
    } else if (first_bad.empty()) {
      first_bad = " first mismatch at case " + std::to_string(t);
    }
  }
  const double secs = seconds_since(t0);
  return {equal == kCases && secs < kMaxSeconds,
          std::to_string(equal) + "/" + std::to_string(kCases) + " random DAGs equal to exhaustive optimum (tol 0 ticks), " +
              fmt("%.2f", secs) + " s (limit 60 s)" + first_bad};
}

Outcome pattern_gen_completeness() {
  constexpr int kCases = 100;
  Rng rng(77001);
  int equal = 0;
  for (int t = 0; t < kCases; ++t) {
    auto g = random_graph(rng);
    auto rule = random_rule(rng);
    auto grown = grow_fusion_groups(rule, g);
    if (std::set<NodeSet>(grown.begin(), grown.end()) == oracle::enumerate_fusion_groups(rule, g)) ++equal;
  }
  auto rule = load_rule(read_file(fixture("rules/listing1.json")));
  std::vector<std::string> texts;
  for (const auto& gp : generate_patterns(rule, fixture_graph("chain3"))) texts.push_back(gp.pattern.text());
  const std::vector<std::string> chain{
      R"(conv2d(*, *){data_layout="NCHW"})",
      R"(add(conv2d(*, *){data_layout="NCHW"}, *))",
      R"(relu(add(conv2d(*, *){data_layout="NCHW"}, *)))",
      "add(*, *)",
      "relu(*)",
  };
  const bool chain_ok = texts == chain;
  return {equal == kCases && chain_ok, std::to_string(equal) + "/" + std::to_string(kCases) +
                                           " random rule/graph pairs equal to enumeration; chain growth sequence " +
                                           (chain_ok ? "matches" : "differs")};
}

Outcome matcher_agreement() {
  constexpr int kCases = 200;
  Rng rng(31337);
  int equal = 0;
  std::size_t matches = 0;
  for (int t = 0; t < kCases; ++t) {
    auto g = random_graph(rng);
    auto p = random_pattern_for(rng, g);
    auto got = match_all(g, p);
    matches += got.size();
    if (got == brute_match_all(g, p)) ++equal;
  }
  return {equal == kCases, std::to_string(equal) + "/" + std::to_string(kCases) +
                               " random pattern/graph pairs equal to injective assignment search (" +
                               std::to_string(matches) + " matches)"};
}

Outcome es_contract() {
  constexpr int kFixtures = 100;
  constexpr int kRequired = 95;
  constexpr std::size_t kMaxBits = 12;
  Rng rng(424242);
  int fixtures = 0, optimal = 0, seed_ok = 0, flat_ok = 0;
  while (fixtures < kFixtures) {
    auto inst = random_instance(rng);
    const auto& gb = inst.registry.backends().back();
    if (gb.kind != BackendKind::kGraphInferenceLibrary) continue;
    auto dp = optimize(inst.graph, inst.registry, inst.measurer, Epsilon());
    auto enc = OffloadEncoding::build(inst.registry, dp.placement, gb.id);
    if (enc.size() == 0 || enc.size() > kMaxBits) continue;
    ++fixtures;

    EsConfig cfg;  // pop 32, 200 generations, seed 42
    auto es = search(inst.graph, inst.registry, inst.measurer, dp.placement, gb.id, Epsilon(), cfg);
    const auto seed_cost = placement_cost_graphlevel(inst.measurer, inst.graph, inst.registry, dp.placement, Epsilon());
    if (es.cost <= seed_cost) ++seed_ok;
    auto best = oracle::best_genome(inst.graph, inst.registry, inst.measurer, dp.placement, enc, Epsilon());
    if (es.cost == best.cost) ++optimal;

    auto flat_profile_copy = inst.measurer.profile(gb.id);
    flat_profile_copy.region.alpha = 0.0;
    SimMeasurer flat = inst.measurer;
    flat.add_profile(flat_profile_copy);
    auto es_flat = search(inst.graph, inst.registry, flat, dp.placement, gb.id, Epsilon(), cfg);
    if (es_flat.cost == dp.cost) ++flat_ok;
  }
  const bool pass = seed_ok == kFixtures && optimal >= kRequired && flat_ok == kFixtures;
  return {pass, "(a) never worse than seed " + std::to_string(seed_ok) + "/" + std::to_string(kFixtures) +
                    "; (b) exhaustive optimum reached " + std::to_string(optimal) + "/" + std::to_string(kFixtures) +
                    " (need >= 95, genomes <= 12 bits); (c) alpha=0 equals DP " + std::to_string(flat_ok) + "/" +
                    std::to_string(kFixtures)};
}

// Returns the number of prefix steps checked, or -1 on a violation.
int check_ablation(const ComputationGraph& g, const PatternRegistry& reg, SimMeasurer& m, Epsilon eps) {
  std::vector<std::string> ids;
  std::optional<Cost> prev;
  int steps = 0;
  for (const auto& b : reg.backends()) {
    ids.push_back(b.id);
    try {
      auto r = optimize(g, reg.restricted_to(ids), m, eps);
      if (prev && r.cost > *prev) return -1;
      prev = r.cost;
      ++steps;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInfeasible || prev) return -1;
    }
  }
  return steps;
}

Outcome monotone_ablation() {
  int pairs = 0, steps = 0, bad = 0;
  for (const auto& entry : fs::directory_iterator(fixture("configs"))) {
    const auto cfg = load_config(entry.path());
    for (const auto& gentry : fs::directory_iterator(fixture("graphs"))) {
      auto g = load_graph(read_file(gentry.path()));
      auto s = build_setup(cfg, g);
      const int n = check_ablation(g, s.registry, s.measurer, s.epsilon);
      ++pairs;
      if (n < 0) ++bad;
      else steps += n;
    }
  }
  Rng rng(9090);
  for (int t = 0; t < 100; ++t) {
    auto inst = random_instance(rng);
    const int n = check_ablation(inst.graph, inst.registry, inst.measurer, Epsilon());
    ++pairs;
    if (n < 0) ++bad;
    else steps += n;
  }
  return {bad == 0, std::to_string(pairs - bad) + "/" + std::to_string(pairs) +
                        " graph/config pairs non-increasing over backend prefixes (" + std::to_string(steps) +
                        " feasible prefixes)"};
}

Outcome complexity() {
  constexpr double kLinearSlack = 2.0;
  constexpr double kMaxWarmSeconds = 10.0;
  const auto cfg = load_config(fixture("configs/three.json"));
  std::vector<double> calls_per_node, relax_per_node;
  double warm_secs = 0.0;
  std::size_t warm_computations = 0;
  std::string table;
  for (std::size_t n : {50, 100, 200, 400}) {
    auto g = chain_graph(n);
    auto s = build_setup(cfg, g);
    auto cold = optimize(g, s.registry, s.measurer, s.epsilon);
    calls_per_node.push_back(static_cast<double>(cold.stats.measurer_calls) / static_cast<double>(n));
    relax_per_node.push_back(static_cast<double>(cold.stats.relaxations) / static_cast<double>(n));
    table += " N=" + std::to_string(n) + ":" + std::to_string(cold.stats.measurer_calls) + "/" +
             std::to_string(cold.stats.relaxations);
    if (n == 400) {
      s.measurer.reset_counters();
      const auto t0 = Clock::now();
      auto warm = optimize(g, s.registry, s.measurer, s.epsilon);
      warm_secs = seconds_since(t0);
      warm_computations = s.measurer.counters().computations;
      if (warm.cost != cold.cost) warm_computations = ~std::size_t{0};
    }
  }
  auto within = [&](const std::vector<double>& xs) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    return *hi <= kLinearSlack * *lo;
  };
  const bool pass = within(calls_per_node) && within(relax_per_node) && warm_secs < kMaxWarmSeconds && warm_computations == 0;
  return {pass, "measurer calls/relaxations" + table + " (per-node spread <= 2x); warm N=400 " + fmt("%.3f", warm_secs) +
                    " s (limit 10 s), " + std::to_string(warm_computations) + " computations"};
}

Outcome cache_reuse() {
  const auto dir = fs::temp_directory_path() / ("collage_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  int ok = 0, total = 0;
  for (const auto& [gname, cname] : std::vector<std::pair<std::string, std::string>>{
           {"chain3", "chain_two"}, {"six", "six_es"}, {"resblock", "three"}, {"diamond", "three"}}) {
    ++total;
    const auto path = (dir / (gname + ".jsonl")).string();
    auto g = fixture_graph(gname);
    auto cold = fixture_setup(gname, cname);
    auto first = optimize(g, cold.registry, cold.measurer, cold.epsilon);
    cold.measurer.cache().save_file(path);

    auto warm = fixture_setup(gname, cname);
    const auto warnings = warm.measurer.cache().load_file(path);
    auto second = optimize(g, warm.registry, warm.measurer, warm.epsilon);
    if (warnings.empty() && warm.measurer.counters().computations == 0 &&
        save_placement(first.placement) == save_placement(second.placement))
      ++ok;
  }
  fs::remove_all(dir);
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                           " fixtures: second run has 0 profile computations and byte-identical placement"};
}

template <class F>
bool throws_structured(F&& f, ErrorCode expected) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == expected && std::string(e.what()).size() > 0;
  }
  return false;
}

Outcome format_round_trips() {
  Rng rng(6060);
  int ok = 0, total = 0;
  auto check = [&](bool cond) {
    ++total;
    ok += cond ? 1 : 0;
  };
  for (int t = 0; t < 50; ++t) {
    auto inst = random_instance(rng);
    const auto gtext = save_graph(inst.graph);
    auto g2 = load_graph(gtext);
    check(g2 == inst.graph && save_graph(g2) == gtext);

    auto r = optimize(inst.graph, inst.registry, inst.measurer, Epsilon());
    const auto ptext = save_placement(r.placement);
    check(load_placement(ptext) == r.placement && save_placement(load_placement(ptext)) == ptext);

    auto pat = random_pattern_for(rng, inst.graph);
    check(parse_pattern(pat.text()) == pat && parse_pattern(pat.text()).text() == pat.text());

    auto rule = random_rule(rng);
    const auto rtext = save_rule(rule);
    check(save_rule(load_rule(rtext)) == rtext);

    std::stringstream log;
    inst.measurer.cache().append_to(log);
    CostCache back;
    const auto warnings = back.load(log);
    check(warnings.empty() && back.records() == inst.measurer.cache().records());
  }

  // Corrupt inputs surface as structured errors.
  check(throws_structured([] { load_graph("{\"version\":\"collage-graph/1\""); }, ErrorCode::kParse));
  check(throws_structured(
      [] {
        load_graph(R"({"version":"collage-graph/1","inputs":[],"nodes":[
          {"id":1,"op":"relu","inputs":[2],"shape":[1]},{"id":2,"op":"relu","inputs":[1],"shape":[1]}],"outputs":[2]})");
      },
      ErrorCode::kValidation));
  check(throws_structured([] { load_placement(R"({"version":"collage-placement/9","kernels":[]})"); }, ErrorCode::kParse));
  check(throws_structured([] { parse_pattern("relu(add(*, *)"); }, ErrorCode::kParse));
  check(throws_structured([] { load_rule(R"({"version":"collage-rules/1","backend":"b","ops":[{"op":"relu","class":"kNope"}]})"); },
                          ErrorCode::kValidation));
  std::stringstream bad("{\"key\":{\"backend\":\"a\",\"fingerprint\":\"f\"},\"cost_ms\":1.0}\nnot json\n");
  CostCache c;
  const auto warnings = c.load(bad);
  check(warnings.size() == 1 && warnings[0].rfind("line 2:", 0) == 0 && c.size() == 1);

  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                           " round-trip and corrupt-input checks (graph, placement, pattern, rule, cost cache)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"dp-optimality", dp_optimality},
      {"pattern-gen-completeness", pattern_gen_completeness},
      {"matcher-agreement", matcher_agreement},
      {"es-contract", es_contract},
      {"monotone-ablation", monotone_ablation},
      {"complexity", complexity},
      {"cache-reuse", cache_reuse},
      {"format-round-trips", format_round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, run] = criteria[i];
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %zu %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
